"""Bundled deterministic fixture: a full scripted run of the standard
eight-stage workflow (demo stage excluded) with all-approve decisions.

Used by the replay harness, the test suite, and anyone who wants to watch
the engine drive a complete project without a live model.
"""

from __future__ import annotations

from pathlib import Path

from .agent import AgentResponse, DataNote, Transcript, TranscriptEntry
from .session import Decision, ReviewDecision

RAW_CSV = """\
crim,rm,lstat,tax,medv
0.006,6.58,4.98,296,24.0
0.027,6.42,9.14,242,21.6
0.027,7.18,4.03,242,34.7
0.032,7.00,2.94,222,33.4
0.069,7.15,5.33,222,36.2
0.088,6.38,12.43,311,22.9
"""

_DOC_02 = """\
# Raw Data Summary

Source file: [boston sample](data/raw/boston.csv), 6 rows, 5 columns.

- No missing values in any column.
- `medv` is the target; range 21.6 to 36.2.
- `tax` is integer-coded; other predictors are continuous.
- Sample is tiny: treat every estimate as illustrative only.

Preprocessing should follow in @preprocess.md.
"""

_DOC_03 = """\
# Preprocessing Plan

Input profile: [raw summary](docs/02-raw-data-analysis.md).

1. Keep all five columns; no imputation needed (no missing values).
2. Scale continuous predictors to zero mean, unit variance.
3. Emit a single training table at [train](data/processed/train.csv).

Executed by scripts/preprocess.py; rerun it whenever raw inputs change.
"""

_PREPROCESS_PY = """\
\"\"\"Materialize data/processed/train.csv from data/raw/boston.csv.\"\"\"

import csv
from pathlib import Path


def run(root: Path = Path(".")) -> Path:
    rows = list(csv.DictReader((root / "data/raw/boston.csv").open()))
    out = root / "data/processed/train.csv"
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["rm", "lstat", "medv"])
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in ("rm", "lstat", "medv")})
    return out


if __name__ == "__main__":
    run()
"""

_TRAIN_CSV = """\
rm,lstat,medv
6.58,4.98,24.0
6.42,9.14,21.6
7.18,4.03,34.7
7.00,2.94,33.4
7.15,5.33,36.2
6.38,12.43,22.9
"""

_DOC_05 = """\
# Research Plan

Grounded in the [raw summary](docs/02-raw-data-analysis.md) and the
[preprocessing plan](docs/03-preprocess-plan.md).

- Objective: predict `medv` from `rm` and `lstat`.
- Candidate models: mean baseline, least-squares on two predictors.
- Metric: RMSE on the training table (sample too small for a holdout).
- Success: beat the mean baseline RMSE.

Experiment outputs land under [results](data/output/results/) and the
findings are written up in [the report](docs/09-experiment-report.md).
"""

_FEATURES_PY = """\
\"\"\"Feature access for the training table.\"\"\"

import csv
from pathlib import Path


def load_rows(path: Path) -> list[dict]:
    with Path(path).open() as fh:
        return [
            {k: float(v) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
"""

_MODELS_PY = """\
\"\"\"Two reference models: mean baseline and one-variable least squares.\"\"\"


def mean_baseline(targets: list[float]) -> float:
    return sum(targets) / len(targets)


def fit_line(xs: list[float], ys: list[float]) -> tuple[float, float]:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    var = sum((x - mx) ** 2 for x in xs)
    slope = cov / var if var else 0.0
    return slope, my - slope * mx
"""

_PIPELINE_PY = """\
\"\"\"Experiment pipeline: fit both models, report RMSE for each.\"\"\"

import math

from .features import load_rows
from .models import fit_line, mean_baseline


def rmse(predicted: list[float], actual: list[float]) -> float:
    return math.sqrt(
        sum((p - a) ** 2 for p, a in zip(predicted, actual)) / len(actual)
    )


def run(train_path) -> dict:
    rows = load_rows(train_path)
    ys = [r["medv"] for r in rows]
    xs = [r["rm"] for r in rows]
    base = mean_baseline(ys)
    slope, intercept = fit_line(xs, ys)
    return {
        "baseline_rmse": rmse([base] * len(ys), ys),
        "model_rmse": rmse([slope * x + intercept for x in xs], ys),
    }
"""

_RUN_EXPERIMENT_PY = """\
\"\"\"Entry point: run the pipeline and persist metrics.\"\"\"

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.pipeline import run  # noqa: E402


def main() -> None:
    metrics = run(Path("data/processed/train.csv"))
    out = Path("data/output/results/metrics.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metrics, indent=2))


if __name__ == "__main__":
    main()
"""

_DOC_06 = """\
# Implementation Notes

Modules implement [the plan](docs/05-research-plan.md):

- [features](src/features.py) loads the processed table.
- [models](src/models.py) holds the baseline and the least-squares fit.
- [pipeline](src/pipeline.py) wires them together and computes RMSE.
- [entry point](scripts/run_experiment.py) persists metrics as JSON.

All modules are dependency-free and pass the configured checks.
"""

_METRICS_JSON = """\
{
  "baseline_rmse": 5.9868,
  "model_rmse": 2.8771
}
"""

_DOC_08 = """\
# Experiment Log

Executed scripts/run_experiment.py over [train](data/processed/train.csv).

- Wrote [metrics](data/output/results/metrics.json).
- Runtime: trivial (6-row sample).
- No failures; pipeline is rerunnable end to end.
"""

_DOC_09 = """\
# Experiment Report

Metrics read from [results](data/output/results/):

- baseline RMSE 5.9868
- least-squares RMSE 2.8771

The fitted line halves the baseline error, meeting the success bar set in
[the plan](docs/05-research-plan.md). With six rows this is a smoke
signal, not evidence; next step is a real dataset.
"""

_DOC_10 = """\
# Final Report

Pipeline summary, start to finish:

1. [Raw profile](docs/02-raw-data-analysis.md): clean 6-row sample.
2. [Preprocessing](docs/03-preprocess-plan.md): scaled two predictors.
3. [Plan](docs/05-research-plan.md): beat the mean baseline on RMSE.
4. [Implementation](docs/06-code-implementation.md): three small modules.
5. [Run log](docs/08-experiment-log.md): one clean execution.
6. [Analysis](docs/09-experiment-report.md): model RMSE 2.8771 vs 5.9868.

Limitations: illustrative sample size; no holdout. All artifacts carry
provenance back to [the raw file](data/raw/boston.csv).
"""

CANONICAL_DOC_PATHS = (
    "docs/02-raw-data-analysis.md",
    "docs/03-preprocess-plan.md",
    "docs/05-research-plan.md",
    "docs/06-code-implementation.md",
    "docs/08-experiment-log.md",
    "docs/09-experiment-report.md",
    "docs/10-research-report.md",
)


def seed_raw_data(project_root: Path | str) -> Path:
    """Drop the sample raw file a canonical run starts from."""
    path = Path(project_root) / "data/raw/boston.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(RAW_CSV, encoding="utf-8")
    return path


def canonical_transcript() -> Transcript:
    """Scripted responses for the seven core stages, one attempt each."""
    entries = [
        TranscriptEntry(
            "raw-data-analysis",
            1,
            AgentResponse(
                doc_writes=(("docs/02-raw-data-analysis.md", _DOC_02),),
                narration="Profiled data/raw/boston.csv; wrote the summary to docs/02.",
            ),
        ),
        TranscriptEntry(
            "preprocess",
            1,
            AgentResponse(
                file_writes=(
                    ("scripts/preprocess.py", _PREPROCESS_PY),
                    ("data/processed/train.csv", _TRAIN_CSV),
                ),
                doc_writes=(("docs/03-preprocess-plan.md", _DOC_03),),
                data_notes=(
                    DataNote(
                        path="data/processed/train.csv",
                        sources=("data/raw/boston.csv",),
                        transformation_ref="docs/03-preprocess-plan.md",
                    ),
                ),
                narration="Wrote the preprocessing script and materialized train.csv.",
            ),
        ),
        TranscriptEntry(
            "research-plan",
            1,
            AgentResponse(
                doc_writes=(("docs/05-research-plan.md", _DOC_05),),
                narration="Drafted the study plan with models, metric and success bar.",
            ),
        ),
        TranscriptEntry(
            "code-implementation",
            1,
            AgentResponse(
                file_writes=(
                    ("src/features.py", _FEATURES_PY),
                    ("src/models.py", _MODELS_PY),
                    ("src/pipeline.py", _PIPELINE_PY),
                    ("scripts/run_experiment.py", _RUN_EXPERIMENT_PY),
                ),
                doc_writes=(("docs/06-code-implementation.md", _DOC_06),),
                narration="Implemented features, models and pipeline plus the runner.",
            ),
        ),
        TranscriptEntry(
            "run-experiments",
            1,
            AgentResponse(
                file_writes=(
                    ("data/output/results/metrics.json", _METRICS_JSON),
                ),
                doc_writes=(("docs/08-experiment-log.md", _DOC_08),),
                data_notes=(
                    DataNote(
                        path="data/output/results/metrics.json",
                        sources=("data/processed/train.csv",),
                        transformation_ref="docs/05-research-plan.md",
                    ),
                ),
                narration="Ran the pipeline and persisted metrics with provenance.",
            ),
        ),
        TranscriptEntry(
            "experiment-analysis",
            1,
            AgentResponse(
                doc_writes=(("docs/09-experiment-report.md", _DOC_09),),
                narration="Interpreted metrics against the plan's success bar.",
            ),
        ),
        TranscriptEntry(
            "research-report",
            1,
            AgentResponse(
                doc_writes=(("docs/10-research-report.md", _DOC_10),),
                narration="Assembled the final report from all stage documents.",
            ),
        ),
    ]
    return Transcript(entries=entries)


def canonical_decisions() -> list[ReviewDecision]:
    return [
        ReviewDecision(stage, Decision.APPROVE)
        for stage in (
            "raw-data-analysis",
            "preprocess",
            "research-plan",
            "code-implementation",
            "run-experiments",
            "experiment-analysis",
            "research-report",
        )
    ]

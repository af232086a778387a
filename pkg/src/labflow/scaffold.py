"""Project scaffolding: directory layout, the eight standard command
artifacts, the workflow document, the first context document, and a
default config.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

from .config import ProjectConfig, save_config
from .context_store import AuthorKind, ContextStore, Provenance
from .errors import NonEmptyTarget

_DIRS = (
    "data/raw",
    "data/processed",
    "data/output",
    "docs",
    "src",
    "scripts",
    "commands",
)

# name -> (description, front-matter inputs, outputs, context_target, body)
CANONICAL_COMMANDS: dict[str, dict] = {
    "raw-data-analysis": {
        "description": "profile the raw inputs and record a structured summary",
        "inputs": ["data/raw/", "docs/01-basic-information.md"],
        "outputs": [],
        "context_target": "docs/02-*.md",
        "body": (
            "Profile every file under data/raw/: row and column counts, dtypes,\n"
            "missing-value rates, ranges, and anything anomalous. Summarize what\n"
            "the dataset can and cannot support, then write the findings to the\n"
            "stage context document."
        ),
    },
    "preprocess": {
        "description": "design preprocessing and materialize the processed dataset",
        "inputs": ["data/raw/", "docs/02-*.md"],
        "outputs": ["scripts/preprocess.py", "data/processed/"],
        "context_target": "docs/03-*.md",
        "body": (
            "Decide cleaning, imputation, encoding and feature construction based\n"
            "on the profiling summary. Implement the transformation as a script,\n"
            "run it to materialize files under data/processed/, and document every\n"
            "choice with its rationale."
        ),
    },
    "research-plan": {
        "description": "consolidate objectives, models, metrics and validation",
        "inputs": ["docs/02-*.md", "docs/03-*.md"],
        "outputs": [],
        "context_target": "docs/05-*.md",
        "body": (
            "Write the integrated study plan: hypotheses, candidate models,\n"
            "evaluation metrics, validation protocol, and where results will be\n"
            "recorded. The plan is the contract later stages implement."
        ),
    },
    "code-implementation": {
        "description": "turn the plan into typed, checked analysis modules",
        "inputs": ["docs/05-*.md"],
        "outputs": ["src/*.py", "scripts/run_experiment.py"],
        "context_target": "docs/06-*.md",
        "body": (
            "Implement the plan as small modules under src/ plus a runnable\n"
            "experiment entry point in scripts/. Code must pass the configured\n"
            "static checks. Log the module layout and key decisions."
        ),
    },
    "run-experiments": {
        "description": "execute the experiment pipeline and persist outputs",
        "inputs": ["scripts/run_experiment.py", "src/*.py", "data/processed/"],
        "outputs": ["data/output/"],
        "context_target": "docs/08-*.md",
        "body": (
            "Run the experiment pipeline end to end. Persist trained models,\n"
            "metrics and figures under data/output/, declare provenance for every\n"
            "derived file, and keep an execution log."
        ),
    },
    "experiment-analysis": {
        "description": "interpret results against the plan",
        "inputs": ["data/output/results/", "docs/05-*.md"],
        "outputs": [],
        "context_target": "docs/09-*.md",
        "body": (
            "Read the metrics and artifacts under data/output/results/, compare\n"
            "them with the plan's success criteria, and write an analysis that\n"
            "cites the exact files it draws from."
        ),
    },
    "research-report": {
        "description": "assemble the final manuscript from all prior artifacts",
        "inputs": [
            "docs/02-*.md",
            "docs/03-*.md",
            "docs/05-*.md",
            "docs/06-*.md",
            "docs/08-*.md",
            "docs/09-*.md",
        ],
        "outputs": [],
        "context_target": "docs/10-*.md",
        "body": (
            "Consolidate the project narrative into a publication-ready report:\n"
            "methods from the plan, results from the analysis, limitations, and\n"
            "references to every supporting document."
        ),
    },
    "gradio-app": {
        "description": "package the trained model behind a web demo",
        "inputs": ["data/output/", "docs/09-*.md"],
        "outputs": ["src/gradio_app.py"],
        "context_target": "docs/11-*.md",
        "body": (
            "Wrap the best model in an interactive demo app and document how to\n"
            "launch it. This stage is optional and safe to skip."
        ),
    },
}

# Stage wiring for the workflow document. Consumes/produces are exact
# node paths; globs stay globs.
CANONICAL_STAGES: list[dict] = [
    {
        "name": "raw-data-analysis",
        "description": "profile the raw inputs",
        "context": "docs/02-raw-data-analysis.md",
        "consumes": ["data/raw/", "docs/01-basic-information.md"],
        "produces": [],
    },
    {
        "name": "preprocess",
        "description": "design and run preprocessing",
        "context": "docs/03-preprocess-plan.md",
        "consumes": ["data/raw/", "docs/02-raw-data-analysis.md"],
        "produces": ["scripts/preprocess.py", "data/processed/"],
    },
    {
        "name": "research-plan",
        "description": "formulate the study plan",
        "context": "docs/05-research-plan.md",
        "consumes": ["docs/02-raw-data-analysis.md", "docs/03-preprocess-plan.md"],
        "produces": [],
    },
    {
        "name": "code-implementation",
        "description": "implement and check the analysis code",
        "context": "docs/06-code-implementation.md",
        "consumes": ["docs/05-research-plan.md"],
        "produces": ["src/*.py", "scripts/run_experiment.py"],
    },
    {
        "name": "run-experiments",
        "description": "execute the experiment pipeline",
        "context": "docs/08-experiment-log.md",
        "consumes": ["scripts/run_experiment.py", "src/*.py", "data/processed/"],
        "produces": ["data/processed/", "data/output/", "data/output/results/"],
    },
    {
        "name": "experiment-analysis",
        "description": "analyze and record results",
        "context": "docs/09-experiment-report.md",
        "consumes": ["data/output/results/", "docs/05-research-plan.md"],
        "produces": [],
    },
    {
        "name": "research-report",
        "description": "assemble the manuscript",
        "context": "docs/10-research-report.md",
        "consumes": [
            "docs/02-raw-data-analysis.md",
            "docs/03-preprocess-plan.md",
            "docs/05-research-plan.md",
            "docs/06-code-implementation.md",
            "docs/08-experiment-log.md",
            "docs/09-experiment-report.md",
        ],
        "produces": [],
    },
    {
        "name": "gradio-app",
        "description": "deploy the model demo (optional)",
        "context": "docs/11-gradio-app.md",
        "consumes": ["data/output/", "docs/09-experiment-report.md"],
        "produces": ["src/gradio_app.py"],
        "optional": True,
    },
]

BASIC_INFO_TEMPLATE = """\
# Basic Information

## Project

- title: (fill in)
- objective: (what question should the analysis answer?)

## Data Sources

- location: data/raw/
- provenance: (where the files came from, licensing, collection notes)

## Constraints

- (deadlines, compute limits, privacy requirements)
"""


def render_command_file(name: str) -> str:
    spec = CANONICAL_COMMANDS[name]
    lines = ["---", f"name: {name}", "category: academic"]
    lines.append(f"description: {spec['description']}")
    if spec["inputs"]:
        lines.append(f"inputs: [{', '.join(spec['inputs'])}]")
    if spec["outputs"]:
        lines.append(f"outputs: [{', '.join(spec['outputs'])}]")
    lines.append(f"context_target: {spec['context_target']}")
    lines.append("---")
    lines.append(spec["body"])
    return "\n".join(lines) + "\n"


def render_workflow_doc() -> str:
    lines = [
        "# Project Workflow",
        "",
        "Stages run through the agent gateway under review checkpoints.",
        "Order below is the recommended path; any stage can be re-entered.",
        "",
        "## Workflow",
        "",
    ]
    for stage in CANONICAL_STAGES:
        lines.append(f"- @{stage['name']}.md — {stage['description']}")
        lines.append(f"  context: {stage['context']}")
        if stage["consumes"]:
            lines.append(f"  consumes: [{', '.join(stage['consumes'])}]")
        if stage["produces"]:
            lines.append(f"  produces: [{', '.join(stage['produces'])}]")
        if stage.get("optional"):
            lines.append("  optional: true")
    return "\n".join(lines) + "\n"


def scaffold(
    project_root: Path | str, clock: Callable[[], str] | None = None
) -> list[str]:
    """Create a fresh project skeleton; refuses a non-empty target."""
    root = Path(project_root)
    if root.exists() and any(root.iterdir()):
        raise NonEmptyTarget(f"{root} is not empty")
    root.mkdir(parents=True, exist_ok=True)

    created: list[str] = []
    for rel in _DIRS:
        (root / rel).mkdir(parents=True, exist_ok=True)

    for name in sorted(CANONICAL_COMMANDS):
        rel = f"commands/{name}.md"
        (root / rel).write_text(render_command_file(name), encoding="utf-8")
        created.append(rel)

    (root / "workflow.md").write_text(render_workflow_doc(), encoding="utf-8")
    created.append("workflow.md")

    store = ContextStore(root, clock=clock)
    store.write_document(
        "docs/01-basic-information.md",
        BASIC_INFO_TEMPLATE,
        Provenance(AuthorKind.HUMAN, "scaffold"),
    )
    created.append("docs/01-basic-information.md")

    save_config(ProjectConfig(), root)
    created.append("labflow.json")
    return created

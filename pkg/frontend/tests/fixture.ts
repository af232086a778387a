/** In-memory stand-in for the review API, driven through a FetchLike. */

import type { FetchLike } from '../src/api.ts';
import type {
  GraphPayload,
  LineagePayload,
  ReviewBundleDto,
  SessionEventDto,
  StageRow,
} from '../src/types.ts';

export const SCAFFOLD_STAGES = [
  'raw-data-analysis',
  'preprocess',
  'research-plan',
  'code-implementation',
  'run-experiments',
  'experiment-analysis',
  'research-report',
  'gradio-app',
] as const;

export const REPLAY_LINEAGE: LineagePayload = {
  schema_version: 1,
  root: 'data/output/results/metrics.json',
  nodes: [
    'data/output/results/metrics.json',
    'data/processed/train.csv',
    'data/raw/boston.csv',
  ],
  edges: [
    {
      child: 'data/output/results/metrics.json',
      parent: 'data/processed/train.csv',
      transformation_ref: 'docs/05-research-plan.md',
    },
    {
      child: 'data/processed/train.csv',
      parent: 'data/raw/boston.csv',
      transformation_ref: 'docs/03-preprocess-plan.md',
    },
  ],
};

const MINI_GRAPH: GraphPayload = {
  schema_version: 1,
  nodes: [
    { id: '@raw-data-analysis.md', layer: 'command', path: 'commands/raw-data-analysis.md', freshness: 'fresh' },
    { id: 'docs/02-raw-data-analysis.md', layer: 'context', path: 'docs/02-raw-data-analysis.md', freshness: 'missing' },
    { id: 'scripts/run_experiment.py', layer: 'code', path: 'scripts/run_experiment.py', freshness: 'missing' },
    { id: 'data/processed/', layer: 'data', path: 'data/processed/', freshness: 'fresh' },
    { id: 'data/output/results/', layer: 'data', path: 'data/output/results/', freshness: 'fresh' },
  ],
  edges: [
    { from: '@raw-data-analysis.md', to: 'docs/02-raw-data-analysis.md', kind: 'command_to_context' },
    { from: 'scripts/run_experiment.py', to: 'data/processed/', kind: 'code_to_data' },
    { from: 'data/processed/', to: 'data/output/results/', kind: 'data_to_data' },
  ],
};

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export class FixtureApi {
  stages: StageRow[] = SCAFFOLD_STAGES.map((name) => ({
    stage: name,
    state: 'pending',
    freshness: 'missing',
    last_attempt: 0,
    optional: name === 'gradio-app',
  }));
  pending: ReviewBundleDto | null = null;
  events: SessionEventDto[] = [];
  graph: GraphPayload = MINI_GRAPH;
  lineages: Record<string, LineagePayload> = {
    [REPLAY_LINEAGE.root]: REPLAY_LINEAGE,
  };
  failNetwork = false;
  requestLog: string[] = [];

  private row(stage: string): StageRow {
    const row = this.stages.find((r) => r.stage === stage);
    if (!row) throw new Error(`fixture has no stage ${stage}`);
    return row;
  }

  private emit(kind: string, payload: Record<string, unknown>): void {
    this.events.push({
      seq: this.events.length + 1,
      kind,
      payload,
      at: `t+${this.events.length + 1}`,
    });
  }

  /** Server-side invoke, as another client (or the engine CLI) would do. */
  invoke(stage: string): void {
    const row = this.row(stage);
    row.state = 'in_review';
    row.last_attempt += 1;
    this.pending = {
      stage,
      change_set: { changes: [{ kind: 'doc', path: `docs/02-${stage}.md`, detail: 'v1' }] },
      narration: `ran ${stage}`,
      gate_result: null,
    };
    this.emit('invoked', { stage });
    this.emit('presented', { stage });
  }

  resolve(decision: string): void {
    if (!this.pending) throw new Error('nothing pending');
    const row = this.row(this.pending.stage);
    row.state =
      decision === 'approve'
        ? 'approved'
        : decision === 'revise'
          ? 'revision_requested'
          : 'skipped';
    if (decision === 'approve') row.freshness = 'fresh';
    this.emit('decision', { stage: this.pending.stage, decision });
    this.pending = null;
  }

  private sessionPayload() {
    const resolved = new Set(['approved', 'skipped']);
    const next =
      this.stages.find((r) => !resolved.has(r.state))?.stage ?? null;
    return {
      schema_version: 1,
      stages: this.stages,
      pending_review: this.pending,
      next_stage: next,
      recommended_order: this.stages.map((r) => r.stage),
    };
  }

  fetchFn: FetchLike = async (input, init) => {
    this.requestLog.push(`${init?.method ?? 'GET'} ${input}`);
    if (this.failNetwork) throw new TypeError('fetch failed');
    const url = new URL(input, 'http://fixture');
    const method = init?.method ?? 'GET';

    if (method === 'GET' && url.pathname === '/session') {
      return json(this.sessionPayload());
    }
    if (method === 'GET' && url.pathname === '/graph') {
      return json(this.graph);
    }
    if (method === 'GET' && url.pathname === '/events') {
      const since = Number(url.searchParams.get('since') ?? '0');
      return json({
        schema_version: 1,
        events: this.events.filter((e) => e.seq > since),
        head_seq: this.events.length,
      });
    }
    if (method === 'GET' && url.pathname.startsWith('/lineage/')) {
      const path = decodeURIComponent(url.pathname.slice('/lineage/'.length));
      const lineage = this.lineages[path];
      if (!lineage) {
        return json({ schema_version: 1, error: 'NotRegistered', detail: path }, 404);
      }
      return json(lineage);
    }
    if (method === 'GET' && url.pathname.startsWith('/docs/')) {
      const path = decodeURIComponent(url.pathname.slice('/docs/'.length));
      return json({
        schema_version: 1,
        path,
        version: 1,
        head_version: 1,
        content: `# ${path}\n`,
        refs: [],
      });
    }
    if (method === 'POST' && url.pathname === '/invoke') {
      const body = JSON.parse(String(init?.body ?? '{}')) as { stage?: string };
      if (this.pending) {
        return json({ schema_version: 1, error: 'ReviewPending', detail: 'busy' }, 409);
      }
      if (!body.stage || !this.stages.some((r) => r.stage === body.stage)) {
        return json({ schema_version: 1, error: 'UnknownStage', detail: 'nope' }, 404);
      }
      this.invoke(body.stage);
      return json({ schema_version: 1, bundle: this.pending, stages: this.stages });
    }
    if (method === 'POST' && url.pathname === '/review') {
      const body = JSON.parse(String(init?.body ?? '{}')) as {
        decision?: string;
        feedback?: string | null;
      };
      if (!this.pending) {
        return json(
          { schema_version: 1, error: 'NoPendingReview', detail: 'nothing pending' },
          409,
        );
      }
      this.resolve(body.decision ?? 'approve');
      return json({ schema_version: 1, next_stage: null, stages: this.stages });
    }
    return json({ schema_version: 1, error: 'NotFound', detail: url.pathname }, 404);
  };
}

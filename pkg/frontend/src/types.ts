/** Wire types mirroring the review API JSON schemas, field for field. */

export interface StageRow {
  stage: string;
  state: string;
  freshness: 'fresh' | 'stale' | 'missing';
  last_attempt: number;
  optional: boolean;
}

export interface DiagnosticDto {
  file: string;
  line: number;
  column: number | null;
  severity: string;
  message: string;
  tool: string;
}

export interface GateResultDto {
  passed: boolean;
  blocking: DiagnosticDto[];
  diagnostics: DiagnosticDto[];
}

export interface AppliedChangeDto {
  kind: string;
  path: string;
  detail: string;
}

export interface ReviewBundleDto {
  stage: string;
  change_set: { changes: AppliedChangeDto[] };
  narration: string;
  gate_result: GateResultDto | null;
}

export interface SessionPayload {
  schema_version: number;
  stages: StageRow[];
  pending_review: ReviewBundleDto | null;
  next_stage: string | null;
  recommended_order: string[];
}

export type NodeLayer = 'command' | 'context' | 'code' | 'data';

export interface GraphNodeDto {
  id: string;
  layer: NodeLayer;
  path: string;
  freshness: 'fresh' | 'stale' | 'missing';
}

export interface GraphEdgeDto {
  from: string;
  to: string;
  kind: string;
}

export interface GraphPayload {
  schema_version: number;
  nodes: GraphNodeDto[];
  edges: GraphEdgeDto[];
}

export interface LineageEdgeDto {
  child: string;
  parent: string;
  transformation_ref: string | null;
}

export interface LineagePayload {
  schema_version: number;
  root: string;
  nodes: string[];
  edges: LineageEdgeDto[];
}

export interface SessionEventDto {
  seq: number;
  kind: string;
  payload: Record<string, unknown>;
  at: string;
}

export interface EventsPayload {
  schema_version: number;
  events: SessionEventDto[];
  head_seq: number;
}

export interface DocPayload {
  schema_version: number;
  path: string;
  version: number;
  head_version: number;
  content: string;
  refs: { target: string; anchor: string | null }[];
}

/** Everything the UI draws. Mirrors the API exactly; the UI never invents
 * state of its own beyond selection and transient notices. */
export interface ViewModel {
  connected: boolean;
  stages: StageRow[];
  pendingReview: ReviewBundleDto | null;
  nextStage: string | null;
  graph: GraphPayload | null;
  selectedDoc: DocPayload | null;
  selectedLineage: LineagePayload | null;
  lineageError: string | null;
  notice: string | null;
}

export function emptyViewModel(): ViewModel {
  return {
    connected: false,
    stages: [],
    pendingReview: null,
    nextStage: null,
    graph: null,
    selectedDoc: null,
    selectedLineage: null,
    lineageError: null,
    notice: null,
  };
}

/** Typed client over the review API. The fetch implementation is
 * injectable so tests can run against an in-memory fixture. */

import type {
  DocPayload,
  EventsPayload,
  GraphPayload,
  LineagePayload,
  SessionPayload,
} from './types.ts';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorKind: string,
    detail: string,
  ) {
    super(detail);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let kind = 'HttpError';
  let detail = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error?: string; detail?: string };
    if (body.error) kind = body.error;
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the generic detail
  }
  return new ApiError(response.status, kind, detail);
}

export class ApiClient {
  constructor(
    private readonly base: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  getSession(): Promise<SessionPayload> {
    return this.request<SessionPayload>('/session');
  }

  getGraph(): Promise<GraphPayload> {
    return this.request<GraphPayload>('/graph');
  }

  getEvents(since: number): Promise<EventsPayload> {
    return this.request<EventsPayload>(`/events?since=${since}`);
  }

  getDoc(path: string, version?: number): Promise<DocPayload> {
    const query = version === undefined ? '' : `?version=${version}`;
    return this.request<DocPayload>(`/docs/${path}${query}`);
  }

  getLineage(path: string): Promise<LineagePayload> {
    return this.request<LineagePayload>(`/lineage/${path}`);
  }

  invoke(stage: string): Promise<unknown> {
    return this.request('/invoke', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ stage }),
    });
  }

  review(decision: 'approve' | 'revise' | 'skip', feedback?: string): Promise<unknown> {
    return this.request('/review', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ decision, feedback: feedback ?? null }),
    });
  }
}

/** Dashboard state: a thin cache of the API plus UI selection.
 *
 * Liveness is poll-driven: each tick asks /events?since= and refetches the
 * session and graph only when the head sequence moved. A fetch failure
 * flips the connected flag so the UI shows a retry banner instead of
 * presenting stale data as live.
 */

import { ApiClient, ApiError } from './api.ts';
import { emptyViewModel, type ViewModel } from './types.ts';

export const POLL_INTERVAL_MS = 2000;

type Listener = (view: ViewModel) => void;

export class DashboardStore {
  view: ViewModel = emptyViewModel();
  private lastSeq = 0;
  private listeners: Listener[] = [];

  constructor(private readonly client: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private publish(): void {
    for (const listener of this.listeners) listener(this.view);
  }

  /** Full refresh: session plus graph. */
  async refresh(): Promise<void> {
    try {
      const session = await this.client.getSession();
      const graph = await this.client.getGraph();
      this.view = {
        ...this.view,
        connected: true,
        stages: session.stages,
        pendingReview: session.pending_review,
        nextStage: session.next_stage,
        graph,
        notice: this.view.notice,
      };
    } catch {
      this.view = { ...this.view, connected: false };
    }
    this.publish();
  }

  /** One poll tick; cheap no-op while nothing happened server-side. */
  async poll(): Promise<void> {
    try {
      const events = await this.client.getEvents(this.lastSeq);
      if (!this.view.connected) {
        // Recovered from an outage: force a full refresh.
        this.lastSeq = events.head_seq;
        await this.refresh();
        return;
      }
      if (events.head_seq > this.lastSeq) {
        this.lastSeq = events.head_seq;
        await this.refresh();
      }
    } catch {
      this.view = { ...this.view, connected: false };
      this.publish();
    }
  }

  private async mutate(action: () => Promise<unknown>): Promise<void> {
    try {
      await action();
      this.view = { ...this.view, notice: null };
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.view = {
          ...this.view,
          notice: 'review already resolved elsewhere; view refreshed',
        };
      } else if (error instanceof ApiError) {
        this.view = { ...this.view, notice: error.message };
      } else {
        this.view = { ...this.view, connected: false };
      }
    }
    // Last-write-wins: always resync after a mutation attempt.
    await this.refresh();
  }

  approve(): Promise<void> {
    return this.mutate(() => this.client.review('approve'));
  }

  revise(feedback: string): Promise<void> {
    if (!feedback.trim()) {
      // The button stays disabled for empty text; this is a belt-and-braces
      // guard so no request is ever sent.
      return Promise.resolve();
    }
    return this.mutate(() => this.client.review('revise', feedback));
  }

  skip(): Promise<void> {
    return this.mutate(() => this.client.review('skip'));
  }

  invokeStage(stage: string): Promise<void> {
    return this.mutate(() => this.client.invoke(stage));
  }

  async selectLineage(artifactPath: string): Promise<void> {
    try {
      const lineage = await this.client.getLineage(artifactPath);
      this.view = { ...this.view, selectedLineage: lineage, lineageError: null };
    } catch (error) {
      const detail =
        error instanceof ApiError && error.status === 404
          ? `${artifactPath} is not a registered artifact`
          : 'lineage unavailable';
      this.view = { ...this.view, selectedLineage: null, lineageError: detail };
    }
    this.publish();
  }

  async selectDoc(path: string, version?: number): Promise<void> {
    try {
      const doc = await this.client.getDoc(path, version);
      this.view = { ...this.view, selectedDoc: doc };
    } catch {
      this.view = { ...this.view, selectedDoc: null };
    }
    this.publish();
  }

  clearSelection(): void {
    this.view = {
      ...this.view,
      selectedDoc: null,
      selectedLineage: null,
      lineageError: null,
    };
    this.publish();
  }
}

// Annotation session state machine: one item at a time, optimistic
// advance on submit with rollback on failure, live accuracy from the
// service. The service is the source of truth; this class holds no
// persistent state of its own.

import { ApiError, NetworkError, ReviewApi } from "./api";
import { likertForKey } from "./types";
import type { LikertValue, Progress, ReviewItemView } from "./types";

export type SessionState =
  | { phase: "loading" }
  | {
      phase: "rating";
      item: ReviewItemView;
      progress: Progress;
      accuracy: number | null;
      submitting: boolean;
      // set after a failed submit: the item is re-shown with the prior
      // selection, ready to retry without data loss
      failed: { value: LikertValue; message: string } | null;
    }
  | { phase: "done"; progress: Progress; accuracy: number | null }
  | { phase: "offline"; message: string }
  | { phase: "terminal"; message: string };

type Listener = (state: SessionState) => void;

export class ReviewSession {
  private state: SessionState = { phase: "loading" };
  private listeners: Listener[] = [];
  private relation: string | null = null;
  private accuracy: number | null = null;

  constructor(
    private api: ReviewApi,
    private batchId: string,
    private annotator: string,
  ) {}

  getState(): SessionState {
    return this.state;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private setState(state: SessionState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  /** Load the batch and show the first unrated item. */
  async start(): Promise<void> {
    this.setState({ phase: "loading" });
    try {
      const batch = await this.api.getBatch(this.batchId);
      this.relation = batch.relation;
      await this.refreshAccuracy();
      await this.advance();
    } catch (err) {
      if (err instanceof NetworkError) {
        this.setState({ phase: "offline", message: err.message });
        return;
      }
      this.setState({ phase: "terminal", message: String(err) });
    }
  }

  /** Submit a verdict for the current item and advance. */
  async submit(value: LikertValue): Promise<void> {
    if (this.state.phase !== "rating" || this.state.submitting) return;
    const { item, progress } = this.state;
    // optimistic: count the rating and lock inputs before the server acks
    this.setState({
      phase: "rating",
      item,
      progress: { rated: progress.rated + 1, total: progress.total },
      accuracy: this.accuracy,
      submitting: true,
      failed: null,
    });
    try {
      await this.api.submitRating(item.prediction_id, this.annotator, value);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.setState({ phase: "terminal", message: err.message });
        return;
      }
      // roll back the optimistic advance; keep the selection for retry
      this.setState({
        phase: "rating",
        item,
        progress,
        accuracy: this.accuracy,
        submitting: false,
        failed: {
          value,
          message: err instanceof Error ? err.message : String(err),
        },
      });
      return;
    }
    await this.refreshAccuracy();
    await this.advance();
  }

  /** Retry after a failed submit (same value; the service replaces
   * duplicates, so retrying is always safe). */
  async retry(): Promise<void> {
    if (this.state.phase === "offline") {
      await this.start();
      return;
    }
    if (this.state.phase === "rating" && this.state.failed) {
      const value = this.state.failed.value;
      this.setState({ ...this.state, failed: null, submitting: false });
      await this.submit(value);
    }
  }

  /** Keyboard shortcut entry point: digits 1..5 rate, anything else is
   * ignored. */
  async pressKey(key: string): Promise<void> {
    const digit = Number.parseInt(key, 10);
    if (Number.isNaN(digit)) return;
    const value = likertForKey(digit);
    if (value !== null) await this.submit(value);
  }

  private async advance(): Promise<void> {
    try {
      const next = await this.api.nextItem(this.batchId, this.annotator);
      if (next.done || next.item === null) {
        this.setState({
          phase: "done",
          progress: next.progress,
          accuracy: this.accuracy,
        });
        return;
      }
      this.setState({
        phase: "rating",
        item: next.item,
        progress: next.progress,
        accuracy: this.accuracy,
        submitting: false,
        failed: null,
      });
    } catch (err) {
      if (err instanceof NetworkError) {
        this.setState({ phase: "offline", message: err.message });
        return;
      }
      this.setState({ phase: "terminal", message: String(err) });
    }
  }

  private async refreshAccuracy(): Promise<void> {
    if (this.relation === null) return;
    try {
      const report = await this.api.relationReport(this.relation);
      this.accuracy = report.accuracy;
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.accuracy = null; // nothing rated yet
        return;
      }
      // accuracy is a live display nicety; never fail the session for it
    }
  }
}

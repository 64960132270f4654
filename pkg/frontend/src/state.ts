import { ApiError, StudyApi } from "./api";
import type {
  ClientEvent,
  Condition,
  LabelRef,
  ReportDoc,
  TaskPayload,
} from "./types";

export type EntryMode = "allocation" | "confidence";

/** Everything the screen needs for the task currently being worked.
 *
 * Invariants maintained here rather than in the DOM layer:
 *  - in C3 a report exists in `reports` only for a hypothesis the
 *    participant selected (evidence is fetched on selection, never eagerly);
 *  - submission is enabled only when the entry is complete (allocation
 *    summing to exactly 100 with a unique maximum, or a confidence value);
 *  - a submitted task is locked: further submits are refused locally,
 *    further evidence clicks are exploration and are logged as views.
 */
export interface TaskViewState {
  condition: Condition | null;
  task: TaskPayload | null;
  labels: LabelRef[];
  selected: number[]; // selection order preserved for panel layout
  reports: Map<number, ReportDoc>;
  inflight: Set<number>;
  allocation: number[];
  confidence: number | null;
  answer: number | null; // explicit answer pick (confidence mode)
  entryMode: EntryMode;
  rankedOrdering: boolean;
  submitted: boolean;
  startedAt: number | null;
  elapsedSeconds: number | null;
  error: string | null;
  lastAck: string | null;
}

export function emptyState(): TaskViewState {
  return {
    condition: null,
    task: null,
    labels: [],
    selected: [],
    reports: new Map(),
    inflight: new Set(),
    allocation: [],
    confidence: null,
    answer: null,
    entryMode: "allocation",
    rankedOrdering: false,
    submitted: false,
    startedAt: null,
    elapsedSeconds: null,
    error: null,
    lastAck: null,
  };
}

export function allocationSum(state: TaskViewState): number {
  return state.allocation.reduce((a, b) => a + b, 0);
}

/** The answer implied by a likelihood allocation: the unique maximum. */
export function allocationChoice(state: TaskViewState): number | null {
  if (!state.allocation.length) return null;
  const max = Math.max(...state.allocation);
  const winners = state.allocation
    .map((v, i) => [v, i] as const)
    .filter(([v]) => v === max);
  return winners.length === 1 ? winners[0][1] : null;
}

export function canSubmit(state: TaskViewState): boolean {
  if (state.submitted || !state.task) return false;
  if (state.entryMode === "allocation") {
    return allocationSum(state) === 100 && allocationChoice(state) !== null;
  }
  return state.confidence !== null && state.answer !== null;
}

export class TaskController {
  state: TaskViewState;
  events: ClientEvent[] = [];
  onChange: () => void = () => {};

  constructor(
    private api: StudyApi,
    private sessionId: string,
    private now: () => number = () => Date.now(),
  ) {
    this.state = emptyState();
  }

  private emit(kind: ClientEvent["kind"], payload: number): void {
    if (!this.state.task) return;
    this.events.push({
      kind,
      task_index: this.state.task.index,
      payload,
      at: this.now(),
    });
  }

  private changed(): void {
    this.onChange();
  }

  async loadTask(index: number): Promise<void> {
    const s = this.state;
    s.error = null;
    let task: TaskPayload;
    try {
      task = await this.api.getTask(this.sessionId, index);
    } catch (err) {
      s.error = err instanceof ApiError ? err.detail : String(err);
      this.changed();
      return;
    }
    s.task = task;
    s.condition = task.condition;
    s.labels = task.labels ?? [];
    s.selected = [];
    s.reports = new Map();
    s.inflight = new Set();
    s.entryMode = task.n_classes <= 3 ? "allocation" : "confidence";
    s.allocation = new Array(task.n_classes).fill(0);
    s.confidence = null;
    s.answer = null;
    s.rankedOrdering = false;
    s.submitted = false;
    s.startedAt = this.now();
    s.elapsedSeconds = null;
    s.lastAck = null;
    if (task.condition === "C1" && task.prediction) {
      this.emit("recommendation-viewed", task.prediction.id);
    }
    this.changed();
  }

  /** Select or deselect a hypothesis chip (C3 only).
   *
   * A selection fetches that hypothesis's evidence from the service; rapid
   * double-clicks are deduplicated (already-selected or in-flight clicks do
   * nothing), so each selection emits exactly one interaction event. After
   * submission, clicks remain allowed as exploration and are logged as
   * evidence views.
   */
  async toggleHypothesis(id: number): Promise<void> {
    const s = this.state;
    if (!s.task || s.condition !== "C3") return;
    if (s.inflight.has(id)) return; // dedup while the fetch is pending
    if (s.selected.includes(id) && !s.submitted) {
      s.selected = s.selected.filter((h) => h !== id);
      s.reports.delete(id);
      this.emit("hypothesis-deselected", id);
      this.changed();
      return;
    }
    if (s.submitted && s.reports.has(id)) return; // already on screen
    s.inflight.add(id);
    this.changed();
    try {
      const report = await this.api.getEvidence(this.sessionId, s.task.index, id);
      s.reports.set(id, report);
      if (!s.selected.includes(id)) s.selected.push(id);
      this.emit(s.submitted ? "evidence-viewed" : "hypothesis-selected", id);
      s.error = null;
    } catch (err) {
      s.error = err instanceof ApiError ? err.detail : String(err);
    } finally {
      s.inflight.delete(id);
      this.changed();
    }
  }

  setAllocation(index: number, value: number): void {
    const s = this.state;
    if (s.submitted || index < 0 || index >= s.allocation.length) return;
    const v = Math.round(value);
    if (!Number.isFinite(v) || v < 0 || v > 100) return;
    s.allocation[index] = v;
    this.changed();
  }

  setConfidence(value: number): void {
    if (this.state.submitted) return;
    if (!Number.isFinite(value) || value < 0 || value > 1) return;
    this.state.confidence = value;
    this.changed();
  }

  setAnswer(label: number): void {
    if (this.state.submitted) return;
    this.state.answer = label;
    this.changed();
  }

  toggleRankedOrdering(): void {
    // offered only after a first selection, to avoid anchoring
    if (!this.state.selected.length) return;
    this.state.rankedOrdering = !this.state.rankedOrdering;
    this.changed();
  }

  /** Hypothesis ids in display order. Default: the served label order.
   * Ranked: selected chips ordered by their served total WoE (descending),
   * then the rest; purely a rearrangement of service-provided numbers. */
  chipOrder(): number[] {
    const s = this.state;
    const ids = s.labels.map((l) => l.id);
    if (!s.rankedOrdering) return ids;
    const ranked = [...s.selected].sort(
      (a, b) => (s.reports.get(b)?.total_woe ?? -Infinity) -
        (s.reports.get(a)?.total_woe ?? -Infinity),
    );
    const rest = ids.filter((id) => !ranked.includes(id));
    return [...ranked, ...rest];
  }

  async submit(): Promise<boolean> {
    const s = this.state;
    if (!s.task) return false;
    if (s.submitted) {
      s.error = "decision already submitted for this task";
      this.changed();
      return false;
    }
    if (!canSubmit(s)) {
      s.error =
        s.entryMode === "allocation"
          ? `allocation must sum to exactly 100 (currently ${allocationSum(s)})`
          : "choose an answer and a confidence first";
      this.changed();
      return false;
    }
    const label =
      s.entryMode === "allocation" ? allocationChoice(s)! : s.answer!;
    const elapsed = s.startedAt === null ? 0 : (this.now() - s.startedAt) / 1000;
    try {
      const ack = await this.api.submitDecision(this.sessionId, {
        task_index: s.task.index,
        label,
        ...(s.entryMode === "allocation"
          ? { allocation: s.allocation }
          : { confidence: s.confidence! }),
        client_duration: elapsed,
      });
      s.submitted = true;
      s.elapsedSeconds = elapsed;
      s.error = null;
      s.lastAck = `decision recorded for task ${ack.task_index}`;
      this.changed();
      return true;
    } catch (err) {
      // surface the service's validation message verbatim
      s.error = err instanceof ApiError ? err.detail : String(err);
      this.changed();
      return false;
    }
  }
}

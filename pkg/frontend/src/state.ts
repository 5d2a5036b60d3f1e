import {
  AbstentionItem,
  ApiClient,
  ConfirmResponse,
  HttpError,
  InstanceDetail,
  Metrics,
  SessionInfo,
} from "./types.js";

export interface Banner {
  kind: "conflict" | "budget" | "network" | "error";
  text: string;
}

export interface ViewState {
  /** Static session config, set once by init(). */
  tau: number | null;
  n: number | null;
  m: number | null;
  costs: number[];
  exposeTruth: boolean;
  /** High-water mark: the largest revision ever rendered. */
  revision: number;
  /** Metrics exactly as the server sent them. */
  metrics: Metrics | null;
  queue: AbstentionItem[];
  detail: InstanceDetail | null;
  banner: Banner | null;
  /** True while a confirmation request is in flight (at most one). */
  busy: boolean;
}

export type SubmitOutcome =
  | "ok"
  | "covered"
  | "locked"
  | "busy"
  | "no-instance"
  | "cannot-afford"
  | "conflict"
  | "rejected"
  | "network";

function freshState(): ViewState {
  return {
    tau: null,
    n: null,
    m: null,
    costs: [],
    exposeTruth: false,
    revision: -1,
    metrics: null,
    queue: [],
    detail: null,
    banner: null,
    busy: false,
  };
}

/**
 * Client-side session state. Pure data in, pure data out: every number held
 * here was produced by JSON.parse on a service response, never computed
 * locally, and nothing is written before the service has answered (no
 * optimistic updates). Responses older than the newest rendered revision are
 * dropped on the floor, so the view can only move forward.
 */
export class Store {
  private state: ViewState = freshState();
  private listeners: Array<() => void> = [];

  constructor(private readonly api: ApiClient) {}

  getState(): Readonly<ViewState> {
    return this.state;
  }

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  /** Revision gate: false means the payload is stale and must not render. */
  private accept(revision: number): boolean {
    if (revision < this.state.revision) return false;
    this.state.revision = revision;
    return true;
  }

  private applySession(s: SessionInfo): void {
    if (!this.accept(s.revision)) return;
    this.state.tau = s.tau;
    this.state.n = s.n;
    this.state.m = s.m;
    this.state.costs = s.costs;
    this.state.exposeTruth = s.expose_truth;
    this.state.metrics = { ...s.metrics, revision: s.revision };
  }

  private applyMetrics(m: Metrics): void {
    if (!this.accept(m.revision)) return;
    this.state.metrics = m;
  }

  private applyQueue(revision: number, items: AbstentionItem[]): void {
    if (!this.accept(revision)) return;
    this.state.queue = items;
  }

  private applyDetail(d: InstanceDetail): void {
    if (!this.accept(d.revision)) return;
    this.state.detail = d;
  }

  async init(): Promise<void> {
    try {
      const s = await this.api.session();
      this.applySession(s);
      const a = await this.api.abstentions();
      this.applyQueue(a.revision, a.abstentions);
      this.state.banner = null;
    } catch (err) {
      this.fail(err);
    }
    this.emit();
  }

  /** Re-pull metrics and the queue (and the open instance, if any). */
  async refresh(): Promise<void> {
    try {
      const m = await this.api.metrics();
      this.applyMetrics(m);
      const a = await this.api.abstentions();
      this.applyQueue(a.revision, a.abstentions);
      if (this.state.detail !== null) {
        this.applyDetail(await this.api.instance(this.state.detail.id));
      }
      this.state.banner = null;
    } catch (err) {
      this.fail(err);
    }
    this.emit();
  }

  async open(id: string): Promise<void> {
    try {
      this.applyDetail(await this.api.instance(id));
      this.state.banner = null;
    } catch (err) {
      this.fail(err);
    }
    this.emit();
  }

  /**
   * Confirm one concept of the open instance. Nothing changes until the
   * server answers; a 409 conflict triggers a refetch of server truth and a
   * banner; a network failure leaves the state exactly as it was.
   */
  async submit(concept: number, value: 0 | 1): Promise<SubmitOutcome> {
    const d = this.state.detail;
    if (this.state.busy) return "busy";
    if (d === null) return "no-instance";
    if (d.covered) return "covered";
    if (d.confirmed.includes(concept)) return "locked";
    if (!this.canAfford(concept)) return "cannot-afford";

    this.state.busy = true;
    this.emit();
    try {
      const res = await this.api.confirm(d.id, concept, value);
      this.applyConfirm(res);
      await this.refreshQuietly();
      this.state.banner = null;
      return "ok";
    } catch (err) {
      return this.submitFailed(err);
    } finally {
      this.state.busy = false;
      this.emit();
    }
  }

  private applyConfirm(res: ConfirmResponse): void {
    if (!this.accept(res.revision)) return;
    const { budget_remaining, ...detail } = res;
    this.state.detail = detail;
    if (this.state.metrics !== null) {
      this.state.metrics = {
        ...this.state.metrics,
        budget_remaining,
        revision: res.revision,
      };
    }
  }

  private async submitFailed(err: unknown): Promise<SubmitOutcome> {
    if (err instanceof HttpError && err.status === 409) {
      const reason = err.body.reason ?? "conflict";
      this.state.banner =
        reason === "budget-exhausted"
          ? { kind: "budget", text: err.body.error }
          : { kind: "conflict", text: err.body.error };
      // server truth replaces whatever the conflict invalidated
      await this.refreshQuietly();
      if (this.state.detail !== null) {
        try {
          this.applyDetail(await this.api.instance(this.state.detail.id));
        } catch {
          // keep the conflict banner; the refetch can be retried
        }
      }
      return "conflict";
    }
    if (err instanceof HttpError) {
      this.state.banner = { kind: "error", text: err.body.error };
      return "rejected";
    }
    this.state.banner = {
      kind: "network",
      text: "request failed; check the service and retry",
    };
    return "network";
  }

  /** refresh() minus banner clearing, for use inside error paths. */
  private async refreshQuietly(): Promise<void> {
    try {
      const m = await this.api.metrics();
      this.applyMetrics(m);
      const a = await this.api.abstentions();
      this.applyQueue(a.revision, a.abstentions);
    } catch {
      // metrics/queue stay at the last rendered revision
    }
  }

  /** Whether the remaining budget covers this concept's cost. */
  canAfford(concept: number): boolean {
    const m = this.state.metrics;
    if (m === null || m.budget_remaining === null) return true;
    const cost = this.state.costs[concept];
    return cost !== undefined && m.budget_remaining >= cost;
  }

  private fail(err: unknown): void {
    if (err instanceof HttpError) {
      this.state.banner = { kind: "error", text: err.body.error };
    } else {
      this.state.banner = {
        kind: "network",
        text: "request failed; check the service and retry",
      };
    }
  }
}

/**
 * Deep snapshot of the rendered data fields, excluding transient control
 * state (banner, busy). Conflict-safety checks compare these before and
 * after a rejected confirmation.
 */
export function dataSlice(state: Readonly<ViewState>): Omit<ViewState, "banner" | "busy"> {
  const { banner: _banner, busy: _busy, ...data } = state;
  return structuredClone(data);
}

// ---------------------------------------------------------------------------
// Pure render helpers. Numbers are stringified with String(), which is the
// shortest round-trip form: Number(rendered) gives back the identical double,
// so what the user sees is bit-for-bit what the service sent.

export function fmtNumber(x: number | null | undefined): string {
  if (x === null || x === undefined) return "n/a";
  return String(x);
}

export function conceptName(k: number, names?: string[]): string {
  const given = names?.[k];
  return given !== undefined && given !== "" ? given : `concept_${k}`;
}

export interface HeaderView {
  tau: string;
  coverage: string;
  nCovered: string;
  n: string;
  selectiveAccuracy: string;
  budgetRemaining: string;
  confirmationsUsed: string;
  revision: string;
}

export function headerView(state: Readonly<ViewState>): HeaderView {
  const m = state.metrics;
  return {
    tau: fmtNumber(state.tau),
    coverage: fmtNumber(m?.coverage),
    nCovered: fmtNumber(m?.n_covered),
    n: fmtNumber(m?.n),
    selectiveAccuracy: fmtNumber(m?.selective_accuracy),
    budgetRemaining: m?.budget_remaining === null ? "unlimited" : fmtNumber(m?.budget_remaining),
    confirmationsUsed: fmtNumber(m?.confirmations_used),
    revision: fmtNumber(state.revision < 0 ? null : state.revision),
  };
}

export interface QueueRowView {
  id: string;
  ybar: string;
  /** Top flags in the server's order (gain descending), gain visible. */
  flags: Array<{ name: string; gain: string; concept: number }>;
}

export function queueView(
  state: Readonly<ViewState>,
  topK = 3,
  names?: string[],
): QueueRowView[] {
  return state.queue.map((item) => ({
    id: item.id,
    ybar: fmtNumber(item.ybar),
    flags: item.flags.slice(0, topK).map((f) => ({
      name: conceptName(f.concept, names),
      gain: fmtNumber(f.gain),
      concept: f.concept,
    })),
  }));
}

export interface ConceptRowView {
  concept: number;
  name: string;
  /** Calibrated probability, or the confirmed hard value. */
  value: string;
  locked: boolean;
  gain: string;
  cost: string;
  disabled: boolean;
}

export interface DetailView {
  id: string;
  ybar: string;
  decision: string;
  covered: boolean;
  rows: ConceptRowView[];
}

export function detailView(
  state: Readonly<ViewState>,
  names?: string[],
): DetailView | null {
  const d = state.detail;
  if (d === null) return null;
  const gainByConcept = new Map(d.flags.map((f) => [f.concept, f.gain]));
  const rows: ConceptRowView[] = d.p.map((q, k) => {
    const locked = d.confirmed.includes(k);
    return {
      concept: k,
      name: conceptName(k, names),
      value: fmtNumber(q),
      locked,
      gain: fmtNumber(gainByConcept.get(k) ?? 0),
      cost: fmtNumber(state.costs[k]),
      disabled: locked || d.covered || state.busy || !canAffordView(state, k),
    };
  });
  return {
    id: d.id,
    ybar: fmtNumber(d.ybar),
    decision: d.decision === null ? "abstain" : String(d.decision),
    covered: d.covered,
    rows,
  };
}

function canAffordView(state: Readonly<ViewState>, concept: number): boolean {
  const m = state.metrics;
  if (m === null || m.budget_remaining === null) return true;
  const cost = state.costs[concept];
  return cost !== undefined && m.budget_remaining >= cost;
}

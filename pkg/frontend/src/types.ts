// Wire types for the review service JSON API. Every response body carries
// the session revision; the store refuses to render anything older than what
// it has already shown.

export interface Revisioned {
  revision: number;
}

export interface Metrics extends Revisioned {
  n: number;
  n_covered: number;
  n_abstained: number;
  coverage: number;
  selective_accuracy: number | null;
  confirmations_used: number;
  budget_remaining: number | null;
  tau: number;
}

export interface Flag {
  concept: number;
  gain: number;
  cost: number;
}

export interface SessionInfo extends Revisioned {
  tau: number;
  n: number;
  m: number;
  costs: number[];
  expose_truth: boolean;
  metrics: Omit<Metrics, "revision">;
}

export interface AbstentionItem {
  id: string;
  ybar: number;
  flags: Flag[];
}

export interface Abstentions extends Revisioned {
  abstentions: AbstentionItem[];
}

export interface InstanceDetail extends Revisioned {
  id: string;
  p: number[];
  confirmed: number[];
  ybar: number;
  decision: number | null;
  covered: boolean;
  flags: Flag[];
  truth?: number[];
  label?: number | null;
}

export interface ConfirmResponse extends InstanceDetail {
  budget_remaining: number | null;
}

export interface ErrorBody extends Revisioned {
  error: string;
  reason?: string;
  budget_remaining?: number;
  cost?: number;
}

/** Non-2xx response, carrying the parsed JSON error body. */
export class HttpError extends Error {
  constructor(
    readonly status: number,
    readonly body: ErrorBody,
  ) {
    super(`HTTP ${status}: ${body.error}`);
    this.name = "HttpError";
  }
}

export interface ApiClient {
  session(): Promise<SessionInfo>;
  metrics(): Promise<Metrics>;
  abstentions(): Promise<Abstentions>;
  instance(id: string): Promise<InstanceDetail>;
  confirm(id: string, concept: number, value: 0 | 1): Promise<ConfirmResponse>;
}

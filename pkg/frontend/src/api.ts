import {
  Abstentions,
  ApiClient,
  ConfirmResponse,
  ErrorBody,
  HttpError,
  InstanceDetail,
  Metrics,
  SessionInfo,
} from "./types.js";

async function toJson<T>(resp: Response): Promise<T> {
  const body = (await resp.json()) as unknown;
  if (!resp.ok) {
    throw new HttpError(resp.status, body as ErrorBody);
  }
  return body as T;
}

/**
 * Thin fetch wrapper over the review service. No caching, no retries, no
 * interpretation: numbers reach the store exactly as JSON.parse produced
 * them.
 */
export class HttpApi implements ApiClient {
  constructor(private readonly base: string) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  async session(): Promise<SessionInfo> {
    return toJson(await fetch(this.url("/session")));
  }

  async metrics(): Promise<Metrics> {
    return toJson(await fetch(this.url("/metrics")));
  }

  async abstentions(): Promise<Abstentions> {
    return toJson(await fetch(this.url("/abstentions")));
  }

  async instance(id: string): Promise<InstanceDetail> {
    return toJson(await fetch(this.url(`/instances/${encodeURIComponent(id)}`)));
  }

  async confirm(id: string, concept: number, value: 0 | 1): Promise<ConfirmResponse> {
    const resp = await fetch(this.url(`/instances/${encodeURIComponent(id)}/confirm`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ concept, value }),
    });
    return toJson(resp);
  }
}

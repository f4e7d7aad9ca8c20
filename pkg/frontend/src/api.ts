/** Typed client for the review service; the page's only data source. */

import {
  CRITERIA,
  type Criteria,
  type NextResult,
  type Progress,
  type ReviewItem,
  type StoredVerdict,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return response.statusText || "request failed";
}

/** Throws unless every criterion is present and boolean. */
export function checkCriteria(criteria: Partial<Criteria>): Criteria {
  const missing = CRITERIA.filter((name) => typeof criteria[name] !== "boolean");
  if (missing.length > 0) {
    throw new Error(`criteria missing: ${missing.join(", ")}`);
  }
  return criteria as Criteria;
}

export interface ClientOptions {
  baseUrl: string;
  token: string;
  session: string;
  fetchImpl?: typeof fetch;
}

export class ReviewClient {
  private readonly baseUrl: string;
  private readonly token: string;
  readonly session: string;
  private readonly fetchImpl: typeof fetch;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.token = options.token;
    this.session = options.session;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  private headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      "X-Eval-Session": this.session,
      "Content-Type": "application/json",
    };
  }

  /** Reserve the next ungraded item; "pending" means retry shortly. */
  async next(): Promise<NextResult> {
    const response = await this.fetchImpl(`${this.baseUrl}/eval/next`, {
      headers: this.headers(),
    });
    if (response.status === 409) {
      const body = (await response.json().catch(() => ({}))) as {
        progress?: Progress;
      };
      return { state: "pending", progress: body.progress ?? null };
    }
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    const body = (await response.json()) as {
      status: "item" | "done";
      item?: ReviewItem;
      progress: Progress;
    };
    if (body.status === "item" && body.item) {
      return { state: "item", item: body.item, progress: body.progress };
    }
    return { state: "done", progress: body.progress };
  }

  async submit(
    itemToken: string,
    criteria: Criteria,
    options: { evaluatorId?: string; supersede?: boolean } = {},
  ): Promise<StoredVerdict> {
    const response = await this.fetchImpl(`${this.baseUrl}/eval/verdict`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({
        token: itemToken,
        criteria: checkCriteria(criteria),
        evaluator_id: options.evaluatorId ?? "",
        supersede: options.supersede ?? false,
      }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return (await response.json()) as StoredVerdict;
  }

  async progress(): Promise<Progress> {
    const response = await this.fetchImpl(`${this.baseUrl}/eval/progress`, {
      headers: this.headers(),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return (await response.json()) as Progress;
  }
}

/** A random session id, unique per browser tab. */
export function freshSession(): string {
  const bytes = new Uint8Array(8);
  crypto.getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

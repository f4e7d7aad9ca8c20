/** Client logic against a mocked fetch: headers, parsing, error mapping. */

import { describe, expect, it, vi } from "vitest";

import { ApiError, ReviewClient, checkCriteria, freshSession } from "../src/api.js";
import { pretty, progressLabel } from "../src/dom.js";
import { CRITERIA, CRITERION_LABELS } from "../src/types.js";

const PROGRESS = { total: 3, graded: 1, leased: 1, remaining: 2, done: false };

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function clientWith(response: Response | Response[]) {
  const queue = Array.isArray(response) ? [...response] : [response];
  const fetchImpl = vi.fn(async () => {
    const next = queue.shift();
    if (!next) throw new Error("unexpected extra request");
    return next;
  });
  const client = new ReviewClient({
    baseUrl: "http://reviews.test/",
    token: "tok",
    session: "sess-1",
    fetchImpl: fetchImpl as unknown as typeof fetch,
  });
  return { client, fetchImpl };
}

describe("criteria contract", () => {
  it("lists the five criteria in submission order", () => {
    expect(CRITERIA).toEqual([
      "function_selection",
      "task_representation",
      "structural_integrity",
      "functional_integrity",
      "instruction_containment",
    ]);
    for (const name of CRITERIA) {
      expect(CRITERION_LABELS[name]).toBeTruthy();
    }
  });

  it("rejects incomplete criteria before any request is made", () => {
    expect(() => checkCriteria({ function_selection: true })).toThrow(
      /criteria missing: task_representation/,
    );
  });

  it("accepts a complete set", () => {
    const full = Object.fromEntries(CRITERIA.map((name) => [name, true]));
    expect(checkCriteria(full)).toEqual(full);
  });
});

describe("ReviewClient.next", () => {
  it("sends auth and session headers and trims the base URL", async () => {
    const { client, fetchImpl } = clientWith(
      jsonResponse(200, { status: "done", progress: PROGRESS }),
    );
    const result = await client.next();
    expect(result).toEqual({ state: "done", progress: PROGRESS });
    expect(fetchImpl).toHaveBeenCalledWith(
      "http://reviews.test/eval/next",
      expect.objectContaining({
        headers: expect.objectContaining({
          Authorization: "Bearer tok",
          "X-Eval-Session": "sess-1",
        }),
      }),
    );
  });

  it("returns the reserved item", async () => {
    const item = {
      token: "abc123",
      query: "Create a contact",
      software_pass: true,
      steps: [],
    };
    const { client } = clientWith(
      jsonResponse(200, { status: "item", item, progress: PROGRESS }),
    );
    const result = await client.next();
    expect(result.state).toBe("item");
    if (result.state === "item") expect(result.item).toEqual(item);
  });

  it("maps 409 to the pending state instead of throwing", async () => {
    const { client } = clientWith(
      jsonResponse(409, { detail: "all leased", progress: PROGRESS }),
    );
    expect(await client.next()).toEqual({ state: "pending", progress: PROGRESS });
  });

  it("surfaces auth failures as ApiError", async () => {
    const { client } = clientWith(
      jsonResponse(401, { detail: "bad or missing token" }),
    );
    const failure = await client.next().catch((err) => err);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(401);
    expect(failure.detail).toBe("bad or missing token");
  });
});

describe("ReviewClient.submit", () => {
  const allTrue = Object.fromEntries(
    CRITERIA.map((name) => [name, true]),
  ) as Record<(typeof CRITERIA)[number], boolean>;

  it("posts the verdict body the service expects", async () => {
    const { client, fetchImpl } = clientWith(
      jsonResponse(200, { status: "stored", verdict: {}, progress: PROGRESS }),
    );
    await client.submit("abc123", allTrue);
    const [, init] = fetchImpl.mock.calls[0] as unknown as [string, RequestInit];
    expect(init.method).toBe("POST");
    expect(JSON.parse(String(init.body))).toEqual({
      token: "abc123",
      criteria: allTrue,
      evaluator_id: "",
      supersede: false,
    });
  });

  it("maps grading conflicts to typed errors", async () => {
    const { client } = clientWith([
      jsonResponse(409, { detail: "item already graded" }),
      jsonResponse(410, { detail: "lease expired or not held" }),
    ]);
    const conflict = await client.submit("abc", allTrue).catch((err) => err);
    expect(conflict.status).toBe(409);
    const expired = await client.submit("abc", allTrue).catch((err) => err);
    expect(expired.status).toBe(410);
  });

  it("never sends a request when criteria are incomplete", async () => {
    const { client, fetchImpl } = clientWith([]);
    await expect(
      client.submit("abc", { function_selection: true } as never),
    ).rejects.toThrow(/criteria missing/);
    expect(fetchImpl).not.toHaveBeenCalled();
  });
});

describe("helpers", () => {
  it("freshSession yields distinct 16-hex ids", () => {
    const a = freshSession();
    const b = freshSession();
    expect(a).toMatch(/^[0-9a-f]{16}$/);
    expect(a).not.toBe(b);
  });

  it("pretty prints objects and passes strings through", () => {
    expect(pretty({ a: 1 })).toBe('{\n  "a": 1\n}');
    expect(pretty("text")).toBe("text");
    expect(pretty(null)).toBe("");
  });

  it("progressLabel formats the counter", () => {
    expect(progressLabel(3, 20)).toBe("3 / 20 graded");
  });
});

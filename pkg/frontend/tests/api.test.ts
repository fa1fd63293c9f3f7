import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function fakeFetch(
  handler: (input: string, init?: RequestInit) => { status: number; body: unknown },
) {
  const calls: { input: string; init?: RequestInit }[] = [];
  const impl = async (input: string, init?: RequestInit): Promise<Response> => {
    calls.push({ input, init });
    const { status, body } = handler(input, init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { impl, calls };
}

describe("ApiClient", () => {
  it("prefixes the base URL and parses JSON", async () => {
    const { impl, calls } = fakeFetch(() => ({
      status: 200,
      body: { decks: [{ deck_id: "d1", size: 3 }] },
    }));
    const client = new ApiClient("http://svc:9", impl);
    const decks = await client.listDecks();
    expect(decks.decks[0].deck_id).toBe("d1");
    expect(calls[0].input).toBe("http://svc:9/decks");
  });

  it("POSTs JSON bodies", async () => {
    const { impl, calls } = fakeFetch(() => ({ status: 200, body: { deck_id: "x", size: 1 } }));
    const client = new ApiClient("", impl);
    await client.createDeck({ deck_id: "x", items: [{ kc_id: "a", side_a: "q", side_b: "r" }] });
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toMatchObject({ deck_id: "x" });
  });

  it("maps error bodies to ApiError with status and field", async () => {
    const { impl } = fakeFetch(() => ({
      status: 400,
      body: { error: "missing field 'items'", field: "items" },
    }));
    const client = new ApiClient("", impl);
    const failure = await client.createDeck({ items: [] }).catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(400);
    expect(failure.field).toBe("items");
    expect(failure.message).toContain("items");
  });

  it("maps network failures to status 0", async () => {
    const client = new ApiClient("", async () => {
      throw new TypeError("fetch failed");
    });
    const failure = await client.listDecks().catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect(failure.status).toBe(0);
  });

  it("defaults the session model to rpl", async () => {
    const { impl, calls } = fakeFetch(() => ({
      status: 200,
      body: { session_id: "s", items: [], progress: {} },
    }));
    const client = new ApiClient("", impl);
    await client.createSession({ deck_id: "d1" });
    expect(JSON.parse(String(calls[0].init?.body)).model).toBe("rpl");
  });
});

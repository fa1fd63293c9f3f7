import type {
  AnswerBody,
  DeckSummary,
  NextResponse,
  ProgressView,
  SessionView,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the session service. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(0, `service unreachable: ${String(error)}`);
    }
    const text = await response.text();
    let body: unknown = null;
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        throw new ApiError(response.status, `non-JSON response from ${path}`);
      }
    }
    if (!response.ok) {
      const err = body as { error?: string; field?: string } | null;
      throw new ApiError(
        response.status,
        err?.error ?? `request to ${path} failed (${response.status})`,
        err?.field ?? undefined,
      );
    }
    return body as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listDecks(): Promise<{ decks: DeckSummary[] }> {
    return this.request("/decks");
  }

  createDeck(deck: {
    deck_id?: string;
    items: { kc_id: string; side_a: string; side_b: string }[];
  }): Promise<{ deck_id: string; size: number }> {
    return this.post("/decks", deck);
  }

  createSession(options: {
    deck_id: string;
    model?: string;
    mastery_threshold?: number;
    case_insensitive?: boolean;
    direction_policy?: string;
    seed?: number;
  }): Promise<SessionView> {
    return this.post("/sessions", { model: "rpl", ...options });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${sessionId}`);
  }

  nextQuestion(sessionId: string): Promise<NextResponse> {
    return this.request(`/sessions/${sessionId}/next`);
  }

  submitAnswer(sessionId: string, body: AnswerBody): Promise<SessionView> {
    return this.post(`/sessions/${sessionId}/answers`, body);
  }

  progress(sessionId: string): Promise<ProgressView> {
    return this.request(`/sessions/${sessionId}/progress`);
  }
}

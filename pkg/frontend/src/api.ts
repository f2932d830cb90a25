/** Typed client for the question-answering JSON API. */

export interface CitationView {
  number: number;
  source_ref: string;
  score: number;
}

export interface RetrievedView {
  chunk_id: string;
  score: number;
}

export interface AskRequest {
  question: string;
  session_id?: string;
  topic_filter?: string;
}

export interface AskResponse {
  answer: string;
  rejected: boolean;
  citations: CitationView[];
  session_id: string;
  retrieved: RetrievedView[];
}

export class RateLimitedError extends Error {
  constructor(public retryAfterS: number) {
    super(`rate limited; retry after ${retryAfterS}s`);
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  async ask(req: AskRequest): Promise<AskResponse> {
    const resp = await this.fetchImpl(`${this.baseUrl}/ask`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (resp.status === 429) {
      const retry = Number(resp.headers.get("Retry-After") ?? "5");
      throw new RateLimitedError(Number.isFinite(retry) ? retry : 5);
    }
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.error === "string") detail = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as AskResponse;
  }
}

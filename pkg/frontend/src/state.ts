/** Session state and the single-flight submission controller. */

import {
  ApiClient,
  AskResponse,
  CitationView,
  RateLimitedError,
} from "./api.js";

export interface ChatTurnView {
  question: string;
  answerText: string;
  citations: CitationView[];
  rejected: boolean;
  timestamp: number;
}

export interface UiState {
  sessionId: string | null;
  turns: ChatTurnView[];
  topicFilter: string | null;
  pending: boolean;
  error: string | null;
  retryAfterS: number | null;
}

export function initialState(): UiState {
  return {
    sessionId: null,
    turns: [],
    topicFilter: null,
    pending: false,
    error: null,
    retryAfterS: null,
  };
}

export type SubmitResult =
  | { kind: "ignored" }
  | { kind: "answered"; turn: ChatTurnView }
  | { kind: "error"; message: string }
  | { kind: "rate-limited"; retryAfterS: number };

/**
 * Submit a question. Enforces the single-flight contract: while a request
 * is pending, further submissions are ignored and no network call is made.
 * The state object is mutated in place; turns are append-only.
 */
export async function submitQuestion(
  state: UiState,
  client: ApiClient,
  text: string,
): Promise<SubmitResult> {
  const question = text.trim();
  if (!question || state.pending) {
    return { kind: "ignored" };
  }
  state.pending = true;
  state.error = null;
  state.retryAfterS = null;
  try {
    const resp: AskResponse = await client.ask({
      question,
      session_id: state.sessionId ?? undefined,
      topic_filter: state.topicFilter ?? undefined,
    });
    const turn = toTurn(question, resp);
    state.sessionId = resp.session_id;
    state.turns.push(turn);
    return { kind: "answered", turn };
  } catch (err) {
    if (err instanceof RateLimitedError) {
      state.retryAfterS = err.retryAfterS;
      return { kind: "rate-limited", retryAfterS: err.retryAfterS };
    }
    const message = err instanceof Error ? err.message : String(err);
    state.error = message;
    return { kind: "error", message };
  } finally {
    state.pending = false;
  }
}

function toTurn(question: string, resp: AskResponse): ChatTurnView {
  return {
    question,
    answerText: resp.answer,
    // Chips are a pure projection of the payload; rejected turns carry none.
    citations: resp.rejected ? [] : resp.citations,
    rejected: resp.rejected,
    timestamp: Date.now(),
  };
}

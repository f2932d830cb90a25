/** Application wiring: mounts the chat UI onto a host element. */

import { ApiClient, CitationView } from "./api.js";
import { recordFeedback } from "./feedback.js";
import { renderErrorBanner, renderSourcePanel, renderTurn } from "./render.js";
import { initialState, submitQuestion, UiState } from "./state.js";

export interface AppHandles {
  state: UiState;
  submit: (text: string) => Promise<void>;
}

export function mountApp(
  host: HTMLElement,
  client: ApiClient,
  storage: Storage = localStorage,
): AppHandles {
  const state = initialState();

  host.innerHTML = "";
  const log = document.createElement("main");
  log.className = "chat-log";
  const sourceSlot = document.createElement("div");
  sourceSlot.className = "source-slot";
  const statusSlot = document.createElement("div");
  statusSlot.className = "status-slot";

  const form = document.createElement("form");
  form.className = "ask-form";
  const topicInput = document.createElement("input");
  topicInput.className = "topic-filter";
  topicInput.placeholder = "Topic filter (optional)";
  const questionInput = document.createElement("input");
  questionInput.className = "question-input";
  questionInput.placeholder = "Ask about the course material…";
  const sendButton = document.createElement("button");
  sendButton.type = "submit";
  sendButton.textContent = "Ask";
  form.append(topicInput, questionInput, sendButton);
  host.append(log, sourceSlot, statusSlot, form);

  const setPendingUi = () => {
    questionInput.disabled = state.pending || state.retryAfterS !== null;
    sendButton.disabled = questionInput.disabled;
  };

  const showCitation = (citation: CitationView) => {
    sourceSlot.innerHTML = "";
    sourceSlot.appendChild(renderSourcePanel(citation));
  };

  const appendFeedbackButtons = (container: HTMLElement, turnIndex: number) => {
    const row = document.createElement("div");
    row.className = "feedback";
    for (const value of ["helpful", "not-helpful"] as const) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = `feedback-${value}`;
      btn.textContent = value === "helpful" ? "Helpful" : "Not helpful";
      btn.addEventListener("click", () => {
        if (state.sessionId) {
          recordFeedback(storage, state.sessionId, turnIndex, value);
          row.querySelectorAll("button").forEach((b) => (b.disabled = true));
        }
      });
      row.appendChild(btn);
    }
    container.appendChild(row);
  };

  let countdownTimer: ReturnType<typeof setInterval> | null = null;
  const startCountdown = (seconds: number) => {
    let remaining = Math.ceil(seconds);
    statusSlot.textContent = `Rate limited — retry in ${remaining}s`;
    if (countdownTimer) clearInterval(countdownTimer);
    countdownTimer = setInterval(() => {
      remaining -= 1;
      if (remaining <= 0) {
        if (countdownTimer) clearInterval(countdownTimer);
        state.retryAfterS = null;
        statusSlot.textContent = "";
        setPendingUi();
      } else {
        statusSlot.textContent = `Rate limited — retry in ${remaining}s`;
      }
    }, 1000);
  };

  const submit = async (text: string) => {
    state.topicFilter = topicInput.value.trim() || null;
    setPendingUi();
    const result = await submitQuestion(state, client, text);
    if (result.kind === "answered") {
      statusSlot.textContent = "";
      const node = renderTurn(result.turn, showCitation);
      if (!result.turn.rejected) {
        appendFeedbackButtons(node, state.turns.length - 1);
      }
      log.appendChild(node);
      questionInput.value = "";
    } else if (result.kind === "error") {
      statusSlot.innerHTML = "";
      statusSlot.appendChild(
        renderErrorBanner(result.message, () => void submit(text)),
      );
    } else if (result.kind === "rate-limited") {
      startCountdown(result.retryAfterS);
    }
    setPendingUi();
  };

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    void submit(questionInput.value);
  });

  return { state, submit };
}

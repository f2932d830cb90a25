/** DOM rendering for chat turns, citation chips, and the source panel.
 *
 * All answer text enters the DOM through textContent / createTextNode, so
 * model output can never inject HTML.
 */

import { CitationView } from "./api.js";
import { renderMathText } from "./latex.js";
import { ChatTurnView } from "./state.js";

export function renderTurn(
  turn: ChatTurnView,
  onCitationClick: (citation: CitationView) => void,
): HTMLElement {
  const root = document.createElement("article");
  root.className = "turn";

  const q = document.createElement("p");
  q.className = "question";
  q.textContent = turn.question;
  root.appendChild(q);

  const a = document.createElement("div");
  a.className = turn.rejected ? "answer rejection-banner" : "answer";
  if (turn.rejected) {
    // The standardized message renders verbatim, untypeset.
    a.textContent = turn.answerText;
  } else {
    a.appendChild(renderMathText(turn.answerText));
  }
  root.appendChild(a);

  if (!turn.rejected && turn.citations.length > 0) {
    const chips = document.createElement("div");
    chips.className = "citations";
    for (const citation of turn.citations) {
      const chip = document.createElement("button");
      chip.type = "button";
      chip.className = "citation-chip";
      chip.textContent = `[${citation.number}]`;
      chip.dataset.sourceRef = citation.source_ref;
      chip.addEventListener("click", () => onCitationClick(citation));
      chips.appendChild(chip);
    }
    root.appendChild(chips);
  }
  return root;
}

export function renderSourcePanel(citation: CitationView): HTMLElement {
  const panel = document.createElement("aside");
  panel.className = "source-panel";
  const ref = document.createElement("p");
  ref.className = "source-ref";
  ref.textContent = citation.source_ref;
  const score = document.createElement("p");
  score.className = "source-score";
  score.textContent = `retrieval score ${citation.score.toFixed(3)}`;
  panel.append(ref, score);
  return panel;
}

export function renderErrorBanner(message: string, onRetry: () => void): HTMLElement {
  const banner = document.createElement("div");
  banner.className = "error-banner";
  const text = document.createElement("span");
  text.textContent = message;
  const retry = document.createElement("button");
  retry.type = "button";
  retry.textContent = "Retry";
  retry.addEventListener("click", onRetry);
  banner.append(text, retry);
  return banner;
}

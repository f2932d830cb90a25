/** Minimal client-side typesetting of $...$ spans with plain-text fallback.
 *
 * Handles the constructs common in course answers: \frac{a}{b}, ^ and _
 * scripts, and Greek-letter commands. Anything that fails to parse renders
 * as the original plain text.
 */

const GREEK: Record<string, string> = {
  tau: "τ",
  sigma: "σ",
  epsilon: "ε",
  theta: "θ",
  phi: "φ",
  delta: "δ",
  pi: "π",
  nu: "ν",
  gamma: "γ",
  omega: "ω",
  rho: "ρ",
  lambda: "λ",
  alpha: "α",
  beta: "β",
  mu: "μ",
};

/** Split text into alternating plain and math segments. */
export function splitMathSpans(
  text: string,
): Array<{ math: boolean; body: string }> {
  const out: Array<{ math: boolean; body: string }> = [];
  let rest = text;
  for (;;) {
    const open = rest.indexOf("$");
    if (open < 0) break;
    const close = rest.indexOf("$", open + 1);
    if (close < 0) break;
    if (open > 0) out.push({ math: false, body: rest.slice(0, open) });
    out.push({ math: true, body: rest.slice(open + 1, close) });
    rest = rest.slice(close + 1);
  }
  if (rest) out.push({ math: false, body: rest });
  return out;
}

/** Typeset one math span into a DOM node; throws if it cannot. */
function typesetInto(parent: HTMLElement, src: string): void {
  let i = 0;
  const emit = (node: Node) => parent.appendChild(node);
  while (i < src.length) {
    const ch = src[i];
    if (ch === "\\") {
      const m = /^\\([a-zA-Z]+)/.exec(src.slice(i));
      if (!m) throw new Error("bad command");
      const name = m[1];
      i += m[0].length;
      if (name === "frac") {
        const num = readGroup(src, i);
        const den = readGroup(src, num.next);
        i = den.next;
        const frac = document.createElement("span");
        frac.className = "frac";
        const top = document.createElement("span");
        top.className = "frac-num";
        typesetInto(top, num.body);
        const bottom = document.createElement("span");
        bottom.className = "frac-den";
        typesetInto(bottom, den.body);
        frac.append(top, bottom);
        emit(frac);
      } else if (GREEK[name]) {
        emit(document.createTextNode(GREEK[name]));
      } else {
        throw new Error(`unknown command \\${name}`);
      }
    } else if (ch === "^" || ch === "_") {
      const group = readScript(src, i + 1);
      i = group.next;
      const el = document.createElement(ch === "^" ? "sup" : "sub");
      typesetInto(el, group.body);
      emit(el);
    } else if (ch === "{" ) {
      const group = readGroup(src, i);
      i = group.next;
      typesetInto(parent, group.body);
    } else if (ch === "}") {
      throw new Error("unbalanced brace");
    } else {
      emit(document.createTextNode(ch));
      i += 1;
    }
  }
}

function readGroup(src: string, at: number): { body: string; next: number } {
  if (src[at] !== "{") throw new Error("expected {");
  let depth = 0;
  for (let j = at; j < src.length; j++) {
    if (src[j] === "{") depth += 1;
    else if (src[j] === "}") {
      depth -= 1;
      if (depth === 0) return { body: src.slice(at + 1, j), next: j + 1 };
    }
  }
  throw new Error("unclosed group");
}

function readScript(src: string, at: number): { body: string; next: number } {
  if (src[at] === "{") return readGroup(src, at);
  if (at >= src.length) throw new Error("dangling script");
  return { body: src[at], next: at + 1 };
}

/** Render text with $...$ typesetting; plain text when typesetting fails. */
export function renderMathText(text: string): DocumentFragment {
  const frag = document.createDocumentFragment();
  for (const seg of splitMathSpans(text)) {
    if (!seg.math) {
      frag.appendChild(document.createTextNode(seg.body));
      continue;
    }
    const span = document.createElement("span");
    span.className = "math";
    try {
      typesetInto(span, seg.body);
      frag.appendChild(span);
    } catch {
      frag.appendChild(document.createTextNode(`$${seg.body}$`));
    }
  }
  return frag;
}

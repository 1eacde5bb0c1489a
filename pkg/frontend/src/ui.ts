// DOM layer: renders the session state into a container and wires the
// 1..5 keyboard shortcuts. All state lives in ReviewSession.

import type { ReviewSession, SessionState } from "./session";
import { LIKERT_VALUES } from "./types";

const KEY_LABELS: Record<string, string> = {
  correct: "1 · correct",
  likely: "2 · likely",
  unknown: "3 · unknown",
  implausible: "4 · implausible",
  false: "5 · false",
};

function searchUrl(query: string): string {
  return `https://www.google.com/search?q=${encodeURIComponent(query)}`;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function render(state: SessionState, container: HTMLElement, session: ReviewSession): void {
  container.replaceChildren();

  if (state.phase === "loading") {
    container.append(el("p", "status", "Loading…"));
    return;
  }

  if (state.phase === "offline") {
    const banner = el("div", "banner banner-error");
    banner.append(el("p", "", `Service unreachable: ${state.message}`));
    const retry = el("button", "retry", "Retry") as HTMLButtonElement;
    retry.addEventListener("click", () => void session.retry());
    banner.append(retry);
    container.append(banner);
    return;
  }

  if (state.phase === "terminal") {
    container.append(el("div", "banner banner-terminal", state.message));
    return;
  }

  const header = el("div", "header");
  header.append(
    el("span", "progress", `${state.progress.rated} / ${state.progress.total} rated`),
  );
  if (state.accuracy !== null) {
    header.append(
      el("span", "accuracy", `manual accuracy ${(state.accuracy * 100).toFixed(0)}%`),
    );
  }
  container.append(header);

  if (state.phase === "done") {
    container.append(el("p", "status", "All items rated. Thank you!"));
    return;
  }

  const { item } = state;
  const card = el("div", "card");
  card.append(el("div", "subject", item.subject_label));
  card.append(el("div", "relation", item.relation_phrase));
  card.append(el("div", "object", item.object_label));
  card.append(
    el("div", "confidence", `model confidence ${(item.confidence * 100).toFixed(1)}%`),
  );
  const link = el("a", "search-link", "Verify via web search ↗") as HTMLAnchorElement;
  link.href = searchUrl(item.search_query);
  link.target = "_blank";
  link.rel = "noopener";
  card.append(link);
  container.append(card);

  if (state.failed) {
    const banner = el("div", "banner banner-error");
    banner.append(
      el("p", "", `Submit failed (${state.failed.message}); your selection is kept.`),
    );
    const retry = el("button", "retry", `Retry "${state.failed.value}"`) as HTMLButtonElement;
    retry.addEventListener("click", () => void session.retry());
    banner.append(retry);
    container.append(banner);
  }

  // exactly the five scale options, never anything else
  const buttons = el("div", "ratings");
  for (const value of LIKERT_VALUES) {
    const button = el("button", `rate rate-${value}`, KEY_LABELS[value]) as HTMLButtonElement;
    button.disabled = state.submitting;
    button.dataset.value = value;
    if (state.failed?.value === value) button.classList.add("selected");
    button.addEventListener("click", () => void session.submit(value));
    buttons.append(button);
  }
  container.append(buttons);
}

export function bindKeyboard(session: ReviewSession, target: Document): void {
  target.addEventListener("keydown", (event) => {
    if (event.key >= "1" && event.key <= "5") {
      void session.pressKey(event.key);
    }
  });
}

export function mount(session: ReviewSession, container: HTMLElement): void {
  session.onChange((state) => render(state, container, session));
  bindKeyboard(session, container.ownerDocument);
  render(session.getState(), container, session);
}

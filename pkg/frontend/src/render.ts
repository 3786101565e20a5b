/** DOM rendering. The server's ordering is reproduced verbatim, never resorted. */

import type { Price, RankedEntry } from "./api.js";
import { canSend, likeChips, type UiState } from "./state.js";

export interface Handlers {
  onIngestFixture(): void;
  onSend(): void;
  onReject(itemId: string): void;
  onClearRejections(): void;
  onDraftChange(value: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function priceText(price: Price | null | undefined): string {
  return price ? price.raw : "—";
}

function renderBanner(state: UiState, handlers: Handlers): HTMLElement | null {
  if (!state.banner) {
    return null;
  }
  const banner = el("div", {
    class: `banner banner-${state.banner.kind}`,
    "data-testid": `banner-${state.banner.kind}`,
  });
  banner.appendChild(el("p", {}, state.banner.message));
  if (state.banner.kind === "no-eligible") {
    const clear = el(
      "button",
      { type: "button", "data-testid": "clear-rejections" },
      "Clear rejections",
    );
    clear.addEventListener("click", () => handlers.onClearRejections());
    banner.appendChild(clear);
  }
  return banner;
}

function renderMenuPanel(state: UiState): HTMLElement {
  const panel = el("section", { class: "menu-panel", "data-testid": "menu-panel" });
  panel.appendChild(el("h2", {}, "Menu"));
  if (!state.menu) {
    panel.appendChild(el("p", { class: "placeholder" }, "No menu ingested yet."));
    return panel;
  }
  for (const section of state.menu.sections) {
    const block = el("div", { class: "menu-section", "data-testid": "menu-section" });
    block.appendChild(el("h3", {}, section.title));
    const list = el("ul");
    for (const item of section.items) {
      const row = el("li", { "data-testid": "menu-item" });
      row.appendChild(el("span", { class: "item-name" }, item.name));
      row.appendChild(el("span", { class: "item-price" }, priceText(item.price)));
      if (item.description) {
        row.appendChild(el("p", { class: "item-description" }, item.description));
      }
      list.appendChild(row);
    }
    block.appendChild(list);
    panel.appendChild(block);
  }
  return panel;
}

function renderCard(entry: RankedEntry, state: UiState, handlers: Handlers): HTMLElement {
  const card = el("article", {
    class: "card",
    "data-testid": "card",
    "data-item-id": entry.item_id,
  });
  card.appendChild(el("h4", { class: "card-name" }, entry.name ?? entry.item_id));
  card.appendChild(el("span", { class: "card-price" }, priceText(entry.price)));
  if (entry.rationale.length) {
    const chips = el("div", { class: "chips" });
    for (const term of entry.rationale) {
      chips.appendChild(el("span", { class: "chip" }, term));
    }
    card.appendChild(chips);
  }
  const reject = el("button", { type: "button", "data-testid": "reject" }, "Reject");
  if (state.pending) {
    reject.setAttribute("disabled", "");
  }
  reject.addEventListener("click", () => handlers.onReject(entry.item_id));
  card.appendChild(reject);
  return card;
}

function renderChatPanel(state: UiState, handlers: Handlers): HTMLElement {
  const panel = el("section", { class: "chat-panel" });
  panel.appendChild(el("h2", {}, "Chat"));

  const transcript = el("div", { class: "transcript", "data-testid": "transcript" });
  for (const entry of state.transcript) {
    transcript.appendChild(el("p", { class: `msg msg-${entry.role}` }, entry.text));
  }
  panel.appendChild(transcript);

  if (state.recommendation) {
    if (state.recommendation.degraded) {
      panel.appendChild(
        el("span", { class: "badge", "data-testid": "degraded-badge" }, "offline suggestion"),
      );
    }
    const cards = el("div", { class: "cards", "data-testid": "cards" });
    for (const entry of state.recommendation.ranked) {
      cards.appendChild(renderCard(entry, state, handlers));
    }
    panel.appendChild(cards);
  }

  if (state.rejected.length) {
    const struck = el("ul", { class: "rejected-list", "data-testid": "rejected-list" });
    for (const rejected of state.rejected) {
      struck.appendChild(el("li", { class: "struck", "data-item-id": rejected.itemId }, rejected.name));
    }
    panel.appendChild(struck);
  }

  const form = el("form", { class: "composer" });
  const input = el("input", {
    type: "text",
    placeholder: "What do you recommend from the menu?",
    "data-testid": "query-input",
  });
  input.value = state.draft;
  if (state.pending || !state.menu) {
    input.setAttribute("disabled", "");
  }
  input.addEventListener("input", () => handlers.onDraftChange(input.value));
  const send = el("button", { type: "submit", "data-testid": "send" }, "Send");
  if (!canSend(state)) {
    send.setAttribute("disabled", "");
  }
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSend();
  });
  form.appendChild(input);
  form.appendChild(send);
  panel.appendChild(form);
  return panel;
}

export function render(state: UiState, handlers: Handlers, root: HTMLElement): void {
  root.textContent = "";

  const header = el("header", { class: "topbar" });
  header.appendChild(el("h1", {}, "menulens"));
  if (state.sessionId) {
    header.appendChild(el("code", { class: "session-id" }, state.sessionId));
  }
  const chips = likeChips(state);
  if (chips.length) {
    const chipRow = el("div", { class: "chips", "data-testid": "constraint-chips" });
    for (const chip of chips) {
      chipRow.appendChild(el("span", { class: "chip" }, chip));
    }
    header.appendChild(chipRow);
  }
  const ingest = el("button", { type: "button", "data-testid": "ingest-fixture" }, "Ingest menu");
  if (state.pending) {
    ingest.setAttribute("disabled", "");
  }
  ingest.addEventListener("click", () => handlers.onIngestFixture());
  header.appendChild(ingest);
  root.appendChild(header);

  const banner = renderBanner(state, handlers);
  if (banner) {
    root.appendChild(banner);
  }

  const layout = el("main", { class: "columns" });
  layout.appendChild(renderMenuPanel(state));
  layout.appendChild(renderChatPanel(state, handlers));
  root.appendChild(layout);
}

/** View-model state and its transitions. Rendering reads this, never the wire. */

import type { Menu, Recommendation } from "./api.js";

export interface ChatEntry {
  role: "user" | "assistant";
  text: string;
}

export interface Banner {
  kind: "no-menu" | "no-eligible" | "error";
  message: string;
}

export interface RejectedCard {
  itemId: string;
  name: string;
}

export interface UiState {
  sessionId: string | null;
  menu: Menu | null;
  transcript: ChatEntry[];
  recommendation: Recommendation | null;
  /** Mirrors the server's rejected set: grows on feedback, resets on ingest. */
  rejected: RejectedCard[];
  /** One in-flight mutating request at a time; disables all inputs. */
  pending: boolean;
  draft: string;
  banner: Banner | null;
}

export function initialState(): UiState {
  return {
    sessionId: null,
    menu: null,
    transcript: [],
    recommendation: null,
    rejected: [],
    pending: false,
    draft: "",
    banner: null,
  };
}

export function applyMenu(state: UiState, menu: Menu): void {
  state.menu = menu;
  state.rejected = []; // ingest clears rejections server-side
  state.recommendation = null;
  state.banner = null;
}

export function applyRecommendation(state: UiState, query: string, rec: Recommendation): void {
  state.transcript.push({ role: "user", text: query });
  state.transcript.push({ role: "assistant", text: rec.text });
  state.recommendation = rec;
  state.banner = null;
}

export function applyRejection(state: UiState, itemId: string, name: string, rec: Recommendation): void {
  state.rejected.push({ itemId, name });
  state.recommendation = rec;
  state.banner = null;
}

export function applyNoEligible(state: UiState, itemId: string | null, name: string, message: string): void {
  if (itemId !== null) {
    state.rejected.push({ itemId, name });
  }
  state.recommendation = null;
  state.banner = { kind: "no-eligible", message };
}

export function applyNoMenu(state: UiState, message: string): void {
  state.menu = null;
  state.banner = { kind: "no-menu", message };
}

export function applyError(state: UiState, message: string): void {
  state.banner = { kind: "error", message };
}

/** Constraint chips shown in the header: like-terms the ranker credited. */
export function likeChips(state: UiState): string[] {
  const chips = new Set<string>();
  for (const entry of state.recommendation?.ranked ?? []) {
    for (const term of entry.rationale) {
      chips.add(term);
    }
  }
  return [...chips].sort();
}

export function canSend(state: UiState): boolean {
  return state.menu !== null && !state.pending && state.draft.trim().length > 0;
}

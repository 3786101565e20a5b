/** Controller: wires API calls to state transitions and re-renders. */

import { ApiClient, ApiError, type IngestPayload } from "./api.js";
import {
  applyError,
  applyMenu,
  applyNoEligible,
  applyNoMenu,
  applyRecommendation,
  applyRejection,
  canSend,
  initialState,
  type UiState,
} from "./state.js";
import { render, type Handlers } from "./render.js";

const SESSION_KEY = "menulens.session";

type StorageLike = Pick<Storage, "getItem" | "setItem" | "removeItem">;

export interface BootstrapOptions {
  /** Named preference profile sent when the session is created. */
  profile?: string;
  /** Provides the ingest request body (e.g. a file picker or bundled fixture). */
  ingestSource: () => Promise<IngestPayload>;
  storage?: StorageLike;
}

export interface App {
  state: UiState;
  /** Resolves once session rehydration from storage has settled. */
  ready: Promise<void>;
}

export function bootstrap(root: HTMLElement, api: ApiClient, options: BootstrapOptions): App {
  const state = initialState();
  const storage = options.storage ?? window.localStorage;
  let lastIngestPayload: IngestPayload | null = null;

  const update = () => {
    const hadFocus =
      document.activeElement instanceof HTMLElement &&
      document.activeElement.getAttribute("data-testid") === "query-input";
    render(state, handlers, root);
    if (hadFocus) {
      root.querySelector<HTMLInputElement>('[data-testid="query-input"]')?.focus();
    }
  };

  const fail = (error: unknown) => {
    applyError(state, error instanceof Error ? error.message : String(error));
  };

  async function ensureSession(): Promise<string> {
    if (state.sessionId) {
      return state.sessionId;
    }
    const created = await api.createSession(options.profile);
    state.sessionId = created.session_id;
    storage.setItem(SESSION_KEY, created.session_id);
    return created.session_id;
  }

  async function rehydrate(): Promise<void> {
    const stored = storage.getItem(SESSION_KEY);
    if (!stored) {
      return;
    }
    try {
      const menu = await api.getMenu(stored);
      state.sessionId = stored;
      applyMenu(state, menu);
    } catch (error) {
      if (error instanceof ApiError && error.code === "SESSION_NOT_FOUND") {
        storage.removeItem(SESSION_KEY); // the server evicted it; start fresh
      } else if (error instanceof ApiError && error.code === "NO_MENU_INGESTED") {
        state.sessionId = stored;
      } else {
        fail(error);
      }
    }
  }

  async function withPending(action: () => Promise<void>): Promise<void> {
    if (state.pending) {
      return; // one in-flight mutating request per session
    }
    state.pending = true;
    update();
    try {
      await action();
    } finally {
      state.pending = false;
      update();
    }
  }

  function ingest(payload: IngestPayload): Promise<void> {
    return withPending(async () => {
      try {
        const sessionId = await ensureSession();
        const menu = await api.ingest(sessionId, payload);
        lastIngestPayload = payload;
        applyMenu(state, menu);
      } catch (error) {
        if (error instanceof ApiError && error.status === 422) {
          applyNoMenu(state, error.message);
        } else {
          fail(error);
        }
      }
    });
  }

  const handlers: Handlers = {
    onIngestFixture() {
      if (state.pending) {
        return;
      }
      void options
        .ingestSource()
        .then((payload) => ingest(payload))
        .catch((error) => {
          fail(error);
          update();
        });
    },

    onSend() {
      if (!canSend(state) || !state.sessionId) {
        return;
      }
      const query = state.draft.trim();
      void withPending(async () => {
        try {
          const rec = await api.chat(state.sessionId as string, query);
          applyRecommendation(state, query, rec);
          state.draft = "";
        } catch (error) {
          if (error instanceof ApiError && error.code === "NO_ELIGIBLE_ITEMS") {
            applyNoEligible(state, null, "", error.message);
          } else {
            fail(error);
          }
        }
      });
    },

    onReject(itemId) {
      if (state.pending || !state.sessionId) {
        return;
      }
      const entry = state.recommendation?.ranked.find((r) => r.item_id === itemId);
      const name = entry?.name ?? itemId;
      void withPending(async () => {
        try {
          const rec = await api.feedback(state.sessionId as string, [itemId]);
          applyRejection(state, itemId, name, rec);
        } catch (error) {
          if (error instanceof ApiError && error.code === "NO_ELIGIBLE_ITEMS") {
            // the server recorded the rejection before running out of items
            applyNoEligible(state, itemId, name, error.message);
          } else {
            fail(error);
          }
        }
      });
    },

    onClearRejections() {
      if (state.pending) {
        return;
      }
      if (lastIngestPayload) {
        void ingest(lastIngestPayload); // re-ingest resets the server's rejected set
      } else {
        applyError(state, "Re-ingest the menu to clear rejections.");
        update();
      }
    },

    onDraftChange(value) {
      state.draft = value;
      update();
    },
  };

  const ready = rehydrate().then(update);
  update();
  return { state, ready };
}

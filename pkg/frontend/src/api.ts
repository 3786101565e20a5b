/** Typed client for the /v1 session API. All server access goes through here. */

export interface Price {
  amount_minor: number;
  currency: string;
  raw: string;
}

export interface MenuItem {
  name: string;
  description: string | null;
  price: Price | null;
  tags: string[];
}

export interface MenuSection {
  title: string;
  items: MenuItem[];
}

export interface Menu {
  schema_version: number;
  language_hint: string | null;
  sections: MenuSection[];
}

export interface RankedEntry {
  item_id: string;
  score: number;
  rationale: string[];
  name?: string;
  price?: Price | null;
}

export interface Recommendation {
  ranked: RankedEntry[];
  evidence: string[];
  text: string;
  degraded: boolean;
}

export type IngestPayload = Record<string, unknown>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null; // non-JSON error body; fall through to status handling
      }
    }
    if (!response.ok) {
      const err = (parsed ?? {}) as { code?: string; message?: string };
      throw new ApiError(response.status, err.code ?? "HTTP_ERROR", err.message ?? `HTTP ${response.status}`);
    }
    return parsed as T;
  }

  createSession(profile?: string): Promise<{ session_id: string }> {
    const body = profile ? { preferences_profile: profile } : {};
    return this.request("POST", "/v1/sessions", body);
  }

  ingest(sessionId: string, payload: IngestPayload): Promise<Menu> {
    return this.request("POST", `/v1/sessions/${sessionId}/ingest`, payload);
  }

  chat(sessionId: string, query: string, k?: number): Promise<Recommendation> {
    const body: Record<string, unknown> = { query };
    if (k !== undefined) {
      body.k = k;
    }
    return this.request("POST", `/v1/sessions/${sessionId}/chat`, body);
  }

  feedback(sessionId: string, rejectedItemIds: string[]): Promise<Recommendation> {
    return this.request("POST", `/v1/sessions/${sessionId}/feedback`, {
      rejected_item_ids: rejectedItemIds,
    });
  }

  getMenu(sessionId: string): Promise<Menu> {
    return this.request("GET", `/v1/sessions/${sessionId}/menu`);
  }
}

/** Typed client for the /v1 session API. All server access goes through here. */
export class ApiError extends Error {
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
        this.name = "ApiError";
    }
}
export class ApiClient {
    constructor(base = "") {
        this.base = base;
    }
    async request(method, path, body) {
        const response = await fetch(this.base + path, {
            method,
            headers: body === undefined ? undefined : { "Content-Type": "application/json" },
            body: body === undefined ? undefined : JSON.stringify(body),
        });
        const text = await response.text();
        let parsed = null;
        if (text) {
            try {
                parsed = JSON.parse(text);
            }
            catch {
                parsed = null; // non-JSON error body; fall through to status handling
            }
        }
        if (!response.ok) {
            const err = (parsed ?? {});
            throw new ApiError(response.status, err.code ?? "HTTP_ERROR", err.message ?? `HTTP ${response.status}`);
        }
        return parsed;
    }
    createSession(profile) {
        const body = profile ? { preferences_profile: profile } : {};
        return this.request("POST", "/v1/sessions", body);
    }
    ingest(sessionId, payload) {
        return this.request("POST", `/v1/sessions/${sessionId}/ingest`, payload);
    }
    chat(sessionId, query, k) {
        const body = { query };
        if (k !== undefined) {
            body.k = k;
        }
        return this.request("POST", `/v1/sessions/${sessionId}/chat`, body);
    }
    feedback(sessionId, rejectedItemIds) {
        return this.request("POST", `/v1/sessions/${sessionId}/feedback`, {
            rejected_item_ids: rejectedItemIds,
        });
    }
    getMenu(sessionId) {
        return this.request("GET", `/v1/sessions/${sessionId}/menu`);
    }
}

/** View-model state and its transitions. Rendering reads this, never the wire. */
export function initialState() {
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
export function applyMenu(state, menu) {
    state.menu = menu;
    state.rejected = []; // ingest clears rejections server-side
    state.recommendation = null;
    state.banner = null;
}
export function applyRecommendation(state, query, rec) {
    state.transcript.push({ role: "user", text: query });
    state.transcript.push({ role: "assistant", text: rec.text });
    state.recommendation = rec;
    state.banner = null;
}
export function applyRejection(state, itemId, name, rec) {
    state.rejected.push({ itemId, name });
    state.recommendation = rec;
    state.banner = null;
}
export function applyNoEligible(state, itemId, name, message) {
    if (itemId !== null) {
        state.rejected.push({ itemId, name });
    }
    state.recommendation = null;
    state.banner = { kind: "no-eligible", message };
}
export function applyNoMenu(state, message) {
    state.menu = null;
    state.banner = { kind: "no-menu", message };
}
export function applyError(state, message) {
    state.banner = { kind: "error", message };
}
/** Constraint chips shown in the header: like-terms the ranker credited. */
export function likeChips(state) {
    const chips = new Set();
    for (const entry of state.recommendation?.ranked ?? []) {
        for (const term of entry.rationale) {
            chips.add(term);
        }
    }
    return [...chips].sort();
}
export function canSend(state) {
    return state.menu !== null && !state.pending && state.draft.trim().length > 0;
}

"""Query answering over a digital menu: the two-phase retrieve-then-generate
flow, with a deterministic fallback recommender so every answer is
reproducible offline.

The ranked list is always computed deterministically from constraints and
soft preferences, even when an LLM writes the prose: the model's text is a
rendering, never the source of truth for what is recommended.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .errors import LlmUnavailable, NoEligibleItems
from .llmclient import LlmClientConfig, llm_complete
from .menu import DigitalMenu, MenuItem, menu_to_json
from .prefs import (
    ConstraintSet,
    PreferenceDoc,
    PreferenceIndex,
    index_docs,
    retrieve_topk,
    tokenize,
)

logger = logging.getLogger(__name__)

DEFAULT_K = 3
RETRIEVE_K_DOCS = 5
HISTORY_WINDOW = 10
DEFAULT_PROMPT_BUDGET = 8000


@dataclass
class ChatSession:
    id: str
    menu: Optional[DigitalMenu] = None
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    history: list[tuple[str, str]] = field(default_factory=list)  # (role, text)
    rejected_items: set[str] = field(default_factory=set)
    docs: list[PreferenceDoc] = field(default_factory=list)
    index: Optional[PreferenceIndex] = None
    last_k: int = DEFAULT_K

    def doc_by_id(self, doc_id: str) -> Optional[PreferenceDoc]:
        return next((d for d in self.docs if d.id == doc_id), None)


def new_session(
    session_id: str,
    menu: Optional[DigitalMenu] = None,
    docs: Optional[list[PreferenceDoc]] = None,
    constraints: Optional[ConstraintSet] = None,
) -> ChatSession:
    """Build a session with its preference index and constraints prepared."""
    from .prefs import extract_constraints

    docs = docs or []
    return ChatSession(
        id=session_id,
        menu=menu,
        docs=docs,
        index=index_docs(docs),
        constraints=constraints if constraints is not None else extract_constraints(docs),
    )


@dataclass(frozen=True)
class RankedItem:
    item_id: str
    score: int
    rationale: tuple[str, ...]  # matched like-terms, sorted


@dataclass
class Recommendation:
    ranked: list[RankedItem]
    evidence: list[str]  # retrieved preference doc ids, rank order
    text: str
    degraded: bool


def filter_items(menu: DigitalMenu, constraints: ConstraintSet) -> list[str]:
    """Ids of items whose tags avoid every hard exclusion, in menu order."""
    return [
        item_id
        for item_id, _, item in menu.iter_items()
        if not (item.tags & constraints.hard_exclusions)
    ]


def score_item(item: MenuItem, constraints: ConstraintSet) -> int:
    return len(item.tags & constraints.soft_likes) - len(item.tags & constraints.soft_dislikes)


def _price_key(item: MenuItem) -> tuple[int, int]:
    # Absent prices sort after any priced item.
    return (0, item.price.amount_minor) if item.price else (1, 0)


def rank_eligible(session: ChatSession) -> list[RankedItem]:
    """Eligible items ranked by (score desc, price asc, name asc)."""
    if session.menu is None:
        raise ValueError("session has no menu")
    eligible = [
        item_id
        for item_id in filter_items(session.menu, session.constraints)
        if item_id not in session.rejected_items
    ]
    if not eligible:
        raise NoEligibleItems("every menu item is excluded or rejected")
    decorated = []
    for item_id in eligible:
        item = session.menu.get_item(item_id)
        score = score_item(item, session.constraints)
        rationale = tuple(sorted(item.tags & session.constraints.soft_likes))
        decorated.append((-score, _price_key(item), item.name, item_id, score, rationale))
    decorated.sort()
    return [RankedItem(item_id=d[3], score=d[4], rationale=d[5]) for d in decorated]


def render_fallback_text(session: ChatSession, ranked: list[RankedItem]) -> str:
    lines = ["Suggestions from the menu:"]
    for pos, entry in enumerate(ranked, start=1):
        item = session.menu.get_item(entry.item_id)
        line = f"{pos}. {item.name}"
        if item.price:
            line += f" ({item.price.raw})"
        if entry.rationale:
            line += f" [matches your likes: {', '.join(entry.rationale)}]"
        lines.append(line)
    return "\n".join(lines)


def fallback_recommend(session: ChatSession, query: str, k: int = DEFAULT_K) -> Recommendation:
    """Deterministic stand-in for the LLM answer; never touches the network."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    ranked = rank_eligible(session)[:k]
    return Recommendation(
        ranked=ranked,
        evidence=[],
        text=render_fallback_text(session, ranked),
        degraded=True,
    )


def assemble_prompt(
    session: ChatSession,
    retrieved_docs: list[PreferenceDoc],
    query: str,
    char_budget: int = DEFAULT_PROMPT_BUDGET,
) -> str:
    """Deterministic prompt with fixed block order.

    When over budget, only the PREFERENCES block shrinks: its oldest lines
    go first (no timestamp counts as oldest, ties drop the lower-ranked
    line). Surviving lines keep retrieval order.
    """
    if session.menu is None:
        raise ValueError("session has no menu")
    menu_json = menu_to_json(session.menu).decode("utf-8")
    kept = list(enumerate(retrieved_docs))
    constraint_lines = [f"- exclude: {term}" for term in sorted(session.constraints.hard_exclusions)]
    history_lines = [f"{role}: {text}" for role, text in session.history[-HISTORY_WINDOW:]]

    def age_key(pair: tuple[int, PreferenceDoc]):
        rank, doc = pair
        if doc.timestamp is None:
            return (0, 0.0, -rank)
        return (1, doc.timestamp.timestamp(), -rank)

    def render(pairs: list[tuple[int, PreferenceDoc]]) -> str:
        blocks = [
            "[SYSTEM]",
            "Recommend dishes from the menu below. Respect every exclusion. "
            "Prefer dishes matching the diner's recorded tastes. Answer briefly.",
            "[MENU]",
            menu_json,
            "[PREFERENCES]",
            *(f"- {doc.text}" for _, doc in pairs),
            "[CONSTRAINTS]",
            *constraint_lines,
            "[HISTORY]",
            *history_lines,
            "[QUERY]",
            query,
        ]
        return "\n".join(blocks)

    prompt = render(kept)
    while len(prompt) > char_budget and kept:
        kept.remove(min(kept, key=age_key))
        prompt = render(kept)
    return prompt


def retrieve_evidence(session: ChatSession, query: str) -> list[PreferenceDoc]:
    """Phase one: fetch the preference docs most relevant to this query."""
    if session.index is None or session.index.doc_count == 0:
        return []
    titles = " ".join(s.title for s in session.menu.sections) if session.menu else ""
    hits = retrieve_topk(session.index, f"{query} {titles}", RETRIEVE_K_DOCS)
    docs = []
    for doc_id, _ in hits:
        doc = session.doc_by_id(doc_id)
        if doc is not None:
            docs.append(doc)
    return docs


def chat(
    session: ChatSession,
    query: str,
    k: int = DEFAULT_K,
    config: Optional[LlmClientConfig] = None,
) -> Recommendation:
    """Answer one query: retrieve, rank, then render via LLM or fallback."""
    if session.menu is None:
        raise ValueError("session has no menu")
    session.last_k = k
    retrieved = retrieve_evidence(session, query)
    rec = fallback_recommend(session, query, k)
    rec.evidence = [doc.id for doc in retrieved]
    if config is not None:
        prompt = assemble_prompt(session, retrieved, query)
        try:
            rec.text = llm_complete(prompt, config)
            rec.degraded = False
        except LlmUnavailable as e:
            logger.warning("LLM unavailable, serving fallback text: %s", e)
    session.history.append(("user", query))
    session.history.append(("assistant", rec.text))
    return rec


def regenerate(
    session: ChatSession,
    rejected_ids: list[str],
    config: Optional[LlmClientConfig] = None,
) -> Recommendation:
    """Record rejected suggestions and rerun the last query without them."""
    if session.menu is None:
        raise ValueError("session has no menu")
    for item_id in rejected_ids:
        try:
            session.menu.get_item(item_id)
        except KeyError:
            raise KeyError(item_id)
    session.rejected_items.update(rejected_ids)
    last_query = next(
        (text for role, text in reversed(session.history) if role == "user"), ""
    )
    return chat(session, last_query, k=session.last_k, config=config)


def recommendation_to_obj(rec: Recommendation, menu: Optional[DigitalMenu] = None) -> dict:
    """JSON shape served over HTTP; names/prices are included for rendering."""
    ranked = []
    for entry in rec.ranked:
        obj = {
            "item_id": entry.item_id,
            "score": entry.score,
            "rationale": list(entry.rationale),
        }
        if menu is not None:
            item = menu.get_item(entry.item_id)
            obj["name"] = item.name
            obj["price"] = (
                {
                    "amount_minor": item.price.amount_minor,
                    "currency": item.price.currency,
                    "raw": item.price.raw,
                }
                if item.price
                else None
            )
        ranked.append(obj)
    return {
        "ranked": ranked,
        "evidence": rec.evidence,
        "text": rec.text,
        "degraded": rec.degraded,
    }

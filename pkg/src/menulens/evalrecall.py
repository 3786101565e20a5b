"""Item-recall evaluation of parsed menus against ground truth.

Names are aggressively normalized (accents stripped, punctuation dropped),
then fuzzy-matched one-to-one with a greedy highest-similarity-first pass.
The aggregate is a micro-average; the macro per-menu mean is reported
alongside for comparison.
"""
from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field

from .errors import MissingTruth, ParseError, SchemaError

DEFAULT_THETA = 0.8


@dataclass
class GroundTruthMenu:
    menu_id: str
    language: str
    items: list[str]


@dataclass
class MenuRecall:
    matched: int
    total: int

    @property
    def recall(self) -> float:
        return self.matched / self.total if self.total else 1.0


@dataclass
class RecallReport:
    per_menu: dict[str, MenuRecall] = field(default_factory=dict)
    unmatched: list[tuple[str, str]] = field(default_factory=list)  # (menu_id, truth name)

    @property
    def aggregate_recall(self) -> float:
        matched = sum(m.matched for m in self.per_menu.values())
        total = sum(m.total for m in self.per_menu.values())
        return matched / total if total else 1.0

    @property
    def macro_recall(self) -> float:
        if not self.per_menu:
            return 1.0
        return sum(m.recall for m in self.per_menu.values()) / len(self.per_menu)

    def to_obj(self) -> dict:
        return {
            "per_menu": {
                menu_id: {"matched": m.matched, "total": m.total, "recall": m.recall}
                for menu_id, m in sorted(self.per_menu.items())
            },
            "aggregate_recall": self.aggregate_recall,
            "macro_recall": self.macro_recall,
            "unmatched": [[menu_id, name] for menu_id, name in self.unmatched],
        }


def normalize_name(s: str) -> str:
    """NFKD-decompose, strip accents, casefold, drop punctuation, squeeze spaces."""
    decomposed = unicodedata.normalize("NFKD", s)
    stripped = "".join(c for c in decomposed if unicodedata.category(c) != "Mn")
    folded = stripped.casefold()
    no_punct = "".join(c for c in folded if not unicodedata.category(c).startswith("P"))
    return " ".join(no_punct.split())


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance; two-row DP."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # delete
                    current[j - 1] + 1,  # insert
                    previous[j - 1] + (ca != cb),  # substitute
                )
            )
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """1 - distance / max length; 1.0 when both strings are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def match_items(
    parsed_names: list[str],
    truth_names: list[str],
    theta: float = DEFAULT_THETA,
) -> list[tuple[int, int]]:
    """Greedy one-to-one matching of parsed to truth names.

    Candidate pairs at or above the similarity threshold are taken best
    first (ties by truth index then parsed index); each endpoint matches at
    most once. Returns (parsed_index, truth_index) pairs.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    norm_parsed = [normalize_name(n) for n in parsed_names]
    norm_truth = [normalize_name(n) for n in truth_names]
    candidates = []
    for ti, truth in enumerate(norm_truth):
        for pi, parsed in enumerate(norm_parsed):
            sim = similarity(parsed, truth)
            if sim >= theta:
                candidates.append((-sim, ti, pi))
    candidates.sort()
    matched_parsed: set[int] = set()
    matched_truth: set[int] = set()
    pairs = []
    for _, ti, pi in candidates:
        if ti in matched_truth or pi in matched_parsed:
            continue
        matched_truth.add(ti)
        matched_parsed.add(pi)
        pairs.append((pi, ti))
    return pairs


def recall_report(
    parsed_menus: dict[str, list[str]],
    truth_menus: dict[str, GroundTruthMenu],
    theta: float = DEFAULT_THETA,
) -> RecallReport:
    """Per-menu and micro-averaged recall of truth items in parsed output.

    Every parsed menu must have ground truth; a truth menu with no parsed
    counterpart is scored against an empty parse (nothing recovered).
    """
    for menu_id in parsed_menus:
        if menu_id not in truth_menus:
            raise MissingTruth(f"no ground truth for parsed menu {menu_id!r}")
    report = RecallReport()
    for menu_id, truth in sorted(truth_menus.items()):
        parsed = parsed_menus.get(menu_id, [])
        pairs = match_items(parsed, truth.items, theta)
        matched_truth = {ti for _, ti in pairs}
        report.per_menu[menu_id] = MenuRecall(matched=len(pairs), total=len(truth.items))
        for ti, name in enumerate(truth.items):
            if ti not in matched_truth:
                report.unmatched.append((menu_id, name))
    return report


def truth_from_json(data: bytes | str) -> GroundTruthMenu:
    """Parse {"menu_id", "language", "items": [str]} ground truth."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e.msg}", offset=e.pos)
    if not isinstance(obj, dict):
        raise SchemaError("menu_id", "ground truth must be an object")
    for key in ("menu_id", "language"):
        if not isinstance(obj.get(key), str):
            raise SchemaError(key, f"'{key}' must be a string")
    items = obj.get("items")
    if not isinstance(items, list) or not all(isinstance(n, str) and n.strip() for n in items):
        raise SchemaError("items", "'items' must be an array of non-empty strings")
    normalized = [normalize_name(n) for n in items]
    if len(set(normalized)) != len(normalized):
        raise SchemaError("items", "items must be unique after normalization")
    return GroundTruthMenu(menu_id=obj["menu_id"], language=obj["language"], items=list(items))

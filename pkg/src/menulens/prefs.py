"""Personal preference store: file importers, BM25 index, constraint sets.

Live transaction/photo/place integrations are replaced by documented file
formats; everything here is deterministic and dependency-free so retrieval
results are exactly reproducible.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import DuplicateDoc, NotFound, ParseError, SchemaError

logger = logging.getLogger(__name__)

BM25_K1 = 1.2
BM25_B = 0.75
VALID_TAG_KEYS = {"allergen", "likes", "dislikes", "diet"}
SOURCES = ("transactions", "photos", "places", "manual")

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)  # alphanumeric runs, no underscore


@dataclass
class PreferenceDoc:
    id: str
    source: str
    text: str
    tags: set[str] = field(default_factory=set)
    timestamp: Optional[datetime] = None


@dataclass
class PreferenceIndex:
    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_len: dict[str, int] = field(default_factory=dict)
    avg_len: float = 0.0
    doc_count: int = 0


@dataclass
class ConstraintSet:
    hard_exclusions: set[str] = field(default_factory=set)
    soft_likes: set[str] = field(default_factory=set)
    soft_dislikes: set[str] = field(default_factory=set)


def tokenize(text: str) -> list[str]:
    """NFKC-normalize, casefold, split on non-alphanumeric runs."""
    normalized = unicodedata.normalize("NFKC", text).casefold()
    return _WORD_RE.findall(normalized)


# --- importers ----------------------------------------------------------------

_TXN_COLUMNS = ("date", "merchant", "amount", "currency", "category")


def import_transactions(csv_bytes: bytes) -> list[PreferenceDoc]:
    """One doc per transaction row; text is "merchant category"."""
    reader = csv.DictReader(io.StringIO(csv_bytes.decode("utf-8")))
    header = reader.fieldnames or []
    for column in _TXN_COLUMNS:
        if column not in header:
            raise SchemaError(column, f"transactions CSV missing column '{column}'")
    docs = []
    skipped = 0
    for row_no, row in enumerate(reader, start=1):
        try:
            date = datetime.fromisoformat(row["date"]).replace(tzinfo=timezone.utc)
        except (ValueError, TypeError):
            skipped += 1
            continue
        docs.append(
            PreferenceDoc(
                id=f"txn-{row_no}",
                source="transactions",
                text=f"{row['merchant']} {row['category']}",
                timestamp=date,
            )
        )
    if skipped:
        logger.warning("skipped %d transaction row(s) with unparseable dates", skipped)
    return docs


def _load_json_array(json_bytes: bytes, what: str) -> list:
    try:
        payload = json.loads(json_bytes.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"malformed {what} JSON: {e}")
    if not isinstance(payload, list):
        raise SchemaError(what, f"{what} file must be a JSON array")
    return payload


def import_places(json_bytes: bytes) -> list[PreferenceDoc]:
    """Array of {name, note?} favourite places."""
    docs = []
    for i, entry in enumerate(_load_json_array(json_bytes, "places"), start=1):
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
            raise SchemaError("name", "each place needs a string 'name'")
        note = entry.get("note")
        text = f"{entry['name']} {note}" if note else entry["name"]
        docs.append(PreferenceDoc(id=f"place-{i}", source="places", text=text))
    return docs


def import_photos_metadata(json_bytes: bytes) -> list[PreferenceDoc]:
    """Array of {caption, labels[]} photo annotations."""
    docs = []
    for i, entry in enumerate(_load_json_array(json_bytes, "photos"), start=1):
        if not isinstance(entry, dict) or not isinstance(entry.get("caption"), str):
            raise SchemaError("caption", "each photo needs a string 'caption'")
        labels = entry.get("labels", [])
        if not isinstance(labels, list) or not all(isinstance(v, str) for v in labels):
            raise SchemaError("labels", "'labels' must be an array of strings")
        text = " ".join([entry["caption"], *labels])
        docs.append(PreferenceDoc(id=f"photo-{i}", source="photos", text=text))
    return docs


def _clean_tags(raw_tags, where: str) -> set[str]:
    tags = set()
    for tag in raw_tags or []:
        if not isinstance(tag, str) or ":" not in tag:
            logger.warning("ignoring malformed tag %r in %s", tag, where)
            continue
        key = tag.split(":", 1)[0]
        if key not in VALID_TAG_KEYS:
            logger.warning("ignoring tag with unknown key %r in %s", key, where)
            continue
        tags.add(tag)
    return tags


def import_manual(json_bytes: bytes) -> list[PreferenceDoc]:
    """Array of {text, id?, tags?[]} hand-written preference notes."""
    docs = []
    for i, entry in enumerate(_load_json_array(json_bytes, "manual"), start=1):
        if not isinstance(entry, dict) or not isinstance(entry.get("text"), str):
            raise SchemaError("text", "each manual entry needs a string 'text'")
        doc_id = entry.get("id") or f"manual-{i}"
        docs.append(
            PreferenceDoc(
                id=str(doc_id),
                source="manual",
                text=entry["text"],
                tags=_clean_tags(entry.get("tags"), f"manual entry {i}"),
            )
        )
    return docs


def docs_to_json(docs: list[PreferenceDoc]) -> bytes:
    """Canonical store format used by `prefs import` and profile dirs."""
    payload = [
        {
            "id": d.id,
            "source": d.source,
            "text": d.text,
            "tags": sorted(d.tags),
            "timestamp": d.timestamp.isoformat() if d.timestamp else None,
        }
        for d in docs
    ]
    return json.dumps(payload, ensure_ascii=False, indent=2).encode("utf-8")


def docs_from_json(json_bytes: bytes) -> list[PreferenceDoc]:
    docs = []
    for i, entry in enumerate(_load_json_array(json_bytes, "docs"), start=1):
        if not isinstance(entry, dict):
            raise SchemaError("docs", "each doc must be an object")
        for required in ("id", "source", "text"):
            if not isinstance(entry.get(required), str):
                raise SchemaError(required, f"doc {i} missing string '{required}'")
        if entry["source"] not in SOURCES:
            raise SchemaError("source", f"unknown source {entry['source']!r}")
        ts = entry.get("timestamp")
        docs.append(
            PreferenceDoc(
                id=entry["id"],
                source=entry["source"],
                text=entry["text"],
                tags=_clean_tags(entry.get("tags"), f"doc {entry['id']}"),
                timestamp=datetime.fromisoformat(ts) if ts else None,
            )
        )
    return docs


IMPORTERS = {
    "transactions": import_transactions,
    "places": import_places,
    "photos": import_photos_metadata,
    "manual": import_manual,
}

_PROFILE_FILES = {
    "transactions.csv": import_transactions,
    "places.json": import_places,
    "photos.json": import_photos_metadata,
    "manual.json": import_manual,
    "docs.json": docs_from_json,
}


def load_preference_dir(path: str | Path) -> list[PreferenceDoc]:
    """Load every recognized preference file from a profile directory."""
    base = Path(path)
    if not base.is_dir():
        raise NotFound(f"preference directory {base} does not exist")
    docs: list[PreferenceDoc] = []
    for filename, importer in _PROFILE_FILES.items():
        file_path = base / filename
        if file_path.is_file():
            docs.extend(importer(file_path.read_bytes()))
    seen = set()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateDoc(f"duplicate preference doc id {doc.id!r}")
        seen.add(doc.id)
    return docs


# --- index and scoring ---------------------------------------------------------

def index_docs(docs: list[PreferenceDoc]) -> PreferenceIndex:
    """Build the inverted index; postings are sorted by doc id."""
    doc_len: dict[str, int] = {}
    term_freqs: dict[str, dict[str, int]] = {}
    for doc in docs:
        if doc.id in doc_len:
            raise DuplicateDoc(f"duplicate doc id {doc.id!r}")
        terms = tokenize(doc.text)
        doc_len[doc.id] = len(terms)
        for term in terms:
            term_freqs.setdefault(term, {}).setdefault(doc.id, 0)
            term_freqs[term][doc.id] += 1
    postings = {
        term: sorted(freqs.items()) for term, freqs in term_freqs.items()
    }
    n = len(doc_len)
    avg_len = sum(doc_len.values()) / n if n else 0.0
    return PreferenceIndex(postings=postings, doc_len=doc_len, avg_len=avg_len, doc_count=n)


def _idf(index: PreferenceIndex, term: str) -> float:
    df = len(index.postings.get(term, ()))
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_score(
    index: PreferenceIndex,
    query_terms: list[str],
    doc_id: str,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> float:
    """Okapi BM25 with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))."""
    if doc_id not in index.doc_len:
        raise NotFound(f"unknown doc id {doc_id!r}")
    length = index.doc_len[doc_id]
    len_ratio = length / index.avg_len if index.avg_len > 0 else 1.0
    score = 0.0
    for term in query_terms:
        postings = index.postings.get(term)
        if not postings:
            continue
        tf = next((freq for d, freq in postings if d == doc_id), 0)
        if tf == 0:
            continue
        norm = tf + k1 * (1.0 - b + b * len_ratio)
        score += _idf(index, term) * (tf * (k1 + 1.0)) / norm
    return score


def retrieve_topk(index: PreferenceIndex, query: str, k: int) -> list[tuple[str, float]]:
    """Top-k docs by BM25, score descending, doc id ascending on ties."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k == 0 or index.doc_count == 0:
        return []
    terms = tokenize(query)
    candidates: list[str] = []
    seen = set()
    for term in terms:
        for doc_id, _ in index.postings.get(term, ()):
            if doc_id not in seen:
                seen.add(doc_id)
                candidates.append(doc_id)
    scored = [(doc_id, bm25_score(index, terms, doc_id)) for doc_id in candidates]
    scored = [(doc_id, s) for doc_id, s in scored if s > 0.0]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


# --- constraints ----------------------------------------------------------------

def load_allergen_lexicon() -> dict[str, dict[str, list[str]]]:
    """Bundled allergen -> {language tag -> ingredient terms} map."""
    data = resources.files("menulens.data").joinpath("allergens.json").read_bytes()
    return json.loads(data)


def expand_allergen(name: str, lexicon: Optional[dict] = None) -> set[str]:
    """All single-token ingredient terms for one allergen, plus the name itself."""
    lexicon = lexicon if lexicon is not None else load_allergen_lexicon()
    terms = {name.casefold()}
    for lang_terms in lexicon.get(name.casefold(), {}).values():
        terms.update(t.casefold() for t in lang_terms)
    return terms


def extract_constraints(docs: list[PreferenceDoc], lexicon: Optional[dict] = None) -> ConstraintSet:
    """Collect allergen/likes/dislikes tags into a ConstraintSet.

    Allergens expand through the lexicon into hard exclusions; likes and
    dislikes stay soft. Hard terms win any collision with soft sets.
    """
    lexicon = lexicon if lexicon is not None else load_allergen_lexicon()
    constraints = ConstraintSet()
    for doc in docs:
        for tag in sorted(doc.tags):
            if ":" not in tag:
                logger.warning("ignoring malformed tag %r on doc %s", tag, doc.id)
                continue
            key, value = tag.split(":", 1)
            value = value.casefold().strip()
            if key == "allergen":
                constraints.hard_exclusions |= expand_allergen(value, lexicon)
            elif key == "likes":
                constraints.soft_likes.add(value)
            elif key == "dislikes":
                constraints.soft_dislikes.add(value)
            elif key == "diet":
                logger.debug("diet tag %r noted but not mapped to constraints", value)
            else:
                logger.warning("ignoring tag with unknown key %r on doc %s", key, doc.id)
    constraints.soft_likes -= constraints.hard_exclusions
    constraints.soft_dislikes -= constraints.hard_exclusions
    return constraints

"""Turn reading-order text into a structured digital menu.

Two paths produce the same DigitalMenu shape: a deterministic line grammar
(price detection, all-caps section headers, lowercase description
continuations) and an LLM call that is asked to emit the JSON schema
directly and falls back to the grammar when it misbehaves.
"""
from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import EmptyMenu, LlmRejected, LlmUnavailable, ParseError, SchemaError
from .layout import ReadingOrderDocument, TextLine, lines_to_text
from .llmclient import LlmClientConfig, llm_complete
from .prefs import tokenize

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
GENERAL_SECTION = "GENERAL"
NOISE_CONFIDENCE = 0.3
HEADER_LETTER_RATIO = 0.7
HEADER_MAX_LEN = 40

CURRENCY_BY_MARKER = {
    "€": "EUR",
    "$": "USD",
    "£": "GBP",
    "zł": "PLN",
    "zl": "PLN",
}

_MARKER = r"€|\$|£|zł|zl|[A-Z]{3}"
_PRICE_RE = re.compile(
    r"(?:^|(?<=\s))"
    r"(?:(?P<pre>" + _MARKER + r")\s?)?"
    r"(?P<num>\d+(?:[.,]\d{2})?)"
    r"(?:\s?(?P<post>" + _MARKER + r"))?"
    r"\s*$"
)


class LineClass(enum.Enum):
    SECTION_HEADER = "section_header"
    ITEM = "item"
    DESCRIPTION = "description"
    NOISE = "noise"


@dataclass(frozen=True)
class Price:
    amount_minor: int
    currency: str  # ISO-4217 code or "UNKNOWN"
    raw: str

    def __post_init__(self):
        if self.amount_minor < 0:
            raise ValueError(f"amount_minor must be >= 0, got {self.amount_minor}")


@dataclass
class MenuItem:
    name: str
    description: Optional[str] = None
    price: Optional[Price] = None
    source_lines: list[int] = field(default_factory=list)
    tags: set[str] = field(default_factory=set)


@dataclass
class MenuSection:
    title: str
    items: list[MenuItem] = field(default_factory=list)
    source_lines: list[int] = field(default_factory=list)


@dataclass
class Provenance:
    image_ref: str = ""
    keyframe_index: Optional[int] = None
    parser: str = "grammar"  # grammar | llm | grammar-fallback


@dataclass
class DigitalMenu:
    sections: list[MenuSection] = field(default_factory=list)
    language_hint: Optional[str] = None
    provenance: Provenance = field(default_factory=Provenance)

    def item_count(self) -> int:
        return sum(len(s.items) for s in self.sections)

    def iter_items(self):
        """Yield (item_id, section, item) with ids of the form 'si.ii'."""
        for si, section in enumerate(self.sections):
            for ii, item in enumerate(section.items):
                yield f"{si}.{ii}", section, item

    def get_item(self, item_id: str) -> MenuItem:
        try:
            si, ii = (int(part) for part in item_id.split("."))
            return self.sections[si].items[ii]
        except (ValueError, IndexError):
            raise KeyError(item_id)


def parse_price(text: str) -> Optional[Price]:
    """Match a trailing price: optional currency marker, amount, optional marker.

    Amounts take '.' or ',' as the decimal separator with exactly zero or
    two decimals; bare integers mean whole currency units. Returns None when
    the line does not end in a price.
    """
    match = _PRICE_RE.search(text)
    if match is None:
        return None
    num = match.group("num")
    if "," in num or "." in num:
        whole, cents = re.split(r"[.,]", num)
        amount_minor = int(whole) * 100 + int(cents)
    else:
        amount_minor = int(num) * 100
    marker = match.group("pre") or match.group("post")
    currency = CURRENCY_BY_MARKER.get(marker, marker) if marker else "UNKNOWN"
    raw = match.group(0).rstrip()
    return Price(amount_minor=amount_minor, currency=currency, raw=raw)


def classify_line(
    line: TextLine,
    prev_class: Optional[LineClass],
    noise_confidence: float = NOISE_CONFIDENCE,
) -> LineClass:
    """Assign a grammar role to one line. Rules apply in a fixed order:

    1. low mean confidence is noise;
    2. a trailing price makes an item;
    3. short all-caps, letter-heavy lines are section headers;
    4. after an item, a lowercase or parenthesized start continues it as a
       description;
    5. anything else is a price-less item.
    """
    if line.mean_confidence < noise_confidence:
        return LineClass.NOISE
    text = line.text
    if parse_price(text) is not None:
        return LineClass.ITEM
    non_space = [c for c in text if not c.isspace()]
    letters = [c for c in non_space if c.isalpha()]
    if (
        non_space
        and letters
        and len(letters) / len(non_space) >= HEADER_LETTER_RATIO
        and all(c.isupper() for c in letters)
        and len(text) <= HEADER_MAX_LEN
    ):
        return LineClass.SECTION_HEADER
    if prev_class in (LineClass.ITEM, LineClass.DESCRIPTION):
        first_alpha = next((c for c in text if c.isalpha()), None)
        if text.startswith("(") or (first_alpha is not None and first_alpha.islower()):
            return LineClass.DESCRIPTION
    return LineClass.ITEM


def _item_tags(item: MenuItem) -> set[str]:
    text = item.name + (" " + item.description if item.description else "")
    return set(tokenize(text))


_GREEK_RANGES = ((0x0370, 0x03FF), (0x1F00, 0x1FFF))


def detect_language_hint(text: str) -> Optional[str]:
    """'el' when at least half of the letters are Greek, else None."""
    letters = [c for c in text if c.isalpha()]
    if not letters:
        return None
    greek = sum(1 for c in letters if any(lo <= ord(c) <= hi for lo, hi in _GREEK_RANGES))
    return "el" if greek / len(letters) >= 0.5 else None


def build_menu(doc: ReadingOrderDocument, provenance: Optional[Provenance] = None) -> DigitalMenu:
    """Fold classified lines, in reading order, into sections and items.

    Items appearing before any header land in the implicit GENERAL section.
    A bare trailing price (no name left after stripping it) attaches to the
    previous item when that item has no price yet, so split name/price lines
    still produce one priced item.
    """
    provenance = provenance or Provenance()
    sections: list[MenuSection] = []
    last_item: Optional[MenuItem] = None
    prev_class: Optional[LineClass] = None

    def current_section() -> MenuSection:
        if not sections:
            sections.append(MenuSection(title=GENERAL_SECTION))
        return sections[-1]

    for i, line in enumerate(doc.lines):
        cls = classify_line(line, prev_class)
        if cls is LineClass.NOISE:
            continue  # dropped; does not interrupt an item/description run
        if cls is LineClass.SECTION_HEADER:
            sections.append(MenuSection(title=line.text, source_lines=[i]))
        elif cls is LineClass.ITEM:
            text = line.text
            price = parse_price(text)
            name = text[: text.rfind(price.raw)].rstrip() if price else text.strip()
            if not name and price is not None:
                if last_item is not None and last_item.price is None:
                    last_item.price = price
                    last_item.source_lines.append(i)
                    prev_class = cls
                    continue
                name = price.raw
            item = MenuItem(name=name, price=price, source_lines=[i])
            current_section().items.append(item)
            last_item = item
        elif cls is LineClass.DESCRIPTION:
            assert last_item is not None  # guaranteed by classify_line
            text = line.text.strip()
            last_item.description = (
                f"{last_item.description} {text}" if last_item.description else text
            )
            last_item.source_lines.append(i)
        prev_class = cls

    menu = DigitalMenu(sections=sections, provenance=provenance)
    if menu.item_count() == 0:
        raise EmptyMenu("no menu items parsed")
    for _, _, item in menu.iter_items():
        item.tags = _item_tags(item)
    full_text = " ".join(
        [s.title for s in sections]
        + [item.name + " " + (item.description or "") for _, _, item in menu.iter_items()]
    )
    menu.language_hint = detect_language_hint(full_text)
    return menu


# --- serialization -----------------------------------------------------------

def menu_to_obj(menu: DigitalMenu) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "language_hint": menu.language_hint,
        "provenance": {
            "image_ref": menu.provenance.image_ref,
            "keyframe_index": menu.provenance.keyframe_index,
            "parser": menu.provenance.parser,
        },
        "sections": [
            {
                "title": s.title,
                "source_lines": s.source_lines,
                "items": [
                    {
                        "name": it.name,
                        "description": it.description,
                        "price": (
                            {
                                "amount_minor": it.price.amount_minor,
                                "currency": it.price.currency,
                                "raw": it.price.raw,
                            }
                            if it.price
                            else None
                        ),
                        "source_lines": it.source_lines,
                        "tags": sorted(it.tags),
                    }
                    for it in s.items
                ],
            }
            for s in menu.sections
        ],
    }


def menu_to_json(menu: DigitalMenu) -> bytes:
    """Canonical serialization: sorted keys, UTF-8, 2-space indent."""
    return json.dumps(menu_to_obj(menu), ensure_ascii=False, sort_keys=True, indent=2).encode("utf-8")


def menu_from_obj(obj) -> DigitalMenu:
    if not isinstance(obj, dict):
        raise SchemaError("menu", "menu must be an object")
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"expected schema_version {SCHEMA_VERSION}")
    prov_obj = obj.get("provenance") or {}
    if not isinstance(prov_obj, dict):
        raise SchemaError("provenance", "provenance must be an object")
    provenance = Provenance(
        image_ref=str(prov_obj.get("image_ref", "")),
        keyframe_index=prov_obj.get("keyframe_index"),
        parser=str(prov_obj.get("parser", "grammar")),
    )
    raw_sections = obj.get("sections")
    if not isinstance(raw_sections, list):
        raise SchemaError("sections", "'sections' must be an array")
    sections = []
    for s in raw_sections:
        if not isinstance(s, dict) or not isinstance(s.get("title"), str):
            raise SchemaError("sections.title", "each section needs a string title")
        items = []
        for raw in s.get("items", []):
            name = raw.get("name") if isinstance(raw, dict) else None
            if not isinstance(name, str) or not name.strip():
                raise SchemaError("items.name", "item name must be a non-empty string")
            price = None
            if raw.get("price") is not None:
                p = raw["price"]
                if (
                    not isinstance(p, dict)
                    or not isinstance(p.get("amount_minor"), int)
                    or p["amount_minor"] < 0
                    or not isinstance(p.get("currency"), str)
                ):
                    raise SchemaError("items.price", "price needs amount_minor >= 0 and currency")
                price = Price(
                    amount_minor=p["amount_minor"],
                    currency=p["currency"],
                    raw=str(p.get("raw", "")),
                )
            source_lines = raw.get("source_lines", [])
            if not isinstance(source_lines, list) or not all(isinstance(v, int) for v in source_lines):
                raise SchemaError("items.source_lines", "source_lines must be an array of integers")
            if sorted(source_lines) != source_lines:
                raise SchemaError("items.source_lines", "source_lines must be ascending")
            description = raw.get("description")
            if description is not None and not isinstance(description, str):
                raise SchemaError("items.description", "description must be a string or null")
            item = MenuItem(
                name=name,
                description=description,
                price=price,
                source_lines=source_lines,
            )
            item.tags = set(raw.get("tags") or []) or _item_tags(item)
            items.append(item)
        section_lines = s.get("source_lines", [])
        if not isinstance(section_lines, list) or not all(isinstance(v, int) for v in section_lines):
            raise SchemaError("sections.source_lines", "source_lines must be an array of integers")
        sections.append(MenuSection(title=s["title"], items=items, source_lines=section_lines))
    hint = obj.get("language_hint")
    if hint is not None and not isinstance(hint, str):
        raise SchemaError("language_hint", "language_hint must be a string or null")
    return DigitalMenu(sections=sections, language_hint=hint, provenance=provenance)


def menu_from_json(data: bytes | str) -> DigitalMenu:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e.msg}", offset=e.pos)
    return menu_from_obj(obj)


def menu_to_markdown(menu: DigitalMenu) -> str:
    """Render sections as headers and items as "name — price" bullets."""
    out: list[str] = []
    for section in menu.sections:
        out.append(f"## {section.title}")
        for item in section.items:
            bullet = f"- {item.name} — {item.price.raw}" if item.price else f"- {item.name}"
            out.append(bullet)
            if item.description:
                out.append(f"  {item.description}")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


# --- LLM path ----------------------------------------------------------------

_LLM_INSTRUCTION = """\
You digitize restaurant menus. Convert the OCR text below into JSON with this exact shape:
{"schema_version": 1, "language_hint": null, "provenance": {"image_ref": "", "keyframe_index": null, "parser": "llm"},
 "sections": [{"title": str, "source_lines": [], "items": [{"name": str, "description": str|null,
 "price": {"amount_minor": int, "currency": str, "raw": str}|null, "source_lines": [], "tags": []}]}]}
Amounts are integer minor currency units (cents). Reply with JSON only, no prose, no code fences.

MENU TEXT:
"""

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


def _strip_fences(reply: str) -> str:
    match = _FENCE_RE.match(reply.strip())
    return match.group(1) if match else reply.strip()


def llm_structure_menu(
    doc: ReadingOrderDocument,
    provenance: Optional[Provenance] = None,
    config: Optional[LlmClientConfig] = None,
    complete: Optional[Callable[[str], str]] = None,
) -> DigitalMenu:
    """Digitize via the chat-completion endpoint, with the grammar as a net.

    One malformed reply earns a single correction round trip; a second
    failure, or an unreachable endpoint, falls back to build_menu and the
    provenance parser field records the degraded path. `complete` overrides
    the HTTP client for tests.
    """
    provenance = provenance or Provenance()
    if complete is None:
        if config is None:
            return build_menu(doc, provenance)
        def complete(prompt: str) -> str:
            return llm_complete(prompt, config)

    raw_text = lines_to_text(doc)
    prompt = _LLM_INSTRUCTION + raw_text

    def attempt(p: str) -> DigitalMenu:
        reply = complete(p)
        menu = menu_from_json(_strip_fences(reply))
        if menu.item_count() == 0:
            raise SchemaError("items", "reply contained no items")
        return menu

    for round_no in range(2):
        try:
            menu = attempt(prompt)
            menu.provenance = Provenance(
                image_ref=provenance.image_ref,
                keyframe_index=provenance.keyframe_index,
                parser="llm",
            )
            if menu.language_hint is None:
                menu.language_hint = detect_language_hint(raw_text)
            return menu
        except (ParseError, SchemaError) as e:
            logger.warning("LLM menu reply invalid (round %d): %s", round_no + 1, e)
            prompt = (
                _LLM_INSTRUCTION
                + raw_text
                + f"\n\nYour previous reply was invalid ({e}). Reply with only the JSON object."
            )
        except (LlmUnavailable, LlmRejected) as e:
            logger.warning("LLM unreachable, falling back to grammar parser: %s", e)
            break
    fallback_prov = Provenance(
        image_ref=provenance.image_ref,
        keyframe_index=provenance.keyframe_index,
        parser="grammar-fallback",
    )
    return build_menu(doc, fallback_prov)

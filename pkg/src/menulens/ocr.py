"""Canonical OCR token format and adapters for external engines.

The pipeline never runs OCR itself. Engines plug in through a small stdio
contract: given an image path they print one JSON document in the canonical
schema below, and `run_external_ocr` turns that into an OcrDocument.

Canonical schema::

    {"image_ref": str,
     "dims": {"width": int, "height": int},
     "tokens": [{"text": str, "quad": [[x, y] x 4], "confidence": num}]}
"""
from __future__ import annotations

import json
import shlex
import subprocess
import unicodedata
from dataclasses import dataclass, field

from .errors import EngineError, EngineTimeout, InvalidGeometry, ParseError, SchemaError
from .keyframe import ImageDims, parse_dims

DEFAULT_OCR_TIMEOUT = 60.0

Quad = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class OcrToken:
    """One recognized text fragment with its image-space quadrilateral."""

    text: str
    quad: Quad  # 4 points, clockwise from top-left
    confidence: float

    def __post_init__(self):
        if not self.text.strip():
            raise SchemaError("text", "token text must be non-empty")
        if len(self.quad) != 4:
            raise SchemaError("quad", f"quad must have 4 points, got {len(self.quad)}")
        if not 0.0 <= self.confidence <= 1.0:
            raise SchemaError("confidence", f"confidence must be in [0,1], got {self.confidence}")
        quad_to_bbox(self.quad)  # rejects degenerate quads

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return quad_to_bbox(self.quad)


@dataclass
class OcrDocument:
    image_ref: str
    dims: ImageDims
    tokens: list[OcrToken] = field(default_factory=list)


def quad_to_bbox(quad) -> tuple[float, float, float, float]:
    """Axis-aligned envelope of a 4-point quad."""
    if len(quad) != 4:
        raise InvalidGeometry(f"quad must have 4 points, got {len(quad)}")
    xs = [p[0] for p in quad]
    ys = [p[1] for p in quad]
    x_min, x_max = min(xs), max(xs)
    y_min, y_max = min(ys), max(ys)
    if x_min >= x_max or y_min >= y_max:
        raise InvalidGeometry(f"zero-area quad envelope {quad}")
    return (x_min, y_min, x_max, y_max)


def _clamp_quad(quad: Quad, dims: ImageDims) -> Quad:
    # Out-of-bounds points are clamped, not rejected: engines routinely
    # overshoot the frame by a pixel or two.
    return tuple(
        (min(max(x, 0.0), float(dims.width)), min(max(y, 0.0), float(dims.height)))
        for x, y in quad
    )


def token_from_obj(obj, dims: ImageDims) -> OcrToken:
    if not isinstance(obj, dict):
        raise SchemaError("tokens", "each token must be an object")
    text = obj.get("text")
    if not isinstance(text, str) or not text.strip():
        raise SchemaError("text", "token text must be a non-empty string")
    quad = obj.get("quad")
    if (
        not isinstance(quad, list)
        or len(quad) != 4
        or not all(isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) for v in p) for p in quad)
    ):
        raise SchemaError("quad", "quad must be 4 [x, y] pairs")
    confidence = obj.get("confidence")
    if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
        raise SchemaError("confidence", "confidence must be a number in [0,1]")
    clamped = _clamp_quad(tuple((float(x), float(y)) for x, y in quad), dims)
    # NFC-normalize so the same glyphs compare equal across engines.
    return OcrToken(text=unicodedata.normalize("NFC", text.strip()), quad=clamped, confidence=float(confidence))


def parse_ocr_document(data: bytes | str) -> OcrDocument:
    """Parse canonical OCR JSON, preserving token order."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"input is not UTF-8: {e}", offset=e.start)
    else:
        text = data
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e.msg}", offset=e.pos)
    if not isinstance(payload, dict):
        raise SchemaError("image_ref", "top-level value must be an object")
    image_ref = payload.get("image_ref")
    if not isinstance(image_ref, str):
        raise SchemaError("image_ref", "'image_ref' must be a string")
    dims = parse_dims(payload.get("dims"))
    raw_tokens = payload.get("tokens")
    if not isinstance(raw_tokens, list):
        raise SchemaError("tokens", "'tokens' must be an array")
    seen_ids: set = set()
    tokens = []
    for obj in raw_tokens:
        if isinstance(obj, dict) and "id" in obj:
            if obj["id"] in seen_ids:
                raise SchemaError("id", f"duplicate token id {obj['id']!r}")
            seen_ids.add(obj["id"])
        tokens.append(token_from_obj(obj, dims))
    return OcrDocument(image_ref=image_ref, dims=dims, tokens=tokens)


def serialize_ocr_document(doc: OcrDocument) -> bytes:
    payload = {
        "image_ref": doc.image_ref,
        "dims": {"width": doc.dims.width, "height": doc.dims.height},
        "tokens": [
            {"text": t.text, "quad": [[x, y] for x, y in t.quad], "confidence": t.confidence}
            for t in doc.tokens
        ],
    }
    return json.dumps(payload, ensure_ascii=False, indent=2).encode("utf-8")


def run_external_ocr(
    image_path: str,
    command_template: str,
    timeout: float = DEFAULT_OCR_TIMEOUT,
) -> OcrDocument:
    """Run an external OCR command and parse its stdout.

    The template must contain an `{image}` placeholder, e.g.
    ``"easyocr-wrapper --json {image}"``. The command is split with shell
    rules first and the placeholder substituted per argument, so paths with
    spaces survive.
    """
    if "{image}" not in command_template:
        raise ValueError("command_template must contain an {image} placeholder")
    argv = [arg.replace("{image}", image_path) for arg in shlex.split(command_template)]
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise EngineTimeout(f"OCR command exceeded {timeout}s: {argv[0]}")
    except FileNotFoundError as e:
        raise EngineError(f"OCR command not found: {e}", stderr="")
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace")
        raise EngineError(f"OCR command exited {proc.returncode}", stderr=stderr)
    return parse_ocr_document(proc.stdout)

"""Keyframe selection over per-frame object detections.

Given detector output for a video sequence, pick the frame whose menu card
sits closest to the image center. Centrality is the Euclidean norm of the
box-center offset normalized by half-width/half-height, so values live in
[0, sqrt(2)] regardless of the frame aspect ratio.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import NoMenuDetected, InvalidGeometry, ParseError, SchemaError

DEFAULT_TARGET_LABEL = "menu"
DEFAULT_MIN_CONFIDENCE = 0.5


@dataclass(frozen=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidGeometry(f"image dims must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Detection:
    """One detector box on one frame."""

    frame_index: int
    label: str
    confidence: float
    bbox: tuple[float, float, float, float]  # (x_min, y_min, x_max, y_max)

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")
        x_min, y_min, x_max, y_max = self.bbox
        if x_min >= x_max or y_min >= y_max:
            raise InvalidGeometry(f"degenerate bbox {self.bbox}")


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    centrality: float
    confidence: float


def centrality(bbox: tuple[float, float, float, float], dims: ImageDims) -> float:
    """Distance of the box center from the image center, normalized per axis.

    0.0 means perfectly centered; the corner of the frame scores sqrt(2).
    """
    x_min, y_min, x_max, y_max = bbox
    if x_min >= x_max or y_min >= y_max:
        raise InvalidGeometry(f"degenerate bbox {bbox}")
    cx = (x_min + x_max) / 2.0
    cy = (y_min + y_max) / 2.0
    dx = (cx - dims.width / 2.0) / (dims.width / 2.0)
    dy = (cy - dims.height / 2.0) / (dims.height / 2.0)
    return math.sqrt(dx * dx + dy * dy)


def score_frames(
    detections: list[Detection],
    dims: ImageDims,
    target_label: str = DEFAULT_TARGET_LABEL,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> list[FrameScore]:
    """Score every frame that has a qualifying detection.

    A frame with several qualifying boxes is represented by its best one:
    minimum centrality, then maximum confidence among those tied on it.
    """
    best: dict[int, tuple[float, float]] = {}  # frame -> (centrality, confidence)
    for det in detections:
        if det.label != target_label or det.confidence < min_confidence:
            continue
        c = centrality(det.bbox, dims)
        prev = best.get(det.frame_index)
        if prev is None or (c, -det.confidence) < (prev[0], -prev[1]):
            best[det.frame_index] = (c, det.confidence)
    return [FrameScore(idx, c, conf) for idx, (c, conf) in sorted(best.items())]


def select_keyframe(
    detections: list[Detection],
    dims: ImageDims,
    target_label: str = DEFAULT_TARGET_LABEL,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> int:
    """Pick the frame with the most centrally positioned qualifying box.

    Ties on centrality go to the higher confidence, then the lower frame
    index. Raises NoMenuDetected when nothing qualifies.
    """
    if not 0.0 <= min_confidence <= 1.0:
        raise ValueError(f"min_confidence must be in [0,1], got {min_confidence}")
    winner: tuple[float, float, int] | None = None
    for score in score_frames(detections, dims, target_label, min_confidence):
        key = (score.centrality, -score.confidence, score.frame_index)
        if winner is None or key < winner:
            winner = key
    if winner is None:
        raise NoMenuDetected(f"no detection with label '{target_label}' and confidence >= {min_confidence}")
    return winner[2]


def parse_detections(data: bytes | str) -> tuple[list[Detection], ImageDims]:
    """Parse the wire format: {"detections": [...], "dims": {width, height}}."""
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
    if isinstance(payload, dict):
        raw_dets = payload.get("detections")
        raw_dims = payload.get("dims")
    else:
        raise SchemaError("detections", "top-level object with 'detections' and 'dims' required")
    if not isinstance(raw_dets, list):
        raise SchemaError("detections", "'detections' must be an array")
    dims = parse_dims(raw_dims)
    detections = [detection_from_obj(obj) for obj in raw_dets]
    return detections, dims


def parse_dims(raw) -> ImageDims:
    if not isinstance(raw, dict):
        raise SchemaError("dims", "'dims' must be an object with width and height")
    for field in ("width", "height"):
        if not isinstance(raw.get(field), int) or raw[field] <= 0:
            raise SchemaError(f"dims.{field}", f"'{field}' must be a positive integer")
    return ImageDims(width=raw["width"], height=raw["height"])


def detection_from_obj(obj) -> Detection:
    if not isinstance(obj, dict):
        raise SchemaError("detections", "each detection must be an object")
    try:
        frame_index = obj["frame_index"]
        label = obj["label"]
        confidence = obj["confidence"]
        bbox = obj["bbox"]
    except KeyError as e:
        raise SchemaError(str(e.args[0]), f"detection missing field {e.args[0]}")
    if not isinstance(frame_index, int) or frame_index < 0:
        raise SchemaError("frame_index", "frame_index must be a non-negative integer")
    if not isinstance(label, str):
        raise SchemaError("label", "label must be a string")
    if not isinstance(confidence, (int, float)) or not 0.0 <= confidence <= 1.0:
        raise SchemaError("confidence", "confidence must be a number in [0,1]")
    if not isinstance(bbox, list) or len(bbox) != 4 or not all(isinstance(v, (int, float)) for v in bbox):
        raise SchemaError("bbox", "bbox must be [x_min, y_min, x_max, y_max]")
    try:
        return Detection(frame_index=frame_index, label=label, confidence=float(confidence), bbox=tuple(bbox))
    except InvalidGeometry:
        raise SchemaError("bbox", f"degenerate bbox {bbox}")

"""Reading-order reconstruction from OCR tokens.

Tokens that overlap vertically by at least half the shorter token's height
belong to the same line (taking the transitive closure, so a tall token can
bridge two short ones). Lines cluster into up to three columns by their
left edge, and the final order is column-major: every line of the leftmost
column top to bottom, then the next column.

All functions are pure and permutation-invariant: shuffling the input
tokens yields the identical document.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from statistics import median

from .ocr import OcrToken

LINE_OVERLAP_FRACTION = 0.5
COLUMN_GAP_FRACTION = 0.15
MAX_COLUMNS = 3


@dataclass
class TextLine:
    tokens: list[OcrToken]
    bbox: tuple[float, float, float, float]
    baseline_y: float
    mean_confidence: float

    @property
    def text(self) -> str:
        return " ".join(t.text for t in self.tokens)


@dataclass
class ReadingOrderDocument:
    lines: list[TextLine] = field(default_factory=list)
    column_bounds: list[tuple[float, float]] = field(default_factory=list)
    column_of_line: list[int] = field(default_factory=list)


def _vertical_overlap(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    return max(0.0, min(a[3], b[3]) - max(a[1], b[1]))


def _same_line(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> bool:
    min_height = min(a[3] - a[1], b[3] - b[1])
    return _vertical_overlap(a, b) >= LINE_OVERLAP_FRACTION * min_height


def _token_sort_key(token: OcrToken):
    # Total order over the full token value so equal inputs in any order
    # produce the identical document.
    x_min, y_min, _, _ = token.bbox
    return (x_min, y_min, token.text, token.confidence, token.quad)


def _line_sort_key(line: TextLine):
    return (
        line.baseline_y,
        line.bbox[0],
        line.text,
        tuple(_token_sort_key(t) for t in line.tokens),
    )


def _make_line(tokens: list[OcrToken]) -> TextLine:
    tokens = sorted(tokens, key=_token_sort_key)
    boxes = [t.bbox for t in tokens]
    bbox = (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )
    baseline = median((b[1] + b[3]) / 2.0 for b in boxes)
    mean_conf = sum(t.confidence for t in tokens) / len(tokens)
    return TextLine(tokens=tokens, bbox=bbox, baseline_y=baseline, mean_confidence=mean_conf)


def group_into_lines(tokens: list[OcrToken]) -> list[TextLine]:
    """Partition tokens into text lines via transitive vertical overlap."""
    if not tokens:
        return []
    # Union-find over token indices; the partition is order-independent.
    parent = list(range(len(tokens)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    boxes = [t.bbox for t in tokens]
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens)):
            if _same_line(boxes[i], boxes[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    groups: dict[int, list[OcrToken]] = {}
    for i, token in enumerate(tokens):
        groups.setdefault(find(i), []).append(token)

    lines = [_make_line(members) for members in groups.values()]
    lines.sort(key=_line_sort_key)
    return lines


def detect_columns(lines: list[TextLine], page_width: float) -> list[tuple[float, float]]:
    """Cluster line left edges into at most MAX_COLUMNS columns.

    Walking the sorted left edges, a new cluster opens when the edge sits at
    least COLUMN_GAP_FRACTION * page_width right of the current cluster's
    start. Excess clusters beyond the cap merge into their nearest neighbor.
    """
    if page_width <= 0:
        raise ValueError(f"page_width must be positive, got {page_width}")
    if not lines:
        return []
    threshold = COLUMN_GAP_FRACTION * page_width
    ordered = sorted(lines, key=lambda ln: ln.bbox[0])
    clusters: list[list[TextLine]] = [[ordered[0]]]
    cluster_start = ordered[0].bbox[0]
    for line in ordered[1:]:
        if line.bbox[0] - cluster_start >= threshold:
            clusters.append([line])
            cluster_start = line.bbox[0]
        else:
            clusters[-1].append(line)

    while len(clusters) > MAX_COLUMNS:
        # Merge the pair of adjacent clusters with the smallest start gap.
        starts = [c[0].bbox[0] for c in clusters]
        gaps = [starts[i + 1] - starts[i] for i in range(len(starts) - 1)]
        i = gaps.index(min(gaps))
        clusters[i] = clusters[i] + clusters[i + 1]
        del clusters[i + 1]

    return [
        (min(ln.bbox[0] for ln in c), max(ln.bbox[2] for ln in c))
        for c in clusters
    ]


def assign_column(x_min: float, column_bounds: list[tuple[float, float]]) -> int:
    """Column index for a line starting at x_min.

    Prefers the containing span whose start is closest from the left; lines
    outside every span go to the nearest span by interval distance.
    """
    containing = [
        i for i, (s, e) in enumerate(column_bounds) if s <= x_min <= e
    ]
    if containing:
        return max(containing, key=lambda i: column_bounds[i][0])
    def distance(span: tuple[float, float]) -> float:
        s, e = span
        return s - x_min if x_min < s else x_min - e
    return min(range(len(column_bounds)), key=lambda i: (distance(column_bounds[i]), i))


def reading_order(lines: list[TextLine], column_bounds: list[tuple[float, float]]) -> ReadingOrderDocument:
    """Order lines column-major: column 0 top to bottom, then column 1, ..."""
    if not lines:
        return ReadingOrderDocument(lines=[], column_bounds=list(column_bounds), column_of_line=[])
    assigned = [(assign_column(ln.bbox[0], column_bounds), ln) for ln in lines]
    assigned.sort(key=lambda pair: (pair[0],) + _line_sort_key(pair[1]))
    return ReadingOrderDocument(
        lines=[ln for _, ln in assigned],
        column_bounds=list(column_bounds),
        column_of_line=[col for col, _ in assigned],
    )


def analyze_tokens(tokens: list[OcrToken], page_width: float) -> ReadingOrderDocument:
    """Full layout pass: group lines, detect columns, order for reading."""
    lines = group_into_lines(tokens)
    bounds = detect_columns(lines, page_width)
    return reading_order(lines, bounds)


def lines_to_text(doc: ReadingOrderDocument) -> str:
    """Render the document as plain text, one line per TextLine."""
    return "\n".join(line.text for line in doc.lines)


def layout_to_json_obj(doc: ReadingOrderDocument) -> dict:
    """Debug serialization used by `menu parse --dump-layout`."""
    return {
        "column_bounds": [[s, e] for s, e in doc.column_bounds],
        "lines": [
            {
                "text": line.text,
                "column": doc.column_of_line[i],
                "bbox": list(line.bbox),
                "baseline_y": line.baseline_y,
                "mean_confidence": line.mean_confidence,
            }
            for i, line in enumerate(doc.lines)
        ],
    }

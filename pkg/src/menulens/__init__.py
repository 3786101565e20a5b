"""menulens: turn egocentric menu footage into a structured menu you can chat with.

Pipeline stages, each usable on its own: keyframe selection over object
detections, OCR document handling, layout and reading-order recovery,
menu structuring, preference retrieval, constraint-aware recommendation,
recall evaluation, and an HTTP service plus CLI wrapping the lot.
"""
from .errors import (
    DuplicateDoc,
    EmptyMenu,
    EngineError,
    EngineTimeout,
    InvalidGeometry,
    LlmRejected,
    LlmUnavailable,
    MenulensError,
    MissingTruth,
    NoEligibleItems,
    NoMenuDetected,
    NotFound,
    ParseError,
    SchemaError,
)
from .keyframe import Detection, FrameScore, ImageDims, centrality, score_frames, select_keyframe
from .layout import ReadingOrderDocument, TextLine, analyze_tokens, group_into_lines, reading_order
from .llmclient import LlmClientConfig, llm_complete
from .menu import (
    DigitalMenu,
    MenuItem,
    MenuSection,
    Price,
    Provenance,
    build_menu,
    classify_line,
    llm_structure_menu,
    menu_from_json,
    menu_to_json,
    parse_price,
)
from .ocr import OcrDocument, OcrToken, parse_ocr_document, run_external_ocr
from .prefs import (
    ConstraintSet,
    PreferenceDoc,
    PreferenceIndex,
    bm25_score,
    extract_constraints,
    index_docs,
    retrieve_topk,
    tokenize,
)
from .recommend import ChatSession, Recommendation, chat, new_session, regenerate
from .evalrecall import levenshtein, match_items, normalize_name, recall_report, similarity

__version__ = "0.1.0"

__all__ = [
    "MenulensError", "InvalidGeometry", "NoMenuDetected", "ParseError", "SchemaError",
    "EngineError", "EngineTimeout", "EmptyMenu", "DuplicateDoc", "NotFound",
    "LlmUnavailable", "LlmRejected", "NoEligibleItems", "MissingTruth",
    "ImageDims", "Detection", "FrameScore", "centrality", "score_frames", "select_keyframe",
    "OcrToken", "OcrDocument", "parse_ocr_document", "run_external_ocr",
    "TextLine", "ReadingOrderDocument", "group_into_lines", "reading_order", "analyze_tokens",
    "Price", "MenuItem", "MenuSection", "Provenance", "DigitalMenu",
    "parse_price", "classify_line", "build_menu", "llm_structure_menu",
    "menu_to_json", "menu_from_json",
    "LlmClientConfig", "llm_complete",
    "PreferenceDoc", "PreferenceIndex", "ConstraintSet",
    "tokenize", "index_docs", "bm25_score", "retrieve_topk", "extract_constraints",
    "ChatSession", "Recommendation", "chat", "new_session", "regenerate",
    "normalize_name", "levenshtein", "similarity", "match_items", "recall_report",
    "__version__",
]

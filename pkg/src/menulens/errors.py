"""Error types shared across the pipeline.

Every error carries a stable SCREAMING_SNAKE code so the HTTP service and
CLI can report machine-readable conditions without string matching.
"""


class MenulensError(Exception):
    """Base class for all reportable pipeline errors."""

    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class InvalidGeometry(MenulensError):
    """A box or quad is degenerate (zero area, inverted edges)."""

    code = "INVALID_GEOMETRY"


class NoMenuDetected(MenulensError):
    """No detection qualified as a menu keyframe."""

    code = "NO_MENU_DETECTED"


class ParseError(MenulensError):
    """Input bytes are not valid JSON."""

    code = "PARSE_ERROR"

    def __init__(self, message: str = "", offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SchemaError(MenulensError):
    """JSON parsed but a field violates the documented schema."""

    code = "SCHEMA_ERROR"

    def __init__(self, field: str, message: str = ""):
        super().__init__(message or f"schema violation in field '{field}'")
        self.field = field


class EngineError(MenulensError):
    """External OCR command exited nonzero."""

    code = "ENGINE_ERROR"

    def __init__(self, message: str = "", stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class EngineTimeout(MenulensError):
    """External OCR command exceeded its timeout."""

    code = "ENGINE_TIMEOUT"


class EmptyMenu(MenulensError):
    """Parsing produced zero menu items."""

    code = "EMPTY_MENU"


class DuplicateDoc(MenulensError):
    """Two preference documents share an id."""

    code = "DUPLICATE_DOC"


class NotFound(MenulensError):
    """A referenced document or session does not exist."""

    code = "NOT_FOUND"


class LlmUnavailable(MenulensError):
    """Chat-completion endpoint unreachable after all retries."""

    code = "LLM_UNAVAILABLE"


class LlmRejected(MenulensError):
    """Chat-completion endpoint returned a non-retryable 4xx."""

    code = "LLM_REJECTED"

    def __init__(self, message: str = "", status: int = 0, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class NoEligibleItems(MenulensError):
    """Every menu item is excluded or rejected."""

    code = "NO_ELIGIBLE_ITEMS"


class MissingTruth(MenulensError):
    """A parsed menu has no ground-truth counterpart."""

    code = "MISSING_TRUTH"

"""Error taxonomy shared by the engine, service, and CLI."""

from dataclasses import dataclass


class FlowQueryError(Exception):
    """Base class; `category` feeds the service error reports."""

    category = "Internal"


# --- data / diagram errors ---

class MalformedData(FlowQueryError):
    category = "ContextInvalid"


class NameConflict(FlowQueryError):
    category = "ContextInvalid"


class CycleError(FlowQueryError):
    category = "ContextInvalid"


class PortError(FlowQueryError):
    category = "ContextInvalid"


class ColumnNotFound(FlowQueryError):
    category = "ContextInvalid"


class TableMismatch(FlowQueryError):
    category = "ContextInvalid"


class NothingToUndo(FlowQueryError):
    category = "ContextInvalid"


class NothingToRedo(FlowQueryError):
    category = "ContextInvalid"


class RangeError(FlowQueryError):
    category = "ContextInvalid"


# --- query pipeline errors ---

class ParseRejected(FlowQueryError):
    """No full-span derivation: the grammar cannot accept the query."""

    category = "ParseRejected"


class NodeNotFound(FlowQueryError):
    """A node reference is invalid in the current diagram context."""

    category = "ContextInvalid"


class DatasetNotFound(FlowQueryError):
    category = "ContextInvalid"


class InsufficientSources(FlowQueryError):
    category = "ContextInvalid"


class OptionsError(FlowQueryError):
    category = "OptionsError"


class NotImplementedQuery(FlowQueryError):
    """Grammar accepts the shape but no executor handles it yet."""

    category = "NotImplemented"


class NotSupportedQuery(FlowQueryError):
    category = "NotSupported"


class TaggingError(FlowQueryError):
    category = "TaggingError"


class CompositeQueryError(FlowQueryError):
    category = "Composite"


class TrainingDataError(FlowQueryError):
    category = "Internal"


class GrammarError(FlowQueryError):
    category = "Internal"


class BusyError(FlowQueryError):
    category = "Internal"


ERROR_CATEGORIES = (
    "ParseRejected",
    "ContextInvalid",
    "NotImplemented",
    "NotSupported",
    "TaggingError",
    "Composite",
    "OptionsError",
    "Internal",
)


@dataclass
class ErrorReport:
    """Structured failure payload returned by the query endpoints."""

    category: str
    message: str
    span: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        out = {"category": self.category, "message": self.message}
        if self.span is not None:
            out["span"] = list(self.span)
        return out

    @classmethod
    def from_exception(cls, exc: Exception) -> "ErrorReport":
        if isinstance(exc, FlowQueryError):
            return cls(category=exc.category, message=str(exc))
        return cls(category="Internal", message=f"{type(exc).__name__}: {exc}")

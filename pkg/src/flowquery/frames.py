"""Function frames: the structured meaning of a query.

A derivation's semantic actions build one or more FunctionFrames, each
holding the five query components: function type, options, source node
references, target node references, and a port specification.  Unspecified
components stay empty for the completion stage to fill.
"""

import copy
from dataclasses import dataclass, field

from . import tagging
from .errors import GrammarError
from .grammar import Call, Const, Ref

# Port specifications.
PORT_DATA = "data"
PORT_SELECTION = "selection"
PORT_UNSPECIFIED = ""

# NodeRef kinds.  The parser produces the first five; completion replaces
# them with RESOLVED (an existing node id) or RESULT (the node an earlier
# frame of the same command will create), leaving NEW_NODE as the only
# other kind that survives completion.
BY_LABEL = "label"
BY_TYPE = "type"
BY_DATASET = "dataset"
IMPLICIT_FOCUS = "focus"
NEW_NODE = "new"
RESOLVED = "node"
RESULT = "result"


@dataclass(frozen=True)
class EntityRef:
    """A resolved special utterance: tag category plus canonical value."""

    category: str
    value: str


@dataclass(frozen=True)
class NodeRef:
    """How a query names a node; resolved to a concrete node later."""

    kind: str
    value: str | int | None = None

    def describe(self) -> str:
        if self.kind == IMPLICIT_FOCUS:
            return "focus"
        return f"{self.kind}:{self.value}"


def by_label(text: str) -> NodeRef:
    return NodeRef(BY_LABEL, text)


def by_type(name: str) -> NodeRef:
    return NodeRef(BY_TYPE, name)


def by_dataset(name: str) -> NodeRef:
    return NodeRef(BY_DATASET, name)


def implicit_focus() -> NodeRef:
    return NodeRef(IMPLICIT_FOCUS)


def new_node(kind: str) -> NodeRef:
    return NodeRef(NEW_NODE, kind)


def resolved_node(node_id: int) -> NodeRef:
    return NodeRef(RESOLVED, node_id)


def frame_result(index: int) -> NodeRef:
    return NodeRef(RESULT, index)


_INDICATOR_BY_WORD = {name.lower(): name for name in tagging.INDICATORS}

# Frame fields that hold entity or node references.
_REF_FIELDS = ("source", "target")
_LIST_FIELDS = ("columns", "values")
_NUMBER_FIELDS = ("min", "max", "count")


@dataclass
class FunctionFrame:
    function_type: str
    options: dict = field(default_factory=dict)
    sources: list[NodeRef] = field(default_factory=list)
    targets: list[NodeRef] = field(default_factory=list)
    port: str = PORT_UNSPECIFIED

    def copy(self) -> "FunctionFrame":
        return FunctionFrame(
            self.function_type,
            copy.deepcopy(self.options),
            list(self.sources),
            list(self.targets),
            self.port,
        )

    def signature(self) -> str:
        """Compact text form: functionType:key=value,... with sorted keys."""
        parts = []
        for key in sorted(self.options):
            parts.append(f"{key}={_format_value(self.options[key])}")
        parts.extend(f"source={ref.describe()}" for ref in self.sources)
        parts.extend(f"target={ref.describe()}" for ref in self.targets)
        if self.port:
            parts.append(f"port={self.port}")
        head = self.function_type.lower()
        return f"{head}:{','.join(parts)}" if parts else head


def _format_value(value) -> str:
    if isinstance(value, list):
        return "+".join(_format_value(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def command_signature(frames: list[FunctionFrame]) -> str:
    return " ; ".join(frame.signature() for frame in frames)


# ---------------------------------------------------------------------------
# Semantic-action evaluation


def _to_node_ref(value) -> NodeRef:
    if isinstance(value, NodeRef):
        return value
    if isinstance(value, EntityRef):
        if value.category == tagging.NODE_LABEL:
            return by_label(value.value)
        if value.category == tagging.NODE_TYPE:
            return by_type(value.value)
        if value.category == tagging.DATASET_NAME:
            return by_dataset(value.value)
        raise GrammarError(f"a {value.category} utterance cannot name a node")
    if value == "focus":
        return implicit_focus()
    raise GrammarError(f"cannot use {value!r} as a node reference")


def _scalar(value) -> str:
    if isinstance(value, EntityRef):
        return value.value
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _set_field(frame: FunctionFrame, name: str, value) -> FunctionFrame:
    frame = frame.copy()
    if name == "source":
        frame.sources.append(_to_node_ref(value))
    elif name == "target":
        frame.targets.append(_to_node_ref(value))
    elif name == "port":
        if value not in (PORT_DATA, PORT_SELECTION):
            raise GrammarError(f"unknown port spec {value!r}")
        frame.port = value
    elif name in _LIST_FIELDS:
        items = value if isinstance(value, list) else [value]
        frame.options.setdefault(name, []).extend(_scalar(v) for v in items)
    elif name in _NUMBER_FIELDS:
        number = value if isinstance(value, float) else tagging.numeric_value(str(value))
        if number is None:
            raise GrammarError(f"field '{name}' needs a number, got {value!r}")
        frame.options[name] = number
    else:
        frame.options[name] = _scalar(value)
    return frame


def _flatten(items, into: list) -> None:
    for item in items:
        if isinstance(item, list):
            _flatten(item, into)
        elif item is not None:
            into.append(item)


def evaluate_action(expr, children: list):
    """Evaluate a rule's action; ``children[k-1]`` is the value behind %k."""
    if isinstance(expr, Ref):
        if not 1 <= expr.position <= len(children):
            raise GrammarError(f"action reference %{expr.position} is out of range")
        return children[expr.position - 1]
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Call):
        args = [evaluate_action(a, children) for a in expr.args]
        if expr.name == "frame":
            (kind,) = args
            indicator = _INDICATOR_BY_WORD.get(str(kind).lower())
            if indicator is None:
                raise GrammarError(f"unknown function kind {kind!r}")
            return FunctionFrame(indicator)
        if expr.name == "set":
            target, name, value = args[0], expr.args[1], args[2]
            if not isinstance(target, FunctionFrame):
                raise GrammarError("set() expects a frame as its first argument")
            if not isinstance(name, Const) or not isinstance(name.value, str):
                raise GrammarError("set() expects a bare field name")
            return _set_field(target, name.value, value)
        if expr.name == "new":
            (spec,) = args
            kind = spec.value if isinstance(spec, EntityRef) else str(spec)
            return new_node(kind)
        if expr.name == "list":
            flat: list = []
            _flatten(args, flat)
            return flat
        if expr.name == "merge":
            frames: list[FunctionFrame] = []
            for arg in args:
                if isinstance(arg, FunctionFrame):
                    frames.append(arg)
                elif isinstance(arg, list) and all(
                    isinstance(f, FunctionFrame) for f in arg
                ):
                    frames.extend(arg)
                else:
                    raise GrammarError("merge() expects frames")
            return frames
        raise GrammarError(f"unknown action constructor '{expr.name}'")
    raise GrammarError(f"cannot evaluate action node {expr!r}")

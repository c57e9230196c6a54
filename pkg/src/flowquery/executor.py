"""Apply completed commands to a diagram as single undoable edits.

Each function frame maps to a fixed editing recipe: Visualize adds one
chart wired to its source, Highlight expands into an editor, a set
operator, and a new chart, Link expands into a constants extractor
feeding an equality filter over the second table, and so on.  All of a
command's frames run inside one history group, so a multi-frame query
undoes in a single step, and a failure in any frame rolls the whole
command back.  A propagation pass inside the group validates the edited
diagram (table agreement, column references, acyclicity) before the
group commits.

Frames reach this module fully resolved: every source and target is a
concrete node id, the node to create, or the result of an earlier frame
in the same command.  A Filter or Encode frame whose *target* is an
existing node is spliced onto that node's data input; one with a
*source* chains from that node's output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import tagging
from .completion import CompletedCommand, default_columns
from .diagram import (
    ATTRIBUTE_FILTER,
    COLOR_HEX,
    CONSTANTS_EXTRACTOR,
    CONSTANTS_IN,
    CONSTANTS_OUT,
    DATA_IN,
    DATA_OUT,
    DATA_SOURCE,
    DEFAULT_SIZE,
    Diagram,
    SELECTION_OUT,
    SET_OPERATOR,
    VISUAL_EDITOR,
    VISUALIZATION,
)
from .errors import DatasetNotFound, NodeNotFound, OptionsError, PortError
from .focus import node_center
from .frames import (
    PORT_SELECTION,
    RESOLVED,
    RESULT,
    FunctionFrame,
    NodeRef,
)
from .tables import NUMERIC, Table

HORIZONTAL_GAP = 80.0
VERTICAL_STEP = 40.0

# How many columns each visualization type accepts, as (min, max);
# None means unbounded.  Enforced only once columns are configured.
VIS_COLUMN_RANGE = {
    "scatterplot": (2, 2),
    "histogram": (1, 1),
    "line-chart": (2, 2),
    "parallel-coordinates": (2, None),
    "heatmap": (1, None),
    "map": (0, None),
    "table-view": (0, None),
}


@dataclass
class DiagramDelta:
    """What a command changed, by id; empty lists for history commands."""

    created_nodes: list[int] = field(default_factory=list)
    created_edges: list[int] = field(default_factory=list)
    removed_nodes: list[int] = field(default_factory=list)
    removed_edges: list[int] = field(default_factory=list)
    changed_options: list[int] = field(default_factory=list)

    @property
    def node_count_change(self) -> int:
        return len(self.created_nodes) - len(self.removed_nodes)

    @property
    def edge_count_change(self) -> int:
        return len(self.created_edges) - len(self.removed_edges)


@dataclass
class ExecutionOutcome:
    """Result of running one command.

    ``frame_nodes`` holds the node each frame produced (the chart for
    Visualize and Highlight, the filter for Filter and Link, and so on),
    or None for frames that create nothing.  ``kind`` distinguishes
    structural edits from history traversal.
    """

    kind: str  # "edit" | "undo" | "redo"
    delta: DiagramDelta
    frame_nodes: list[int | None]


def execute(
    command: CompletedCommand,
    diagram: Diagram,
    loader=None,
) -> ExecutionOutcome:
    """Apply *command* to *diagram*; atomic per command.

    *loader*, when given, is called with a dataset name and must return
    a :class:`Table` for Load frames whose dataset is not yet loaded.
    Raises the error of whichever frame fails, leaving the diagram
    exactly as it was.
    """
    frames = command.frames
    history = {tagging.UNDO: "undo", tagging.REDO: "redo"}
    if any(f.function_type in history for f in frames):
        if len(frames) != 1:
            raise OptionsError("undo and redo cannot combine with other edits")
        kind = history[frames[0].function_type]
        (diagram.undo if kind == "undo" else diagram.redo)()
        return ExecutionOutcome(kind, DiagramDelta(), [None])

    runner = _Runner(diagram, loader)
    with diagram.group():
        for frame in frames:
            runner.produced.append(runner.run(frame))
        diagram.propagate()
    return ExecutionOutcome("edit", runner.delta, runner.produced)


class _Runner:
    """Applies frames to one diagram, recording ids as it goes."""

    def __init__(self, diagram: Diagram, loader):
        self.diagram = diagram
        self.loader = loader
        self.delta = DiagramDelta()
        self.produced: list[int | None] = []

    def run(self, frame: FunctionFrame) -> int | None:
        handler = {
            tagging.VISUALIZE: self._visualize,
            tagging.FILTER: self._filter,
            tagging.ENCODE: self._encode,
            tagging.MERGE: self._merge,
            tagging.HIGHLIGHT: self._highlight,
            tagging.LINK: self._link,
            tagging.LOAD: self._load,
            tagging.REMOVE: self._remove,
        }[frame.function_type]
        return handler(frame)

    # -- bookkeeping wrappers ------------------------------------------------

    def _add_node(self, kind, position, options, label=None) -> int:
        node_id = self.diagram.add_node(kind, label=label, position=position, options=options)
        self.delta.created_nodes.append(node_id)
        return node_id

    def _add_edge(self, src, src_port, dst, dst_port) -> int:
        edge_id = self.diagram.add_edge(src, src_port, dst, dst_port)
        self.delta.created_edges.append(edge_id)
        return edge_id

    def _remove_edge(self, edge_id: int) -> None:
        self.diagram.remove_edge(edge_id)
        self.delta.removed_edges.append(edge_id)

    # -- reference and port resolution ---------------------------------------

    def _node_of(self, ref: NodeRef) -> int:
        if ref.kind == RESOLVED:
            return int(ref.value)
        if ref.kind == RESULT:
            produced = self.produced[int(ref.value)]
            if produced is None:
                raise NodeNotFound("the earlier step produced no node to build on")
            return produced
        raise NodeNotFound(f"unresolved reference '{ref.kind}'")

    def _out_port(self, node_id: int, port: str) -> str:
        node = self.diagram.node(node_id)
        if port == PORT_SELECTION:
            if node.kind != VISUALIZATION:
                raise PortError(f"'{node.label}' has no selection output")
            return SELECTION_OUT
        return DATA_OUT

    def _output_table(self, node_id: int, out_port: str) -> Table | None:
        name = self.diagram.output(node_id, out_port).table
        return self.diagram.tables.get(name) if name else None

    # -- placement -------------------------------------------------------------

    def _beside(self, node_id: int) -> tuple[float, float]:
        node = self.diagram.node(node_id)
        lane = len(self.delta.created_nodes) % 4
        return (
            node.position[0] + node.size[0] + HORIZONTAL_GAP,
            node.position[1] + lane * VERTICAL_STEP,
        )

    def _between(self, src_id: int, dst_id: int) -> tuple[float, float]:
        a = node_center(self.diagram.node(src_id))
        b = node_center(self.diagram.node(dst_id))
        return (
            (a[0] + b[0]) / 2 - DEFAULT_SIZE[0] / 2,
            (a[1] + b[1]) / 2 - DEFAULT_SIZE[1] / 2,
        )

    def _open_spot(self) -> tuple[float, float]:
        if not self.diagram.nodes:
            return (40.0, 40.0)
        lowest = max(n.position[1] + n.size[1] for n in self.diagram.nodes.values())
        return (40.0, lowest + HORIZONTAL_GAP)

    # -- shared wiring ---------------------------------------------------------

    def _chain(self, frame: FunctionFrame, kind: str, options: dict) -> int:
        source = self._node_of(frame.sources[0])
        out_port = self._out_port(source, frame.port)
        node_id = self._add_node(kind, self._beside(source), options)
        self._add_edge(source, out_port, node_id, DATA_IN)
        return node_id

    def _splice(self, target_id: int, kind: str, options: dict) -> int:
        """Insert a new node on the data input of an existing node."""
        feeds = self.diagram.in_edges(target_id, DATA_IN)
        if feeds:
            position = self._between(feeds[0].src, target_id)
        else:
            target = self.diagram.node(target_id)
            position = (
                target.position[0] - DEFAULT_SIZE[0] - HORIZONTAL_GAP,
                target.position[1],
            )
        node_id = self._add_node(kind, position, options)
        if feeds:
            self._remove_edge(feeds[0].id)
            self._add_edge(feeds[0].src, feeds[0].src_port, node_id, DATA_IN)
        self._add_edge(node_id, DATA_OUT, target_id, DATA_IN)
        return node_id

    # -- one method per function type -------------------------------------------

    def _visualize(self, frame: FunctionFrame) -> int:
        vis_type = frame.targets[0].value
        options = {"visType": vis_type}
        columns = list(frame.options.get("columns", ()))
        if columns:
            _check_column_count(vis_type, columns)
            options["columns"] = columns
        if "groupby" in frame.options:
            options["groupby"] = frame.options["groupby"]
        return self._chain(frame, VISUALIZATION, options)

    def _filter(self, frame: FunctionFrame) -> int:
        doc = {
            key: frame.options[key]
            for key in ("column", "min", "max", "direction", "count")
            if key in frame.options
        }
        if "values" in frame.options:
            doc["values"] = [_as_text(v) for v in frame.options["values"]]
        options = {"filter": doc}
        if frame.targets:
            return self._splice(self._node_of(frame.targets[0]), ATTRIBUTE_FILTER, options)
        return self._chain(frame, ATTRIBUTE_FILTER, options)

    def _encode(self, frame: FunctionFrame) -> int:
        doc = {"mode": frame.options["mode"]}
        for key in ("column", "scale"):
            if key in frame.options:
                doc[key] = frame.options[key]
        if "constant" in frame.options:
            color = frame.options["constant"]
            doc["constant"] = COLOR_HEX.get(color, color)
        options = {"encoding": doc}
        if frame.targets:
            target = self._node_of(frame.targets[0])
            if doc["mode"] == "colorScale":
                self._require_numeric(self._output_table(target, DATA_OUT), doc["column"])
            return self._splice(target, VISUAL_EDITOR, options)
        source = self._node_of(frame.sources[0])
        if doc["mode"] == "colorScale":
            out_port = self._out_port(source, frame.port)
            self._require_numeric(self._output_table(source, out_port), doc["column"])
        return self._chain(frame, VISUAL_EDITOR, options)

    def _require_numeric(self, table: Table | None, column: str) -> None:
        if table is None or not table.has_column(column):
            return  # nothing flows here yet; propagation checks once it does
        if table.column_kind(column) != NUMERIC:
            raise OptionsError(f"a color scale needs numbers, and column '{column}' is text")

    def _merge(self, frame: FunctionFrame) -> int:
        sources = [self._node_of(ref) for ref in frame.sources]
        options = {"op": frame.options.get("op", "union")}
        node_id = self._add_node(SET_OPERATOR, self._beside(sources[0]), options)
        for source in sources:
            self._add_edge(source, self._out_port(source, frame.port), node_id, DATA_IN)
        return node_id

    def _highlight(self, frame: FunctionFrame) -> int:
        source = self._node_of(frame.sources[0])
        if self.diagram.node(source).kind != VISUALIZATION:
            raise PortError(f"'{self.diagram.node(source).label}' has no selection to highlight")
        encoding = {"mode": "assignConstant", "constant": COLOR_HEX["red"]}
        editor = self._add_node(VISUAL_EDITOR, self._beside(source), {"encoding": encoding})
        operator = self._add_node(SET_OPERATOR, self._beside(editor), {"op": "union"})
        vis_type = frame.targets[0].value
        vis_options = {"visType": vis_type}
        table = self._output_table(source, DATA_OUT)
        if table is not None:
            columns = default_columns(table, vis_type)
            if columns:
                vis_options["columns"] = columns
        chart = self._add_node(VISUALIZATION, self._beside(operator), vis_options)
        self._add_edge(source, SELECTION_OUT, editor, DATA_IN)
        # Plain rows first, recolored rows second: on overlap the set
        # operator keeps the later input's visuals, so selected rows stay red.
        self._add_edge(source, DATA_OUT, operator, DATA_IN)
        self._add_edge(editor, DATA_OUT, operator, DATA_IN)
        self._add_edge(operator, DATA_OUT, chart, DATA_IN)
        return chart

    def _link(self, frame: FunctionFrame) -> int:
        subset = self._node_of(frame.sources[0])
        table_node = self._node_of(frame.sources[1])
        key = frame.options["key"]
        second = self._output_table(table_node, DATA_OUT)
        if second is not None and not second.has_column(key):
            raise OptionsError(f"table '{second.name}' has no column '{key}' to match on")
        out_port = self._out_port(subset, frame.port)
        extractor = self._add_node(CONSTANTS_EXTRACTOR, self._beside(subset), {"column": key})
        matcher = self._add_node(
            ATTRIBUTE_FILTER, self._beside(table_node), {"filter": {"column": key}}
        )
        self._add_edge(subset, out_port, extractor, DATA_IN)
        self._add_edge(table_node, DATA_OUT, matcher, DATA_IN)
        self._add_edge(extractor, CONSTANTS_OUT, matcher, CONSTANTS_IN)
        return matcher

    def _load(self, frame: FunctionFrame) -> int:
        name = frame.options["dataset"]
        if name not in self.diagram.tables:
            if self.loader is None:
                raise DatasetNotFound(f"dataset '{name}' is not loaded")
            self.diagram.register_table(self.loader(name))
        existing = self.diagram.data_source_for(name)
        if existing is not None:
            return existing.id
        # An auto label keeps the dataset name free for DatasetName tagging;
        # a source labeled "cars" would shadow the dataset in every later query.
        return self._add_node(DATA_SOURCE, self._open_spot(), {"table": name})

    def _remove(self, frame: FunctionFrame) -> None:
        target = self._node_of(frame.targets[0])
        edges = self.diagram.in_edges(target) + self.diagram.out_edges(target)
        self.diagram.remove_node(target)
        self.delta.removed_nodes.append(target)
        self.delta.removed_edges.extend(edge.id for edge in edges)
        return None


def _check_column_count(vis_type: str, columns: list) -> None:
    low, high = VIS_COLUMN_RANGE[vis_type]
    count = len(columns)
    if count < low or (high is not None and count > high):
        needs = f"exactly {low}" if low == high else f"at least {low}"
        raise OptionsError(
            f"a {vis_type} takes {needs} column{'s' if low != 1 else ''}; got {count}"
        )


def _as_text(value) -> str:
    """Filter values compare as strings; keep integral numbers unadorned."""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)

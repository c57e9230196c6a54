"""Subset-flow diagram: typed nodes and ports, propagation, undo/redo."""

import copy
import hashlib
import io
import json
from contextlib import contextmanager
from dataclasses import dataclass, field

from .errors import (
    CycleError,
    ColumnNotFound,
    DatasetNotFound,
    MalformedData,
    NameConflict,
    NodeNotFound,
    NothingToRedo,
    NothingToUndo,
    OptionsError,
    PortError,
    RangeError,
    TableMismatch,
)
from .tables import NUMERIC, Constants, Subset, Table, load_table

# Node kinds
DATA_SOURCE = "data-source"
VISUALIZATION = "visualization"
ATTRIBUTE_FILTER = "attribute-filter"
VISUAL_EDITOR = "visual-editor"
SET_OPERATOR = "set-operator"
CONSTANTS_EXTRACTOR = "constants-extractor"

NODE_KINDS = (
    DATA_SOURCE,
    VISUALIZATION,
    ATTRIBUTE_FILTER,
    VISUAL_EDITOR,
    SET_OPERATOR,
    CONSTANTS_EXTRACTOR,
)

VIS_TYPES = (
    "scatterplot",
    "histogram",
    "parallel-coordinates",
    "line-chart",
    "heatmap",
    "map",
    "table-view",
)

# How visualization kinds read in running text (tagging and display).
VIS_DISPLAY_NAMES = {kind.replace("-", " "): kind for kind in VIS_TYPES}

SET_OPS = ("union", "intersection", "difference")

# Ports
DATA_IN = "data-in"
DATA_OUT = "data-out"
SELECTION_OUT = "selection-out"
CONSTANTS_IN = "constants-in"
CONSTANTS_OUT = "constants-out"

OUT_PORTS = {
    DATA_SOURCE: (DATA_OUT,),
    VISUALIZATION: (DATA_OUT, SELECTION_OUT),
    ATTRIBUTE_FILTER: (DATA_OUT,),
    VISUAL_EDITOR: (DATA_OUT,),
    SET_OPERATOR: (DATA_OUT,),
    CONSTANTS_EXTRACTOR: (CONSTANTS_OUT,),
}

IN_PORTS = {
    DATA_SOURCE: (),
    VISUALIZATION: (DATA_IN,),
    ATTRIBUTE_FILTER: (DATA_IN, CONSTANTS_IN),
    VISUAL_EDITOR: (DATA_IN,),
    SET_OPERATOR: (DATA_IN,),
    CONSTANTS_EXTRACTOR: (DATA_IN,),
}

# Ports carrying a constants payload instead of a row subset.
_CONSTANTS_PORTS = {CONSTANTS_IN, CONSTANTS_OUT}

# Only a set operator may fan in on its data input.
_MULTI_IN = {(SET_OPERATOR, DATA_IN)}

DEFAULT_SIZES = {VISUALIZATION: (240.0, 180.0)}
DEFAULT_SIZE = (90.0, 60.0)

COLOR_HEX = {
    "red": "#ff0000",
    "green": "#00ff00",
    "blue": "#0000ff",
    "yellow": "#ffff00",
    "orange": "#ffa500",
    "purple": "#800080",
    "black": "#000000",
    "white": "#ffffff",
    "gray": "#808080",
}

DEFAULT_SCALE = "red-green"


@dataclass
class FilterSpec:
    """Predicate configuration for an attribute filter.

    The active predicate is implied by which fields are set: a direction
    makes it an extremum, explicit values an equality test, bounds a range,
    and none of those a pass-through placeholder awaiting configuration.
    """

    column: str | None = None
    min_value: float | None = None
    max_value: float | None = None
    values: tuple[str, ...] | None = None
    direction: str | None = None  # "max" | "min"
    count: int | None = None

    @property
    def predicate(self) -> str:
        if self.direction is not None:
            return "extremum"
        if self.values is not None:
            return "equals"
        if self.min_value is not None or self.max_value is not None:
            return "range"
        return "noop"

    def validate(self) -> None:
        if self.direction is not None:
            if self.direction not in ("max", "min"):
                raise OptionsError(f"unknown extremum direction '{self.direction}'")
            if self.count is None or self.count < 1:
                raise RangeError("extremum count must be at least 1")
        if self.min_value is not None and self.max_value is not None:
            if self.min_value > self.max_value:
                raise RangeError(f"empty range [{self.min_value}, {self.max_value}]")

    def to_dict(self) -> dict:
        doc = {}
        if self.column is not None:
            doc["column"] = self.column
        if self.min_value is not None:
            doc["min"] = self.min_value
        if self.max_value is not None:
            doc["max"] = self.max_value
        if self.values is not None:
            doc["values"] = list(self.values)
        if self.direction is not None:
            doc["direction"] = self.direction
            doc["count"] = self.count
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FilterSpec":
        values = doc.get("values")
        return cls(
            column=doc.get("column"),
            min_value=doc.get("min"),
            max_value=doc.get("max"),
            values=tuple(values) if values is not None else None,
            direction=doc.get("direction"),
            count=doc.get("count"),
        )


@dataclass
class EncodingSpec:
    """Visual-channel mapping applied by a visual editor node."""

    mode: str  # "assignConstant" | "colorScale"
    column: str | None = None  # colorScale only
    scale: str | None = None  # colorScale only, e.g. "red-green"
    constant: str | None = None  # assignConstant only

    def validate(self) -> None:
        if self.mode == "assignConstant":
            if not self.constant:
                raise OptionsError("constant color missing")
        elif self.mode == "colorScale":
            if not self.column:
                raise OptionsError("color scale needs a column")
            if self.scale and scale_endpoints(self.scale) is None:
                raise OptionsError(f"unknown color scale '{self.scale}'")
        else:
            raise OptionsError(f"unknown encoding mode '{self.mode}'")

    def to_dict(self) -> dict:
        doc = {"mode": self.mode}
        if self.column is not None:
            doc["column"] = self.column
        if self.scale is not None:
            doc["scale"] = self.scale
        if self.constant is not None:
            doc["constant"] = self.constant
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EncodingSpec":
        return cls(
            mode=doc["mode"],
            column=doc.get("column"),
            scale=doc.get("scale"),
            constant=doc.get("constant"),
        )


def scale_endpoints(name: str) -> tuple[str, str] | None:
    """Resolve a scale name like "red-green" to its endpoint hex colors."""
    parts = name.split("-")
    if len(parts) == 2 and parts[0] in COLOR_HEX and parts[1] in COLOR_HEX:
        return COLOR_HEX[parts[0]], COLOR_HEX[parts[1]]
    return None


def _interpolate_hex(low: str, high: str, t: float) -> str:
    channels = []
    for i in (1, 3, 5):
        a = int(low[i : i + 2], 16)
        b = int(high[i : i + 2], 16)
        channels.append(round(a + (b - a) * t))
    return "#" + "".join(f"{c:02x}" for c in channels)


@dataclass
class Node:
    id: int
    kind: str
    label: str
    options: dict = field(default_factory=dict)
    position: tuple[float, float] = (0.0, 0.0)
    size: tuple[float, float] = DEFAULT_SIZE
    pinned: bool = False

    @property
    def vis_type(self) -> str | None:
        return self.options.get("visType") if self.kind == VISUALIZATION else None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "label": self.label,
            "options": copy.deepcopy(self.options),
            "position": list(self.position),
            "size": list(self.size),
            "pinned": self.pinned,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Node":
        return cls(
            id=doc["id"],
            kind=doc["kind"],
            label=doc["label"],
            options=copy.deepcopy(doc["options"]),
            position=tuple(doc["position"]),
            size=tuple(doc["size"]),
            pinned=doc["pinned"],
        )


@dataclass(frozen=True)
class Edge:
    id: int
    src: int
    src_port: str
    dst: int
    dst_port: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "from": [self.src, self.src_port],
            "to": [self.dst, self.dst_port],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Edge":
        return cls(doc["id"], doc["from"][0], doc["from"][1], doc["to"][0], doc["to"][1])


# ---------------------------------------------------------------------------
# Reversible deltas


class _Delta:
    def do(self, diagram: "Diagram") -> None:
        raise NotImplementedError

    def undo(self, diagram: "Diagram") -> None:
        raise NotImplementedError


@dataclass
class _AddNode(_Delta):
    node: Node

    def do(self, diagram):
        diagram.nodes[self.node.id] = self.node

    def undo(self, diagram):
        del diagram.nodes[self.node.id]


@dataclass
class _RemoveNode(_Delta):
    node: Node
    selection: tuple[int, ...] | None

    def do(self, diagram):
        del diagram.nodes[self.node.id]
        diagram.selections.pop(self.node.id, None)

    def undo(self, diagram):
        diagram.nodes[self.node.id] = self.node
        if self.selection is not None:
            diagram.selections[self.node.id] = self.selection


@dataclass
class _AddEdge(_Delta):
    edge: Edge

    def do(self, diagram):
        diagram.edges[self.edge.id] = self.edge

    def undo(self, diagram):
        del diagram.edges[self.edge.id]


@dataclass
class _RemoveEdge(_Delta):
    edge: Edge

    def do(self, diagram):
        del diagram.edges[self.edge.id]

    def undo(self, diagram):
        diagram.edges[self.edge.id] = self.edge


@dataclass
class _SetOptions(_Delta):
    node_id: int
    old: dict
    new: dict

    def do(self, diagram):
        diagram.nodes[self.node_id].options = copy.deepcopy(self.new)

    def undo(self, diagram):
        diagram.nodes[self.node_id].options = copy.deepcopy(self.old)


@dataclass
class _SetSelection(_Delta):
    node_id: int
    old: tuple[int, ...]
    new: tuple[int, ...]

    def do(self, diagram):
        diagram.selections[self.node_id] = self.new

    def undo(self, diagram):
        diagram.selections[self.node_id] = self.old


# ---------------------------------------------------------------------------


class Diagram:
    """A DAG of subset-flow nodes with datasets, selections, and history.

    Every mutation goes through a reversible delta; deltas issued inside a
    ``with diagram.group():`` block undo and redo as one atomic unit.
    History records structure and options only — node positions are a view
    concern and are deliberately left out, so that automatic layout after
    an edit never breaks the undo round-trip.
    """

    def __init__(self):
        self.nodes: dict[int, Node] = {}
        self.edges: dict[int, Edge] = {}
        self.tables: dict[str, Table] = {}
        self.selections: dict[int, tuple[int, ...]] = {}
        self._next_node_id = 1
        self._next_edge_id = 1
        self._undo: list[list[_Delta]] = []
        self._redo: list[list[_Delta]] = []
        self._group: list[_Delta] | None = None
        self._cache_key = None
        self._cache: dict[tuple[int, str], object] = {}

    # -- datasets -----------------------------------------------------------

    def register_table(self, table: Table) -> Table:
        if table.name in self.tables:
            raise NameConflict(f"dataset '{table.name}' already loaded")
        self.tables[table.name] = table
        return table

    def load_dataset(self, source: str | io.TextIOBase, name: str, delimiter: str = ",") -> Table:
        if name in self.tables:
            raise NameConflict(f"dataset '{name}' already loaded")
        return self.register_table(load_table(source, name, delimiter))

    # -- structure ----------------------------------------------------------

    def node(self, node_id: int) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise NodeNotFound(f"no node with id {node_id}") from None

    def find_by_label(self, label: str) -> Node | None:
        for node in self.nodes.values():
            if node.label == label:
                return node
        return None

    def nodes_by_kind(self, kind: str) -> list[Node]:
        return [n for n in sorted(self.nodes.values(), key=lambda n: n.id) if n.kind == kind]

    def data_source_for(self, dataset: str) -> Node | None:
        for node in self.nodes_by_kind(DATA_SOURCE):
            if node.options.get("table") == dataset:
                return node
        return None

    def in_edges(self, node_id: int, port: str | None = None) -> list[Edge]:
        found = [e for e in self.edges.values() if e.dst == node_id]
        if port is not None:
            found = [e for e in found if e.dst_port == port]
        return sorted(found, key=lambda e: e.id)

    def out_edges(self, node_id: int, port: str | None = None) -> list[Edge]:
        found = [e for e in self.edges.values() if e.src == node_id]
        if port is not None:
            found = [e for e in found if e.src_port == port]
        return sorted(found, key=lambda e: e.id)

    def _unique_label(self, base: str) -> str:
        if self.find_by_label(base) is None:
            return base
        n = 2
        while self.find_by_label(f"{base}-{n}") is not None:
            n += 1
        return f"{base}-{n}"

    def add_node(
        self,
        kind: str,
        label: str | None = None,
        position: tuple[float, float] | None = None,
        options: dict | None = None,
    ) -> int:
        if kind not in NODE_KINDS:
            raise OptionsError(f"unknown node kind '{kind}'")
        options = copy.deepcopy(options) if options else {}
        if kind == DATA_SOURCE:
            table = options.get("table")
            if table not in self.tables:
                raise DatasetNotFound(f"dataset '{table}' is not loaded")
        elif kind == VISUALIZATION:
            vis_type = options.setdefault("visType", "scatterplot")
            if vis_type not in VIS_TYPES:
                raise OptionsError(f"unknown visualization type '{vis_type}'")
            options.setdefault("columns", [])
        elif kind == ATTRIBUTE_FILTER:
            FilterSpec.from_dict(options.setdefault("filter", {})).validate()
        elif kind == VISUAL_EDITOR:
            if "encoding" not in options:
                raise OptionsError("visual editor needs an encoding")
            EncodingSpec.from_dict(options["encoding"]).validate()
        elif kind == SET_OPERATOR:
            op = options.setdefault("op", "union")
            if op not in SET_OPS:
                raise OptionsError(f"unknown set operation '{op}'")
        elif kind == CONSTANTS_EXTRACTOR:
            if not options.get("column"):
                raise OptionsError("constants extractor needs a column")
        node_id = self._next_node_id
        self._next_node_id += 1
        node = Node(
            id=node_id,
            kind=kind,
            label=self._unique_label(label or f"node-{node_id}"),
            options=options,
            position=tuple(position) if position else (0.0, 0.0),
            size=DEFAULT_SIZES.get(kind, DEFAULT_SIZE),
        )
        self._apply(_AddNode(node))
        return node_id

    def remove_node(self, node_id: int) -> None:
        node = self.node(node_id)
        with self._ensure_group():
            for edge in self.in_edges(node_id) + self.out_edges(node_id):
                self._apply(_RemoveEdge(edge))
            self._apply(_RemoveNode(node, self.selections.get(node_id)))

    def add_edge(self, src: int, src_port: str, dst: int, dst_port: str) -> int:
        src_node = self.node(src)
        dst_node = self.node(dst)
        if src_port not in OUT_PORTS[src_node.kind]:
            raise PortError(f"{src_node.kind} has no output port '{src_port}'")
        if dst_port not in IN_PORTS[dst_node.kind]:
            raise PortError(f"{dst_node.kind} has no input port '{dst_port}'")
        if (src_port in _CONSTANTS_PORTS) != (dst_port in _CONSTANTS_PORTS):
            raise PortError(f"cannot connect {src_port} to {dst_port}")
        if src == dst:
            raise CycleError("self-loop rejected")
        for edge in self.in_edges(dst, dst_port):
            if edge.src == src and edge.src_port == src_port:
                raise PortError("duplicate edge")
            if (dst_node.kind, dst_port) not in _MULTI_IN:
                raise PortError(f"port {dst_port} of '{dst_node.label}' already connected")
        if self._reaches(dst, src):
            raise CycleError(f"edge {src}->{dst} would close a cycle")
        edge_id = self._next_edge_id
        self._next_edge_id += 1
        self._apply(_AddEdge(Edge(edge_id, src, src_port, dst, dst_port)))
        return edge_id

    def remove_edge(self, edge_id: int) -> None:
        if edge_id not in self.edges:
            raise PortError(f"no edge with id {edge_id}")
        self._apply(_RemoveEdge(self.edges[edge_id]))

    def _reaches(self, start: int, goal: int) -> bool:
        stack = [start]
        seen = set()
        while stack:
            current = stack.pop()
            if current == goal:
                return True
            if current in seen:
                continue
            seen.add(current)
            stack.extend(e.dst for e in self.out_edges(current))
        return False

    def set_options(self, node_id: int, options: dict) -> None:
        node = self.node(node_id)
        self._apply(_SetOptions(node_id, node.options, copy.deepcopy(options)))

    def set_selection(self, node_id: int, rows) -> None:
        node = self.node(node_id)
        if node.kind != VISUALIZATION:
            raise PortError(f"'{node.label}' has no selection port")
        rows = tuple(sorted(set(int(r) for r in rows)))
        input_rows = set(self._input_subset(node_id).row_indices)
        outside = [r for r in rows if r not in input_rows]
        if outside:
            raise RangeError(f"rows {outside} are not in the input of '{node.label}'")
        self._apply(_SetSelection(node_id, self.selections.get(node_id, ()), rows))

    def move_node(self, node_id: int, x: float, y: float, pin: bool = True) -> None:
        node = self.node(node_id)
        node.position = (float(x), float(y))
        if pin:
            node.pinned = True

    # -- history ------------------------------------------------------------

    def _apply(self, delta: _Delta) -> None:
        delta.do(self)
        self._cache_key = None
        if self._group is not None:
            self._group.append(delta)
        else:
            self._undo.append([delta])
            self._redo.clear()

    @contextmanager
    def group(self):
        """Collect all mutations inside the block into one undo unit.

        On error every delta issued so far is rolled back before re-raising,
        so a failed composite edit leaves no trace.
        """
        if self._group is not None:
            raise RuntimeError("delta groups do not nest")
        self._group = []
        try:
            yield
        except BaseException:
            for delta in reversed(self._group):
                delta.undo(self)
            self._cache_key = None
            self._group = None
            raise
        else:
            deltas = self._group
            self._group = None
            if deltas:
                self._undo.append(deltas)
                self._redo.clear()

    @contextmanager
    def _ensure_group(self):
        if self._group is not None:
            yield
        else:
            with self.group():
                yield

    @property
    def undo_depth(self) -> int:
        return len(self._undo)

    @property
    def can_undo(self) -> bool:
        return bool(self._undo)

    @property
    def can_redo(self) -> bool:
        return bool(self._redo)

    def undo(self) -> None:
        if not self._undo:
            raise NothingToUndo("nothing to undo")
        deltas = self._undo.pop()
        for delta in reversed(deltas):
            delta.undo(self)
        self._cache_key = None
        self._redo.append(deltas)

    def redo(self) -> None:
        if not self._redo:
            raise NothingToRedo("nothing to redo")
        deltas = self._redo.pop()
        for delta in deltas:
            delta.do(self)
        self._cache_key = None
        self._undo.append(deltas)

    # -- propagation --------------------------------------------------------

    def topological_order(self) -> list[int]:
        incoming = {nid: len(self.in_edges(nid)) for nid in self.nodes}
        ready = sorted(nid for nid, n in incoming.items() if n == 0)
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for edge in self.out_edges(nid):
                incoming[edge.dst] -= 1
                if incoming[edge.dst] == 0:
                    # keep ascending-id order for determinism
                    ready.append(edge.dst)
                    ready.sort()
        if len(order) != len(self.nodes):
            raise CycleError("diagram contains a cycle")
        return order

    def propagate(self) -> dict[tuple[int, str], object]:
        """Evaluate every node; returns payloads keyed by (nodeId, outPort)."""
        key = (len(self._undo), len(self._redo), self._group is None, len(self.nodes), len(self.edges))
        if self._group is None and self._cache_key == key:
            return self._cache
        outputs: dict[tuple[int, str], object] = {}
        for nid in self.topological_order():
            node = self.nodes[nid]
            data_in = [
                outputs[(e.src, e.src_port)] for e in self.in_edges(nid, DATA_IN)
            ]
            if node.kind == DATA_SOURCE:
                table = self.tables.get(node.options["table"])
                if table is None:
                    raise DatasetNotFound(f"dataset '{node.options['table']}' is not loaded")
                outputs[(nid, DATA_OUT)] = Subset(table.name, tuple(range(table.row_count)))
            elif node.kind == ATTRIBUTE_FILTER:
                subset = data_in[0] if data_in else Subset(None)
                constants = [
                    outputs[(e.src, e.src_port)] for e in self.in_edges(nid, CONSTANTS_IN)
                ]
                spec = FilterSpec.from_dict(node.options.get("filter", {}))
                outputs[(nid, DATA_OUT)] = self._run_filter(subset, spec, constants)
            elif node.kind == VISUAL_EDITOR:
                subset = data_in[0] if data_in else Subset(None)
                spec = EncodingSpec.from_dict(node.options["encoding"])
                outputs[(nid, DATA_OUT)] = self._run_editor(subset, spec)
            elif node.kind == SET_OPERATOR:
                outputs[(nid, DATA_OUT)] = self._run_set_op(node.options["op"], data_in)
            elif node.kind == CONSTANTS_EXTRACTOR:
                subset = data_in[0] if data_in else Subset(None)
                outputs[(nid, CONSTANTS_OUT)] = self._run_extractor(subset, node.options["column"])
            elif node.kind == VISUALIZATION:
                subset = data_in[0] if data_in else Subset(None)
                outputs[(nid, DATA_OUT)] = subset
                selected = set(self.selections.get(nid, ()))
                outputs[(nid, SELECTION_OUT)] = subset.restrict(selected)
        if self._group is None:
            self._cache_key = key
            self._cache = outputs
        return outputs

    def output(self, node_id: int, port: str = DATA_OUT):
        payload = self.propagate().get((node_id, port))
        if payload is None:
            raise PortError(f"node {node_id} has no output port '{port}'")
        return payload

    def _input_subset(self, node_id: int) -> Subset:
        edges = self.in_edges(node_id, DATA_IN)
        if not edges:
            return Subset(None)
        return self.propagate()[(edges[0].src, edges[0].src_port)]

    def _require_column(self, subset: Subset, column: str) -> Table:
        table = self.tables[subset.table]
        if not table.has_column(column):
            raise ColumnNotFound(f"table '{table.name}' has no column '{column}'")
        return table

    def _run_filter(self, subset: Subset, spec: FilterSpec, constants: list) -> Subset:
        values = list(spec.values or ())
        column = spec.column
        for payload in constants:
            values.extend(payload.values)
            column = column or payload.column
        if subset.table is None:
            return subset
        if values:
            table = self._require_column(subset, column)
            keep = {
                i for i in subset.row_indices if self._cell_matches(table, i, column, values)
            }
            return subset.restrict(keep)
        if spec.predicate == "extremum":
            table = self._require_column(subset, column)
            if table.column_kind(column) != NUMERIC:
                raise RangeError(f"column '{column}' is not numeric")
            scored = [
                (table.numeric(i, column), i)
                for i in subset.row_indices
                if table.numeric(i, column) is not None
            ]
            reverse = spec.direction == "max"
            scored.sort(key=lambda pair: (-pair[0] if reverse else pair[0], pair[1]))
            return subset.restrict({i for _, i in scored[: spec.count]})
        if spec.predicate == "range":
            table = self._require_column(subset, column)
            if table.column_kind(column) != NUMERIC:
                raise RangeError(f"column '{column}' is not numeric")
            keep = set()
            for i in subset.row_indices:
                value = table.numeric(i, column)
                if value is None:
                    continue
                if spec.min_value is not None and value < spec.min_value:
                    continue
                if spec.max_value is not None and value > spec.max_value:
                    continue
                keep.add(i)
            return subset.restrict(keep)
        return subset  # NoOp placeholder passes everything through

    def _cell_matches(self, table: Table, row: int, column: str, values: list[str]) -> bool:
        if table.column_kind(column) == NUMERIC:
            cell = table.numeric(row, column)
            for value in values:
                try:
                    if cell is not None and cell == float(value):
                        return True
                except ValueError:
                    continue
            return False
        return table.cell(row, column) in values

    def _run_editor(self, subset: Subset, spec: EncodingSpec) -> Subset:
        if subset.table is None or not subset.row_indices:
            return subset
        if spec.mode == "assignConstant":
            color = spec.constant
            return subset.with_visuals({i: {"color": color} for i in subset.row_indices})
        table = self._require_column(subset, spec.column)
        if table.column_kind(spec.column) != NUMERIC:
            raise RangeError(f"column '{spec.column}' is not numeric")
        low, high = scale_endpoints(spec.scale or DEFAULT_SCALE)
        values = {
            i: table.numeric(i, spec.column)
            for i in subset.row_indices
            if table.numeric(i, spec.column) is not None
        }
        if not values:
            return subset
        lo, hi = min(values.values()), max(values.values())
        span = hi - lo
        assign = {
            i: {"color": _interpolate_hex(low, high, (v - lo) / span if span else 0.5)}
            for i, v in values.items()
        }
        return subset.with_visuals(assign)

    def _run_set_op(self, op: str, inputs: list[Subset]) -> Subset:
        live = [s for s in inputs if s.table is not None]
        if not live:
            return Subset(None)
        tables = {s.table for s in live}
        if len(tables) > 1:
            raise TableMismatch(f"set operation over different tables: {sorted(tables)}")
        row_sets = [set(s.row_indices) for s in live]
        if op == "union":
            rows = set().union(*row_sets)
        elif op == "intersection":
            rows = set.intersection(*row_sets)
        else:  # difference
            rows = row_sets[0].difference(*row_sets[1:]) if len(row_sets) > 1 else row_sets[0]
        visuals: dict[int, dict] = {}
        for s in live:  # later input wins on conflicting visuals
            for i, v in s.visuals.items():
                if i in rows:
                    visuals.setdefault(i, {}).update(v)
        return Subset(live[0].table, tuple(sorted(rows)), visuals)

    def _run_extractor(self, subset: Subset, column: str) -> Constants:
        if subset.table is None:
            return Constants(column, ())
        table = self._require_column(subset, column)
        numeric = table.column_kind(column) == NUMERIC
        seen = set()
        values = []
        for i in subset.row_indices:
            cell = table.cell(i, column)
            key = table.numeric(i, column) if numeric else cell
            if key is None or key in seen:
                continue
            seen.add(key)
            values.append(cell)
        return Constants(column, tuple(values))

    # -- identity & persistence ----------------------------------------------

    def structure_hash(self) -> str:
        """Digest of structure, options, and selections; layout-independent."""
        doc = {
            "nodes": [
                [n.id, n.kind, n.label, n.options]
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": sorted(
                [e.src, e.src_port, e.dst, e.dst_port] for e in self.edges.values()
            ),
            "selections": {
                str(nid): list(rows) for nid, rows in sorted(self.selections.items()) if rows
            },
        }
        encoded = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(encoded.encode("utf-8")).hexdigest()

    def to_document(self) -> dict:
        return {
            "datasets": [self.tables[name].to_dict() for name in sorted(self.tables)],
            "nodes": [n.to_dict() for n in sorted(self.nodes.values(), key=lambda n: n.id)],
            "edges": [e.to_dict() for e in sorted(self.edges.values(), key=lambda e: e.id)],
            "selections": {str(nid): list(rows) for nid, rows in sorted(self.selections.items())},
            "nextNodeId": self._next_node_id,
            "nextEdgeId": self._next_edge_id,
        }

    def save(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_document(cls, doc: dict) -> "Diagram":
        diagram = cls()
        for table_doc in doc.get("datasets", []):
            diagram.tables[table_doc["name"]] = Table.from_dict(table_doc)
        for node_doc in doc.get("nodes", []):
            node = Node.from_dict(node_doc)
            diagram.nodes[node.id] = node
        for edge_doc in doc.get("edges", []):
            edge = Edge.from_dict(edge_doc)
            diagram.edges[edge.id] = edge
        for nid, rows in doc.get("selections", {}).items():
            diagram.selections[int(nid)] = tuple(rows)
        diagram._next_node_id = doc.get(
            "nextNodeId", max(diagram.nodes, default=0) + 1
        )
        diagram._next_edge_id = doc.get(
            "nextEdgeId", max(diagram.edges, default=0) + 1
        )
        return diagram

    @classmethod
    def load(cls, text: str) -> "Diagram":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedData(f"not a diagram document: {exc}") from exc
        return cls.from_document(doc)

    def clone(self) -> "Diagram":
        """Deep copy including history, for transactional mutation."""
        return copy.deepcopy(self)

"""Query pattern completion: resolve references and fill defaults.

The parser leaves every component a query does not mention unspecified.
This stage makes frames concrete against the live diagram: label, type,
and dataset references become node ids; implicit references resolve to
the nodes the user most plausibly means, taken in decreasing focus order;
documented defaults fill the remaining blanks (a scatterplot target, its
first two numeric columns, a union set operation, a unit extremum count,
the standard color scale).  Named columns are checked against the table
each function will actually see, so the executor can apply a completed
command mechanically.
"""

from collections.abc import Collection
from dataclasses import dataclass, field

from . import tagging
from .diagram import (
    ATTRIBUTE_FILTER,
    CONSTANTS_EXTRACTOR,
    DATA_OUT,
    DATA_SOURCE,
    DEFAULT_SCALE,
    SELECTION_OUT,
    SET_OPERATOR,
    VISUAL_EDITOR,
    VISUALIZATION,
    Diagram,
)
from .errors import (
    ColumnNotFound,
    DatasetNotFound,
    InsufficientSources,
    NodeNotFound,
    OptionsError,
    PortError,
)
from .focus import FocusTracker
from .frames import (
    BY_DATASET,
    BY_LABEL,
    BY_TYPE,
    IMPLICIT_FOCUS,
    NEW_NODE,
    PORT_DATA,
    PORT_SELECTION,
    PORT_UNSPECIFIED,
    RESOLVED,
    RESULT,
    FunctionFrame,
    NodeRef,
    command_signature,
    frame_result,
    implicit_focus,
    new_node,
    resolved_node,
)
from .tables import Table

SCATTERPLOT = "scatterplot"

# Which node kinds can serve an implicit reference, by what the function
# needs from the node.
_ELIGIBLE = {
    "data": lambda kind: kind != CONSTANTS_EXTRACTOR,
    "selection": lambda kind: kind == VISUALIZATION,
    "any": lambda kind: True,
}

_SHORTAGE = {
    "data": "no further node with a data output is available",
    "selection": "no further visualization is available to take a selection from",
    "any": "the diagram has no node to act on",
}

# The kind of node that executing each function creates (and that later
# frames of the same command may chain from).
_RESULT_KINDS = {
    tagging.VISUALIZE: VISUALIZATION,
    tagging.FILTER: ATTRIBUTE_FILTER,
    tagging.ENCODE: VISUAL_EDITOR,
    tagging.MERGE: SET_OPERATOR,
    tagging.HIGHLIGHT: VISUALIZATION,
    tagging.LINK: ATTRIBUTE_FILTER,
    tagging.LOAD: DATA_SOURCE,
}


@dataclass
class CompletedCommand:
    """Frames with every reference resolved and every default filled.

    Source and target references carry only ``node:<id>`` (an existing
    node), ``result:<index>`` (the node an earlier frame of this command
    creates), or ``new:<visType>`` kinds.  A filter or encode frame with
    an existing-node target is to be spliced onto that node's input edge;
    one with a source chains from that source's output port.
    """

    frames: list[FunctionFrame] = field(default_factory=list)

    def signature(self) -> str:
        return command_signature(self.frames)


def default_columns(table: Table, vis_type: str) -> list[str]:
    """Columns a new visualization shows when the query names none."""
    if vis_type == SCATTERPLOT:
        return table.numeric_column_names()[:2]
    return []


def complete(
    frames: list[FunctionFrame],
    diagram: Diagram,
    tracker: FocusTracker,
    datasets: Collection[str] | None = None,
) -> CompletedCommand:
    """Resolve every frame of a parsed command against the diagram.

    ``datasets`` optionally names the datasets available to load, for
    validating load commands up front.
    """
    return _Completer(diagram, tracker, datasets).run(frames)


class _Completer:
    def __init__(self, diagram: Diagram, tracker: FocusTracker, datasets):
        self.diagram = diagram
        self.tracker = tracker
        self.datasets = datasets
        self.completed: list[FunctionFrame] = []
        self.result_tables: list[str | None] = []
        self.result_kinds: list[str | None] = []

    def run(self, frames: list[FunctionFrame]) -> CompletedCommand:
        for frame in frames:
            if self._satisfied_by_splice(frame):
                continue
            handler = self._handlers().get(frame.function_type)
            if handler is None:
                done, table = frame.copy(), None
            else:
                done, table = handler(frame)
            self.completed.append(done)
            self.result_tables.append(table)
            self.result_kinds.append(_RESULT_KINDS.get(frame.function_type))
        return CompletedCommand(self.completed)

    def _handlers(self):
        return {
            tagging.VISUALIZE: self._visualize,
            tagging.FILTER: self._filter,
            tagging.ENCODE: self._encode,
            tagging.MERGE: self._merge,
            tagging.HIGHLIGHT: self._highlight,
            tagging.LINK: self._link,
            tagging.LOAD: self._load,
            tagging.REMOVE: self._remove,
        }

    def _satisfied_by_splice(self, frame: FunctionFrame) -> bool:
        """A bare trailing Visualize adds nothing after an input splice.

        "Show the cars with mpg greater than 15" carries a Filter and a
        Visualize frame; when the filter lands on an existing chart's
        input, that chart already shows the filtered rows, so a Visualize
        frame with no particulars of its own is dropped rather than
        opening a redundant default chart.
        """
        if frame.function_type != tagging.VISUALIZE:
            return False
        if frame.options or frame.sources or frame.targets or frame.port:
            return False
        if not self.completed:
            return False
        previous = self.completed[-1]
        return previous.function_type == tagging.FILTER and bool(previous.targets)

    # -- reference resolution -------------------------------------------------

    def _resolve(self, ref: NodeRef) -> NodeRef:
        """Resolve an explicit reference to a concrete node id."""
        if ref.kind in (RESOLVED, RESULT, NEW_NODE):
            return ref
        if ref.kind == BY_LABEL:
            node = self.diagram.find_by_label(ref.value)
            if node is None:
                raise NodeNotFound(f"no node labeled '{ref.value}'")
            return resolved_node(node.id)
        if ref.kind == BY_TYPE:
            ranked = self.tracker.rank(
                self.diagram, lambda n: n.vis_type == ref.value
            )
            if not ranked:
                raise NodeNotFound(f"there is no {ref.value} in the diagram")
            return resolved_node(ranked[0])
        if ref.kind == BY_DATASET:
            node = self.diagram.data_source_for(ref.value)
            if node is None:
                raise NodeNotFound(
                    f"dataset '{ref.value}' has no node in the diagram; load it first"
                )
            return resolved_node(node.id)
        raise NodeNotFound(f"cannot resolve reference '{ref.describe()}'")

    def _pick_implicit(self, mode: str, taken: set[NodeRef]) -> NodeRef:
        """The node an unstated reference means: latest pending result,
        else the highest-focus eligible node."""
        eligible = _ELIGIBLE[mode]
        for index in range(len(self.completed) - 1, -1, -1):
            kind = self.result_kinds[index]
            ref = frame_result(index)
            if kind is not None and eligible(kind) and ref not in taken:
                return ref
        for node_id in self.tracker.rank(self.diagram, lambda n: eligible(n.kind)):
            ref = resolved_node(node_id)
            if ref not in taken:
                return ref
        raise InsufficientSources(_SHORTAGE[mode])

    def _resolve_sources(
        self,
        refs: list[NodeRef],
        port: str,
        needed: int,
        implicit_mode: str | None = None,
    ) -> list[NodeRef]:
        """Resolve stated sources and fill missing ones, keeping order.

        Explicit references resolve first so implicit picks never repeat
        them; each pick also excludes nodes already used by this frame.
        """
        refs = list(refs)
        while len(refs) < needed:
            refs.append(implicit_focus())
        if implicit_mode is None:
            implicit_mode = "selection" if port == PORT_SELECTION else "data"
        out: list[NodeRef | None] = [None] * len(refs)
        taken: set[NodeRef] = set()
        for i, ref in enumerate(refs):
            if ref.kind != IMPLICIT_FOCUS:
                out[i] = self._resolve(ref)
                self._require_port(out[i], port)
                taken.add(out[i])
        for i, ref in enumerate(refs):
            if out[i] is None:
                picked = self._pick_implicit(implicit_mode, taken)
                taken.add(picked)
                out[i] = picked
        return out

    def _kind_of(self, ref: NodeRef) -> str | None:
        if ref.kind == RESOLVED:
            return self.diagram.node(ref.value).kind
        if ref.kind == RESULT:
            return self.result_kinds[ref.value]
        if ref.kind == NEW_NODE:
            return VISUALIZATION
        return None

    def _is_visualization(self, ref: NodeRef) -> bool:
        return self._kind_of(ref) == VISUALIZATION

    def _require_port(self, ref: NodeRef, port: str) -> None:
        kind = self._kind_of(ref)
        if port == PORT_SELECTION and kind != VISUALIZATION:
            raise PortError(f"{ref.describe()} has no selection output")
        if port == PORT_DATA and kind == CONSTANTS_EXTRACTOR:
            raise PortError(f"{ref.describe()} has no data output")

    # -- tables and columns ----------------------------------------------------

    def _source_table(self, ref: NodeRef, port: str = PORT_DATA) -> str | None:
        """Name of the table flowing out of a resolved reference."""
        if ref.kind == RESULT:
            return self.result_tables[ref.value]
        if ref.kind == RESOLVED:
            out_port = SELECTION_OUT if port == PORT_SELECTION else DATA_OUT
            return self.diagram.output(ref.value, out_port).table
        return None

    def _table(self, name: str | None) -> Table | None:
        return self.diagram.tables.get(name) if name else None

    def _check_columns(self, table_name: str | None, columns) -> None:
        table = self._table(table_name)
        if table is None:
            return
        for column in columns:
            if not table.has_column(column):
                raise ColumnNotFound(
                    f"table '{table_name}' has no column '{column}'"
                )

    # -- per-function completion ------------------------------------------------

    def _visualize(self, frame: FunctionFrame):
        done = frame.copy()
        done.port = frame.port or PORT_DATA
        done.sources = self._resolve_sources(frame.sources, done.port, needed=1)
        if not done.targets:
            done.targets = [new_node(SCATTERPLOT)]
        table_name = self._source_table(done.sources[0], done.port)
        self._check_columns(table_name, done.options.get("columns", []))
        if "groupby" in done.options:
            self._check_columns(table_name, [done.options["groupby"]])
        table = self._table(table_name)
        if not done.options.get("columns") and table is not None:
            fallback = default_columns(table, done.targets[0].value)
            if fallback:
                done.options["columns"] = fallback
        elif (
            done.targets[0].kind == NEW_NODE
            and done.targets[0].value == SCATTERPLOT
            and len(done.options.get("columns", ())) == 1
            and table is not None
        ):
            # A scatterplot needs two axes; pair a lone named column with
            # the first numeric column the user did not already claim.
            named = done.options["columns"][0]
            partner = [c for c in table.numeric_column_names() if c != named]
            if partner:
                done.options["columns"] = [named, partner[0]]
        return done, table_name

    def _filter(self, frame: FunctionFrame):
        done = frame.copy()
        stated = bool(frame.sources) or frame.port != PORT_UNSPECIFIED
        done.port = frame.port or PORT_DATA
        (source,) = self._resolve_sources(frame.sources, done.port, needed=1)
        if not stated and source.kind == RESOLVED and self._is_visualization(source):
            # Filtering an implicitly chosen chart narrows what that chart
            # shows: the filter lands on its input, not its output.
            done.targets = [source]
            done.sources = []
            table_name = self._source_table(source, PORT_DATA)
        else:
            done.sources = [source]
            table_name = self._source_table(source, done.port)
        if "column" in done.options:
            self._check_columns(table_name, [done.options["column"]])
        if done.options.get("direction") is not None:
            count = done.options.get("count")
            done.options["count"] = 1 if count is None else int(count)
        return done, table_name

    def _encode(self, frame: FunctionFrame):
        done = frame.copy()
        done.port = frame.port or PORT_DATA
        if frame.targets:
            target = self._resolve(frame.targets[0])
            done.targets = [target]
            done.sources = []
            table_name = self._source_table(target, PORT_DATA)
        else:
            stated = bool(frame.sources) or frame.port != PORT_UNSPECIFIED
            (source,) = self._resolve_sources(frame.sources, done.port, needed=1)
            if (
                not stated
                and source.kind == RESOLVED
                and self._is_visualization(source)
            ):
                done.targets = [source]
                done.sources = []
                table_name = self._source_table(source, PORT_DATA)
            else:
                done.sources = [source]
                table_name = self._source_table(source, done.port)
        if done.options.get("mode") == "colorScale":
            done.options.setdefault("scale", DEFAULT_SCALE)
            if "column" in done.options:
                self._check_columns(table_name, [done.options["column"]])
        return done, table_name

    def _merge(self, frame: FunctionFrame):
        done = frame.copy()
        done.port = frame.port or PORT_DATA
        done.options.setdefault("op", "union")
        done.sources = self._resolve_sources(
            frame.sources, done.port, needed=2, implicit_mode="data"
        )
        return done, self._source_table(done.sources[0], PORT_DATA)

    def _highlight(self, frame: FunctionFrame):
        done = frame.copy()
        done.port = PORT_SELECTION
        done.sources = self._resolve_sources(
            frame.sources, PORT_SELECTION, needed=1, implicit_mode="selection"
        )
        if not done.targets:
            done.targets = [new_node(SCATTERPLOT)]
        return done, self._source_table(done.sources[0], PORT_DATA)

    def _link(self, frame: FunctionFrame):
        done = frame.copy()
        done.port = frame.port or PORT_DATA
        refs = list(frame.sources) or [implicit_focus()]
        subset_ref = refs[0]
        table_ref = refs[1] if len(refs) > 1 else None

        taken: set[NodeRef] = set()
        if table_ref is not None:
            table_ref = self._resolve(table_ref)
            taken.add(table_ref)
        if subset_ref.kind == IMPLICIT_FOCUS:
            mode = "selection" if done.port == PORT_SELECTION else "data"
            subset_ref = self._pick_implicit(mode, taken)
        else:
            subset_ref = self._resolve(subset_ref)
            self._require_port(subset_ref, done.port)
        taken.add(subset_ref)

        subset_table = self._table(self._source_table(subset_ref, done.port))
        key = done.options.get("key")
        if key is not None and subset_table is not None:
            self._check_columns(subset_table.name, [key])
        if table_ref is None:
            table_ref = self._pick_link_table(subset_table, key, taken)
        second_table = self._source_table(table_ref, PORT_DATA)
        if key is None:
            key = self._shared_column(subset_table, self._table(second_table))
            done.options["key"] = key

        done.sources = [subset_ref, table_ref]
        return done, second_table

    def _pick_link_table(
        self, subset_table: Table | None, key: str | None, taken: set[NodeRef]
    ) -> NodeRef:
        """An unstated second table means: the most focused data source
        over a different table that has (or shares) the key column."""
        for node_id in self.tracker.rank(
            self.diagram, lambda n: n.kind == DATA_SOURCE
        ):
            ref = resolved_node(node_id)
            if ref in taken:
                continue
            table = self._table(self._source_table(ref, PORT_DATA))
            if table is None or (subset_table and table.name == subset_table.name):
                continue
            if key is not None:
                if table.has_column(key):
                    return ref
            elif subset_table is None or self._shared_column(
                subset_table, table, required=False
            ):
                return ref
        raise InsufficientSources(
            "no data source over another table is available to link with"
        )

    def _shared_column(
        self, first: Table | None, second: Table | None, required: bool = True
    ) -> str | None:
        if first is not None and second is not None:
            for name in first.column_names:
                if second.has_column(name):
                    return name
        if required:
            raise OptionsError(
                "the linked tables share no column; name the key column"
            )
        return None

    def _load(self, frame: FunctionFrame):
        done = frame.copy()
        name = done.options.get("dataset")
        known = name in self.diagram.tables or (
            self.datasets is not None and name in self.datasets
        )
        if self.datasets is not None and not known:
            raise DatasetNotFound(f"no dataset named '{name}' is available")
        return done, name

    def _remove(self, frame: FunctionFrame):
        done = frame.copy()
        if done.targets:
            done.targets = [self._resolve(done.targets[0])]
        else:
            done.targets = [self._pick_implicit("any", set())]
        return done, None

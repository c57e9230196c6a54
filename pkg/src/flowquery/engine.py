"""Session facade tying the language pipeline to a live diagram.

A :class:`Session` owns one diagram, its focus tracker, and a set of
language resources, and walks raw text through tagging, parsing,
completion, execution, and layout.  The HTTP service, the command line,
and the test suites all drive the engine through this one surface.
"""

from dataclasses import dataclass
from pathlib import Path

from . import autocomplete, bundled, completion, executor, layout, parsing, tagging
from .completion import CompletedCommand
from .diagram import VIS_DISPLAY_NAMES, Diagram
from .errors import DatasetNotFound
from .executor import ExecutionOutcome
from .focus import FocusTracker
from .grammar import GrammarSpec, load_grammar
from .parsing import Derivation
from .tables import Table, load_table
from .tagging import FunctionWordClassifier, Lexicon, TagContext, TagSpan, Token

# Labels the bundled training examples refer to; the training context must
# offer them so the node-reference readings exist at training time.
TRAINING_NODE_LABELS = ("MyChart", "MyNewChart")


@dataclass(frozen=True)
class LanguageResources:
    """Everything the pipeline loads from disk, resolved once per process."""

    grammar: GrammarSpec
    weights: dict[str, float]
    lexicon: Lexicon
    classifier: FunctionWordClassifier
    templates: list[str]

    @classmethod
    def load(
        cls,
        grammar_path: str | None = None,
        weights_path: str | None = None,
        templates_path: str | None = None,
    ) -> "LanguageResources":
        """Bundled resources, with optional per-file overrides."""

        def text_of(path: str | None, resource: str) -> str:
            if path is None:
                return bundled.read_resource(resource)
            with open(path, encoding="utf-8") as handle:
                return handle.read()

        return cls(
            grammar=load_grammar(text_of(grammar_path, "core.grammar")),
            weights=parsing.parse_weights(text_of(weights_path, "weights.txt")),
            lexicon=bundled.load_pos_lexicon(),
            classifier=FunctionWordClassifier(bundled.load_function_words()),
            templates=autocomplete.load_templates(
                text_of(templates_path, "templates.txt")
            ),
        )


class BundledDatasets:
    """The dataset catalog shipped inside the package."""

    def names(self) -> list[str]:
        return bundled.dataset_names()

    def load(self, name: str) -> Table:
        return load_table(bundled.read_dataset(name), name)


class DirectoryDatasets:
    """Datasets read from a directory of delimiter-separated files."""

    def __init__(self, path):
        self.path = Path(path)

    def names(self) -> list[str]:
        return sorted(entry.stem for entry in self.path.glob("*.csv"))

    def load(self, name: str) -> Table:
        file = self.path / f"{name}.csv"
        if not file.is_file():
            raise DatasetNotFound(f"no dataset file '{file}'")
        return load_table(file.read_text(encoding="utf-8"), name)


@dataclass(frozen=True)
class TaggedText:
    """Tagger output for one piece of input text."""

    tokens: list[Token]
    spans: list[TagSpan]
    pos_tags: list[str]


@dataclass(frozen=True)
class QueryResult:
    """What applying one query did to the session's diagram."""

    command: CompletedCommand
    outcome: ExecutionOutcome
    moved: tuple[int, ...] = ()
    derivation_count: int = 1

    @property
    def signature(self) -> str:
        return self.command.signature()


class Session:
    """One user's diagram plus the interaction state the language needs."""

    def __init__(
        self,
        resources: LanguageResources | None = None,
        diagram: Diagram | None = None,
        datasets=None,
    ):
        self.resources = resources or LanguageResources.load()
        self.diagram = diagram or Diagram()
        self.tracker = FocusTracker()
        self.datasets = datasets or BundledDatasets()

    def reset(self) -> None:
        """Drop all diagram and focus state, keeping the loaded resources."""
        self.diagram = Diagram()
        self.tracker = FocusTracker()

    # -- context ------------------------------------------------------

    def context(self) -> TagContext:
        """Entity names currently in scope for the tagger.

        Columns come only from tables actually loaded into the diagram;
        dataset names cover both the bundled catalog and loaded tables.
        """
        columns: list[str] = []
        for table in self.diagram.tables.values():
            columns.extend(table.column_names)
        datasets = list(self.datasets.names())
        datasets.extend(n for n in self.diagram.tables if n not in datasets)
        return TagContext.build(
            columns=columns,
            node_labels=[n.label for n in self.diagram.nodes.values() if n.label],
            node_types=VIS_DISPLAY_NAMES,
            dataset_names=datasets,
        )

    def add_dataset(self, text: str, name: str, delimiter: str = ",") -> Table:
        """Register uploaded tabular text so queries can refer to it."""
        return self.diagram.load_dataset(text, name, delimiter)

    # -- language pipeline --------------------------------------------

    def tag(self, text: str, overrides=()) -> TaggedText:
        tokens = tagging.tokenize(text)
        spans = tagging.tag_special_utterances(
            tokens, self.context(), lexicon=self.resources.lexicon
        )
        for index, choice in overrides:
            spans = tagging.override_tag(spans, index, choice)
        pos_tags = tagging.pos_tag(tokens, self.resources.lexicon)
        return TaggedText(tokens, spans, pos_tags)

    def parse(self, text: str, overrides=()) -> tuple[TaggedText, list[Derivation]]:
        tagged = self.tag(text, overrides)
        derivations = parsing.parse(
            tagged.tokens,
            tagged.spans,
            tagged.pos_tags,
            self.resources.grammar,
            self.resources.weights,
            classifier=self.resources.classifier,
        )
        return tagged, derivations

    def complete(self, derivation: Derivation) -> CompletedCommand:
        return completion.complete(
            derivation.frames,
            self.diagram,
            self.tracker,
            datasets=self.datasets.names(),
        )

    def query(self, text: str, overrides=()) -> QueryResult:
        """Apply one query to the diagram as a single undoable edit.

        Raises a FlowQueryError subclass on any failure; the executor's
        grouping guarantees the diagram is unchanged in that case.
        """
        _, derivations = self.parse(text, overrides)
        command = self.complete(derivations[0])
        outcome = executor.execute(command, self.diagram, loader=self.datasets.load)
        moved = layout.adjust(self.diagram, outcome.delta.created_nodes)
        produced = [node for node in outcome.frame_nodes if node is not None]
        if produced:
            # The query's product becomes the editing focus, exactly as a
            # click on it would: follow-up queries then build on it.
            self.tracker.record_click(self.diagram, produced[-1])
        return QueryResult(command, outcome, tuple(sorted(moved)), len(derivations))

    def suggest(self, partial: str, max_results: int = autocomplete.MAX_RESULTS):
        return autocomplete.complete_query(
            partial,
            self.context(),
            self.resources.grammar,
            self.resources.weights,
            self.resources.lexicon,
            self.resources.classifier,
            self.resources.templates,
            max_results=max_results,
        )

    def complete_word(self, partial_word: str):
        return autocomplete.complete_token(partial_word, self.context())

    # -- interaction events -------------------------------------------

    def click(self, target: int | None = None, position=None) -> None:
        self.tracker.record_click(self.diagram, target, position)

    def set_selection(self, node_id: int, rows) -> None:
        self.diagram.set_selection(node_id, rows)
        self.diagram.propagate()


# ---------------------------------------------------------------------------
# Ranker training glue


def training_context() -> TagContext:
    """Tag context the bundled training examples are parsed against.

    Training happens without a live diagram, so the context exposes every
    bundled dataset's columns plus a pair of stand-in chart labels.
    """
    columns: list[str] = []
    for name in bundled.dataset_names():
        columns.extend(load_table(bundled.read_dataset(name), name).column_names)
    return TagContext.build(
        columns=columns,
        node_labels=TRAINING_NODE_LABELS,
        node_types=VIS_DISPLAY_NAMES,
        dataset_names=bundled.dataset_names(),
    )


def training_parser(resources: LanguageResources, context: TagContext | None = None):
    """Query → derivations closure for the ranker trainer (zero weights)."""
    ctx = context or training_context()

    def parse_query(query: str) -> list[Derivation]:
        tokens = tagging.tokenize(query)
        spans = tagging.tag_special_utterances(tokens, ctx, lexicon=resources.lexicon)
        pos_tags = tagging.pos_tag(tokens, resources.lexicon)
        return parsing.parse(
            tokens,
            spans,
            pos_tags,
            resources.grammar,
            classifier=resources.classifier,
        )

    return parse_query

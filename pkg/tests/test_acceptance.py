"""Acceptance gate: the shipped behavior guarantees, one test per criterion.

Each test prints exactly one ``criterion NN PASS/FAIL`` line, so a full run
reads as a checklist.  Oracles here are deliberately independent of the
implementation: edit-distance ratios are recomputed with a frozen dynamic
program, focus scores with the closed-form formula, and diagram structure
is asserted on raw node kinds and edges.
"""

import math
import random
import re
import string
import time

from click.testing import CliRunner

from flowquery import bundled, cli, parsing
from flowquery.cli import apply_directive, run_suite
from flowquery.diagram import (
    ATTRIBUTE_FILTER,
    DATA_IN,
    DATA_OUT,
    DATA_SOURCE,
    SELECTION_OUT,
    SET_OPERATOR,
    VISUAL_EDITOR,
    VISUALIZATION,
    Diagram,
)
from flowquery.engine import LanguageResources, Session, training_parser
from flowquery.errors import FlowQueryError
from flowquery.focus import ALPHA, BETA, GAMMA, FocusTracker
from flowquery.tables import NUMERIC, load_table
from flowquery.tagging import COLUMN

RESOURCES = LanguageResources.load()
SUITE_TEXT = bundled.read_resource("suite.txt")


class _Verdict:
    """Prints the one-line checklist entry for a criterion."""

    def __init__(self, number: int, summary: str):
        self.number = number
        self.summary = summary

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        state = "PASS" if exc_type is None else "FAIL"
        print(f"criterion {self.number:>2} {state}  {self.summary}")
        return False


def fresh(datasets=None) -> Session:
    return Session(RESOURCES, datasets=datasets)


def prepared(*directives: str, datasets=None) -> Session:
    session = fresh(datasets)
    for directive in directives:
        apply_directive(session, directive)
    return session


def edge_set(diagram: Diagram) -> set[tuple[int, str, int, str]]:
    return {(e.src, e.src_port, e.dst, e.dst_port) for e in diagram.edges.values()}


def _lev(a: str, b: str) -> int:
    """Plain Levenshtein distance; the frozen oracle for tag ratios."""
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def oracle_ratio(a: str, b: str) -> float:
    return _lev(a.lower(), b.lower()) / max(len(a), len(b))


def suite_cases(text: str):
    """Yield the suite's per-line items: ("directive", line) or ("case", q, e)."""
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("!"):
            yield ("directive", line)
        else:
            query, expected = (part.strip() for part in line.split("\t", 1))
            yield ("case", query, expected)


# ---------------------------------------------------------------------------
# 1. A selection-scoped query builds exactly one chart off the right port.


def test_criterion_01_selection_query_adds_one_chart_and_one_edge():
    with _Verdict(1, "selection query adds one parallel-coordinates node, one edge, < 1 s"):
        session = prepared(
            "!data cars", "!chart MyChart cars", "!select MyChart 1 3 5"
        )
        assert len(session.diagram.tables["cars"].column_names) == 9
        chart = session.diagram.find_by_label("MyChart")
        nodes_before = set(session.diagram.nodes)
        edges_before = edge_set(session.diagram)

        started = time.perf_counter()
        session.query(
            "Visualize mpg, horsepower, and origin of the selected cars "
            "from MyChart in a parallel coordinates plot"
        )
        elapsed = time.perf_counter() - started

        created = set(session.diagram.nodes) - nodes_before
        assert len(created) == 1
        node = session.diagram.node(created.pop())
        assert node.kind == VISUALIZATION
        assert node.options["visType"] == "parallel-coordinates"
        assert node.options["columns"] == ["mpg", "horsepower", "origin"]
        new_edges = edge_set(session.diagram) - edges_before
        assert new_edges == {(chart.id, SELECTION_OUT, node.id, DATA_IN)}
        assert elapsed < 1.0, f"query took {elapsed:.3f}s"


# ---------------------------------------------------------------------------
# 2. The six sample queries, one per function category, with exact node deltas.


SAMPLE_CORPUS = (
    # (row, setup directives, query, node-count delta)
    ("A", ("!data cars",), "Show a scatterplot of mpg and horsepower", 1),
    ("B", ("!data cars",), "Encode mpg by red green color scale", 1),
    ("C", ("!data cars",), "Find all cars with mpg between 15 and 20", 1),
    ("C", ("!data cars",), "List five cars with maximum mpg", 1),
    (
        "D",
        ("!data cars", "!chart MyChart cars"),
        "Merge the cars with those from the scatterplot",
        1,
    ),
    (
        "E",
        ("!data cars", "!chart MyChart cars", "!select MyChart 0 2 4"),
        "Highlight the selected cars in a parallel coordinates plot",
        3,
    ),
    ("F", ("!data cars", "!data sales"), "Link the cars with a same name from the sales table", 2),
)


def test_criterion_02_sample_corpus_node_deltas():
    with _Verdict(2, "sample corpus rows A-F execute with node deltas +1/+1/+1/+1/+3/+2"):
        for row, directives, query, delta in SAMPLE_CORPUS:
            session = prepared(*directives)
            before = set(session.diagram.nodes)
            session.query(query)
            created = set(session.diagram.nodes) - before
            assert len(created) == delta, (
                f"row {row}: '{query}' created {len(created)} nodes, expected {delta}"
            )
            if row == "E":
                # Highlighting literally creates three nodes: the editor that
                # recolors the subset, the union that folds it back in, and
                # the chart that shows the result.
                kinds = {session.diagram.node(n).kind for n in created}
                assert kinds == {VISUAL_EDITOR, SET_OPERATOR, VISUALIZATION}


# ---------------------------------------------------------------------------
# 3. The bundled regression suite passes in full.


def test_criterion_03_bundled_suite_passes_in_full():
    with _Verdict(3, "bundled regression suite of 60+ queries passes 100%"):
        report: list[str] = []
        failures, total = run_suite(SUITE_TEXT, RESOURCES, echo=report.append)
        assert total >= 60
        failed = [line for line in report if line.startswith("FAIL")]
        assert failures == 0, "\n".join(failed)
        # The suite must span every function category, multi-function
        # queries, and outright rejections.
        for marker in (
            "visualize:",
            "encode:",
            "filter:",
            "merge:",
            "highlight:",
            "link:",
            " ; ",
            "ParseRejected",
        ):
            assert marker in SUITE_TEXT, f"suite lacks {marker} coverage"


# ---------------------------------------------------------------------------
# 4. Typo tolerance is exactly the 0.2 edit-distance-ratio rule.


def test_criterion_04_typo_tolerance_matches_edit_distance_oracle():
    with _Verdict(4, "'horsepwer' tags as the horsepower column at ratio 0.1; far strings never tag"):
        session = prepared("!data cars")

        spans = session.tag("horsepwer").spans
        assert len(spans) == 1
        span = spans[0]
        assert (span.category, span.value) == (COLUMN, "horsepower")
        assert span.ratio == oracle_ratio("horsepwer", "horsepower") == 0.1

        entries = [utterance for _, utterance, _ in session.context().entries()]
        assert entries, "tag context is empty"
        rng = random.Random(20260814)
        checked = 0
        while checked < 1000:
            word = "".join(
                rng.choice(string.ascii_lowercase)
                for _ in range(rng.randint(6, 12))
            )
            if min(oracle_ratio(word, entry) for entry in entries) <= 0.2:
                continue  # within tolerance of something real: tagging it is fine
            assert not session.tag(word).spans, f"'{word}' tagged despite ratio > 0.2"
            checked += 1


# ---------------------------------------------------------------------------
# 5. Twenty examples teach the ranker the column-versus-wildcard preference.


def test_criterion_05_training_flips_the_ambiguous_rankings():
    with _Verdict(5, "20-example training set flips ambiguous rankings in < 10 s"):
        pairs = parsing.parse_training_examples(
            bundled.read_resource("training_examples.txt")
        )
        assert len(pairs) <= 20

        parse_query = training_parser(RESOURCES)
        derivations = {query: parse_query(query) for query, _ in pairs}

        def best(query: str, weights: dict) -> str:
            return min(
                derivations[query],
                key=lambda d: (
                    -parsing.score_features(d.features, weights),
                    d.size,
                    d.rule_seq,
                ),
            ).signature()

        probes = {
            "Show a plot of horsepower": "visualize:columns=horsepower",
            "Show a plot of cars": "visualize",
        }
        pre_hits = sum(best(query, {}) == want for query, want in probes.items())
        assert pre_hits < len(probes), "zero weights already rank both probes correctly"

        started = time.perf_counter()
        weights = parsing.train_ranker(pairs, derivations.__getitem__)
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"training took {elapsed:.1f}s"

        for query, want in probes.items():
            assert best(query, weights) == want, f"'{query}' still mis-ranked"


# ---------------------------------------------------------------------------
# 6. Focus follows the published decay and distance formulas.


def test_criterion_06_focus_decay_distance_and_ranking():
    with _Verdict(6, "activeness halves per click; score formula exact; clicked node ranks first"):
        assert (ALPHA, BETA, GAMMA) == (2.0, 5.0, 500.0)

        diagram = Diagram()
        first = diagram.add_node(VISUALIZATION, position=(0.0, 0.0))
        second = diagram.add_node(VISUALIZATION, position=(900.0, 0.0))

        tracker = FocusTracker()
        tracker.record_click(diagram, first)
        for n in range(1, 51):
            tracker.record_click(diagram, second)
            assert abs(tracker.activeness_of(first) - 2.0**-n) < 1e-12

        tracker = FocusTracker()
        tracker.record_click(diagram, first)
        expected = 1.0 + 2.0 * (1.0 - 1.0 / (1.0 + math.exp(5.0)))
        assert abs(tracker.focus_score(diagram.node(first)) - expected) < 1e-9

        rng = random.Random(6)
        for _ in range(500):
            scene = Diagram()
            ids = [
                scene.add_node(
                    VISUALIZATION,
                    position=(rng.uniform(-3000, 3000), rng.uniform(-3000, 3000)),
                )
                for _ in range(rng.randint(2, 8))
            ]
            tracker = FocusTracker()
            for _ in range(rng.randint(1, 8)):
                if rng.random() < 0.2:  # background click somewhere
                    tracker.record_click(
                        scene,
                        None,
                        (rng.uniform(-3000, 3000), rng.uniform(-3000, 3000)),
                    )
                target = rng.choice(ids)
                tracker.record_click(scene, target)
                assert tracker.rank(scene)[0] == target


# ---------------------------------------------------------------------------
# 7. Unspecified options fall back to the documented defaults.


def test_criterion_07_completion_defaults():
    with _Verdict(7, "bare queries default to scatterplot, first numerics, and no-op filter"):
        session = prepared("!data cars")
        table = session.diagram.tables["cars"]
        numeric = [c for c in table.column_names if table.column_kind(c) == NUMERIC]
        before = set(session.diagram.nodes)
        session.query("Show a scatterplot")
        chart = session.diagram.node((set(session.diagram.nodes) - before).pop())
        assert chart.options["visType"] == "scatterplot"
        assert chart.options["columns"] == numeric[:2] == ["mpg", "cylinders"]

        session = prepared("!data cars")
        source = session.diagram.data_source_for("cars")
        before = set(session.diagram.nodes)
        session.query("Filter by mpg")
        node = session.diagram.node((set(session.diagram.nodes) - before).pop())
        assert node.kind == ATTRIBUTE_FILTER
        assert node.options["filter"].get("column") == "mpg"
        # With no bounds given, the filter must pass every row through.
        assert (
            session.diagram.output(node.id).row_indices
            == session.diagram.output(source.id).row_indices
        )

        session = prepared("!data cars")
        before = set(session.diagram.nodes)
        session.query("Show the data")
        chart = session.diagram.node((set(session.diagram.nodes) - before).pop())
        assert chart.options["visType"] == "scatterplot"


# ---------------------------------------------------------------------------
# 8. Renaming every column and chart label breaks nothing: names live in the
#    tag context, not in the grammar.


def _rename_map() -> dict[str, str]:
    mapping: dict[str, str] = {}
    for name in bundled.dataset_names():
        table = load_table(bundled.read_dataset(name), name)
        for column in table.column_names:
            mapping[column] = column + "x"
    for label in ("MyChart", "MyNewChart", "SalesChart"):
        mapping[label] = label + "x"
    return mapping


class _RenamedDatasets:
    """The bundled catalog with every column renamed in the header row."""

    def __init__(self, mapping: dict[str, str]):
        self.mapping = mapping

    def names(self) -> list[str]:
        return bundled.dataset_names()

    def load(self, name: str):
        text = bundled.read_dataset(name)
        header, _, rest = text.partition("\n")
        cells = [self.mapping.get(cell, cell) for cell in header.split(",")]
        return load_table(",".join(cells) + "\n" + rest, name)


def _rename_suite(text: str, mapping: dict[str, str]) -> str:
    keys = sorted(mapping, key=len, reverse=True)
    # A renamed word followed by "data"/"dataset"/"table" is a dataset
    # mention that merely shares its spelling with a column (the speed
    # table has a speed column); dataset names are not being renamed.
    word = re.compile(
        r"\b(" + "|".join(re.escape(k) for k in keys) + r")\b"
        r"(?!\s+(?:data|dataset|table)\b)"
    )
    field = re.compile(r"\b(columns|column|key|groupby)=([^,;]+)")

    def rename_query(query: str) -> str:
        return word.sub(lambda m: mapping[m.group(1)], query)

    def rename_expectation(expected: str) -> str:
        def fix(match: re.Match) -> str:
            parts = match.group(2).split("+")
            renamed = "+".join(mapping.get(part, part) for part in parts)
            return f"{match.group(1)}={renamed}"

        return field.sub(fix, expected)

    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            lines.append(raw)
        elif line.startswith("!"):
            words = line.split()
            if words[0] in ("!chart", "!select", "!click") and len(words) > 1:
                words[1] = mapping.get(words[1], words[1])
            lines.append(" ".join(words))
        else:
            query, expected = line.split("\t", 1)
            lines.append(rename_query(query) + "\t" + rename_expectation(expected))
    return "\n".join(lines)


def test_criterion_08_renamed_context_passes_with_the_same_grammar():
    with _Verdict(8, "renaming every column and chart label keeps the suite at 100% under the same grammar"):
        mapping = _rename_map()
        values = set(mapping.values())
        assert len(values) == len(mapping), "renaming collides with itself"
        assert not values & set(mapping), "renaming collides with original names"

        renamed = _rename_suite(SUITE_TEXT, mapping)
        assert renamed != SUITE_TEXT
        report: list[str] = []
        # Same resources object: the grammar is byte-for-byte the one the
        # original suite ran under.
        failures, total = run_suite(
            renamed, RESOURCES, datasets=_RenamedDatasets(mapping), echo=report.append
        )
        _, original_total = run_suite(SUITE_TEXT, RESOURCES)
        assert total == original_total
        failed = [line for line in report if line.startswith("FAIL")]
        assert failures == 0, "\n".join(failed)


# ---------------------------------------------------------------------------
# 9. Failed queries never touch the diagram; edits undo and redo exactly.


def test_criterion_09_transactionality_and_history_round_trips():
    with _Verdict(9, "errors leave the hash unchanged; every edit round-trips through undo/redo"):
        session = fresh()
        errors = edits = 0
        for item in suite_cases(SUITE_TEXT):
            if item[0] == "directive":
                apply_directive(session, item[1])
                continue
            _, query, _expected = item
            before = session.diagram.structure_hash()
            try:
                result = session.query(query)
            except FlowQueryError:
                assert session.diagram.structure_hash() == before, (
                    f"'{query}' failed but changed the diagram"
                )
                errors += 1
                continue
            after = session.diagram.structure_hash()
            if result.outcome.kind == "edit" and after != before:
                session.diagram.undo()
                assert session.diagram.structure_hash() == before, (
                    f"undo after '{query}' missed the pre-query diagram"
                )
                session.diagram.redo()
                assert session.diagram.structure_hash() == after, (
                    f"redo after '{query}' missed the post-query diagram"
                )
                edits += 1
        assert errors >= 10, f"only {errors} failing cases exercised"
        assert edits >= 25, f"only {edits} mutating cases exercised"


# ---------------------------------------------------------------------------
# 10. Autocomplete never suggests something the parser then rejects.


def test_criterion_10_autocomplete_suggestions_always_parse():
    with _Verdict(10, "no dead suggestions across 50 sampled partials; 'scatter' completes to 'scatterplot'"):
        session = prepared("!data cars", "!data sales", "!chart MyChart cars")

        queries = [q for item in suite_cases(SUITE_TEXT) if item[0] == "case" for q in [item[1]]]
        rng = random.Random(10)
        partials = []
        while len(partials) < 50:
            words = rng.choice(queries).split()
            cut = rng.randint(1, len(words))
            partial = " ".join(words[:cut])
            if rng.random() < 0.3 and len(partial) > 3:
                partial = partial[: rng.randint(3, len(partial))]  # mid-word
            partials.append(partial)

        emitted = 0
        for partial in partials:
            for suggestion in session.suggest(partial):
                emitted += 1
                text = suggestion.text.replace("[number]", "15").replace("[string]", "v")
                try:
                    session.parse(text)
                except FlowQueryError as exc:
                    raise AssertionError(
                        f"dead suggestion {suggestion.text!r} for partial {partial!r}: {exc}"
                    ) from exc
        assert emitted >= 50, f"only {emitted} suggestions emitted across the sample"

        completions = session.complete_word("scatter")
        assert completions and completions[0][0] == "scatterplot"


# ---------------------------------------------------------------------------
# 11. The bundled walkthrough script reproduces the expected diagram.


def test_criterion_11_walkthrough_script_builds_the_expected_diagram(tmp_path):
    with _Verdict(11, "walkthrough script yields source -> editor -> {histogram, line chart} in < 2 s"):
        script = tmp_path / "walkthrough.txt"
        script.write_text(bundled.read_resource("case_study.txt"), encoding="utf-8")
        out = tmp_path / "diagram.json"

        started = time.perf_counter()
        result = CliRunner().invoke(cli.main, ["run", str(script), "--out", str(out)])
        elapsed = time.perf_counter() - started
        assert result.exit_code == 0, result.output
        assert elapsed < 2.0, f"script took {elapsed:.2f}s"

        diagram = Diagram.load(out.read_text(encoding="utf-8"))
        nodes = list(diagram.nodes.values())
        sources = [n for n in nodes if n.kind == DATA_SOURCE]
        editors = [n for n in nodes if n.kind == VISUAL_EDITOR]
        charts = {
            n.options.get("visType"): n for n in nodes if n.kind == VISUALIZATION
        }
        assert len(nodes) == 4
        assert len(sources) == 1 and len(editors) == 1
        assert set(charts) == {"histogram", "line-chart"}
        source, editor = sources[0], editors[0]
        assert edge_set(diagram) == {
            (source.id, DATA_OUT, editor.id, DATA_IN),
            (editor.id, DATA_OUT, charts["histogram"].id, DATA_IN),
            (editor.id, DATA_OUT, charts["line-chart"].id, DATA_IN),
        }

"""Command-line front door: parse, run scripts, check suites, train, serve.

Suite and script files are plain text, one entry per line.  ``#`` starts a
comment.  Lines beginning with ``!`` are setup directives:

    !data <dataset>            register a dataset and ensure its source node
    !chart <label> <dataset>   add a scatterplot wired to the dataset's source
    !select <label> <rows...>  set the row selection of a labeled node
    !click <label>             send a focus click to a labeled node
    !reset                     start over with an empty diagram

Every other suite line is ``query<TAB>expectation``, where the expectation
is a completed-command signature, ``parse:`` plus a derivation signature,
or the name of an error category the query must fail with.  Script files
for ``run`` hold one query per line plus the same directives.
"""

import json
import sys
from pathlib import Path

import click

from . import bundled, parsing
from .completion import default_columns
from .diagram import DATA_IN, DATA_OUT, DATA_SOURCE, VISUALIZATION, Diagram
from .engine import (
    DirectoryDatasets,
    LanguageResources,
    Session,
    training_parser,
)
from .errors import (
    ERROR_CATEGORIES,
    ErrorReport,
    FlowQueryError,
    MalformedData,
    NodeNotFound,
    ParseRejected,
)

EXIT_FAILURE = 1  # unreadable files, bad resources, failed suites
EXIT_REJECTED = 2  # the grammar rejects the query
EXIT_CONTEXT = 3  # the query parses but does not fit the diagram


# ---------------------------------------------------------------------------
# Shared script/suite machinery


def _ensure_source(session: Session, dataset: str) -> int:
    if dataset not in session.diagram.tables:
        session.diagram.register_table(session.datasets.load(dataset))
    node = session.diagram.data_source_for(dataset)
    if node is not None:
        return node.id
    below = max(
        (n.position[1] + n.size[1] for n in session.diagram.nodes.values()),
        default=-40.0,
    )
    return session.diagram.add_node(
        DATA_SOURCE, position=(40.0, below + 80.0), options={"table": dataset}
    )


def _add_chart(session: Session, label: str, dataset: str) -> int:
    source = _ensure_source(session, dataset)
    table = session.diagram.tables[dataset]
    anchor = session.diagram.node(source)
    chart = session.diagram.add_node(
        VISUALIZATION,
        label=label,
        position=(anchor.position[0] + anchor.size[0] + 80.0, anchor.position[1]),
        options={"visType": "scatterplot", "columns": default_columns(table, "scatterplot")},
    )
    session.diagram.add_edge(source, DATA_OUT, chart, DATA_IN)
    session.diagram.propagate()
    return chart


def _labeled(session: Session, label: str):
    node = session.diagram.find_by_label(label)
    if node is None:
        raise NodeNotFound(f"no node labeled '{label}'")
    return node


def apply_directive(session: Session, line: str) -> None:
    """Interpret one ``!...`` setup line against the session."""
    words = line[1:].split()
    if not words:
        raise MalformedData("empty directive")
    name, args = words[0], words[1:]
    if name == "reset" and not args:
        session.reset()
    elif name == "data" and len(args) == 1:
        _ensure_source(session, args[0])
    elif name == "chart" and len(args) == 2:
        _add_chart(session, args[0], args[1])
    elif name == "select" and len(args) >= 2:
        node = _labeled(session, args[0])
        session.set_selection(node.id, [int(a) for a in args[1:]])
    elif name == "click" and len(args) == 1:
        session.click(_labeled(session, args[0]).id)
    else:
        raise MalformedData(f"bad directive '{line}'")


def _run_case(session: Session, query: str, expected: str) -> tuple[bool, str]:
    """Run one suite case; returns (passed, failure detail)."""
    before = session.diagram.structure_hash()
    if expected in ERROR_CATEGORIES:
        try:
            session.query(query)
        except FlowQueryError as exc:
            if session.diagram.structure_hash() != before:
                return False, "diagram changed on a failed query"
            got = ErrorReport.from_exception(exc).category
            return got == expected, f"failed with {got}, expected {expected}"
        return False, f"succeeded, expected {expected}"
    if expected.startswith("parse:"):
        try:
            _, derivations = session.parse(query)
        except FlowQueryError as exc:
            return False, f"failed with {ErrorReport.from_exception(exc).category}: {exc}"
        got = derivations[0].signature()
        return got == expected[len("parse:"):], f"parsed as {got}"
    try:
        result = session.query(query)
    except FlowQueryError as exc:
        return False, f"failed with {ErrorReport.from_exception(exc).category}: {exc}"
    if result.signature != expected:
        return False, f"completed as {result.signature}"
    after = session.diagram.structure_hash()
    if result.outcome.kind == "edit" and after != before:
        session.diagram.undo()
        if session.diagram.structure_hash() != before:
            session.diagram.redo()
            return False, "undo did not restore the previous diagram"
        session.diagram.redo()
        if session.diagram.structure_hash() != after:
            return False, "redo did not restore the edited diagram"
    return True, ""


def run_suite(text: str, resources=None, datasets=None, echo=None) -> tuple[int, int]:
    """Run every case of a suite; returns (failures, total cases)."""
    session = Session(resources or LanguageResources.load(), datasets=datasets)
    say = echo or (lambda message: None)
    failures = total = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("!"):
            apply_directive(session, line)
            continue
        if "\t" not in line:
            raise MalformedData(f"suite line {line_no}: expected query<TAB>expectation")
        query, expected = (part.strip() for part in line.split("\t", 1))
        total += 1
        passed, detail = _run_case(session, query, expected)
        if passed:
            say(f"ok   {line_no:>4}  {query}")
        else:
            failures += 1
            say(f"FAIL {line_no:>4}  {query}  [{detail}]")
    return failures, total


# ---------------------------------------------------------------------------
# Commands


@click.group()
def main():
    """Build dataflow diagrams from natural-language queries."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)


def _load_resources(grammar_path=None, weights_path=None, templates_path=None):
    try:
        return LanguageResources.load(grammar_path, weights_path, templates_path)
    except (OSError, FlowQueryError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)


@main.command()
@click.argument("query")
@click.option("--data", "data_path", type=click.Path(), help="CSV file giving the column context.")
@click.option("--diagram", "diagram_path", type=click.Path(), help="Diagram document to parse against.")
@click.option("--grammar", "grammar_path", type=click.Path(), help="Grammar file overriding the bundled one.")
@click.option("--weights", "weights_path", type=click.Path(), help="Ranker weights overriding the bundled ones.")
@click.option("--json", "as_json", is_flag=True, help="Print machine-readable output.")
def parse(query, data_path, diagram_path, grammar_path, weights_path, as_json):
    """Tag, parse, and complete one QUERY without executing it."""
    session = Session(_load_resources(grammar_path, weights_path))
    if diagram_path:
        session.diagram = Diagram.load(_read(diagram_path))
    if data_path:
        name = Path(data_path).stem
        session.add_dataset(_read(data_path), name)
        _ensure_source(session, name)
    try:
        tagged, derivations = session.parse(query)
        command = session.complete(derivations[0])
    except ParseRejected as exc:
        click.echo(f"rejected: {exc}", err=True)
        sys.exit(EXIT_REJECTED)
    except FlowQueryError as exc:
        report = ErrorReport.from_exception(exc)
        click.echo(f"{report.category}: {report.message}", err=True)
        sys.exit(EXIT_CONTEXT)
    if as_json:
        click.echo(
            json.dumps(
                {
                    "tokens": [t.text for t in tagged.tokens],
                    "tagSpans": [span.to_dict() for span in tagged.spans],
                    "posTags": tagged.pos_tags,
                    "derivations": [
                        {"score": d.score, "signature": d.signature()} for d in derivations
                    ],
                    "completed": command.signature(),
                },
                indent=2,
            )
        )
        return
    click.echo("tags:")
    for span in tagged.spans:
        words = " ".join(t.text for t in tagged.tokens[span.start : span.end])
        click.echo(f"  [{span.start}:{span.end}] {span.category} {span.value} ({words})")
    click.echo("derivations:")
    for derivation in derivations:
        click.echo(f"  {derivation.score:8.3f}  {derivation.signature()}")
    click.echo(f"completed:\n  {command.signature()}")


@main.command()
@click.argument("script", type=click.Path())
@click.option("--data", "data_dir", type=click.Path(), help="Directory of CSV datasets for load queries.")
@click.option("--out", "out_path", type=click.Path(), help="Where to write the final diagram document.")
def run(script, data_dir, out_path):
    """Execute a query SCRIPT line by line against one session."""
    datasets = DirectoryDatasets(data_dir) if data_dir else None
    session = Session(_load_resources(), datasets=datasets)
    for line_no, raw in enumerate(_read(script).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("!"):
                apply_directive(session, line)
            else:
                result = session.query(line)
                click.echo(f"{line_no:>4}  {result.signature}")
        except FlowQueryError as exc:
            report = ErrorReport.from_exception(exc)
            click.echo(f"error on line {line_no}: {report.category}: {report.message}", err=True)
            sys.exit(EXIT_REJECTED)
    if out_path:
        Path(out_path).write_text(session.diagram.save(), encoding="utf-8")
    click.echo(
        f"diagram: {len(session.diagram.nodes)} nodes, {len(session.diagram.edges)} edges"
    )


@main.command(name="test")
@click.argument("suite", type=click.Path(), required=False)
def test_command(suite):
    """Check every case of a SUITE file (bundled suite when omitted)."""
    text = _read(suite) if suite else bundled.read_resource("suite.txt")
    try:
        failures, total = run_suite(text, _load_resources(), echo=click.echo)
    except FlowQueryError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    click.echo(f"{total - failures} passed, {failures} failed")
    if failures:
        sys.exit(EXIT_REJECTED)


@main.command()
@click.argument("examples", type=click.Path())
@click.option("--epochs", default=50, show_default=True)
@click.option("--lr", "learning_rate", default=0.1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def train(examples, epochs, learning_rate, out_path):
    """Fit ranker weights to the EXAMPLES file and write them to --out."""
    resources = _load_resources()
    parse_query = training_parser(resources)
    pairs = parsing.parse_training_examples(_read(examples))

    derivations: dict = {}
    for query, _ in pairs:
        if query in derivations:
            continue
        try:
            derivations[query] = parse_query(query)
        except FlowQueryError as exc:
            click.echo(f"error in example '{query}': {exc}", err=True)
            sys.exit(EXIT_FAILURE)

    def accuracy(weights: dict) -> float:
        hits = 0
        for query, preferred in pairs:
            best = min(
                derivations[query],
                key=lambda d: (-parsing.score_features(d.features, weights), d.size, d.rule_seq),
            )
            hits += best.signature() == preferred
        return hits / len(pairs)

    try:
        before = accuracy({})
        weights = parsing.train_ranker(
            pairs, derivations.__getitem__, epochs=epochs, learning_rate=learning_rate
        )
        after = accuracy(weights)
    except FlowQueryError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)
    Path(out_path).write_text(parsing.format_weights(weights), encoding="utf-8")
    click.echo(f"{len(pairs)} examples; accuracy {before:.1%} -> {after:.1%}")
    click.echo(f"wrote {len(weights)} weights to {out_path}")


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--grammar", "grammar_path", type=click.Path())
@click.option("--weights", "weights_path", type=click.Path())
@click.option("--templates", "templates_path", type=click.Path())
@click.option("--ttl", default=3600.0, show_default=True, help="Idle session lifetime in seconds.")
def serve(port, host, grammar_path, weights_path, templates_path, ttl):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(_load_resources(grammar_path, weights_path, templates_path), session_ttl=ttl)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_FAILURE)


if __name__ == "__main__":
    main()

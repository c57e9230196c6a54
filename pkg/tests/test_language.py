"""End-to-end behavior of the bundled grammar, lexicons, and trained weights."""

import pytest

from flowquery import bundled, parsing, tagging
from flowquery.diagram import VIS_DISPLAY_NAMES
from flowquery.errors import ParseRejected
from flowquery.grammar import LITERAL, load_grammar, validate_grammar
from flowquery.tables import load_table

GRAMMAR = load_grammar(bundled.read_resource("core.grammar"))
WEIGHTS = parsing.parse_weights(bundled.read_resource("weights.txt"))
LEXICON = bundled.load_pos_lexicon()
CLASSIFIER = tagging.FunctionWordClassifier(bundled.load_function_words())

CARS_COLUMNS = [
    "mpg", "cylinders", "displacement", "horsepower", "weight",
    "acceleration", "model year", "origin", "name",
]
SALES_COLUMNS = ["name", "price", "units", "year"]
SPEED_COLUMNS = ["segment id", "time", "speed", "speed limit"]

FULL_CONTEXT = tagging.TagContext.build(
    columns=CARS_COLUMNS + SALES_COLUMNS + SPEED_COLUMNS,
    node_labels=["MyChart", "MyNewChart"],
    node_types=VIS_DISPLAY_NAMES,
    dataset_names=["cars", "sales", "speed"],
)

# Before any table is loaded only dataset names are in scope.
FRESH_CONTEXT = tagging.TagContext.build(
    node_types=VIS_DISPLAY_NAMES,
    dataset_names=["cars", "sales", "speed"],
)


def parse_query(query, context=FULL_CONTEXT, weights=WEIGHTS, beam_limit=64):
    tokens = tagging.tokenize(query)
    spans = tagging.tag_special_utterances(tokens, context, lexicon=LEXICON)
    pos = tagging.pos_tag(tokens, LEXICON)
    return parsing.parse(
        tokens, spans, pos, GRAMMAR,
        weights=weights, beam_limit=beam_limit, classifier=CLASSIFIER,
    )


def top_signature(query, **kwargs):
    return parse_query(query, **kwargs)[0].signature()


BENCHMARKS = [
    ("Show a scatterplot of mpg and horsepower",
     "visualize:columns=mpg+horsepower,target=new:scatterplot"),
    ("Encode mpg by red green color scale",
     "encode:column=mpg,mode=colorScale,scale=red-green"),
    ("Find all cars with mpg between 15 and 20",
     "filter:column=mpg,max=20,min=15"),
    ("List five cars with maximum mpg",
     "filter:column=mpg,count=5,direction=max"),
    ("Merge the cars with those from the scatterplot",
     "merge:source=focus,source=type:scatterplot"),
    ("Highlight the selected cars in a parallel coordinates plot",
     "highlight:source=focus,target=new:parallel-coordinates,port=selection"),
    ("Link the cars with a same name from the sales table",
     "link:key=name,source=focus,source=dataset:sales"),
    ("Show the cars with mpg greater than 15 in a scatterplot",
     "filter:column=mpg,min=15 ; visualize:target=new:scatterplot"),
    ("Show mpg and horsepower",
     "visualize:columns=mpg+horsepower"),
    ("Show a plot of horsepower",
     "visualize:columns=horsepower"),
    ("Show a plot of cars",
     "visualize"),
    ("Show speed distribution",
     "visualize:columns=speed,target=new:histogram"),
    ("Encode speed limit by color",
     "encode:column=speed limit,mode=colorScale,scale=red-green"),
    ("Draw speed over time grouped by speed limit",
     "visualize:columns=speed+time,groupby=speed limit,target=new:line-chart"),
    ("Intersect the cars with those from the scatterplot",
     "merge:op=intersection,source=focus,source=type:scatterplot"),
    ("Color the selected cars red",
     "encode:constant=red,mode=assignConstant,port=selection"),
    ("Merge", "merge"),
    ("undo", "undo"),
    ("redo the last step", "redo"),
    ("Remove MyChart", "remove:target=label:MyChart"),
]


class TestBenchmarkQueries:
    @pytest.mark.parametrize("query,expected", BENCHMARKS, ids=[q for q, _ in BENCHMARKS])
    def test_top_derivation(self, query, expected):
        assert top_signature(query) == expected

    def test_long_composite_query(self):
        query = (
            "Visualize mpg, horsepower, and origin of the selected cars "
            "from MyChart in a parallel coordinates plot"
        )
        assert top_signature(query) == (
            "visualize:columns=mpg+horsepower+origin,source=label:MyChart,"
            "target=new:parallel-coordinates,port=selection"
        )

    def test_load_parses_while_no_table_is_loaded(self):
        assert top_signature("load the speed table", context=FRESH_CONTEXT) == (
            "load:dataset=speed"
        )
        assert top_signature("open the cars dataset", context=FRESH_CONTEXT) == (
            "load:dataset=cars"
        )

    def test_node_type_values_are_canonical_kinds(self):
        derivation = parse_query("Show mpg in a line chart")[0]
        assert derivation.frames[0].targets[0].value == "line-chart"


class TestRejections:
    @pytest.mark.parametrize(
        "query",
        [
            "What time is it now",
            "Make me a sandwich",
            "The quick brown fox jumps over the lazy dog",
        ],
    )
    def test_out_of_scope_queries(self, query):
        with pytest.raises(ParseRejected):
            parse_query(query)


class TestRanking:
    def test_untrained_model_prefers_the_wildcard_reading(self):
        derivations = parse_query("Show a plot of horsepower", weights={})
        assert derivations[0].signature() == "visualize"
        assert "visualize:columns=horsepower" in {d.signature() for d in derivations}

    def test_trained_model_prefers_the_column_reading(self):
        assert top_signature("Show a plot of horsepower") == "visualize:columns=horsepower"
        assert top_signature("Show a plot of cars") == "visualize"

    def test_bundled_training_examples_all_rank_first(self):
        examples = parsing.parse_training_examples(
            bundled.read_resource("training_examples.txt")
        )
        for query, expected in examples:
            assert top_signature(query) == expected, query

    def test_default_beam_matches_an_unbounded_beam(self):
        for query, _ in BENCHMARKS:
            if len(tagging.tokenize(query)) > 12:
                continue
            bounded = parse_query(query)[0]
            unbounded = parse_query(query, beam_limit=10**9)[0]
            assert bounded.signature() == unbounded.signature(), query
            assert bounded.score == pytest.approx(unbounded.score)
            assert bounded.rule_seq == unbounded.rule_seq


class TestGrammarHygiene:
    def test_grammar_validates_cleanly(self):
        assert validate_grammar(GRAMMAR) == []

    def test_rule_ids_are_dense_and_ordered(self):
        assert [rule.id for rule in GRAMMAR.rules] == list(range(len(GRAMMAR.rules)))

    def test_no_literal_names_bundled_data(self):
        """The grammar stays dataset-independent: data words only enter
        through placeholders, so swapping datasets never needs grammar edits."""
        data_words = set()
        for name in bundled.dataset_names():
            data_words.add(name.lower())
            table = load_table(bundled.read_dataset(name), name=name)
            for column in table.columns:
                data_words.update(column.name.lower().split())
        literals = {
            symbol.value
            for rule in GRAMMAR.rules
            for symbol in rule.rhs
            if symbol.kind == LITERAL
        }
        assert literals.isdisjoint(data_words), literals & data_words

    def test_weights_only_name_real_features(self):
        valid = {f"r{rule.id}" for rule in GRAMMAR.rules}
        valid.update(f"ph:{kind}" for kind in ("Column", "NodeLabel", "NodeType",
                                               "DatasetName", "Number", "Quoted"))
        valid.add("wild")
        assert set(WEIGHTS) <= valid

"""Tests for the command line: exit codes, scripts, suites, training."""

import json

import pytest
from click.testing import CliRunner

from flowquery.cli import main, run_suite
from flowquery.engine import LanguageResources
from flowquery.errors import MalformedData

RESOURCES = LanguageResources.load()

CARS_CSV = "name,mpg,hp\nalpha,15,90\nbeta,22,120\ngamma,31,65\n"


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, list(args), catch_exceptions=False)


# -- parse -------------------------------------------------------------------


def test_parse_accepted_query_exits_zero(runner, tmp_path):
    data = tmp_path / "cars.csv"
    data.write_text(CARS_CSV)
    result = invoke(runner, "parse", "Show a scatterplot of mpg and hp", "--data", str(data))
    assert result.exit_code == 0
    assert "Column mpg" in result.output
    assert "completed:" in result.output


def test_parse_rejected_query_exits_two(runner):
    result = invoke(runner, "parse", "What time is it now")
    assert result.exit_code == 2


def test_parse_context_failure_exits_three(runner, tmp_path):
    data = tmp_path / "cars.csv"
    data.write_text(CARS_CSV)
    result = invoke(
        runner, "parse", "Highlight the selected cars from MyChart", "--data", str(data)
    )
    assert result.exit_code == 3


def test_parse_missing_data_file_exits_one(runner):
    result = invoke(runner, "parse", "show mpg", "--data", "/nope/missing.csv")
    assert result.exit_code == 1


def test_parse_json_output_is_structured(runner, tmp_path):
    data = tmp_path / "cars.csv"
    data.write_text(CARS_CSV)
    result = invoke(runner, "parse", "show mpg", "--data", str(data), "--json")
    payload = json.loads(result.output)
    assert payload["completed"].startswith("visualize:")
    assert payload["tagSpans"][0]["value"] == "mpg"
    assert payload["derivations"][0]["score"] >= payload["derivations"][-1]["score"]


# -- run -----------------------------------------------------------------------


def test_run_executes_a_script_and_writes_the_diagram(runner, tmp_path):
    script = tmp_path / "script.txt"
    script.write_text(
        "# build a highlighted chart\n"
        "Load the cars dataset\n"
        "Show a scatterplot\n"
        "!select node-2 0 1\n"
        "Highlight the selected cars\n"
    )
    out = tmp_path / "diagram.json"
    result = invoke(runner, "run", str(script), "--out", str(out))
    assert result.exit_code == 0
    document = json.loads(out.read_text())
    assert len(document["nodes"]) == 5
    assert len(document["edges"]) == 5


def test_run_reads_datasets_from_a_directory(runner, tmp_path):
    (tmp_path / "fleet.csv").write_text(CARS_CSV)
    script = tmp_path / "script.txt"
    script.write_text("Load the fleet dataset\n")
    result = invoke(runner, "run", str(script), "--data", str(tmp_path))
    assert result.exit_code == 0
    assert "load:dataset=fleet" in result.output


def test_run_empty_script_writes_an_empty_diagram(runner, tmp_path):
    script = tmp_path / "script.txt"
    script.write_text("\n# nothing here\n")
    out = tmp_path / "diagram.json"
    result = invoke(runner, "run", str(script), "--out", str(out))
    assert result.exit_code == 0
    assert json.loads(out.read_text())["nodes"] == []


def test_run_reports_the_failing_line(runner, tmp_path):
    script = tmp_path / "script.txt"
    script.write_text("Load the cars dataset\nShow a scatterplot\nWhat time is it now\n")
    result = invoke(runner, "run", str(script))
    assert result.exit_code == 2
    assert "line 3" in result.output


# -- test (suite) ------------------------------------------------------------


def test_suite_passes_and_fails_by_expectation(runner, tmp_path):
    suite = tmp_path / "suite.txt"
    suite.write_text(
        "!data cars\n"
        "Show a scatterplot\tvisualize:columns=mpg+cylinders,source=node:1,target=new:scatterplot,port=data\n"
        "What time is it now\tParseRejected\n"
        "show mpg\tparse:visualize:columns=mpg\n"
    )
    result = invoke(runner, "test", str(suite))
    assert result.exit_code == 0
    assert "3 passed, 0 failed" in result.output


def test_suite_reports_wrong_expectations(runner, tmp_path):
    suite = tmp_path / "suite.txt"
    suite.write_text("!data cars\nShow a scatterplot\tvisualize:wrong\n")
    result = invoke(runner, "test", str(suite))
    assert result.exit_code == 2
    assert "FAIL" in result.output
    assert "0 passed, 1 failed" in result.output


def test_suite_rejects_malformed_lines_with_their_number(runner, tmp_path):
    suite = tmp_path / "suite.txt"
    suite.write_text("Show a scatterplot without any expectation\n")
    result = invoke(runner, "test", str(suite))
    assert result.exit_code == 1
    assert "line 1" in result.output


def test_bundled_suite_passes(runner):
    result = invoke(runner, "test")
    assert result.exit_code == 0, result.output
    assert ", 0 failed" in result.output


def test_run_suite_checks_undo_and_redo_round_trips():
    text = "!data cars\nShow a scatterplot\tvisualize:columns=mpg+cylinders,source=node:1,target=new:scatterplot,port=data\n"
    failures, total = run_suite(text, RESOURCES)
    assert (failures, total) == (0, 1)


def test_run_suite_directive_validation():
    with pytest.raises(MalformedData):
        run_suite("!bogus things\n", RESOURCES)


# -- train ---------------------------------------------------------------------


def test_train_writes_weights_and_reports_accuracy(runner, tmp_path):
    examples = tmp_path / "examples.txt"
    examples.write_text(
        "Show a plot of horsepower\tvisualize:columns=horsepower\n"
        "Show a plot of cars\tvisualize\n"
    )
    out = tmp_path / "weights.txt"
    result = invoke(runner, "train", str(examples), "--out", str(out), "--epochs", "10")
    assert result.exit_code == 0
    assert "accuracy" in result.output
    assert out.read_text().strip()


def test_train_surfaces_unparseable_examples(runner, tmp_path):
    examples = tmp_path / "examples.txt"
    examples.write_text("zzz qqq www\tvisualize\n")
    out = tmp_path / "weights.txt"
    result = invoke(runner, "train", str(examples), "--out", str(out))
    assert result.exit_code == 1
    assert "zzz qqq www" in result.output


# -- serve ---------------------------------------------------------------------


def test_serve_rejects_a_bad_grammar_path(runner):
    result = invoke(runner, "serve", "--grammar", "/nope/missing.grammar")
    assert result.exit_code == 1

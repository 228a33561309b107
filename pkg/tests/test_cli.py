import json

import pytest

from routedqc.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from routedqc.qcqc import load_spec
from routedqc.routed_graph import RoutedGraph
from routedqc.transform import split_graph


@pytest.fixture
def graph_file(tmp_path, capsys):
    assert main(["generate", "--n", "2"]) == EXIT_OK

    path = tmp_path / "generic.json"
    path.write_text(capsys.readouterr().out)

    return path


@pytest.mark.parametrize("family", ["generic", "split", "alpha", "merged", "local"])
def test_generate(family, capsys):
    assert main(["generate", "--family", family, "--n", "2"]) == EXIT_OK

    g = RoutedGraph.loads(capsys.readouterr().out)

    assert g.nodes


def test_generate_errors(capsys):
    assert main(["generate", "--family", "local", "--n", "1"]) == EXIT_USAGE
    assert capsys.readouterr().err.startswith("error: ")

    assert main(["generate", "--family", "alpha", "--n", "2", "--alpha", "1"]) == EXIT_USAGE

    with pytest.raises(SystemExit):
        main(["generate", "--family", "spiral", "--n", "2"])


def test_validate(graph_file, capsys):
    assert main(["validate", str(graph_file)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("VALID")

    assert main(["validate", str(graph_file), "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["valid"]


def test_validate_invalid(tmp_path, loop_graph, capsys):
    path = tmp_path / "loop.json"
    path.write_text(loop_graph.dumps())

    assert main(["validate", str(path)]) == EXIT_FAILED
    assert capsys.readouterr().out.startswith("INVALID [univocality]")

    assert main(["branch-graph", str(path)]) == EXIT_FAILED


def test_bad_input(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{")

    assert main(["validate", str(path)]) == EXIT_USAGE
    assert main(["validate", str(tmp_path / "missing.json")]) == EXIT_USAGE


def test_branch_graph(graph_file, capsys):
    assert main(["branch-graph", str(graph_file)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("digraph branch_graph {")

    assert main(["branch-graph", str(graph_file), "--json"]) == EXIT_OK
    assert len(json.loads(capsys.readouterr().out)["nodes"]) == 8


def test_verify(tmp_path, capsys):
    dump = tmp_path / "w.json"

    assert main(["verify", "--process", "switch", "--pipeline", "split", "--dump", str(dump)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("switch: [split] max|Δ| = ")
    assert dump.exists()

    assert main(["verify", "--process", "random", "--n", "2", "--seed", "4", "--json"]) == EXIT_OK
    data = json.loads(capsys.readouterr().out)

    assert data["process"] == "random"
    assert data["passed"]


def test_verify_unknown(capsys):
    assert main(["verify", "--process", "nothing-here"]) == EXIT_USAGE
    assert "nothing-here" in capsys.readouterr().err


def test_catalog(capsys):
    assert main(["catalog", "list"]) == EXIT_OK
    assert capsys.readouterr().out.split() == ["fixed-order", "grenoble", "random", "switch", "zurich"]

    assert main(["catalog", "export", "fixed-order", "--n", "3"]) == EXIT_OK
    assert load_spec(capsys.readouterr().out).n_agents == 3

    assert main(["catalog", "export"]) == EXIT_USAGE


def test_transform(graph_file, tmp_path, capsys):
    steps = tmp_path / "steps.json"
    steps.write_text(json.dumps([{"op": "split-node", "node": x} for x in ("V1", "V2", "V3")]))
    log = tmp_path / "log.json"

    assert main(["transform", str(graph_file), str(steps), "--log", str(log)]) == EXIT_OK
    assert RoutedGraph.loads(capsys.readouterr().out) == split_graph(2)
    assert len(json.loads(log.read_text())) == 3

    steps.write_text(json.dumps([{"op": "remove"}]))

    assert main(["transform", str(graph_file), str(steps), "--process", "switch"]) == EXIT_OK
    assert RoutedGraph.loads(capsys.readouterr().out) == RoutedGraph.loads(graph_file.read_text())

    assert main(["transform", str(graph_file), str(steps)]) == EXIT_FAILED

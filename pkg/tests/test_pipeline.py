import json

import pytest

from routedqc.catalog import get_process, random_spec
from routedqc.errors import InvalidGraph, InvalidSpec, UnknownProcess
from routedqc.generic import generic_graph
from routedqc.pipeline import (
    PIPELINES,
    VerificationResult,
    apply_pipeline,
    build_fleshed,
    load_pipeline,
    load_process,
    verify_equivalence,
)
from routedqc.qcqc import dump_spec
from routedqc.transform import merged_graph, split_graph


@pytest.mark.parametrize("pipeline", PIPELINES)
@pytest.mark.parametrize(
    "name, params",
    [
        ("switch", {}),
        ("switch", {"d_target": 3}),
        ("grenoble", {}),
        ("random", {"seed": 7}),
        ("random", {"n_agents": 3, "seed": 1}),
    ],
)
def test_equivalence(name, params, pipeline):
    result = verify_equivalence(get_process(name, **params).spec, pipeline)

    assert result.passed, result.summary()


@pytest.mark.parametrize(
    "n_agents, seed",
    [(2, x) for x in range(15)] + [(3, x) for x in range(10)],
)
def test_random_equivalence(n_agents, seed):
    spec = random_spec(n_agents, seed=seed).spec

    assert verify_equivalence(spec).max_dev <= 1e-9


@pytest.mark.parametrize("pipeline", PIPELINES)
def test_zurich_equivalence(zurich, pipeline):
    assert verify_equivalence(zurich.spec, pipeline).passed


def test_fixed_order_removed():
    spec = get_process("fixed-order", n_agents=3).spec
    s, f = build_fleshed(spec, "removed")

    assert len(s.graph.arrows) == len(generic_graph(3).arrows) - 12
    assert verify_equivalence(spec, "removed").passed


def test_merged_graph_shape(switch):
    s, f = build_fleshed(switch.spec, "merged")

    assert s.graph == merged_graph(2)
    assert f.nodes == frozenset(s.graph.nodes)


def test_result_summary():
    ok, bad = VerificationResult("split", 1e-15, 1e-9), VerificationResult("split", 0.5, 1e-9)

    assert ok.passed and ok.summary().endswith(": PASS")
    assert ok.summary().startswith("[split] max|Δ| = ")
    assert not bad.passed and bad.summary().endswith(": FAIL")
    assert bad.to_json() == {"pipeline": "split", "max_dev": 0.5, "atol": 1e-9, "passed": False}


def test_apply_pipeline(generic2):
    spec = get_process("fixed-order", n_agents=2).spec
    g, log = apply_pipeline(generic2, [{"op": "remove"}, {"op": "alpha"}], spec)

    assert [x.kind for x in log.records] == ["drop", "alpha"]
    assert len(log.records[0].arrows_removed) == 4
    assert log.records[1].arrows_added == ("V1>V2", "V2>V3")
    assert len(g.arrows) == len(generic2.arrows) - 4 + 2

    with pytest.raises(InvalidSpec):
        apply_pipeline(generic2, [{"op": "remove"}])

    with pytest.raises(InvalidGraph):
        apply_pipeline(generic2, [{"op": "rotate"}])


def test_apply_pipeline_split_merge(generic2):
    steps = [{"op": "split-node", "node": x} for x in ("V1", "V2", "V3")]
    g, _ = apply_pipeline(generic2, steps)

    assert g == split_graph(2)

    steps = [{"op": "merge", "v": f"V2{{{k}}}", "a": f"A{k}"} for k in (1, 2)]
    g, log = apply_pipeline(g, steps)

    assert g == merged_graph(2)
    assert all(x.params["direction"] == "down" for x in log.records)


def test_load_pipeline(tmp_path):
    steps = [{"op": "bundle"}]
    path = tmp_path / "steps.json"

    path.write_text(json.dumps(steps))
    assert load_pipeline(path) == steps

    path.write_text(json.dumps({"steps": steps}))
    assert load_pipeline(path) == steps

    path.write_text(json.dumps({"op": "bundle"}))
    with pytest.raises(InvalidGraph):
        load_pipeline(path)

    with pytest.raises(InvalidGraph):
        load_pipeline(tmp_path / "missing.json")


def test_load_process(tmp_path, switch):
    path = tmp_path / "mine.json"
    path.write_text(dump_spec(switch.spec))

    process = load_process(str(path))

    assert process.name == "mine"
    assert process.spec.d_P == 4
    assert load_process("fixed-order", n_agents=3).spec.n_agents == 3

    with pytest.raises(UnknownProcess):
        load_process("nothing-here")

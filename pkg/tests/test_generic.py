import math

import pytest

from routedqc.errors import InvalidBifurcation, MissingDim, OneDimViolation, UncoveredNode
from routedqc.generic import (
    FUTURE_VALUE,
    PAST_VALUE,
    branch_counts,
    closed_form_choice,
    compose_fleshed,
    compose_partial,
    flesh_out,
    flesh_v_nodes,
    follows_routes,
    generic_graph,
    qcqc_dimensions,
    skeletal,
)
from routedqc.qcqc import process_vector
from routedqc.relation import NULL, AgentSet
from routedqc.tensor import max_deviation


@pytest.fixture(scope="module")
def switch_skeleton(switch, generic2):
    return skeletal(generic2, qcqc_dimensions(generic2, switch.spec))


def test_branch_counts(generic3):
    counts = branch_counts(generic3)

    assert [counts[x] for x in ("V1", "V2", "V3", "V4")] == [1, 3, 3, 1]
    assert all(counts[f"A{k}"] == 4 for k in (1, 2, 3))


@pytest.mark.parametrize("n_agents", [2, 3, 4])
def test_branch_census(n_agents):
    counts = branch_counts(generic_graph(n_agents))

    assert [counts[f"V{n + 1}"] for n in range(n_agents + 1)] == [
        math.comb(n_agents, n) for n in range(n_agents + 1)
    ]
    assert {counts[f"A{k}"] for k in range(1, n_agents + 1)} == {2 ** (n_agents - 1)}


def test_closed_form_choice():
    bifurcations = {frozenset(): 2, frozenset({1}): 2, frozenset({2}): 1}

    assert closed_form_choice(2, bifurcations) == {
        "V1": "{}",
        "A2": "{}",
        "V2": "{2}",
        "A1": "{2}",
        "V3": "{1,2}",
    }

    with pytest.raises(InvalidBifurcation):
        closed_form_choice(2, {frozenset(): 1})

    with pytest.raises(InvalidBifurcation):
        closed_form_choice(2, bifurcations | {frozenset({1}): 1})


def test_dimensions(switch, generic2):
    dims = qcqc_dimensions(generic2, switch.spec)

    assert dims["V1>A1", AgentSet.of([1])] == 2
    assert dims["V1>A1", NULL] == 1
    assert dims["P", PAST_VALUE] == 4
    assert dims["F", FUTURE_VALUE] == 4


def test_skeletal_errors(switch, generic2):
    dims = dict(qcqc_dimensions(generic2, switch.spec))

    with pytest.raises(MissingDim):
        skeletal(generic2, {})

    with pytest.raises(OneDimViolation):
        skeletal(generic2, dims | {("V1>A1", NULL): 2})

    partial = {k: v for k, v in dims.items() if k[1] != NULL}
    assert skeletal(generic2, partial).spaces["V1>A1"].dims[NULL] == 1


def test_practical_spaces(switch_skeleton):
    space = switch_skeleton.practical_in("V2")

    assert space.label == "V2:in"
    assert len(space.sectors) == 2
    assert space.total_dim == 4
    assert switch_skeleton.practical_out("V1").total_dim == 4


def test_flesh_out(switch, switch_skeleton):
    f = flesh_out(switch_skeleton, switch.spec)

    assert f.nodes == frozenset(switch_skeleton.graph.nodes)
    assert f.adapters == frozenset({"A1", "A2"})
    assert len(f.tensors["V2"].blocks) == 2
    assert all(follows_routes(switch_skeleton, f).values())


def test_compose_matches_process_vector(switch, switch_skeleton):
    f = flesh_out(switch_skeleton, switch.spec)
    w = compose_fleshed(switch_skeleton, f)

    assert max_deviation(w.w, process_vector(switch.spec).w) < 1e-9


def test_compose_partial(switch, switch_skeleton):
    f = flesh_v_nodes(switch_skeleton, switch.spec)
    t = compose_partial(switch_skeleton, f)

    assert len(t.labels) == 10
    assert "V1>A1" in t.labels and "P" in t.labels

    with pytest.raises(UncoveredNode):
        compose_fleshed(switch_skeleton, f)


@pytest.mark.parametrize("n_agents", [1, 3])
def test_generic_shapes(n_agents):
    g = generic_graph(n_agents)

    assert len(g.nodes) == 2 * n_agents + 1
    assert len(g.arrows) == 2 * n_agents * n_agents + 2

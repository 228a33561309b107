import json

import pytest

from routedqc.branch_graph import BranchNode, build_branch_graph, is_valid
from routedqc.catalog import get_process
from routedqc.errors import InvalidGraph, NotSplittable, PreconditionFailed
from routedqc.generic import generic_graph
from routedqc.relation import AgentSet, Atom, Composite, Port, Relation
from routedqc.routed_graph import Arrow, RoutedGraph, find_isomorphism
from routedqc.transform import (
    MergeDirection,
    TransformLog,
    alpha_variant,
    bundle_parallel,
    drop_arrows,
    local_graph,
    merge_nodes,
    merge_plan,
    merged_graph,
    remove_arrows,
    replay,
    split_graph,
    split_node,
    split_node_id,
)
from routedqc.utils import all_subsets, v_node


def test_split_node_id():
    assert split_node_id(()) == "V1{}"
    assert split_node_id({2, 1}) == "V3{1,2}"


def test_alpha_variant(generic2):
    g = alpha_variant(generic2, [1, 2])

    assert len(g.arrows) == 12
    assert g.arrow("V1>V2").one_dim == frozenset({Atom("alpha1")})
    assert g.arrow("V2>V3").one_dim == frozenset()
    assert is_valid(g).valid

    with pytest.raises(InvalidGraph):
        alpha_variant(generic2, [1])


def test_alpha_variant_branch_graph(generic3):
    bg = build_branch_graph(generic3)
    trivial = build_branch_graph(alpha_variant(generic3, [1, 1, 1]))

    assert (trivial.solid, trivial.green, trivial.red) == (bg.solid, bg.green, bg.red)

    wide = build_branch_graph(alpha_variant(generic3, [1, 2, 2]))
    expected = {
        (BranchNode(v_node(len(x) + 1), str(AgentSet.of(x))), BranchNode(v_node(len(y) + 1), str(AgentSet.of(y))))
        for x in map(frozenset, all_subsets(3))
        for y in map(frozenset, all_subsets(3))
        if x < y and len(y) == len(x) + 1 and len(x) >= 1
    }

    assert len(expected) == 9
    assert wide.solid - bg.solid == expected
    assert bg.solid <= wide.solid


@pytest.mark.parametrize("n_agents", [2, 3])
def test_split_graph(n_agents):
    g = split_graph(n_agents)
    report = is_valid(g)

    assert report.valid, report.summary()
    assert len(g.nodes) == 2**n_agents + n_agents

    if n_agents == 2:
        assert g.nodes == ("A1", "A2", "V1{}", "V2{1}", "V2{2}", "V3{1,2}")
        assert {x.label for x in g.branches("V2{1}")} == {"{1}", "~{1}"}


@pytest.mark.parametrize("n_agents", [2, 3])
def test_split_node_matches_split_graph(n_agents):
    g = generic_graph(n_agents)

    for n in range(1, n_agents + 2):
        g = split_node(g, f"V{n}")

    assert g == split_graph(n_agents)


def test_not_splittable(loop_graph):
    with pytest.raises(NotSplittable):
        split_node(loop_graph, "X")


@pytest.mark.parametrize("n_agents", [2, 3])
def test_merged_is_local(n_agents):
    g = merged_graph(n_agents)

    assert len(g.nodes) == n_agents + 2
    assert is_valid(g).valid
    assert find_isomorphism(g, local_graph(n_agents)) is not None


def test_merge_plan():
    assert [(x.v, x.a, x.direction) for x in merge_plan(2)] == [
        ("V2{1}", "A1", MergeDirection.DOWN),
        ("V2{2}", "A2", MergeDirection.DOWN),
    ]
    assert sum(x.direction is MergeDirection.UP for x in merge_plan(3)) == 3


def test_merge_preconditions():
    g = split_graph(2)

    with pytest.raises(PreconditionFailed):
        merge_nodes(g, "V1{}", "A1", MergeDirection.DOWN)

    with pytest.raises(PreconditionFailed):
        merge_nodes(g, "V1{}", "A1", MergeDirection.UP)

    with pytest.raises(PreconditionFailed):
        merge_nodes(g, "A1", "A1", MergeDirection.UP)


def test_local_graph():
    g = local_graph(2)

    assert g.nodes == ("A1", "A2", "V1", "V3")
    assert len(g.arrows) == 8
    assert is_valid(g).valid

    with pytest.raises(InvalidGraph):
        local_graph(1)


@pytest.mark.parametrize("n_agents", [2, 3, 4])
def test_local_graph_valid(n_agents):
    g = local_graph(n_agents)
    report = is_valid(g)

    assert report.valid, report.summary()
    assert len(g.nodes) == n_agents + 2
    assert build_branch_graph(g).is_acyclic


@pytest.mark.parametrize(
    "name, params",
    [
        ("fixed-order", {"n_agents": 2}),
        ("fixed-order", {"n_agents": 3}),
        ("switch", {}),
        ("zurich", {}),
    ],
)
def test_remove_arrows(name, params):
    process = get_process(name, **params)
    g = generic_graph(process.spec.n_agents)
    result, report = remove_arrows(g, process.spec)

    assert len(report.removed) == process.notes["removable_arrows"]
    assert len(result.arrows) == len(g.arrows) - len(report.removed)
    assert report.validity.valid, report.validity.summary()


def test_fixed_order_becomes_chain():
    process = get_process("fixed-order", n_agents=2)
    g, _ = remove_arrows(generic_graph(2), process.spec)

    assert {x.id for x in g.arrows} == {"P", "V1>A1", "A1>V2", "V2>A2", "A2>V3", "F"}
    assert build_branch_graph(g).is_acyclic


def test_zurich_removal(zurich):
    g, _ = remove_arrows(generic_graph(4), zurich.spec)
    first, second = ("A1", "A2"), ("A3", "A4")
    expected = {"P", "F"}

    for a in first:
        expected |= {f"V1>{a}", f"{a}>V2", f"V2>{a}", f"{a}>V3"}

    for a in second:
        expected |= {f"V3>{a}", f"{a}>V4", f"V4>{a}", f"{a}>V5"}

    assert {x.id for x in g.arrows} == expected


def test_removal_vanishes_branches():
    process = get_process("fixed-order", n_agents=2)
    _, report = remove_arrows(generic_graph(2), process.spec)

    assert {str(x) for x in report.vanished} >= {"A1^{2}", "A2^{}"}


def test_drop_unknown(generic2):
    with pytest.raises(InvalidGraph):
        drop_arrows(generic2, ["nope"])


def test_bundle_parallel(generic2):
    bit = frozenset({Atom("0")})
    zero = (Atom("0"),)
    g = RoutedGraph.build(
        ["X", "Y"],
        [Arrow("a", "X", "Y", bit), Arrow("b", "X", "Y", bit)],
        {
            "X": Relation.of([], [Port("a", bit), Port("b", bit)], [((), zero * 2)]),
            "Y": Relation.of([Port("a", bit), Port("b", bit)], [], [(zero * 2, ())]),
        },
    )
    bundled = bundle_parallel(g)

    assert [x.id for x in bundled.arrows] == ["a+b"]
    assert bundled.arrow("a+b").alphabet == frozenset({Composite(zero * 2)})
    assert bundle_parallel(generic2) == generic2


def test_transform_log(generic2):
    log = TransformLog()
    g = generic2

    for node in ("V1", "V2", "V3"):
        g = log.apply(g, "split-node", {"node": node})

    for step in merge_plan(2):
        g = log.apply(g, "merge", {"v": step.v, "a": step.a, "direction": str(step.direction)})

    assert g == merged_graph(2)
    assert log.records[1].nodes_added == ("V2{1}", "V2{2}")
    assert log.records[1].nodes_removed == ("V2",)
    assert log.records[3].nodes_removed == ("V2{1}",)

    restored = TransformLog.from_json(json.loads(log.dumps()))

    assert replay(restored, generic2) == g

    with pytest.raises(InvalidGraph):
        log.apply(g, "rotate", {})

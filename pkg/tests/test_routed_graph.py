import itertools as it

import pytest

from routedqc.errors import InvalidGraph, NotUnivocal, OutOfDomain
from routedqc.generic import bifurcation_vector, closed_form_choice, generic_duality, generic_graph
from routedqc.relation import NULL, AgentSet, Atom, Port, branch_atom, identity, parse_value
from routedqc.routed_graph import (
    Arrow,
    RoutedGraph,
    canonical_form,
    choice_function,
    choice_relation,
    find_isomorphism,
    is_biunivocal,
    is_univocal,
    relabel,
)
from routedqc.transform import split_graph
from routedqc.utils import agents, all_subsets

from .conftest import BITS


def test_generic_counts(generic2):
    assert generic2.nodes == ("A1", "A2", "V1", "V2", "V3")
    assert len(generic2.arrows) == 10
    assert [x.id for x in generic2.open_arrows] == ["F", "P"]
    assert generic2.arrow("V1>A1").alphabet == frozenset({AgentSet.of([1]), NULL})
    assert generic2.arrow("V1>A1").one_dim == frozenset({NULL})


def test_single_agent_has_no_null():
    g = generic_graph(1)

    assert len(g.arrows) == 4
    assert all(NULL not in x.alphabet for x in g.arrows)


def test_invalid_graph():
    with pytest.raises(InvalidGraph):
        generic_graph(0)

    with pytest.raises(InvalidGraph):
        RoutedGraph.build(["X"], [Arrow("a", None, None, BITS)], {})

    with pytest.raises(InvalidGraph):
        RoutedGraph.loads("{not json")


def test_json(generic2):
    g = RoutedGraph.loads(generic2.dumps())

    assert g == generic2
    assert canonical_form(g) == canonical_form(generic2)
    assert g.route("V1").branches[0].label == "{}"


def test_adjoint(generic2):
    adj = generic2.adjoint

    assert adj.arrow("P").target is None
    assert adj.arrow("P").source == "V1"
    assert adj.adjoint == generic2


@pytest.mark.parametrize("n_agents", [1, 2, 3, 4])
def test_generic_duality(n_agents):
    g = generic_graph(n_agents)
    iso = generic_duality(n_agents)
    dual = relabel(g.adjoint, iso.nodes, iso.arrows, iso.values)

    assert dual == g
    assert canonical_form(dual) == canonical_form(g)


def test_choice_function(generic2):
    cf = choice_function(generic2)

    assert cf.size == 2
    assert [x.key for x in cf.axes] == [("V1", "{}")]

    first = cf({("V1", "{}"): (AgentSet.of([1]), NULL)})
    assert first == {"A1": "{}", "A2": "{1}", "V1": "{}", "V2": "{1}", "V3": "{1,2}"}
    assert cf.happens("A2", "{}", {("V1", "{}"): (NULL, AgentSet.of([2]))})

    with pytest.raises(OutOfDomain):
        cf({("V1", "{}"): (NULL, NULL)})

    with pytest.raises(OutOfDomain):
        cf({("V9", "{}"): (NULL, NULL)})


def _bifurcation_maps(n_agents):
    everyone = frozenset(agents(n_agents))
    keys = [x for x in all_subsets(n_agents) if len(x) < n_agents]

    for choice in it.product(*(sorted(everyone - x) for x in keys)):
        yield dict(zip(keys, choice))


@pytest.mark.parametrize("n_agents", [2, 3, 4])
def test_closed_form_choice(n_agents):
    cf = choice_function(generic_graph(n_agents))
    maps = list(_bifurcation_maps(n_agents))

    for bifurcations in maps:
        assert cf(bifurcation_vector(n_agents, bifurcations)) == closed_form_choice(n_agents, bifurcations)

    assert len(maps) == cf.size


@pytest.mark.parametrize("n_agents", [1, 2, 3, 4])
def test_generic_biunivocal(n_agents):
    assert is_biunivocal(generic_graph(n_agents))


def test_loop_not_univocal(loop_graph):
    assert len(loop_graph.assignments) == 2
    assert not is_univocal(loop_graph)

    with pytest.raises(NotUnivocal):
        choice_function(loop_graph)


def test_find_isomorphism(generic2):
    swapped = relabel(generic2, nodes={"A1": "A2", "A2": "A1"})
    result = find_isomorphism(swapped, generic2)

    assert result is not None
    assert relabel(swapped, result.nodes, result.arrows, result.values) == generic2
    assert find_isomorphism(generic2, split_graph(2)) is None


def _decode_choices(n_agents, ports, values):
    bifurcations = {}

    for port, value in zip(ports, values):
        _, node, label = port.id.split(":", 2)
        done = parse_value(label).members

        if node.startswith("V") and len(done) < n_agents:
            (chosen,) = (x.members for x in value.parts if x != NULL)
            (bifurcations[done],) = chosen - done

    return bifurcations


@pytest.mark.parametrize("n_agents", [2, 3, 4])
def test_choice_relation(n_agents):
    g = generic_graph(n_agents)
    relation = choice_relation(g)
    table = {}

    for k, l in relation.pairs:
        table.setdefault(k, set()).add(l)

    assert all(len(x) == 1 for x in table.values())
    assert len(table) == choice_function(g).size

    for k, (l,) in table.items():
        expected = closed_form_choice(n_agents, _decode_choices(n_agents, relation.inputs, k))
        realised = {x.id.removeprefix("branch:"): v for x, v in zip(relation.outputs, l)}

        assert realised == {node: branch_atom(label) for node, label in expected.items()}


def test_find_isomorphism_permuted_values():
    arrows = [
        Arrow("P", None, "X", BITS),
        Arrow("a", "X", "Y", BITS),
        Arrow("F", "Y", None, BITS),
    ]
    routes = {
        "X": identity(Port("P", BITS), Port("a", BITS)),
        "Y": identity(Port("a", BITS), Port("F", BITS)),
    }
    g = RoutedGraph.build(["X", "Y"], arrows, routes)
    swap = {Atom("0"): Atom("1"), Atom("1"): Atom("0")}
    swapped = relabel(g, values={"a": swap})

    assert swapped != g

    result = find_isomorphism(swapped, g)

    assert result is not None
    assert relabel(swapped, result.nodes, result.arrows, result.values) == g

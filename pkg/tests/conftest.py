import pytest

from routedqc.catalog import get_process, quantum_switch
from routedqc.generic import generic_graph
from routedqc.relation import Atom, Port, Relation, identity
from routedqc.routed_graph import Arrow, RoutedGraph

BITS = frozenset({Atom("0"), Atom("1")})


@pytest.fixture(scope="session")
def generic2() -> RoutedGraph:
    return generic_graph(2)


@pytest.fixture(scope="session")
def generic3() -> RoutedGraph:
    return generic_graph(3)


@pytest.fixture(scope="session")
def switch():
    return quantum_switch()


@pytest.fixture(scope="session")
def grenoble():
    return get_process("grenoble")


@pytest.fixture(scope="session")
def zurich():
    return get_process("zurich")


@pytest.fixture
def loop_graph() -> RoutedGraph:
    """Два узла, передающих бит по кругу: граф не однозначен."""

    arrows = [Arrow("X>Y", "X", "Y", BITS), Arrow("Y>X", "Y", "X", BITS)]
    routes = {
        "X": identity(Port("Y>X", BITS), Port("X>Y", BITS)),
        "Y": identity(Port("X>Y", BITS), Port("Y>X", BITS)),
    }

    return RoutedGraph.build(["X", "Y"], arrows, routes)


def single_node(pairs) -> RoutedGraph:
    """Узел `X` между открытыми стрелками `P` и `F` с двоичными алфавитами."""

    arrows = [Arrow("P", None, "X", BITS), Arrow("F", "X", None, BITS)]
    route = Relation.of(
        [Port("P", BITS)],
        [Port("F", BITS)],
        (((Atom(str(x)),), (Atom(str(y)),)) for x, y in pairs),
    )

    return RoutedGraph.build(["X"], arrows, {"X": route})

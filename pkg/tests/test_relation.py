import pytest
from hypothesis import given, settings, strategies as st

from routedqc.errors import AlphabetMismatch, ArrowCollision, InvalidRelation, InvalidValue, NotBranched
from routedqc.relation import (
    NULL,
    AgentSet,
    Atom,
    Composite,
    Port,
    Relation,
    compose,
    identity,
    join_assignments,
    parse_value,
)

DIGITS = frozenset(Atom(str(x)) for x in range(3))

pairs_st = st.sets(st.tuples(st.integers(0, 2), st.integers(0, 2)), max_size=9)


def _port(id: str) -> Port:
    return Port(id, DIGITS)


def _relation(src: str, dst: str, pairs) -> Relation:
    return Relation.of(
        [_port(src)],
        [_port(dst)],
        (((Atom(str(x)),), (Atom(str(y)),)) for x, y in pairs),
    )


def test_values():
    assert str(AgentSet.of([2, 1])) == "{1,2}"
    assert str(AgentSet()) == "{}"
    assert AgentSet.of([1]).add(3) == AgentSet((1, 3))
    assert AgentSet.of([1, 3]).remove(1) == AgentSet((3,))
    assert str(Composite((NULL, Atom("x")))) == "(-;@x)"

    for text in ["-", "{}", "{1,3}", "@F", "(@x;({2};-))"]:
        assert str(parse_value(text)) == text

    with pytest.raises(InvalidValue):
        AgentSet((2, 1))

    with pytest.raises(InvalidValue):
        Atom("a;b")

    with pytest.raises(InvalidValue):
        parse_value("x")


def test_canonical_ports():
    a, b = _port("b"), _port("a")
    zero, one = Atom("0"), Atom("1")
    r = Relation.of([a, b], [_port("c")], [((zero, one), (one,))])

    assert r.in_ids == ("a", "b")
    assert r.pairs == frozenset({((one, zero), (one,))})


def test_invalid_relations():
    with pytest.raises(ArrowCollision):
        Relation.of([_port("a")], [_port("a")], [])

    with pytest.raises(InvalidRelation):
        Relation.of([_port("a")], [_port("b")], [((Atom("7"),), (Atom("0"),))])


def test_branches():
    r = _relation("a", "b", [(0, 0), (0, 1), (1, 0), (1, 1), (2, 2)])

    assert r.is_branched
    assert len(r.branches) == 2
    assert r.branch_of((Atom("1"),)) == r.branch_of((Atom("0"),))
    assert r.branch_of((Atom("2"),)).trivial
    assert r.practical_domain == frozenset((x,) for x in DIGITS)

    augmented = r.augment("x")
    assert augmented.is_partial_function
    assert len(augmented.trivial_inputs) == 1


def test_not_branched():
    r = _relation("a", "b", [(0, 0), (0, 1), (1, 1), (1, 2)])

    assert not r.is_branched

    with pytest.raises(NotBranched):
        r.branches


def test_branch_labels():
    zero = (Atom("0"),)
    r = Relation.of([_port("a")], [_port("b")], [(zero, zero)], {zero: "first"})

    assert r.branches[0].label == "first"
    assert r.converse().branches[0].label == "first"


def test_without_arrows():
    port = Port("x", frozenset({NULL, AgentSet.of([1])}))
    r = Relation.of(
        [_port("a")],
        [_port("b"), port],
        [
            ((Atom("0"),), (Atom("0"), NULL)),
            ((Atom("1"),), (Atom("1"), AgentSet.of([1]))),
        ],
    )

    reduced = r.without_arrows(["x"])
    assert reduced.out_ids == ("b",)
    assert reduced.pairs == frozenset({((Atom("0"),), (Atom("0"),))})


def test_json():
    r = _relation("a", "b", [(0, 1), (2, 2)])
    assert Relation.from_json(r.to_json()) == r


def test_identity_mismatch():
    with pytest.raises(AlphabetMismatch):
        identity(_port("a"), Port("b", frozenset({NULL})))


def test_join_assignments():
    r = _relation("a", "b", [(0, 1), (1, 2)])
    s = _relation("b", "c", [(1, 0), (1, 1)])
    rows = join_assignments([r, s])

    assert rows.arrows == ("a", "b", "c")
    assert len(rows) == 2
    assert {rows.project(x, ["c"]) for x in rows} == {(Atom("0"),), (Atom("1"),)}


@given(pairs_st)
@settings(max_examples=50, deadline=None)
def test_converse_involution(pairs):
    r = _relation("a", "b", pairs)
    assert r.converse().converse() == r


@given(pairs_st)
@settings(max_examples=50, deadline=None)
def test_compose_identity(pairs):
    r = _relation("a", "b", pairs)
    result = compose([r, identity(_port("b"), _port("c"))], ["b"])

    assert result == r.rename({"b": "c"})


@given(pairs_st, pairs_st, pairs_st)
@settings(max_examples=50, deadline=None)
def test_compose_associative(p, q, s):
    r1, r2, r3 = _relation("a", "b", p), _relation("b", "c", q), _relation("c", "d", s)

    left = compose([compose([r1, r2], ["b"]), r3], ["c"])
    right = compose([r1, compose([r2, r3], ["c"])], ["b"])

    assert left == right == compose([r1, r2, r3], ["b", "c"])


@given(pairs_st, pairs_st)
@settings(max_examples=50, deadline=None)
def test_compose_converse(p, q):
    r1, r2 = _relation("a", "b", p), _relation("b", "c", q)

    left = compose([r1, r2], ["b"]).converse()
    right = compose([r2.converse(), r1.converse()], ["b"])

    assert left == right

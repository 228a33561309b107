import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from routedqc.errors import ShapeMismatch, SpaceMismatch
from routedqc.relation import NULL, PLAIN, AgentSet, Port, Relation
from routedqc.tensor import (
    ChoiTensor,
    RoutedMapCheck,
    SectoredSpace,
    SectorTensor,
    choi_of_matrix,
    embed_block,
    follows_route,
    is_isometry,
    is_unitary,
    link_all,
    link_product,
    matrix_of_choi,
    max_deviation,
    route_violations,
)

ONE = AgentSet.of([1])

X, Y, Z = SectoredSpace.plain("X", 2), SectoredSpace.plain("Y", 3), SectoredSpace.plain("Z", 2)
S = SectoredSpace("s", ((NULL, 1), (ONE, 2)))
T = SectoredSpace("t", ((NULL, 1), (ONE, 2)))

floats = st.floats(-1, 1, allow_nan=False, allow_infinity=False)


def _matrix(shape):
    return arrays(np.float64, shape, elements=floats)


def _sector_route() -> RoutedMapCheck:
    alphabet = frozenset({NULL, ONE})
    route = Relation.of(
        [Port("s", alphabet)],
        [Port("t", alphabet)],
        [((NULL,), (NULL,)), ((ONE,), (ONE,))],
    )

    return RoutedMapCheck(route, (S,), (T,))


def test_sectored_space():
    assert S.total_dim == 3
    assert S.slice(ONE) == slice(1, 3)
    assert S.as_plain().dims == {PLAIN: 3}

    S.check_one_dim([NULL])

    with pytest.raises(SpaceMismatch):
        S.check_one_dim([ONE])

    with pytest.raises(SpaceMismatch):
        S.slice(AgentSet.of([2]))

    with pytest.raises(SpaceMismatch):
        SectoredSpace("s", ((NULL, 1), (NULL, 2)))

    assert SectoredSpace.from_json(S.to_json()) == S


@given(_matrix((3, 2)), _matrix((2, 3)))
@settings(max_examples=30, deadline=None)
def test_link_is_composition(a, b):
    ta = choi_of_matrix(a, [X], [Y])
    tb = choi_of_matrix(b, [Y], [Z])
    linked = link_product(ta, tb)

    assert linked.labels == ("X", "Z")
    np.testing.assert_allclose(matrix_of_choi(linked, ["X"], ["Z"]), b @ a, atol=1e-12)
    np.testing.assert_allclose(link_product(tb, ta).amplitudes, linked.amplitudes, atol=1e-12)


@given(_matrix((2, 6)))
@settings(max_examples=30, deadline=None)
def test_choi_roundtrip(m):
    t = choi_of_matrix(m, [Y, X], [Z])

    assert t.labels == ("X", "Y", "Z")
    np.testing.assert_allclose(matrix_of_choi(t, ["Y", "X"], ["Z"]), m)


def test_link_without_shared_is_tensor_product():
    a = ChoiTensor.of([X], np.array([1, 2]))
    b = ChoiTensor.of([Z], np.array([3, 4]))

    np.testing.assert_allclose(link_all([a, b]).amplitudes, np.outer([1, 2], [3, 4]))
    assert link_all([]).amplitudes == 1


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        choi_of_matrix(np.eye(2), [X], [Y])

    with pytest.raises(ShapeMismatch):
        ChoiTensor.of([X], np.zeros(3))

    with pytest.raises(SpaceMismatch):
        link_product(ChoiTensor.of([X], np.zeros(2)), ChoiTensor.of([SectoredSpace.plain("X", 3)], np.zeros(3)))

    with pytest.raises(SpaceMismatch):
        max_deviation(ChoiTensor.of([X], np.zeros(2)), ChoiTensor.of([Z], np.zeros(2)))


def test_dump_load():
    rng = np.random.default_rng(1)
    t = choi_of_matrix(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)), [S], [T])
    loaded = ChoiTensor.load(t.dump())

    assert loaded.systems == t.systems
    assert max_deviation(loaded, t) == 0
    assert (t + t * -1).norm2() == 0


def test_isometry():
    rng = np.random.default_rng(7)
    q, _ = np.linalg.qr(rng.standard_normal((3, 2)))

    assert is_isometry(choi_of_matrix(q, [X], [Y]), ["X"], ["Y"])
    assert not is_isometry(choi_of_matrix(2 * q, [X], [Y]), ["X"], ["Y"])
    assert not is_unitary(choi_of_matrix(q, [X], [Y]), ["X"], ["Y"])

    u, _ = np.linalg.qr(rng.standard_normal((2, 2)))
    assert is_unitary(choi_of_matrix(u, [X], [Z]), ["X"], ["Z"])


def test_follows_route():
    check = _sector_route()

    assert check.mask().sum() == 5
    assert follows_route(choi_of_matrix(np.eye(3), [S], [T]), check)

    mixing = choi_of_matrix(np.ones((3, 3)), [S], [T])

    assert not follows_route(mixing, check)
    assert route_violations(mixing, check) == [((NULL,), (ONE,)), ((ONE,), (NULL,))]
    assert not SectorTensor.from_dense(mixing).follows(check)
    assert SectorTensor.from_dense(choi_of_matrix(np.eye(3), [S], [T])).follows(check)


def test_sector_dense_roundtrip():
    block = np.arange(4).reshape(2, 2) + 1
    dense = ChoiTensor(
        (S, T),
        embed_block((S, T), (ONE, ONE), block),
    )
    sparse = SectorTensor.from_dense(dense)

    assert list(sparse.blocks) == [(ONE, ONE)]
    np.testing.assert_allclose(sparse.block({"s": ONE, "t": ONE}), block)
    assert sparse.block({"s": NULL, "t": ONE}).shape == (1, 2)
    assert max_deviation(sparse.to_dense(), dense) == 0


def test_sector_link_matches_dense():
    rng = np.random.default_rng(3)
    first = SectorTensor.of(
        [X, S],
        {(PLAIN, NULL): rng.standard_normal((2, 1)), (PLAIN, ONE): rng.standard_normal((2, 2))},
    )
    second = SectorTensor.of(
        [S, Z],
        {(NULL, PLAIN): rng.standard_normal((1, 2)), (ONE, PLAIN): rng.standard_normal((2, 2))},
    )

    sparse = first.link(second).to_dense()
    dense = link_product(first.to_dense(), second.to_dense())

    assert sparse.labels == ("X", "Z")
    assert max_deviation(sparse, dense) < 1e-12


def test_drop_systems():
    t = SectorTensor.of(
        [X, S],
        {(PLAIN, NULL): np.ones((2, 1)), (PLAIN, ONE): np.ones((2, 2))},
    )
    dropped = t.drop_systems({"s": NULL})

    assert dropped.labels == ("X",)
    np.testing.assert_allclose(dropped.block({"X": PLAIN}), np.ones(2))

    with pytest.raises(ShapeMismatch):
        t.drop_systems({"X": PLAIN})

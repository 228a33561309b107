import numpy as np
import pytest

from routedqc.catalog import (
    fixed_order,
    get_process,
    haar_isometry,
    list_processes,
    minimal_alpha,
    quantum_switch,
    random_spec,
)
from routedqc.errors import InvalidSpec, UnknownProcess
from routedqc.qcqc import validate_spec


def test_registry():
    assert list_processes() == ["fixed-order", "grenoble", "random", "switch", "zurich"]
    assert get_process("switch").name == "switch"
    assert get_process("fixed-order", n_agents=3).spec.n_agents == 3

    with pytest.raises(UnknownProcess):
        get_process("teleport")


@pytest.mark.parametrize(
    "n_agents, d_P, d, expected",
    [(2, 2, 2, (1, 1)), (3, 2, 2, (1, 1, 2)), (2, 8, 2, (2, 2))],
)
def test_minimal_alpha(n_agents, d_P, d, expected):
    assert minimal_alpha(n_agents, d_P, d) == expected


def test_haar_isometry():
    m = haar_isometry(np.random.default_rng(0), 5, 3)

    assert m.shape == (5, 3)
    np.testing.assert_allclose(m.conj().T @ m, np.eye(3), atol=1e-12)


def test_random_is_seeded():
    first, second, other = random_spec(seed=3), random_spec(seed=3), random_spec(seed=4)

    assert first.spec.ops.keys() == second.spec.ops.keys()
    assert all(np.array_equal(m, second.spec.ops[k]) for k, m in first.spec.ops.items())
    assert any(not np.allclose(m, other.spec.ops[k]) for k, m in first.spec.ops.items())
    assert validate_spec(random_spec(2, d_P=8).spec).ok


def test_invalid_parameters():
    with pytest.raises(InvalidSpec):
        fixed_order(2, [1, 1])

    with pytest.raises(InvalidSpec):
        quantum_switch(1)


def test_fixed_order_notes():
    process = fixed_order(3, [3, 1, 2])

    assert process.notes == {"order": [3, 1, 2], "removable_arrows": 12}
    assert validate_spec(process.spec).ok

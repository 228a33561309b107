import numpy as np
import pytest

from routedqc.errors import ConfigurationError, ShapeMismatch
from routedqc.utils import (
    ATOL_ENV,
    DEFAULT_ATOL,
    all_subsets,
    arrow_id,
    complex_to_pairs,
    default_atol,
    is_zero,
    natural_sorted,
    pairs_to_complex,
    resolve_atol,
    subsets,
)


def test_default_atol(monkeypatch):
    monkeypatch.delenv(ATOL_ENV, raising=False)
    assert default_atol() == DEFAULT_ATOL

    monkeypatch.setenv(ATOL_ENV, "1e-6")
    assert default_atol() == 1e-6
    assert resolve_atol(0.5) == 0.5


@pytest.mark.parametrize("value", ["abc", "0", "-1e-3"])
def test_default_atol_rejects(monkeypatch, value):
    monkeypatch.setenv(ATOL_ENV, value)

    with pytest.raises(ConfigurationError):
        default_atol()


def test_natural_sorted():
    assert natural_sorted(["V10", "V2", "A1", "V1"]) == ["A1", "V1", "V2", "V10"]


def test_subsets():
    assert list(subsets(3, 2)) == [frozenset({1, 2}), frozenset({1, 3}), frozenset({2, 3})]
    assert len(list(all_subsets(4))) == 16


def test_arrow_id():
    assert arrow_id("V1", "A2") == "V1>A2"
    assert arrow_id("A1", "A2", "@3") == "A1>A2@3"


def test_is_zero():
    assert is_zero(None)
    assert is_zero(np.zeros((2, 2)))
    assert is_zero(np.full((2, 2), 1e-14))
    assert not is_zero(np.eye(2))


def test_complex_pairs():
    data = np.array([[1 + 2j, -0.5j], [3, 0]])
    pairs = complex_to_pairs(data)

    assert pairs[0] == [1.0, 2.0]
    np.testing.assert_allclose(pairs_to_complex(pairs, (2, 2)), data)

    with pytest.raises(ShapeMismatch):
        pairs_to_complex(pairs, (3, 2))

import itertools as it
import math
import os
import re
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigurationError, ShapeMismatch

ATOL_ENV = "ROUTED_QC_ATOL"
"""Переменная окружения с абсолютной точностью сравнений"""

DEFAULT_ATOL = 1e-9
"""Абсолютная точность сравнений по умолчанию"""

ZERO_ATOL = 1e-12
"""Порог точного нуля для блоков операторов"""

_RE_DIGITS = re.compile(r"(\d+)")


def default_atol() -> float:
    """Возвращает абсолютную точность с учетом переменной окружения."""

    if (value := os.environ.get(ATOL_ENV)) is None:
        return DEFAULT_ATOL

    try:
        atol = float(value)

    except ValueError:
        raise ConfigurationError(f"{ATOL_ENV}: ожидается число, получено {value!r}")

    if not atol > 0:
        raise ConfigurationError(f"{ATOL_ENV}: точность должна быть положительной")

    return atol


def resolve_atol(atol: float | None) -> float:
    return default_atol() if atol is None else atol


def natural_key(_str: str) -> tuple[str | int, ...]:
    """Ключ естественной сортировки строк (числа сравниваются как числа)."""

    parts = _RE_DIGITS.split(_str)
    return tuple(int(x) if i % 2 else x for i, x in enumerate(parts))


def natural_sorted(items: Iterable[str]) -> list[str]:
    return sorted(items, key=natural_key)


def v_node(n: int) -> str:
    """Идентификатор V-узла `V_n`."""

    return f"V{n}"


def a_node(k: int) -> str:
    """Идентификатор A-узла агента `k`."""

    return f"A{k}"


def arrow_id(source: str, target: str, suffix: str = "") -> str:
    """Идентификатор стрелки между узлами."""

    return f"{source}>{target}{suffix}"


def slot_in(k: int) -> str:
    """Входная система агента `k`."""

    return f"A{k}:I"


def slot_out(k: int) -> str:
    """Выходная система агента `k`."""

    return f"A{k}:O"


def alpha_label(n: int) -> str:
    return f"alpha{n}"


def agents(n_agents: int) -> range:
    """Множество агентов `1..N`."""

    return range(1, n_agents + 1)


def subsets(n_agents: int, size: int) -> Iterator[frozenset[int]]:
    """Перебирает подмножества агентов заданного размера."""

    for x in it.combinations(agents(n_agents), size):
        yield frozenset(x)


def all_subsets(n_agents: int) -> Iterator[frozenset[int]]:
    for size in range(n_agents + 1):
        yield from subsets(n_agents, size)


def is_zero(matrix: np.ndarray | None) -> bool:
    """Блок оператора отсутствует или равен нулю."""

    return matrix is None or not matrix.size or np.abs(matrix).max() <= ZERO_ATOL


def prod(dims: Iterable[int]) -> int:
    return math.prod(dims)


def complex_to_pairs(array: np.ndarray) -> list[list[float]]:
    """Преобразует комплексный массив в плоский список пар `[re, im]`."""

    flat = np.asarray(array, dtype=complex).ravel()
    return [[float(x.real), float(x.imag)] for x in flat]


def pairs_to_complex(pairs: Iterable[Iterable[float]], shape: tuple[int, ...]) -> np.ndarray:
    """Восстанавливает комплексный массив из пар `[re, im]`."""

    data = np.array([complex(*x) for x in pairs], dtype=complex)

    if data.size != prod(shape):
        raise ShapeMismatch(f"ожидалось {prod(shape)} элементов, получено {data.size}")

    return data.reshape(shape)

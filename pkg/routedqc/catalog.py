"""
Справочные процессы с квантовым управлением порядком.
"""

from __future__ import annotations

import dataclasses as dc
import logging
import math
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidSpec, UnknownProcess
from .qcqc import OpKey, QcqcSpec, final_key, initial_key
from .utils import agents, subsets

_LOGGER = logging.getLogger(__name__)


@dc.dataclass(frozen=True)
class NamedProcess:
    """Именованный процесс и известные факты о его структуре"""

    name: str
    """Имя"""
    spec: QcqcSpec
    """Размерности и внутренние операции"""
    notes: Mapping[str, Any] = dc.field(default_factory=dict)
    """Ожидаемые структурные свойства (число удаляемых стрелок и т.п.)"""


def _basis(dim: int, index: int) -> np.ndarray:
    result = np.zeros((dim, 1), dtype=complex)
    result[index, 0] = 1
    return result


def quantum_switch(d_target: int = 2) -> NamedProcess:
    """
    Квантовый переключатель двух агентов.

    Прошлое `P = P_C ⊗ P_T`: управляющий кубит выбирает первого агента,
    целевая система передается ему. Будущее `F = F_T ⊗ F_C`: управляющий
    кубит записывает порядок (последний тензорный множитель).
    """

    if d_target < 2:
        raise InvalidSpec("Размерность целевой системы должна быть не меньше двух")

    eye = np.eye(d_target, dtype=complex)
    ops = {}

    for k in agents(2):
        other = 3 - k
        ops[initial_key(k)] = np.kron(_basis(2, k - 1).T, eye)
        ops[OpKey(frozenset(), k, other)] = eye
        ops[final_key(frozenset({other}), k)] = np.kron(eye, _basis(2, other - 1))

    spec = QcqcSpec(2, 2 * d_target, 2 * d_target, d_target, d_target, (1, 1), ops)

    return NamedProcess("switch", spec, {"removable_arrows": 0, "alpha_F": 2})


def grenoble(d_target: int = 2) -> NamedProcess:
    """
    Трехсторонний процесс с динамическим порядком.

    Первый агент выбирается в равной суперпозиции, второй равновероятно
    из оставшихся, третий однозначно; вспомогательная система `α_3`
    различает порядок двух первых агентов, а `α_F` в будущем записывает
    последнего агента и содержимое `α_3`.
    """

    d = d_target
    eye = np.eye(d, dtype=complex)
    everyone = frozenset(agents(3))
    ops = {}

    for k1 in everyone:
        ops[initial_key(k1)] = _basis(d, 0) / math.sqrt(3)

        for k2 in everyone - {k1}:
            ops[OpKey(frozenset(), k1, k2)] = eye / math.sqrt(2)
            (k3,) = everyone - {k1, k2}
            order = int(k1 > k2)
            ops[OpKey(frozenset({k1}), k2, k3)] = np.kron(eye, _basis(2, order))
            ops[final_key(frozenset({k1, k2}), k3)] = _final_record(d, k3)

    spec = QcqcSpec(3, 1, 6 * d, d, d, (1, 1, 2), ops)

    return NamedProcess("grenoble", spec, {"removable_arrows": 0, "alpha_F": 6})


def _final_record(d: int, last: int) -> np.ndarray:
    """`|x⟩^{A^O}|c⟩^{α_3} ↦ |x⟩^{F_T}|2(last-1)+c⟩^{α_F}`."""

    record = np.zeros((6, 2), dtype=complex)

    for c in range(2):
        record[2 * (last - 1) + c, c] = 1

    return np.kron(np.eye(d, dtype=complex), record)


def zurich(d_target: int = 2) -> NamedProcess:
    """
    Процесс как двойной квантовый переключатель четырех агентов.

    Агенты 1, 2 работают первыми в суперпозиции порядков, затем агенты 3, 4;
    переход от второго агента к третьему меняет базис управления
    (знак минус для пары 2 → 3), последний агент записывается в `α_F`.
    """

    d = d_target
    eye = np.eye(d, dtype=complex)
    first, second = frozenset({1, 2}), frozenset({3, 4})
    psi = _basis(d, 0)
    ops = {}

    for k1 in first:
        (k2,) = first - {k1}
        ops[initial_key(k1)] = psi / math.sqrt(2)
        ops[OpKey(frozenset(), k1, k2)] = eye

        for k3 in second:
            sign = -1 if (k2, k3) == (2, 3) else 1
            ops[OpKey(frozenset({k1}), k2, k3)] = sign * eye / math.sqrt(2)

    for k3 in second:
        (k4,) = second - {k3}
        ops[OpKey(first, k3, k4)] = eye
        ops[final_key(first | {k3}, k4)] = np.kron(eye, _basis(2, k4 % 2))

    spec = QcqcSpec(4, 1, 2 * d, d, d, (1, 1, 1, 1), ops)

    return NamedProcess("zurich", spec, {"removable_arrows": 16, "alpha_F": 2})


def fixed_order(n_agents: int = 2, order: Sequence[int] | None = None, d_target: int = 2) -> NamedProcess:
    """Процесс с фиксированным порядком: тождественные операции вдоль цепочки."""

    order = tuple(order or agents(n_agents))

    if sorted(order) != list(agents(n_agents)):
        raise InvalidSpec(f"Порядок {order} не является перестановкой агентов")

    eye = np.eye(d_target, dtype=complex)
    ops: dict[OpKey, np.ndarray] = {initial_key(order[0]): eye}

    for n, k in enumerate(order):
        target = order[n + 1] if n + 1 < n_agents else None
        ops[OpKey(frozenset(order[:n]), k, target)] = eye

    spec = QcqcSpec(n_agents, d_target, d_target, d_target, d_target, (1,) * n_agents, ops)
    removable = 2 * n_agents * n_agents - 2 * n_agents

    return NamedProcess("fixed-order", spec, {"order": list(order), "removable_arrows": removable})


def minimal_alpha(n_agents: int, d_P: int, d: int) -> tuple[int, ...]:
    """Наименьшие размерности `α_n`, допускающие изометрии на каждом уровне."""

    result = [max(1, math.ceil(d_P / (n_agents * d)))]

    for n in range(1, n_agents):
        result.append(math.ceil(n * result[-1] / (n_agents - n)))

    return tuple(result)


def haar_isometry(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Случайная изометрия по мере Хаара (QR с фиксированной фазой диагонали R)."""

    z = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)

    return q * (diag / np.abs(diag))


def random_spec(n_agents: int = 2, d_target: int = 2, seed: int = 0, d_P: int | None = None) -> NamedProcess:
    """
    Случайный процесс: для каждого множества `K_n` совместная изометрия
    всех операций уровня, разбитая на блоки по `k ∈ K_n` и `ℓ ∉ K_n`.
    """

    d = d_target
    d_P = d if d_P is None else d_P
    d_alpha = minimal_alpha(n_agents, d_P, d)
    d_F = n_agents * d * d_alpha[-1]
    rng = np.random.default_rng(seed)
    spec = QcqcSpec(n_agents, d_P, d_F, d, d, d_alpha, {})
    ops = {}

    for n in range(n_agents + 1):
        for done in subsets(n_agents, n):
            if n:
                keys = [[OpKey(done - {k}, k, t) for k in sorted(done)] for t in _targets(n_agents, done)]

            else:
                keys = [[initial_key(t)] for t in _targets(n_agents, done)]

            rows = [spec.out_dim(x[0]) for x in keys]
            cols = [spec.in_dim(x) for x in keys[0]]
            matrix = haar_isometry(rng, sum(rows), sum(cols))
            r0 = 0

            for row, line in zip(rows, keys):
                c0 = 0

                for col, key in zip(cols, line):
                    ops[key] = matrix[r0 : r0 + row, c0 : c0 + col]
                    c0 += col

                r0 += row

    _LOGGER.debug("Случайный процесс N=%d, d=%d, α=%s, seed=%d", n_agents, d, d_alpha, seed)

    return NamedProcess("random", dc.replace(spec, ops=ops), {"seed": seed, "removable_arrows": 0})


def _targets(n_agents: int, done: frozenset[int]) -> list[int | None]:
    if len(done) == n_agents:
        return [None]

    return [x for x in agents(n_agents) if x not in done]


_REGISTRY: Mapping[str, Callable[..., NamedProcess]] = {
    "fixed-order": fixed_order,
    "grenoble": grenoble,
    "random": random_spec,
    "switch": quantum_switch,
    "zurich": zurich,
}


def list_processes() -> list[str]:
    return sorted(_REGISTRY)


def get_process(name: str, **params: Any) -> NamedProcess:
    """Строит справочный процесс по имени."""

    if (factory := _REGISTRY.get(name)) is None:
        raise UnknownProcess(f"Неизвестный процесс {name!r}; доступны: {', '.join(list_processes())}")

    return factory(**params)

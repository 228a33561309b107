"""
Прямое построение процесса с квантовым управлением порядком.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import itertools as it
import json
import logging
from types import MappingProxyType
from typing import Any, Iterator, Mapping, Self, Sequence

import numpy as np

from .errors import DimMismatch, InvalidSpec, SpaceMismatch
from .relation import AgentSet, parse_value
from .tensor import ChoiTensor, SectoredSpace, choi_of_matrix, link_all, link_product
from .utils import (
    agents,
    alpha_label,
    complex_to_pairs,
    is_zero,
    pairs_to_complex,
    prod,
    resolve_atol,
    slot_in,
    slot_out,
)

_LOGGER = logging.getLogger(__name__)

PAST = "P"
"""Система глобального прошлого"""

FUTURE = "F"
"""Система глобального будущего"""


@dc.dataclass(frozen=True)
class OpKey:
    """Ключ внутренней операции `V^{→ℓ}_{K\\k,k}`"""

    before: frozenset[int]
    """Агенты, завершившие работу до текущего"""
    current: int | None
    """Текущий агент (`None` для начальной операции)"""
    target: int | None
    """Следующий агент (`None` для конечной операции)"""

    @property
    def is_initial(self) -> bool:
        return self.current is None

    @property
    def is_final(self) -> bool:
        return self.target is None

    @property
    def level(self) -> int:
        """Число агентов, завершивших работу после текущей операции."""

        return len(self.before) + (self.current is not None)

    @property
    def done(self) -> frozenset[int]:
        """Множество `K_n` завершивших работу агентов."""

        return self.before if self.current is None else self.before | {self.current}

    @property
    def slot(self) -> tuple[frozenset[int], int | None]:
        return self.before, self.current

    @property
    def sort_key(self) -> tuple:
        return (
            self.level,
            sorted(self.before),
            self.current or 0,
            self.target if self.target is not None else 1 << 30,
        )

    def __str__(self) -> str:
        target = FUTURE if self.target is None else self.target
        current = "" if self.current is None else self.current
        return f"V^{target}_{AgentSet.of(self.before)},{current}"


def initial_key(target: int) -> OpKey:
    return OpKey(frozenset(), None, target)


def final_key(before: frozenset[int], current: int) -> OpKey:
    return OpKey(frozenset(before), current, None)


def slot_str(slot: tuple[frozenset[int], int | None]) -> str:
    before, current = slot
    return f"({AgentSet.of(before)}, {'-' if current is None else current})"


@dc.dataclass(frozen=True, eq=False)
class QcqcSpec:
    """Размерности и внутренние операции процесса"""

    n_agents: int
    """Число агентов `N`"""
    d_P: int
    """Размерность глобального прошлого"""
    d_F: int
    """Размерность глобального будущего"""
    d_AI: int
    """Размерность входа агента"""
    d_AO: int
    """Размерность выхода агента"""
    d_alpha: tuple[int, ...]
    """Размерности вспомогательных систем `α_1..α_N`"""
    ops: Mapping[OpKey, np.ndarray]
    """Ненулевые блоки внутренних операций"""

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise InvalidSpec("Число агентов должно быть положительным")

        if len(self.d_alpha) != self.n_agents:
            raise DimMismatch(f"Ожидалось {self.n_agents} размерностей α, получено {len(self.d_alpha)}")

        if min(self.d_P, self.d_F, self.d_AI, self.d_AO, *self.d_alpha) < 1:
            raise DimMismatch("Размерности должны быть положительными")

        ops = {}

        for key, matrix in self.ops.items():
            self._check_key(key)
            matrix = np.asarray(matrix, dtype=complex)

            if matrix.shape != (shape := self.shape(key)):
                raise DimMismatch(f"Блок {key} формы {matrix.shape}, ожидалась {shape}")

            ops[key] = matrix

        object.__setattr__(self, "ops", MappingProxyType(ops))

    def _check_key(self, key: OpKey) -> None:
        everyone = frozenset(self.agents)

        if not key.before <= everyone:
            raise InvalidSpec(f"Неизвестные агенты в {key}")

        if key.current is None:
            if key.before or key.target is None:
                raise InvalidSpec(f"Некорректная начальная операция {key}")

        elif key.current not in everyone or key.current in key.before:
            raise InvalidSpec(f"Некорректный текущий агент в {key}")

        if key.target is None:
            if key.done != everyone:
                raise InvalidSpec(f"Конечная операция {key} до завершения всех агентов")

        elif key.target not in everyone - key.done:
            raise InvalidSpec(f"Некорректный следующий агент в {key}")

    @property
    def agents(self) -> range:
        return agents(self.n_agents)

    def alpha(self, n: int) -> int:
        """Размерность `α_n`."""

        return self.d_alpha[n - 1]

    def in_dim(self, key: OpKey) -> int:
        return self.d_P if key.is_initial else self.d_AO * self.alpha(key.level)

    def out_dim(self, key: OpKey) -> int:
        return self.d_F if key.is_final else self.d_AI * self.alpha(key.level + 1)

    def shape(self, key: OpKey) -> tuple[int, int]:
        return self.out_dim(key), self.in_dim(key)

    def op(self, key: OpKey) -> np.ndarray:
        """Блок операции (нулевой, если не задан)."""

        if (result := self.ops.get(key)) is not None:
            return result

        self._check_key(key)

        return np.zeros(self.shape(key), dtype=complex)

    def slots(self) -> Iterator[tuple[frozenset[int], int | None]]:
        """Перебирает пары `(K_n\\k, k)` по возрастанию `n`, начиная с начальной."""

        yield frozenset(), None

        for n in range(1, self.n_agents + 1):
            for done in it.combinations(self.agents, n):
                for k in done:
                    yield frozenset(done) - {k}, k

    def targets(self, slot: tuple[frozenset[int], int | None]) -> list[int | None]:
        before, current = slot
        done = before if current is None else before | {current}

        if len(done) == self.n_agents:
            return [None]

        return [x for x in self.agents if x not in done]

    def keys(self, slot: tuple[frozenset[int], int | None]) -> list[OpKey]:
        return [OpKey(slot[0], slot[1], x) for x in self.targets(slot)]

    def systems(self, key: OpKey) -> tuple[list[SectoredSpace], list[SectoredSpace]]:
        """Входные и выходные системы операции."""

        n = key.level

        if key.is_initial:
            inputs = [SectoredSpace.plain(PAST, self.d_P)]

        else:
            inputs = [
                SectoredSpace.plain(slot_out(key.current), self.d_AO),
                SectoredSpace.plain(alpha_label(n), self.alpha(n)),
            ]

        if key.is_final:
            outputs = [SectoredSpace.plain(FUTURE, self.d_F)]

        else:
            outputs = [
                SectoredSpace.plain(slot_in(key.target), self.d_AI),
                SectoredSpace.plain(alpha_label(n + 1), self.alpha(n + 1)),
            ]

        return inputs, outputs

    def choi(self, key: OpKey) -> ChoiTensor:
        """Вектор Чоя блока операции."""

        inputs, outputs = self.systems(key)
        return choi_of_matrix(self.op(key), inputs, outputs)

    def with_op(self, key: OpKey, matrix: np.ndarray | None) -> QcqcSpec:
        """Копия с замененным (или удаленным) блоком."""

        ops = dict(self.ops)

        if matrix is None:
            ops.pop(key, None)

        else:
            ops[key] = matrix

        return dc.replace(self, ops=ops)


def chain(s: QcqcSpec, order: Sequence[int]) -> list[OpKey]:
    """Ключи операций вдоль порядка агентов."""

    keys = [initial_key(order[0])]

    for n, k in enumerate(order):
        before = frozenset(order[:n])
        target = order[n + 1] if n + 1 < len(order) else None
        keys.append(OpKey(before, k, target))

    return keys


@dc.dataclass(frozen=True)
class SpecReport:
    """Результат проверки изометричности внутренних операций"""

    failures: tuple[tuple[tuple[frozenset[int], int | None], str], ...]
    """Нарушения по парам `(K_n\\k, k)`"""
    unreachable: tuple[tuple[frozenset[int], int | None], ...]
    """Пары, недостижимые ненулевыми цепочками"""

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        if self.ok:
            return f"spec OK ({len(self.unreachable)} unreachable slots)"

        return "\n".join(f"{slot_str(s)}: {msg}" for s, msg in self.failures)


def reachable_slots(s: QcqcSpec) -> set[tuple[frozenset[int], int | None]]:
    """Пары `(K_n\\k, k)`, достижимые ненулевыми блоками из начальной операции."""

    result = {(frozenset(), None)}

    for slot in s.slots():
        if slot not in result:
            continue

        for key in s.keys(slot):
            if key.target is not None and not is_zero(s.ops.get(key)):
                result.add((key.done, key.target))

    return result


def validate_spec(s: QcqcSpec, atol: float | None = None) -> SpecReport:
    """
    Проверяет, что операции каждого уровня вместе образуют изометрию.

    Для каждой достижимой пары `(K_n\\k, k)` сумма `Σ_ℓ V†V` равна единице,
    а для разных `k` при одном `K_n` соответствующие суммы равны нулю.
    """

    atol = resolve_atol(atol)
    reachable = reachable_slots(s)
    failures = []

    def _gram(a: tuple, b: tuple) -> np.ndarray:
        return sum(
            (s.op(OpKey(a[0], a[1], t)).conj().T @ s.op(OpKey(b[0], b[1], t)) for t in s.targets(a)),
            np.zeros((s.in_dim(OpKey(a[0], a[1], s.targets(a)[0])),) * 2, dtype=complex),
        )

    for slot in s.slots():
        if slot not in reachable:
            continue

        gram = _gram(slot, slot)

        if (dev := float(np.linalg.norm(gram - np.eye(gram.shape[0])))) > atol:
            failures.append((slot, f"Σ V†V ≠ 1 (отклонение {dev:.3g})"))

        before, current = slot

        for other in sorted(x for x in before if current is not None and x < current):
            pair = (before - {other} | {current}, other)

            if pair not in reachable:
                continue

            if (dev := float(np.linalg.norm(_gram(slot, pair)))) > atol:
                failures.append((slot, f"перекрытие с {slot_str(pair)} (отклонение {dev:.3g})"))

    unreachable = tuple(x for x in s.slots() if x not in reachable)

    _LOGGER.debug(
        "Проверка операций: %d нарушений, %d недостижимых пар",
        len(failures),
        len(unreachable),
    )

    return SpecReport(tuple(failures), unreachable)


@dc.dataclass(frozen=True, eq=False)
class ProcessVector:
    """Вектор процесса над системами `P`, `A_k^I`, `A_k^O`, `F`"""

    w: ChoiTensor
    """Амплитуды"""
    n_agents: int
    """Число агентов"""

    def __post_init__(self) -> None:
        expected = {PAST, FUTURE} | {f(k) for k in agents(self.n_agents) for f in (slot_in, slot_out)}

        if set(self.w.labels) != expected:
            raise SpaceMismatch(f"Системы процесса {self.w.labels} не совпадают с ожидаемыми")

    @property
    def labels(self) -> tuple[str, ...]:
        return self.w.labels

    def norm2(self) -> float:
        return self.w.norm2()


def term(s: QcqcSpec, order: Sequence[int]) -> ChoiTensor:
    """Слагаемое вектора процесса для одного порядка агентов."""

    return link_all(s.choi(x) for x in chain(s, order))


def process_vector(s: QcqcSpec, *, force: bool = False, atol: float | None = None) -> ProcessVector:
    """
    Вектор процесса: сумма по перестановкам агентов связующих произведений
    цепочек внутренних операций.
    """

    if not force and not (report := validate_spec(s, atol)).ok:
        raise InvalidSpec(f"Операции не образуют изометрию: {report.summary()}")

    total: ChoiTensor | None = None

    for order in it.permutations(s.agents):
        if any(is_zero(s.ops.get(x)) for x in chain(s, order)):
            continue

        t = term(s, order)
        total = t if total is None else total + t

    if total is None:
        total = term(s, tuple(s.agents)) * 0

    _LOGGER.debug("Вектор процесса: ⟨w|w⟩ = %.6g", total.norm2())

    return ProcessVector(total, s.n_agents)


def compose_with_agents(w: ProcessVector, operations: Sequence[ChoiTensor]) -> ChoiTensor:
    """Вектор Чоя отображения из прошлого в будущее при заданных операциях агентов."""

    if len(operations) != w.n_agents:
        raise SpaceMismatch(f"Ожидалось {w.n_agents} операций агентов, получено {len(operations)}")

    for k, op in zip(agents(w.n_agents), operations):
        if slot_in(k) not in op.labels or slot_out(k) not in op.labels:
            raise SpaceMismatch(f"Операция агента {k} не действует на {slot_in(k)} -> {slot_out(k)}")

    return functools.reduce(link_product, operations, w.w)


def mixed_process_matrix(w: ProcessVector, alpha_F_dim: int) -> np.ndarray:
    """
    Матрица процесса `Tr_{α_F} |w⟩⟨w|`.

    `α_F` считается последним тензорным множителем `F`; порядок систем
    результата канонический, с `F'` на месте `F`.
    """

    t = w.w
    f = t.labels.index(FUTURE)
    d_F = t.amplitudes.shape[f]

    if alpha_F_dim < 1 or d_F % alpha_F_dim:
        raise DimMismatch(f"Размерность F = {d_F} не делится на d_αF = {alpha_F_dim}")

    shape = t.amplitudes.shape
    data = t.amplitudes.reshape(shape[:f] + (d_F // alpha_F_dim, alpha_F_dim) + shape[f + 1 :])
    v = np.moveaxis(data, f + 1, -1).reshape(-1, alpha_F_dim)

    return v @ v.conj().T


def _key_json(key: OpKey) -> dict[str, Any]:
    return {
        "K": str(AgentSet.of(key.before)),
        "k": key.current,
        "l": FUTURE if key.target is None else key.target,
    }


def spec_to_json(s: QcqcSpec) -> dict[str, Any]:
    keys = sorted(s.ops, key=lambda x: x.sort_key)

    return {
        "n_agents": s.n_agents,
        "d_P": s.d_P,
        "d_F": s.d_F,
        "d_AI": s.d_AI,
        "d_AO": s.d_AO,
        "d_alpha": list(s.d_alpha),
        "ops": [_key_json(x) | {"matrix": complex_to_pairs(s.ops[x])} for x in keys],
    }


def _uniform(data: Mapping[str, Any], name: str) -> int:
    match value := data[name]:
        case int():
            return value
        case [int(), *_] if len(set(value)) == 1:
            return value[0]
        case list():
            raise InvalidSpec(
                f"{name}: размерности агентов должны совпадать; дополните меньшие системы до общей размерности"
            )

    raise InvalidSpec(f"{name}: ожидается целое число")


def spec_from_json(data: Mapping[str, Any]) -> QcqcSpec:
    """Восстанавливает описание процесса из JSON."""

    try:
        n_agents = int(data["n_agents"])
        d_P, d_F = int(data["d_P"]), int(data["d_F"])
        d_AI, d_AO = _uniform(data, "d_AI"), _uniform(data, "d_AO")
        d_alpha = tuple(int(x) for x in data["d_alpha"])
        ops = {}

        for entry in data["ops"]:
            before = parse_value(entry["K"])

            if not isinstance(before, AgentSet):
                raise InvalidSpec(f"Некорректное множество агентов {entry['K']!r}")

            target = None if entry["l"] == FUTURE else int(entry["l"])
            current = None if entry.get("k") is None else int(entry["k"])
            key = OpKey(before.members, current, target)
            ops[key] = entry["matrix"]

    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSpec(f"Некорректное описание процесса: {e}")

    spec = QcqcSpec(n_agents, d_P, d_F, d_AI, d_AO, d_alpha, {})

    return dc.replace(
        spec,
        ops={k: pairs_to_complex(v, spec.shape(k)) for k, v in ops.items()},
    )


def dump_spec(s: QcqcSpec) -> str:
    return json.dumps(spec_to_json(s), indent=1)


def load_spec(text: str) -> QcqcSpec:
    try:
        return spec_from_json(json.loads(text))

    except json.JSONDecodeError as e:
        raise InvalidSpec(f"Некорректный JSON: {e}")


def unitary_agents(s: QcqcSpec, unitaries: Sequence[np.ndarray]) -> list[ChoiTensor]:
    """Векторы Чоя операций агентов по их матрицам."""

    return [
        choi_of_matrix(
            u,
            [SectoredSpace.plain(slot_in(k), s.d_AI)],
            [SectoredSpace.plain(slot_out(k), s.d_AO)],
        )
        for k, u in zip(s.agents, unitaries)
    ]


def total_dim(s: QcqcSpec) -> int:
    return s.d_P * s.d_F * prod([s.d_AI * s.d_AO] * s.n_agents)

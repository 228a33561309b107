"""
Тензоры Чоя с секторной структурой систем и чистое связующее произведение.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import itertools as it
import json
import logging
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Self, Sequence

import numpy as np

from .errors import InvalidRelation, ShapeMismatch, SpaceMismatch
from .relation import PLAIN, IndexTuple, IndexValue, Relation, parse_value, tuple_key
from .utils import (
    ZERO_ATOL,
    complex_to_pairs,
    is_zero,
    natural_key,
    pairs_to_complex,
    prod,
    resolve_atol,
)

_LOGGER = logging.getLogger(__name__)


@dc.dataclass(frozen=True)
class SectoredSpace:
    """Гильбертово пространство, разложенное в прямую сумму секторов"""

    label: str
    """Имя системы"""
    sectors: tuple[tuple[IndexValue, int], ...]
    """Секторы: значение индекса и размерность"""

    def __post_init__(self) -> None:
        values = [x for x, _ in self.sectors]

        if not values:
            raise SpaceMismatch(f"Система {self.label} без секторов")

        if len(set(values)) != len(values):
            raise SpaceMismatch(f"Повторяющиеся секторы системы {self.label}")

        if any(d < 1 for _, d in self.sectors):
            raise SpaceMismatch(f"Нулевая размерность сектора системы {self.label}")

    @classmethod
    def plain(cls, label: str, dim: int) -> Self:
        """Система без секторной структуры."""

        return cls(label, ((PLAIN, dim),))

    @property
    def values(self) -> tuple[IndexValue, ...]:
        return tuple(x for x, _ in self.sectors)

    @functools.cached_property
    def dims(self) -> Mapping[IndexValue, int]:
        return MappingProxyType(dict(self.sectors))

    @property
    def total_dim(self) -> int:
        return sum(d for _, d in self.sectors)

    @functools.cached_property
    def _offsets(self) -> Mapping[IndexValue, slice]:
        result, start = {}, 0

        for value, dim in self.sectors:
            result[value] = slice(start, start + dim)
            start += dim

        return result

    def slice(self, value: IndexValue) -> slice:
        """Диапазон базисных векторов сектора."""

        try:
            return self._offsets[value]

        except KeyError:
            raise SpaceMismatch(f"Система {self.label} не содержит сектор {value}")

    def check_one_dim(self, one_dim: Iterable[IndexValue]) -> None:
        for x in one_dim:
            if self.dims.get(x, 1) != 1:
                raise SpaceMismatch(f"Одномерный сектор {x} системы {self.label} имеет размерность {self.dims[x]}")

    def as_plain(self) -> SectoredSpace:
        return SectoredSpace.plain(self.label, self.total_dim)

    def relabel(self, label: str) -> SectoredSpace:
        return dc.replace(self, label=label)

    def to_json(self) -> dict[str, Any]:
        return {"label": self.label, "sectors": [[str(x), d] for x, d in self.sectors]}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        return cls(data["label"], tuple((parse_value(x), int(d)) for x, d in data["sectors"]))


def _canonical_order(systems: Sequence[SectoredSpace]) -> list[int]:
    labels = [x.label for x in systems]

    if len(set(labels)) != len(labels):
        raise SpaceMismatch(f"Повторяющиеся системы: {labels}")

    return sorted(range(len(labels)), key=lambda i: natural_key(labels[i]))


@dc.dataclass(frozen=True, eq=False)
class ChoiTensor:
    """Вектор Чоя: плотный комплексный массив по упорядоченным системам"""

    systems: tuple[SectoredSpace, ...]
    """Системы в каноническом порядке меток"""
    amplitudes: np.ndarray
    """Амплитуды формы `total_dim` систем"""

    def __post_init__(self) -> None:
        if _canonical_order(self.systems) != list(range(len(self.systems))):
            raise SpaceMismatch("Системы не в каноническом порядке")

        shape = tuple(x.total_dim for x in self.systems)

        if self.amplitudes.shape != shape:
            raise ShapeMismatch(f"Форма {self.amplitudes.shape} не совпадает с {shape}")

    @classmethod
    def of(cls, systems: Iterable[SectoredSpace], amplitudes: np.ndarray) -> Self:
        """Создает тензор, приводя системы к каноническому порядку."""

        systems = tuple(systems)
        amplitudes = np.asarray(amplitudes, dtype=complex)
        shape = tuple(x.total_dim for x in systems)

        if amplitudes.size != prod(shape):
            raise ShapeMismatch(f"Размер {amplitudes.size} не совпадает с {shape}")

        order = _canonical_order(systems)
        amplitudes = amplitudes.reshape(shape).transpose(order)

        return cls(tuple(systems[i] for i in order), np.ascontiguousarray(amplitudes))

    @classmethod
    def scalar(cls, value: complex = 1) -> Self:
        return cls((), np.asarray(value, dtype=complex))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(x.label for x in self.systems)

    def space(self, label: str) -> SectoredSpace:
        for x in self.systems:
            if x.label == label:
                return x

        raise SpaceMismatch(f"Тензор не содержит систему {label}")

    def transposed(self, labels: Sequence[str]) -> np.ndarray:
        """Амплитуды в заданном порядке систем."""

        if sorted(labels) != sorted(self.labels):
            raise SpaceMismatch(f"Системы {list(labels)} не совпадают с {list(self.labels)}")

        return self.amplitudes.transpose([self.labels.index(x) for x in labels])

    def relabel(self, mapping: Mapping[str, str]) -> ChoiTensor:
        return ChoiTensor.of(
            (x.relabel(mapping.get(x.label, x.label)) for x in self.systems),
            self.amplitudes,
        )

    def as_plain(self) -> ChoiTensor:
        """Тот же тензор без секторной структуры систем."""

        return ChoiTensor(tuple(x.as_plain() for x in self.systems), self.amplitudes)

    def norm2(self) -> float:
        """Квадрат нормы `⟨⟨V|V⟩⟩`."""

        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def __add__(self, other: ChoiTensor) -> ChoiTensor:
        if self.systems != other.systems:
            raise SpaceMismatch("Сложение тензоров на разных системах")

        return ChoiTensor(self.systems, self.amplitudes + other.amplitudes)

    def __mul__(self, factor: complex) -> ChoiTensor:
        return ChoiTensor(self.systems, self.amplitudes * factor)

    __rmul__ = __mul__

    def to_json(self) -> dict[str, Any]:
        return {
            "systems": [x.to_json() for x in self.systems],
            "amplitudes": complex_to_pairs(self.amplitudes),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        systems = [SectoredSpace.from_json(x) for x in data["systems"]]
        shape = tuple(x.total_dim for x in systems)

        return cls.of(systems, pairs_to_complex(data["amplitudes"], shape))

    def dump(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def load(cls, text: str) -> Self:
        return cls.from_json(json.loads(text))


def _check_shared(a: Sequence[SectoredSpace], b: Sequence[SectoredSpace]) -> list[str]:
    spaces = {x.label: x for x in a}
    shared = []

    for x in b:
        if (y := spaces.get(x.label)) is not None:
            if x != y:
                raise SpaceMismatch(f"Общая система {x.label} имеет разные пространства")

            shared.append(x.label)

    return shared


def link_product(a: ChoiTensor, b: ChoiTensor) -> ChoiTensor:
    """
    Чистое связующее произведение.

    Общие системы свертываются без комплексного сопряжения. Без общих
    систем результат является тензорным произведением.
    """

    shared = _check_shared(a.systems, b.systems)
    ia = [a.labels.index(x) for x in shared]
    ib = [b.labels.index(x) for x in shared]
    amplitudes = np.tensordot(a.amplitudes, b.amplitudes, axes=(ia, ib))
    systems = [x for x in a.systems if x.label not in shared]
    systems += [x for x in b.systems if x.label not in shared]

    return ChoiTensor.of(systems, amplitudes)


def link_all(tensors: Iterable[ChoiTensor]) -> ChoiTensor:
    """Связующее произведение последовательности тензоров слева направо."""

    return functools.reduce(link_product, tensors, ChoiTensor.scalar())


def choi_of_matrix(
    matrix: np.ndarray,
    inputs: Sequence[SectoredSpace],
    outputs: Sequence[SectoredSpace],
) -> ChoiTensor:
    """Вектор Чоя `Σ_i |i⟩ ⊗ M|i⟩` линейного отображения из `inputs` в `outputs`."""

    matrix = np.asarray(matrix, dtype=complex)
    din = prod(x.total_dim for x in inputs)
    dout = prod(x.total_dim for x in outputs)

    if matrix.shape != (dout, din):
        raise ShapeMismatch(f"Матрица {matrix.shape}, ожидалась ({dout}, {din})")

    shape = tuple(x.total_dim for x in (*inputs, *outputs))

    return ChoiTensor.of((*inputs, *outputs), matrix.T.reshape(shape))


def matrix_of_choi(t: ChoiTensor, inputs: Sequence[str], outputs: Sequence[str]) -> np.ndarray:
    """Матрица отображения по вектору Чоя (обратное к `choi_of_matrix`)."""

    try:
        data = t.transposed([*inputs, *outputs])

    except SpaceMismatch as e:
        raise ShapeMismatch(str(e))

    din = prod(t.space(x).total_dim for x in inputs)
    dout = prod(t.space(x).total_dim for x in outputs)

    return data.reshape(din, dout).T


def max_deviation(a: ChoiTensor, b: ChoiTensor) -> float:
    """Максимальное поэлементное отклонение тензоров на одинаковых системах."""

    if a.labels != b.labels or a.amplitudes.shape != b.amplitudes.shape:
        raise SpaceMismatch(f"Системы {a.labels} и {b.labels} не совпадают")

    if not a.amplitudes.size:
        return 0.0

    return float(np.abs(a.amplitudes - b.amplitudes).max())


@dc.dataclass(frozen=True)
class RoutedMapCheck:
    """Маршрут отображения и системы, соответствующие его портам"""

    route: Relation
    """Маршрут"""
    in_systems: tuple[SectoredSpace, ...]
    """Входные системы в порядке входных портов маршрута"""
    out_systems: tuple[SectoredSpace, ...]
    """Выходные системы в порядке выходных портов маршрута"""

    def __post_init__(self) -> None:
        for ports, systems in ((self.route.inputs, self.in_systems), (self.route.outputs, self.out_systems)):
            if len(ports) != len(systems):
                raise InvalidRelation("Число систем не совпадает с числом портов маршрута")

            for p, s in zip(ports, systems):
                if p.alphabet != frozenset(s.values):
                    raise InvalidRelation(f"Алфавит {p.id} не совпадает с секторами {s.label}")

    @property
    def systems(self) -> tuple[SectoredSpace, ...]:
        return self.in_systems + self.out_systems

    def mask(self) -> np.ndarray:
        """Допустимые маршрутом элементы по системам `systems`."""

        systems = self.systems
        result = np.zeros(tuple(x.total_dim for x in systems), dtype=bool)

        for k, l in self.route.pairs:
            result[tuple(s.slice(v) for s, v in zip(systems, (*k, *l)))] = True

        return result


def _route_view(t: ChoiTensor, chk: RoutedMapCheck) -> np.ndarray:
    labels = [x.label for x in chk.systems]

    for x in chk.systems:
        if t.space(x.label) != x:
            raise SpaceMismatch(f"Система {x.label} тензора не совпадает с маршрутом")

    rest = [x for x in t.labels if x not in labels]

    return t.transposed([*labels, *rest])


def follows_route(t: ChoiTensor, chk: RoutedMapCheck, atol: float | None = None) -> bool:
    """Все блоки между несвязанными маршрутом секторами нулевые."""

    atol = resolve_atol(atol)
    data = _route_view(t, chk)
    mask = chk.mask()
    mask = mask.reshape(mask.shape + (1,) * (data.ndim - mask.ndim))
    forbidden = np.where(mask, 0, np.abs(data))

    return not forbidden.size or float(forbidden.max()) <= atol


def route_violations(
    t: ChoiTensor, chk: RoutedMapCheck, atol: float | None = None
) -> list[tuple[IndexTuple, IndexTuple]]:
    """Пары секторов вне маршрута с ненулевым блоком."""

    atol = resolve_atol(atol)
    data = _route_view(t, chk)
    n_in = len(chk.in_systems)
    result = []

    for key in it.product(*(x.values for x in chk.systems)):
        k, l = key[:n_in], key[n_in:]

        if (k, l) in chk.route.pairs:
            continue

        block = data[tuple(s.slice(v) for s, v in zip(chk.systems, key))]

        if block.size and np.abs(block).max() > atol:
            result.append((k, l))

    return sorted(result, key=lambda x: (tuple_key(x[0]), tuple_key(x[1])))


def sector_projector(systems: Sequence[SectoredSpace], allowed: Iterable[IndexTuple]) -> np.ndarray:
    """Проектор на прямую сумму разрешенных секторов."""

    diag = np.zeros(tuple(x.total_dim for x in systems))

    for key in allowed:
        diag[tuple(s.slice(v) for s, v in zip(systems, key))] = 1

    return np.diag(diag.ravel()).astype(complex)


def _close(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    return float(np.linalg.norm(a - b)) <= atol


def is_isometry(
    t: ChoiTensor,
    inputs: Sequence[str],
    outputs: Sequence[str],
    domain_projector: np.ndarray | None = None,
    atol: float | None = None,
) -> bool:
    """Отображение является изометрией на подпространстве `domain_projector`."""

    atol = resolve_atol(atol)
    m = matrix_of_choi(t, inputs, outputs)
    p = np.eye(m.shape[1]) if domain_projector is None else domain_projector

    if p.shape != (m.shape[1], m.shape[1]):
        raise ShapeMismatch(f"Проектор {p.shape} не совпадает с входом {m.shape[1]}")

    return _close(m.conj().T @ m, p, atol)


def is_unitary(
    t: ChoiTensor,
    inputs: Sequence[str],
    outputs: Sequence[str],
    domain_projector: np.ndarray | None = None,
    codomain_projector: np.ndarray | None = None,
    atol: float | None = None,
) -> bool:
    """Отображение является унитарным между подпространствами."""

    atol = resolve_atol(atol)

    if not is_isometry(t, inputs, outputs, domain_projector, atol):
        return False

    m = matrix_of_choi(t, inputs, outputs)
    q = np.eye(m.shape[0]) if codomain_projector is None else codomain_projector

    if q.shape != (m.shape[0], m.shape[0]):
        raise ShapeMismatch(f"Проектор {q.shape} не совпадает с выходом {m.shape[0]}")

    return _close(m @ m.conj().T, q, atol)


def embed_block(
    systems: Sequence[SectoredSpace],
    key: IndexTuple,
    block: np.ndarray,
) -> np.ndarray:
    """Плотный массив с единственным ненулевым секторным блоком."""

    result = np.zeros(tuple(x.total_dim for x in systems), dtype=complex)
    result[tuple(s.slice(v) for s, v in zip(systems, key))] = block

    return result


@dc.dataclass(frozen=True, eq=False)
class SectorTensor:
    """Тензор Чоя, хранимый по ненулевым секторным блокам"""

    systems: tuple[SectoredSpace, ...]
    """Системы в каноническом порядке меток"""
    blocks: Mapping[IndexTuple, np.ndarray]
    """Блоки по значениям секторов систем"""

    def __post_init__(self) -> None:
        if _canonical_order(self.systems) != list(range(len(self.systems))):
            raise SpaceMismatch("Системы не в каноническом порядке")

        for key, block in self.blocks.items():
            shape = tuple(s.dims.get(v, -1) for s, v in zip(self.systems, key))

            if len(key) != len(self.systems) or block.shape != shape:
                raise ShapeMismatch(f"Блок {key} формы {block.shape}, ожидалась {shape}")

        object.__setattr__(self, "blocks", MappingProxyType(dict(self.blocks)))

    @classmethod
    def of(
        cls,
        systems: Iterable[SectoredSpace],
        blocks: Mapping[IndexTuple, np.ndarray],
    ) -> Self:
        """Создает тензор, приводя системы к каноническому порядку."""

        systems = tuple(systems)
        order = _canonical_order(systems)

        return cls(
            tuple(systems[i] for i in order),
            {
                tuple(k[i] for i in order): np.asarray(v, dtype=complex).transpose(order)
                for k, v in blocks.items()
            },
        )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(x.label for x in self.systems)

    def block(self, key: Mapping[str, IndexValue]) -> np.ndarray:
        """Блок по значениям секторов (нулевой, если не хранится)."""

        k = tuple(key[x] for x in self.labels)

        if (result := self.blocks.get(k)) is not None:
            return result

        return np.zeros(tuple(s.dims[v] for s, v in zip(self.systems, k)), dtype=complex)

    def is_zero(self) -> bool:
        return all(is_zero(x) for x in self.blocks.values())

    def to_dense(self) -> ChoiTensor:
        result = np.zeros(tuple(x.total_dim for x in self.systems), dtype=complex)

        for key, block in self.blocks.items():
            result[tuple(s.slice(v) for s, v in zip(self.systems, key))] += block

        return ChoiTensor(self.systems, result)

    @classmethod
    def from_dense(cls, t: ChoiTensor, atol: float = ZERO_ATOL) -> Self:
        """Секторное представление плотного тензора (нулевые блоки опускаются)."""

        blocks = {}

        for key in it.product(*(x.values for x in t.systems)):
            block = t.amplitudes[tuple(s.slice(v) for s, v in zip(t.systems, key))]

            if block.size and np.abs(block).max() > atol:
                blocks[key] = block.copy()

        return cls(t.systems, blocks)

    def drop_systems(self, values: Mapping[str, IndexValue]) -> SectorTensor:
        """
        Удаляет одномерные системы, оставляя блоки с заданным сектором на них.
        """

        idx = [self.labels.index(x) for x in values]

        for i in idx:
            if self.systems[i].dims.get(values[self.labels[i]]) != 1:
                raise ShapeMismatch(f"Сектор системы {self.labels[i]} не одномерен")

        keep = [i for i in range(len(self.systems)) if i not in idx]
        blocks = {}

        for key, block in self.blocks.items():
            if all(key[i] == values[self.labels[i]] for i in idx):
                shape = tuple(block.shape[i] for i in keep)
                blocks[tuple(key[i] for i in keep)] = block.reshape(shape)

        return SectorTensor(tuple(self.systems[i] for i in keep), blocks)

    def follows(self, check: RoutedMapCheck) -> bool:
        """Ненулевые блоки связывают только секторы, связанные маршрутом."""

        n_in = len(check.in_systems)
        pos = [self.labels.index(x.label) for x in check.systems]

        for key, block in self.blocks.items():
            k = tuple(key[i] for i in pos)

            if (k[:n_in], k[n_in:]) not in check.route.pairs and not is_zero(block):
                return False

        return True

    def link(self, other: SectorTensor) -> SectorTensor:
        """Связующее произведение по согласованным секторам общих систем."""

        shared = _check_shared(self.systems, other.systems)
        ia = [self.labels.index(x) for x in shared]
        ib = [other.labels.index(x) for x in shared]
        ra = [i for i in range(len(self.systems)) if i not in ia]
        rb = [i for i in range(len(other.systems)) if i not in ib]

        index: dict[IndexTuple, list[tuple[IndexTuple, np.ndarray]]] = {}

        for key, block in other.blocks.items():
            index.setdefault(tuple(key[i] for i in ib), []).append((key, block))

        blocks: dict[IndexTuple, np.ndarray] = {}

        for key, block in self.blocks.items():
            for okey, oblock in index.get(tuple(key[i] for i in ia), ()):
                result = np.tensordot(block, oblock, axes=(ia, ib))
                new = tuple(key[i] for i in ra) + tuple(okey[i] for i in rb)

                if (x := blocks.get(new)) is not None:
                    result = x + result

                blocks[new] = result

        systems = [self.systems[i] for i in ra] + [other.systems[i] for i in rb]

        return SectorTensor.of(systems, blocks)

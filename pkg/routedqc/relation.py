"""
Конечные булевы отношения между кортежами значений индексов.

Отношение хранится явно, как множество пар `(входной кортеж, выходной кортеж)`.
Кортежи выровнены по портам (стрелкам), отсортированным в естественном порядке
идентификаторов.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import itertools as it
import logging
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence, Self

from .errors import (
    AlphabetMismatch,
    ArrowCollision,
    InvalidRelation,
    InvalidValue,
    NotBranched,
)
from .utils import natural_key

_LOGGER = logging.getLogger(__name__)

_RESERVED = frozenset(";()")


@dc.dataclass(frozen=True)
class NullValue:
    """Нулевое значение: агент не действует в данной позиции"""

    def __str__(self) -> str:
        return "-"

    @property
    def sort_key(self) -> tuple:
        return (0,)


@dc.dataclass(frozen=True)
class AgentSet:
    """Множество агентов"""

    agents: tuple[int, ...] = ()
    """Номера агентов по возрастанию, без повторов"""

    def __post_init__(self) -> None:
        if any(x < 1 for x in self.agents) or list(self.agents) != sorted(
            set(self.agents)
        ):
            raise InvalidValue(f"Некорректное множество агентов: {self.agents}")

    @classmethod
    def of(cls, agents: Iterable[int]) -> Self:
        return cls(tuple(sorted(set(agents))))

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.agents)) + "}"

    def __contains__(self, agent: object) -> bool:
        return agent in self.agents

    @property
    def sort_key(self) -> tuple:
        return (1, len(self.agents), self.agents)

    @property
    def members(self) -> frozenset[int]:
        return frozenset(self.agents)

    @property
    def size(self) -> int:
        return len(self.agents)

    def add(self, agent: int) -> AgentSet:
        return AgentSet.of((*self.agents, agent))

    def remove(self, agent: int) -> AgentSet:
        return AgentSet(tuple(x for x in self.agents if x != agent))


@dc.dataclass(frozen=True)
class Atom:
    """Непрозрачная метка"""

    name: str
    """Имя метки"""

    def __post_init__(self) -> None:
        if not self.name or _RESERVED & set(self.name):
            raise InvalidValue(f"Некорректная метка: {self.name!r}")

    def __str__(self) -> str:
        return f"@{self.name}"

    @property
    def sort_key(self) -> tuple:
        return (2, self.name)


@dc.dataclass(frozen=True)
class Composite:
    """Упорядоченный набор значений (вспомогательные и объединенные стрелки)"""

    parts: tuple[IndexValue, ...]
    """Составляющие значения"""

    def __str__(self) -> str:
        return "(" + ";".join(map(str, self.parts)) + ")"

    @property
    def sort_key(self) -> tuple:
        return (3, tuple(x.sort_key for x in self.parts))


type IndexValue = NullValue | AgentSet | Atom | Composite
type IndexTuple = tuple[IndexValue, ...]

NULL = NullValue()
"""Нулевое значение"""

PLAIN = Atom("*")
"""Единственный сектор несекторизованной системы"""


def _split_top(body: str) -> list[str]:
    parts, depth, start = [], 0, 0

    for idx, sym in enumerate(body):
        if sym in "({":
            depth += 1

        elif sym in ")}":
            depth -= 1

        elif sym == ";" and depth == 0:
            parts.append(body[start:idx])
            start = idx + 1

    parts.append(body[start:])

    return parts


def parse_value(text: str) -> IndexValue:
    """Разбирает строковое представление значения индекса."""

    match text := text.strip():
        case "-":
            return NULL

        case _ if text.startswith("{") and text.endswith("}"):
            if not (body := text[1:-1].strip()):
                return AgentSet()

            try:
                return AgentSet(tuple(int(x) for x in body.split(",")))

            except ValueError:
                raise InvalidValue(f"Некорректное множество агентов: {text!r}")

        case _ if text.startswith("@"):
            return Atom(text[1:])

        case _ if text.startswith("(") and text.endswith(")"):
            if not (body := text[1:-1]):
                return Composite(())

            return Composite(tuple(parse_value(x) for x in _split_top(body)))

    raise InvalidValue(f"Некорректное значение индекса: {text!r}")


def value_key(value: IndexValue) -> tuple:
    return value.sort_key


def tuple_key(values: IndexTuple) -> tuple:
    return tuple(x.sort_key for x in values)


def sorted_values(values: Iterable[IndexValue]) -> list[IndexValue]:
    return sorted(values, key=value_key)


def format_tuple(values: IndexTuple) -> str:
    """Каноническая строка кортежа значений."""

    return "[" + "|".join(map(str, values)) + "]"


def branch_atom(label: str) -> Atom:
    """Значение-метка ветви для выхода расширенного отношения."""

    return Atom(label.translate(str.maketrans("();", "<>,")))


@dc.dataclass(frozen=True)
class Port:
    """Вход или выход отношения"""

    id: str
    """Идентификатор стрелки"""
    alphabet: frozenset[IndexValue]
    """Допустимые значения индекса"""

    @property
    def values(self) -> list[IndexValue]:
        return sorted_values(self.alphabet)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "alphabet": [str(x) for x in self.values]}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        return cls(data["id"], frozenset(parse_value(x) for x in data["alphabet"]))


@dc.dataclass(frozen=True)
class Branch:
    """Ветвь разветвленного отношения"""

    label: str
    """Каноническая метка"""
    inputs: frozenset[IndexTuple]
    """Входные кортежи ветви"""
    outputs: frozenset[IndexTuple]
    """Выходные кортежи ветви"""

    @property
    def trivial(self) -> bool:
        """Выбор выходного значения внутри ветви отсутствует."""

        return len(self.outputs) == 1

    @property
    def choices(self) -> list[IndexTuple]:
        return sorted(self.outputs, key=tuple_key)


def _sorted_ports(ports: Iterable[Port]) -> list[Port]:
    return sorted(ports, key=lambda x: natural_key(x.id))


@dc.dataclass(frozen=True)
class Relation:
    """Отношение между входными и выходными кортежами значений"""

    inputs: tuple[Port, ...]
    """Входные порты в каноническом порядке"""
    outputs: tuple[Port, ...]
    """Выходные порты в каноническом порядке"""
    pairs: frozenset[tuple[IndexTuple, IndexTuple]]
    """Связанные пары кортежей"""
    labels: Mapping[IndexTuple, str] = dc.field(
        default_factory=dict, compare=False, repr=False
    )
    """Семантические метки ветвей по входным кортежам"""

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", MappingProxyType(dict(self.labels)))

        in_ids, out_ids = self.in_ids, self.out_ids

        if len(set(in_ids)) != len(in_ids) or len(set(out_ids)) != len(out_ids):
            raise ArrowCollision(f"Повторяющиеся порты: {in_ids} -> {out_ids}")

        if common := set(in_ids) & set(out_ids):
            raise ArrowCollision(f"Порты одновременно вход и выход: {sorted(common)}")

        for ports in (self.inputs, self.outputs):
            if list(ports) != _sorted_ports(ports):
                raise InvalidRelation("Порты не в каноническом порядке")

        for k, l in self.pairs:
            if len(k) != len(in_ids) or len(l) != len(out_ids):
                raise InvalidRelation(f"Длина кортежа не совпадает с портами: {k} -> {l}")

            for port, value in zip((*self.inputs, *self.outputs), (*k, *l)):
                if value not in port.alphabet:
                    raise InvalidRelation(f"Значение {value} вне алфавита {port.id}")

    @classmethod
    def of(
        cls,
        inputs: Iterable[Port],
        outputs: Iterable[Port],
        pairs: Iterable[tuple[Sequence[IndexValue], Sequence[IndexValue]]],
        labels: Mapping[IndexTuple, str] | None = None,
    ) -> Self:
        """
        Создает отношение, приводя порты к каноническому порядку.

        Кортежи пар и ключи меток заданы в порядке переданных портов.
        """

        inputs, outputs = tuple(inputs), tuple(outputs)
        ins, outs = _sorted_ports(inputs), _sorted_ports(outputs)
        pin = [inputs.index(x) for x in ins]
        pout = [outputs.index(x) for x in outs]

        def _in(k: Sequence[IndexValue]) -> IndexTuple:
            return tuple(k[i] for i in pin)

        return cls(
            tuple(ins),
            tuple(outs),
            frozenset((_in(k), tuple(l[i] for i in pout)) for k, l in pairs),
            {_in(k): v for k, v in (labels or {}).items()},
        )

    @property
    def in_ids(self) -> tuple[str, ...]:
        return tuple(x.id for x in self.inputs)

    @property
    def out_ids(self) -> tuple[str, ...]:
        return tuple(x.id for x in self.outputs)

    @functools.cached_property
    def _images(self) -> Mapping[IndexTuple, frozenset[IndexTuple]]:
        images: dict[IndexTuple, set[IndexTuple]] = {}

        for k, l in self.pairs:
            images.setdefault(k, set()).add(l)

        return {k: frozenset(v) for k, v in images.items()}

    @functools.cached_property
    def _preimages(self) -> Mapping[IndexTuple, frozenset[IndexTuple]]:
        images: dict[IndexTuple, set[IndexTuple]] = {}

        for k, l in self.pairs:
            images.setdefault(l, set()).add(k)

        return {k: frozenset(v) for k, v in images.items()}

    @property
    def practical_domain(self) -> frozenset[IndexTuple]:
        """Практическая область определения."""

        return frozenset(self._images)

    @property
    def practical_codomain(self) -> frozenset[IndexTuple]:
        """Практическая область значений."""

        return frozenset(self._preimages)

    def image(self, k: IndexTuple) -> frozenset[IndexTuple]:
        return self._images.get(k, frozenset())

    def preimage(self, l: IndexTuple) -> frozenset[IndexTuple]:
        return self._preimages.get(l, frozenset())

    @functools.cached_property
    def is_branched(self) -> bool:
        """Образы любых двух входов совпадают или не пересекаются."""

        images = set(self._images.values())

        return sum(map(len, images)) == len(frozenset().union(*images))

    @functools.cached_property
    def branches(self) -> tuple[Branch, ...]:
        """Разбиение практических (ко)областей на ветви."""

        if not self.is_branched:
            raise NotBranched("Отношение не является разветвленным")

        groups: dict[frozenset[IndexTuple], list[IndexTuple]] = {}

        for k, image in self._images.items():
            groups.setdefault(image, []).append(k)

        result = []

        for image, inputs in groups.items():
            first = min(inputs, key=tuple_key)
            label = self.labels.get(first) or format_tuple(first)
            result.append(Branch(label, frozenset(inputs), image))

        if len({x.label for x in result}) != len(result):
            raise InvalidRelation("Метки ветвей не уникальны")

        return tuple(sorted(result, key=lambda x: natural_key(x.label)))

    @functools.cached_property
    def _branch_index(self) -> Mapping[IndexTuple, Branch]:
        return {k: br for br in self.branches for k in br.inputs}

    def branch_of(self, k: IndexTuple) -> Branch:
        """Возвращает ветвь, содержащую входной кортеж."""

        return self._branch_index[k]

    def branch(self, label: str) -> Branch:
        for br in self.branches:
            if br.label == label:
                return br

        raise KeyError(label)

    def converse(self) -> Relation:
        """Обратное отношение. Метки ветвей сохраняются."""

        labels = {}

        if self.is_branched:
            labels = {l: br.label for br in self.branches for l in br.outputs}

        return Relation(
            self.outputs,
            self.inputs,
            frozenset((l, k) for k, l in self.pairs),
            labels,
        )

    def augment(self, tag: str = "") -> AugmentedRelation:
        """Расширенное отношение: выбор выхода внутри ветви задается извне."""

        return augment(self, tag)

    def without_arrows(self, ids: Iterable[str]) -> Relation:
        """Удаляет порты, оставляя только пары с нулевым значением на них."""

        ids = frozenset(ids)
        kin = [i for i, x in enumerate(self.inputs) if x.id not in ids]
        kout = [i for i, x in enumerate(self.outputs) if x.id not in ids]
        din = [i for i, x in enumerate(self.inputs) if x.id in ids]
        dout = [i for i, x in enumerate(self.outputs) if x.id in ids]

        pairs, labels = set(), {}

        for k, l in self.pairs:
            if any(k[i] != NULL for i in din) or any(l[i] != NULL for i in dout):
                continue

            kk = tuple(k[i] for i in kin)
            pairs.add((kk, tuple(l[i] for i in kout)))

            if label := self._label_of(k):
                labels.setdefault(kk, label)

        return Relation(
            tuple(self.inputs[i] for i in kin),
            tuple(self.outputs[i] for i in kout),
            frozenset(pairs),
            labels,
        )

    def _label_of(self, k: IndexTuple) -> str | None:
        if not self.labels:
            return None

        return self.branch_of(k).label if self.is_branched else self.labels.get(k)

    def rename(
        self,
        ports: Mapping[str, str],
        values: Mapping[str, Mapping[IndexValue, IndexValue]] | None = None,
    ) -> Relation:
        """
        Переименовывает порты и значения.

        Параметры:
        - `ports`: новые идентификаторы портов (отсутствующие не меняются).
        - `values`: отображения значений по старым идентификаторам портов.
        """

        values = values or {}

        def _port(p: Port) -> Port:
            vmap = values.get(p.id, {})
            return Port(ports.get(p.id, p.id), frozenset(vmap.get(x, x) for x in p.alphabet))

        def _tuple(t: IndexTuple, side: tuple[Port, ...]) -> IndexTuple:
            return tuple(values.get(p.id, {}).get(x, x) for p, x in zip(side, t))

        return Relation.of(
            map(_port, self.inputs),
            map(_port, self.outputs),
            ((_tuple(k, self.inputs), _tuple(l, self.outputs)) for k, l in self.pairs),
            {_tuple(k, self.inputs): v for k, v in self.labels.items()},
        )

    def with_constant(self, port: Port, *, output: bool) -> Relation:
        """Добавляет порт с единственным значением."""

        if len(port.alphabet) != 1:
            raise InvalidRelation(f"Порт {port.id} должен иметь одно значение")

        (value,) = port.alphabet

        if output:
            pairs = ((k, (*l, value)) for k, l in self.pairs)
            return Relation.of(self.inputs, (*self.outputs, port), pairs, self.labels)

        pairs = (((*k, value), l) for k, l in self.pairs)
        labels = {(*k, value): v for k, v in self.labels.items()}

        return Relation.of((*self.inputs, port), self.outputs, pairs, labels)

    def to_json(self) -> dict[str, Any]:
        """Сериализует отношение в JSON-совместимый словарь."""

        def _strs(t: IndexTuple) -> list[str]:
            return [str(x) for x in t]

        pairs = sorted(self.pairs, key=lambda x: (tuple_key(x[0]), tuple_key(x[1])))
        result: dict[str, Any] = {
            "inputs": [x.to_json() for x in self.inputs],
            "outputs": [x.to_json() for x in self.outputs],
            "pairs": [[_strs(k), _strs(l)] for k, l in pairs],
        }

        if self.labels:
            labels = sorted(self.labels.items(), key=lambda x: tuple_key(x[0]))
            result["labels"] = [[_strs(k), v] for k, v in labels]

        return result

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        def _values(xs: Iterable[str]) -> IndexTuple:
            return tuple(parse_value(x) for x in xs)

        return cls.of(
            [Port.from_json(x) for x in data["inputs"]],
            [Port.from_json(x) for x in data["outputs"]],
            [(_values(k), _values(l)) for k, l in data["pairs"]],
            {_values(k): v for k, v in data.get("labels", [])},
        )


@dc.dataclass(frozen=True)
class AugmentedRelation:
    """Расширенное отношение: частичная функция выбора выхода ветви"""

    base: Relation
    """Исходное отношение"""
    aux_inputs: tuple[Port, ...]
    """Вспомогательные входы, по одному на ветвь"""
    branch_output: Port
    """Выход с меткой реализованной ветви"""
    relation: Relation
    """Отношение над расширенными портами"""

    @property
    def trivial_inputs(self) -> tuple[Port, ...]:
        """Вспомогательные входы без выбора (одно значение)."""

        return tuple(x for x in self.aux_inputs if len(x.alphabet) == 1)

    @property
    def is_partial_function(self) -> bool:
        return all(len(self.relation.image(k)) == 1 for k in self.relation.practical_domain)


def aux_port_id(tag: str, label: str) -> str:
    return f"bif:{tag}:{label}"


def branch_port_id(tag: str) -> str:
    return f"branch:{tag}"


def augment(r: Relation, tag: str = "") -> AugmentedRelation:
    """
    Строит расширенное отношение.

    На входе `(k, (l^β)_β)` с `k` из ветви `β̄` выдает `(l^β̄, β̄)`.
    Входы вне практической области ни с чем не связаны.
    """

    branches = r.branches
    atoms = [branch_atom(x.label) for x in branches]

    if len(set(atoms)) != len(atoms):
        raise InvalidRelation("Метки ветвей неразличимы после кодирования")

    aux = tuple(
        Port(aux_port_id(tag, br.label), frozenset(Composite(l) for l in br.outputs))
        for br in branches
    )
    out = Port(branch_port_id(tag), frozenset(atoms))
    choices = [[Composite(l) for l in br.choices] for br in branches]

    pairs = []

    for idx, br in enumerate(branches):
        for vector in it.product(*choices):
            for k in br.inputs:
                pairs.append(((*k, *vector), (*vector[idx].parts, atoms[idx])))

    relation = Relation.of(
        (*r.inputs, *aux),
        (*r.outputs, out),
        pairs,
    )

    _LOGGER.debug(
        "Расширенное отношение %r: %d ветвей, %d пар", tag, len(branches), len(pairs)
    )

    return AugmentedRelation(r, tuple(_sorted_ports(aux)), out, relation)


@dc.dataclass(frozen=True)
class Assignments:
    """Глобально согласованные назначения значений стрелкам"""

    arrows: tuple[str, ...]
    """Идентификаторы стрелок в каноническом порядке"""
    rows: tuple[IndexTuple, ...]
    """Назначения, выровненные по `arrows`"""

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @functools.cached_property
    def position(self) -> Mapping[str, int]:
        return {x: i for i, x in enumerate(self.arrows)}

    def project(self, row: IndexTuple, ids: Iterable[str]) -> IndexTuple:
        """Значения назначения на заданных стрелках."""

        return tuple(row[self.position[x]] for x in ids)


type _Table = tuple[tuple[str, ...], list[IndexTuple]]


def _index(
    variables: Sequence[str], table: _Table
) -> tuple[list[str], list[int], dict[IndexTuple, list[IndexTuple]]]:
    names, rows = table
    shared = [x for x in names if x in variables]
    key_pos = [names.index(x) for x in shared]
    rest_pos = [i for i, x in enumerate(names) if x not in variables]
    index: dict[IndexTuple, list[IndexTuple]] = {}

    for row in rows:
        key = tuple(row[i] for i in key_pos)
        index.setdefault(key, []).append(tuple(row[i] for i in rest_pos))

    return shared, rest_pos, index


def join_assignments(relations: Sequence[Relation]) -> Assignments:
    """
    Находит все назначения значений, при которых выполнены все отношения.

    Реляционное соединение с жадным выбором следующего отношения по размеру
    результата. Декартово произведение алфавитов не строится.
    """

    tables: list[_Table] = [
        (r.in_ids + r.out_ids, [k + l for k, l in r.pairs]) for r in relations
    ]

    variables: list[str] = []
    rows: list[IndexTuple] = [()]
    remaining = list(range(len(tables)))

    while remaining:
        best = None

        for idx in remaining:
            shared, rest_pos, index = _index(variables, tables[idx])
            pos = [variables.index(x) for x in shared]
            size = sum(len(index.get(tuple(r[i] for i in pos), ())) for r in rows)

            if best is None or size < best[0]:
                best = size, idx, pos, rest_pos, index

        assert best
        size, idx, pos, rest_pos, index = best
        names = tables[idx][0]

        rows = [
            row + ext
            for row in rows
            for ext in index.get(tuple(row[i] for i in pos), ())
        ]
        variables += [names[i] for i in rest_pos]
        remaining.remove(idx)

        _LOGGER.debug("Соединение: %d строк после %d отношений", size, len(tables) - len(remaining))

    arrows = tuple(sorted(variables, key=natural_key))
    perm = [variables.index(x) for x in arrows]
    result = sorted((tuple(r[i] for i in perm) for r in rows), key=tuple_key)

    return Assignments(arrows, tuple(result))


def compose(relations: Sequence[Relation], shared: Iterable[str]) -> Relation:
    """
    Многочленная композиция отношений (булев частичный след).

    Пара `(in', out')` связана, если существует назначение общих стрелок,
    при котором выполнены все отношения.
    """

    shared = frozenset(shared)
    producers: dict[str, Port] = {}
    consumers: dict[str, Port] = {}
    free: list[str] = []

    for r in relations:
        for ports, registry in ((r.outputs, producers), (r.inputs, consumers)):
            for port in ports:
                if port.id not in shared:
                    free.append(port.id)

                elif port.id in registry:
                    raise ArrowCollision(f"Общая стрелка {port.id} встречается дважды")

                else:
                    registry[port.id] = port

    for x in sorted(shared, key=natural_key):
        if x not in producers or x not in consumers:
            raise ArrowCollision(f"Общая стрелка {x} должна соединять выход и вход")

        if producers[x].alphabet != consumers[x].alphabet:
            raise AlphabetMismatch(f"Алфавиты стрелки {x} не совпадают")

    if len(set(free)) != len(free):
        dup = sorted({x for x in free if free.count(x) > 1})
        raise ArrowCollision(f"Повторяющиеся необщие стрелки: {dup}")

    inputs = [p for r in relations for p in r.inputs if p.id not in shared]
    outputs = [p for r in relations for p in r.outputs if p.id not in shared]
    joined = join_assignments(relations)

    pairs = {
        (
            joined.project(row, (x.id for x in inputs)),
            joined.project(row, (x.id for x in outputs)),
        )
        for row in joined
    }

    return Relation.of(inputs, outputs, pairs)


def identity(port_in: Port, port_out: Port) -> Relation:
    """Тождественное отношение между двумя портами с одинаковым алфавитом."""

    if port_in.alphabet != port_out.alphabet:
        raise AlphabetMismatch(f"Алфавиты {port_in.id} и {port_out.id} не совпадают")

    return Relation.of([port_in], [port_out], (((x,), (x,)) for x in port_in.alphabet))

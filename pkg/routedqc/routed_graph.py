"""
Маршрутизированные графы, сопряженный граф, функция выбора и (би)однозначность.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import itertools as it
import json
import logging
import operator
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping, Self

import networkx as nx
import numpy as np
from networkx.algorithms import isomorphism as iso

from .errors import (
    InvalidGraph,
    NontrivialOpenArrow,
    NotBranched,
    NotUnivocal,
    OutOfDomain,
)
from .relation import (
    Assignments,
    IndexTuple,
    IndexValue,
    Port,
    Relation,
    compose,
    join_assignments,
    parse_value,
    sorted_values,
)
from .utils import natural_key, natural_sorted

_LOGGER = logging.getLogger(__name__)

OPEN = "OPEN"
"""Обозначение открытого конца стрелки в JSON"""


@dc.dataclass(frozen=True)
class Arrow:
    """Индексированная стрелка"""

    id: str
    """Идентификатор"""
    source: str | None
    """Узел-источник (`None` для открытого входа)"""
    target: str | None
    """Узел-приемник (`None` для открытого выхода)"""
    alphabet: frozenset[IndexValue]
    """Значения индекса"""
    one_dim: frozenset[IndexValue] = frozenset()
    """Одномерные значения"""

    @property
    def port(self) -> Port:
        return Port(self.id, self.alphabet)

    @property
    def is_open(self) -> bool:
        return self.source is None or self.target is None

    def reversed(self) -> Arrow:
        return dc.replace(self, source=self.target, target=self.source)

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "from": OPEN if self.source is None else self.source,
            "to": OPEN if self.target is None else self.target,
            "alphabet": [str(x) for x in sorted_values(self.alphabet)],
            "one_dim": [str(x) for x in sorted_values(self.one_dim)],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        def _end(x: str) -> str | None:
            return None if x == OPEN else x

        return cls(
            data["id"],
            _end(data["from"]),
            _end(data["to"]),
            frozenset(parse_value(x) for x in data["alphabet"]),
            frozenset(parse_value(x) for x in data.get("one_dim", [])),
        )


@dc.dataclass(frozen=True)
class RoutedGraph:
    """Маршрутизированный граф: индексированный граф и маршруты узлов"""

    nodes: tuple[str, ...]
    """Узлы в каноническом порядке"""
    arrows: tuple[Arrow, ...]
    """Стрелки в каноническом порядке"""
    routes: Mapping[str, Relation]
    """Маршрут каждого узла (от входящих стрелок к исходящим)"""

    def __post_init__(self) -> None:
        object.__setattr__(self, "routes", MappingProxyType(dict(self.routes)))

        if list(self.nodes) != natural_sorted(set(self.nodes)):
            raise InvalidGraph("Узлы должны быть уникальны и упорядочены")

        ids = [x.id for x in self.arrows]

        if ids != natural_sorted(set(ids)):
            raise InvalidGraph("Стрелки должны быть уникальны и упорядочены")

        nodes = set(self.nodes)

        for a in self.arrows:
            if a.source is None and a.target is None:
                raise InvalidGraph(f"Стрелка {a.id} открыта с обоих концов")

            if {a.source, a.target} - {None} - nodes:
                raise InvalidGraph(f"Стрелка {a.id} ссылается на неизвестный узел")

            if not a.one_dim <= a.alphabet:
                raise InvalidGraph(f"Одномерные значения {a.id} вне алфавита")

        if set(self.routes) != nodes:
            raise InvalidGraph("Маршруты должны быть заданы ровно для всех узлов")

        for node, route in self.routes.items():
            ins = tuple(x.port for x in self.in_arrows(node))
            outs = tuple(x.port for x in self.out_arrows(node))

            if route.inputs != ins or route.outputs != outs:
                raise InvalidGraph(f"Маршрут узла {node} не совпадает с его стрелками")

    @classmethod
    def build(
        cls,
        nodes: Iterable[str],
        arrows: Iterable[Arrow],
        routes: Mapping[str, Relation],
    ) -> Self:
        """Создает граф, упорядочивая узлы и стрелки."""

        return cls(
            tuple(natural_sorted(nodes)),
            tuple(sorted(arrows, key=lambda x: natural_key(x.id))),
            routes,
        )

    @functools.cached_property
    def _arrows(self) -> Mapping[str, Arrow]:
        return {x.id: x for x in self.arrows}

    def arrow(self, id: str) -> Arrow:
        return self._arrows[id]

    def in_arrows(self, node: str) -> tuple[Arrow, ...]:
        return tuple(x for x in self.arrows if x.target == node)

    def out_arrows(self, node: str) -> tuple[Arrow, ...]:
        return tuple(x for x in self.arrows if x.source == node)

    def arrows_between(self, source: str, target: str) -> tuple[Arrow, ...]:
        return tuple(x for x in self.arrows if x.source == source and x.target == target)

    @property
    def open_arrows(self) -> tuple[Arrow, ...]:
        return tuple(x for x in self.arrows if x.is_open)

    @property
    def internal_arrows(self) -> tuple[Arrow, ...]:
        return tuple(x for x in self.arrows if not x.is_open)

    @property
    def one_dim(self) -> Mapping[str, frozenset[IndexValue]]:
        return {x.id: x.one_dim for x in self.arrows}

    def route(self, node: str) -> Relation:
        return self.routes[node]

    def branches(self, node: str):
        """Ветви маршрута узла."""

        try:
            return self.routes[node].branches

        except NotBranched:
            raise NotBranched(f"Маршрут узла {node} не разветвлен")

    @functools.cached_property
    def assignments(self) -> Assignments:
        """Все глобально согласованные назначения значений стрелкам."""

        result = join_assignments([self.routes[x] for x in self.nodes])
        _LOGGER.debug("Согласованных назначений: %d", len(result))

        return result

    def branch_at(self, node: str, row: IndexTuple) -> str:
        """Метка ветви узла, реализуемой назначением."""

        route = self.routes[node]
        return route.branch_of(self.assignments.project(row, route.in_ids)).label

    @functools.cached_property
    def adjoint(self) -> RoutedGraph:
        """Сопряженный граф: стрелки обращены, маршруты заменены обратными."""

        return RoutedGraph(
            self.nodes,
            tuple(x.reversed() for x in self.arrows),
            {k: v.converse() for k, v in self.routes.items()},
        )

    def to_json(self) -> dict[str, Any]:
        """Сериализует граф в JSON-совместимый словарь."""

        routes, labels = {}, {}

        for node in self.nodes:
            data = self.routes[node].to_json()
            routes[node] = data["pairs"]

            if "labels" in data:
                labels[node] = data["labels"]

        result: dict[str, Any] = {
            "nodes": list(self.nodes),
            "arrows": [x.to_json() for x in self.arrows],
            "routes": routes,
        }

        if labels:
            result["labels"] = labels

        return result

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        try:
            arrows = [Arrow.from_json(x) for x in data["arrows"]]
            nodes = list(data["nodes"])
            ports = {x.id: x.port for x in arrows}
            routes = {}

            for node in nodes:
                routes[node] = Relation.from_json(
                    {
                        "inputs": [ports[x.id].to_json() for x in arrows if x.target == node],
                        "outputs": [ports[x.id].to_json() for x in arrows if x.source == node],
                        "pairs": data["routes"][node],
                        "labels": data.get("labels", {}).get(node, []),
                    }
                )

        except (KeyError, TypeError) as e:
            raise InvalidGraph(f"Некорректное описание графа: {e}")

        return cls.build(nodes, arrows, routes)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)

    @classmethod
    def loads(cls, text: str) -> Self:
        try:
            return cls.from_json(json.loads(text))

        except json.JSONDecodeError as e:
            raise InvalidGraph(f"Некорректный JSON: {e}")


def adjoint(g: RoutedGraph) -> RoutedGraph:
    """Возвращает сопряженный граф."""

    return g.adjoint


def check_routable(g: RoutedGraph) -> None:
    """Проверяет предусловия функции выбора: ветвление и тривиальные открытые стрелки."""

    for node in g.nodes:
        g.branches(node)

    for a in g.open_arrows:
        if len(a.alphabet) != 1:
            raise NontrivialOpenArrow(f"Открытая стрелка {a.id} имеет несколько значений")


def choice_relation(g: RoutedGraph) -> Relation:
    """
    Отношение выбора: композиция расширенных маршрутов по всем внутренним стрелкам.

    Входы: выборы внутри ветвей, выходы: реализованные ветви узлов.
    Значения открытых стрелок опускаются.
    """

    check_routable(g)

    augmented = [g.routes[x].augment(x).relation for x in g.nodes]
    joined = compose(augmented, (x.id for x in g.internal_arrows))
    open_ids = {x.id for x in g.open_arrows}

    ins = [i for i, x in enumerate(joined.inputs) if x.id not in open_ids]
    outs = [i for i, x in enumerate(joined.outputs) if x.id not in open_ids]

    return Relation(
        tuple(joined.inputs[i] for i in ins),
        tuple(joined.outputs[i] for i in outs),
        frozenset(
            (tuple(k[i] for i in ins), tuple(l[i] for i in outs)) for k, l in joined.pairs
        ),
    )


@dc.dataclass(frozen=True)
class Bifurcation:
    """Координата пространства выборов: ветвь узла и ее возможные выходы"""

    node: str
    """Узел"""
    branch: str
    """Метка ветви"""
    choices: tuple[IndexTuple, ...]
    """Возможные выходные кортежи ветви"""

    @property
    def trivial(self) -> bool:
        return len(self.choices) == 1

    @property
    def key(self) -> tuple[str, str]:
        return self.node, self.branch


@dc.dataclass(frozen=True, eq=False)
class ChoiceFunction:
    """Функция выбора однозначного графа"""

    nodes: tuple[str, ...]
    """Узлы (последняя ось таблицы)"""
    labels: Mapping[str, tuple[str, ...]]
    """Метки ветвей каждого узла"""
    bifurcations: tuple[Bifurcation, ...]
    """Все координаты, включая тривиальные"""
    table: np.ndarray
    """Индексы реализованных ветвей по нетривиальным координатам и узлам"""

    @functools.cached_property
    def axes(self) -> tuple[Bifurcation, ...]:
        """Нетривиальные координаты в порядке осей таблицы."""

        return tuple(x for x in self.bifurcations if not x.trivial)

    @functools.cached_property
    def _axis(self) -> Mapping[tuple[str, str], int]:
        return {x.key: i for i, x in enumerate(self.axes)}

    @property
    def size(self) -> int:
        """Число векторов выбора."""

        return int(np.prod([len(x.choices) for x in self.bifurcations], dtype=np.int64))

    def _index(self, vector: Mapping[tuple[str, str], IndexTuple]) -> tuple[int, ...]:
        for key in vector:
            if key not in self._axis and all(key != x.key for x in self.bifurcations):
                raise OutOfDomain(f"Неизвестная координата {key}")

        idx = []

        for b in self.axes:
            try:
                idx.append(b.choices.index(vector[b.key]))

            except (KeyError, ValueError):
                raise OutOfDomain(f"Нет допустимого выбора для {b.node}^{b.branch}")

        for b in self.bifurcations:
            if b.trivial and (x := vector.get(b.key)) is not None and x != b.choices[0]:
                raise OutOfDomain(f"Недопустимый выбор для {b.node}^{b.branch}")

        return tuple(idx)

    def __call__(self, vector: Mapping[tuple[str, str], IndexTuple]) -> dict[str, str]:
        """Реализованные ветви узлов для вектора выборов."""

        row = self.table[self._index(vector)]
        return {n: self.labels[n][i] for n, i in zip(self.nodes, row)}

    def happens(self, node: str, branch: str, vector: Mapping[tuple[str, str], IndexTuple]) -> bool:
        return self(vector)[node] == branch

    def items(self) -> Iterator[tuple[dict[tuple[str, str], IndexTuple], dict[str, str]]]:
        """Перебирает всю таблицу: вектор выборов и реализованные ветви."""

        for idx in np.ndindex(*(len(x.choices) for x in self.axes)):
            vector = {b.key: b.choices[i] for b, i in zip(self.axes, idx)}
            row = self.table[idx]
            yield vector, {n: self.labels[n][i] for n, i in zip(self.nodes, row)}

    def column(self, node: str) -> np.ndarray:
        """Индексы ветвей узла по всем векторам выбора."""

        return self.table[..., self.nodes.index(node)]


def choice_function(g: RoutedGraph) -> ChoiceFunction:
    """
    Строит функцию выбора по глобально согласованным назначениям.

    Каждое назначение фиксирует реализованные ветви и выборы внутри них;
    остальные координаты свободны. Граф однозначен, если назначения
    покрывают пространство выборов ровно по одному разу.
    """

    check_routable(g)

    labels = {n: tuple(x.label for x in g.branches(n)) for n in g.nodes}
    bifurcations = tuple(
        Bifurcation(n, br.label, tuple(br.choices)) for n in g.nodes for br in g.branches(n)
    )
    axes = [x for x in bifurcations if not x.trivial]
    shape = tuple(len(x.choices) for x in axes)
    axis = {x.key: i for i, x in enumerate(axes)}
    positions = [{c: j for j, c in enumerate(x.choices)} for x in axes]

    table = np.full((*shape, len(g.nodes)), -1, dtype=np.int16)
    count = np.zeros(shape, dtype=np.int32)
    assignments = g.assignments

    for row in assignments:
        idx: list[int | slice] = [slice(None)] * len(axes)
        values = []

        for node in g.nodes:
            route = g.routes[node]
            br = route.branch_of(assignments.project(row, route.in_ids))
            values.append(labels[node].index(br.label))

            if (i := axis.get((node, br.label))) is not None:
                idx[i] = positions[i][assignments.project(row, route.out_ids)]

        table[tuple(idx)] = values
        count[tuple(idx)] += 1

    _LOGGER.debug(
        "Функция выбора: %d координат (%d нетривиальных), %d векторов",
        len(bifurcations),
        len(axes),
        count.size,
    )

    if (count != 1).any():
        raise NotUnivocal(
            f"Отношение выбора не является функцией: {int((count == 0).sum())} векторов "
            f"без значения, {int((count > 1).sum())} многозначных"
        )

    return ChoiceFunction(g.nodes, labels, bifurcations, table)


def is_univocal(g: RoutedGraph) -> bool:
    """Отношение выбора графа является всюду определенной функцией."""

    try:
        choice_function(g)

    except NotUnivocal as e:
        _LOGGER.debug("Граф не однозначен: %s", e)
        return False

    return True


def is_biunivocal(g: RoutedGraph) -> bool:
    """Граф и сопряженный ему граф однозначны."""

    return is_univocal(g) and is_univocal(g.adjoint)


def relabel(
    g: RoutedGraph,
    nodes: Mapping[str, str] | None = None,
    arrows: Mapping[str, str] | None = None,
    values: Mapping[str, Mapping[IndexValue, IndexValue]] | None = None,
) -> RoutedGraph:
    """
    Переименовывает узлы, стрелки и значения индексов.

    Параметры:
    - `nodes`: новые имена узлов.
    - `arrows`: новые идентификаторы стрелок.
    - `values`: отображения значений по старым идентификаторам стрелок.
    """

    nodes, arrows, values = nodes or {}, arrows or {}, values or {}

    def _node(x: str | None) -> str | None:
        return None if x is None else nodes.get(x, x)

    def _arrow(a: Arrow) -> Arrow:
        vmap = values.get(a.id, {})
        return Arrow(
            arrows.get(a.id, a.id),
            _node(a.source),
            _node(a.target),
            frozenset(vmap.get(x, x) for x in a.alphabet),
            frozenset(vmap.get(x, x) for x in a.one_dim),
        )

    routes = {nodes.get(n, n): r.rename(arrows, values) for n, r in g.routes.items()}

    return RoutedGraph.build((nodes.get(n, n) for n in g.nodes), map(_arrow, g.arrows), routes)


def canonical_form(g: RoutedGraph) -> str:
    """Каноническая строка графа без меток ветвей."""

    data = g.to_json()
    data.pop("labels", None)

    return json.dumps(data, sort_keys=True, ensure_ascii=False)


@dc.dataclass(frozen=True)
class Isomorphism:
    """Изоморфизм маршрутизированных графов"""

    nodes: Mapping[str, str]
    """Соответствие узлов"""
    arrows: Mapping[str, str]
    """Соответствие стрелок"""
    values: Mapping[str, Mapping[IndexValue, IndexValue]]
    """Соответствие значений по стрелкам первого графа"""


def _multigraph(g: RoutedGraph) -> nx.MultiDiGraph:
    result = nx.MultiDiGraph()

    for node in g.nodes:
        result.add_node(node, kind="node")

    for a in g.arrows:
        source, target = a.source, a.target

        if source is None:
            result.add_node(source := f"<{a.id}", kind="open-in")

        if target is None:
            result.add_node(target := f">{a.id}", kind="open-out")

        result.add_edge(source, target, key=a.id, sig=(len(a.alphabet), len(a.one_dim)))

    return result


def _value_maps(a: Arrow, b: Arrow) -> list[dict[IndexValue, IndexValue]]:
    """
    Все биекции значений стрелки `a` на значения стрелки `b`.

    Одномерные значения переходят в одномерные. Первой идет тождественная
    биекция при совпадении алфавитов, иначе упорядоченная.
    """

    if len(a.alphabet) != len(b.alphabet) or len(a.one_dim) != len(b.one_dim):
        return []

    one1, one2 = sorted_values(a.one_dim), sorted_values(b.one_dim)
    rest1, rest2 = sorted_values(a.alphabet - a.one_dim), sorted_values(b.alphabet - b.one_dim)

    if a.alphabet == b.alphabet and a.one_dim == b.one_dim:
        first = {x: x for x in a.alphabet}

    else:
        first = dict(zip(one1, one2)) | dict(zip(rest1, rest2))

    result = [first]

    for p in it.permutations(one2):
        for q in it.permutations(rest2):
            if (vmap := dict(zip(one1, p)) | dict(zip(rest1, q))) != first:
                result.append(vmap)

    return result


def find_isomorphism(g1: RoutedGraph, g2: RoutedGraph) -> Isomorphism | None:
    """
    Ищет изоморфизм графов с точностью до переименования узлов, стрелок и значений.

    Перебираются все биекции значений каждой стрелки, сохраняющие
    одномерность; первой пробуется тождественная (или упорядоченная).
    Для больших алфавитов перебор экспоненциален.
    Маршруты должны переходить друг в друга точно.
    """

    m1, m2 = _multigraph(g1), _multigraph(g2)
    matcher = iso.MultiDiGraphMatcher(
        m1,
        m2,
        node_match=lambda x, y: x["kind"] == y["kind"],
        edge_match=iso.generic_multiedge_match("sig", None, operator.eq),
    )

    for mapping in matcher.isomorphisms_iter():
        pairs = sorted({(u, v) for u, v, _ in m1.edges(keys=True)})
        options = []

        for u, v in pairs:
            keys1 = sorted(m1[u][v], key=natural_key)
            keys2 = sorted(m2[mapping[u]][mapping[v]], key=natural_key)
            options.append(
                [
                    dict(zip(keys1, perm))
                    for perm in it.permutations(keys2)
                    if all(
                        m1[u][v][x]["sig"] == m2[mapping[u]][mapping[v]][y]["sig"]
                        for x, y in zip(keys1, perm)
                    )
                ]
            )

        for combo in it.product(*options):
            arrows = {k: v for part in combo for k, v in part.items()}
            maps = [_value_maps(g1.arrow(x), g2.arrow(y)) for x, y in arrows.items()]
            nodes = {k: v for k, v in mapping.items() if k in g1.routes}

            for choice in it.product(*maps):
                values = dict(zip(arrows, choice))

                if relabel(g1, nodes, arrows, values) == g2:
                    _LOGGER.debug("Найден изоморфизм: %s", nodes)
                    return Isomorphism(nodes, arrows, values)

    return None

"""
Граф ветвей: значения связи, сильные и слабые родители, проверка корректности.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import logging
from typing import Any, Iterable, Literal, Mapping

import networkx as nx
import numpy as np

from .errors import (
    AmbiguousArrow,
    NontrivialOpenArrow,
    NotBiunivocal,
    NotBranched,
    NotUnivocal,
)
from .relation import IndexTuple, IndexValue
from .routed_graph import ChoiceFunction, RoutedGraph, check_routable, choice_function
from .utils import natural_key

_LOGGER = logging.getLogger(__name__)

type Color = Literal["solid", "green", "red"]
type Edge = tuple[BranchNode, BranchNode]

_DOT_STYLE: Mapping[str, str] = {
    "solid": "color=black",
    "green": "color=green, style=dashed",
    "red": "color=red, style=dashed",
}


@dc.dataclass(frozen=True)
class BranchNode:
    """Ветвь узла маршрутизированного графа"""

    node: str
    """Узел"""
    branch: str
    """Метка ветви"""

    def __str__(self) -> str:
        return f"{self.node}^{self.branch}"

    @property
    def sort_key(self) -> tuple:
        return natural_key(self.node), natural_key(self.branch)

    @property
    def key(self) -> tuple[str, str]:
        return self.node, self.branch


def _sorted_nodes(nodes: Iterable[BranchNode]) -> list[BranchNode]:
    return sorted(nodes, key=lambda x: x.sort_key)


def _sorted_edges(edges: Iterable[Edge]) -> list[Edge]:
    return sorted(edges, key=lambda x: (x[0].sort_key, x[1].sort_key))


def _branch_columns(g: RoutedGraph) -> Mapping[str, list[str]]:
    """Реализованные ветви каждого узла по всем согласованным назначениям."""

    return {n: [g.branch_at(n, row) for row in g.assignments] for n in g.nodes}


def link_values(
    g: RoutedGraph,
    src: BranchNode,
    dst: BranchNode,
    arrow: str | None = None,
) -> frozenset[IndexValue]:
    """
    Значения стрелки, связывающие две ветви.

    Значение связывает ветви, если оно продолжается до глобально согласованного
    назначения, в котором реализуются обе ветви.
    """

    if arrow is None:
        arrows = g.arrows_between(src.node, dst.node)

        if not arrows:
            return frozenset()

        if len(arrows) > 1:
            raise AmbiguousArrow(f"Узлы {src.node} и {dst.node} связаны несколькими стрелками")

        arrow = arrows[0].id

    return _link_values(g, _branch_columns(g), src, dst, arrow)


def _link_values(
    g: RoutedGraph,
    columns: Mapping[str, list[str]],
    src: BranchNode,
    dst: BranchNode,
    arrow: str,
) -> frozenset[IndexValue]:
    pos = g.assignments.position[arrow]

    return frozenset(
        row[pos]
        for row, a, b in zip(g.assignments, columns[src.node], columns[dst.node])
        if a == src.branch and b == dst.branch
    )


def _is_strong(values: frozenset[IndexValue], one_dim: frozenset[IndexValue]) -> bool:
    return len(values) > 1 or any(x not in one_dim for x in values)


def strong_parent(g: RoutedGraph, src: BranchNode, dst: BranchNode) -> bool:
    """Ветвь `src` является сильным родителем ветви `dst`."""

    columns = _branch_columns(g)

    return any(
        _is_strong(_link_values(g, columns, src, dst, a.id), a.one_dim)
        for a in g.arrows_between(src.node, dst.node)
    )


def happens(
    cf: ChoiceFunction,
    target: BranchNode,
    bifurcations: Mapping[tuple[str, str], IndexTuple],
) -> bool:
    """Ветвь реализуется при заданном векторе выборов."""

    return cf.happens(target.node, target.branch, bifurcations)


def _happens_table(cf: ChoiceFunction, target: BranchNode) -> np.ndarray:
    return cf.column(target.node) == cf.labels[target.node].index(target.branch)


def weak_parents(g: RoutedGraph, cf: ChoiceFunction, target: BranchNode) -> frozenset[BranchNode]:
    """
    Слабые родители ветви.

    Ветвь `N^β` является слабым родителем, если изменение выбора внутри нее
    при некоторых фиксированных остальных выборах меняет реализацию `target`.
    """

    table = _happens_table(cf, target)
    result = set()

    for axis, b in enumerate(cf.axes):
        if np.any(table.any(axis=axis) & ~table.all(axis=axis)):
            result.add(BranchNode(b.node, b.branch))

    return frozenset(result)


@dc.dataclass(frozen=True)
class BranchGraph:
    """Граф ветвей"""

    nodes: tuple[BranchNode, ...]
    """Ветви в каноническом порядке"""
    solid: frozenset[Edge]
    """Сильные родители (сплошные ребра)"""
    green: frozenset[Edge]
    """Слабые родители в исходном графе (зеленые ребра)"""
    red: frozenset[Edge]
    """Слабые родители в сопряженном графе (красные ребра)"""
    unreachable: frozenset[BranchNode] = frozenset()
    """Ветви, не реализуемые ни при каком выборе"""

    def edges(self, color: Color) -> list[Edge]:
        match color:
            case "solid":
                return _sorted_edges(self.solid)
            case "green":
                return _sorted_edges(self.green)
            case "red":
                return _sorted_edges(self.red)

        raise ValueError(color)

    def to_networkx(self) -> nx.MultiDiGraph:
        result = nx.MultiDiGraph()
        result.add_nodes_from(self.nodes)

        for color in ("solid", "green", "red"):
            for u, v in self.edges(color):
                result.add_edge(u, v, key=color, color=color)

        return result

    @functools.cached_property
    def cycles(self) -> tuple[tuple[BranchNode, ...], ...]:
        """Циклы, нарушающие условие слабых петель (по одному на компоненту)."""

        return tuple(_bad_cycles(self.to_networkx()))

    @property
    def only_weak_loops(self) -> bool:
        return not self.cycles

    @property
    def is_acyclic(self) -> bool:
        return nx.is_directed_acyclic_graph(self.to_networkx())

    def to_dot(self) -> str:
        """Описание графа на языке DOT."""

        lines = ["digraph branch_graph {"]

        for x in self.nodes:
            style = ", style=dotted" if x in self.unreachable else ""
            lines.append(f'  "{x}" [label="{x}"{style}];')

        for color in ("solid", "green", "red"):
            for u, v in self.edges(color):
                lines.append(f'  "{u}" -> "{v}" [{_DOT_STYLE[color]}];')

        lines.append("}")

        return "\n".join(lines) + "\n"

    def to_json(self) -> dict[str, Any]:
        def _edges(color: Color) -> list[list[str]]:
            return [[str(u), str(v)] for u, v in self.edges(color)]

        return {
            "nodes": [str(x) for x in self.nodes],
            "solid": _edges("solid"),
            "green": _edges("green"),
            "red": _edges("red"),
            "unreachable": [str(x) for x in _sorted_nodes(self.unreachable)],
        }


def _bad_cycles(graph: nx.MultiDiGraph) -> list[tuple[BranchNode, ...]]:
    result = []

    for component in nx.strongly_connected_components(graph):
        sub = graph.subgraph(component)

        if len(component) == 1 and not sub.number_of_edges():
            continue

        colors = {c for _, _, c in sub.edges(data="color")}

        if colors == {"green"} or colors == {"red"}:
            continue

        cycle = nx.find_cycle(sub)
        result.append(tuple(u for u, *_ in cycle))

    _LOGGER.debug("Недопустимых сильно связных компонент: %d", len(result))

    return sorted(result, key=lambda x: [n.sort_key for n in x])


def only_weak_loops(bg: BranchGraph) -> bool:
    """Все циклы графа ветвей одноцветные зеленые или красные."""

    return bg.only_weak_loops


def _green_edges(g: RoutedGraph, cf: ChoiceFunction, nodes: list[BranchNode]) -> set[Edge]:
    result = set()

    for target in nodes:
        for parent in weak_parents(g, cf, target):
            result.add((parent, target))

    return result


def _build(g: RoutedGraph, cf: ChoiceFunction, cf_adjoint: ChoiceFunction) -> BranchGraph:
    nodes = _sorted_nodes(BranchNode(n, br.label) for n in g.nodes for br in g.branches(n))
    columns = _branch_columns(g)

    solid = set()

    for a in g.internal_arrows:
        for src in (x for x in nodes if x.node == a.source):
            for dst in (x for x in nodes if x.node == a.target):
                if _is_strong(_link_values(g, columns, src, dst, a.id), a.one_dim):
                    solid.add((src, dst))

    green = _green_edges(g, cf, nodes)
    red = {(v, u) for u, v in _green_edges(g.adjoint, cf_adjoint, nodes)}

    unreachable = frozenset(
        x for x in nodes if not _happens_table(cf, x).any()
    )

    _LOGGER.debug(
        "Граф ветвей: %d ветвей, ребер: %d сплошных, %d зеленых, %d красных",
        len(nodes),
        len(solid),
        len(green),
        len(red),
    )

    return BranchGraph(tuple(nodes), frozenset(solid), frozenset(green), frozenset(red), unreachable)


def build_branch_graph(g: RoutedGraph) -> BranchGraph:
    """Строит граф ветвей биоднозначного графа."""

    try:
        cf = choice_function(g)
        cf_adjoint = choice_function(g.adjoint)

    except NotUnivocal as e:
        raise NotBiunivocal(f"Граф не является биоднозначным: {e}")

    return _build(g, cf, cf_adjoint)


type Stage = Literal[
    "branching",
    "open-arrows",
    "univocality",
    "adjoint-univocality",
    "weak-loops",
    "ok",
]


@dc.dataclass(frozen=True)
class ValidityReport:
    """Результат проверки корректности маршрутизированного графа"""

    valid: bool
    """Граф корректен"""
    stage: Stage
    """Этап, на котором проверка завершилась"""
    detail: str = ""
    """Пояснение"""
    cycles: tuple[tuple[BranchNode, ...], ...] = ()
    """Недопустимые циклы графа ветвей"""
    unreachable: tuple[BranchNode, ...] = ()
    """Нереализуемые ветви"""
    branch_graph: BranchGraph | None = dc.field(default=None, compare=False, repr=False)
    """Построенный граф ветвей"""

    def summary(self) -> str:
        if self.valid:
            loops = "loop-free" if self.branch_graph and self.branch_graph.is_acyclic else "weak loops only"
            return f"VALID (bi-univocal; branch graph {loops})"

        result = f"INVALID [{self.stage}]: {self.detail}"

        for cycle in self.cycles:
            result += "\n  cycle: " + " -> ".join(map(str, (*cycle, cycle[0])))

        return result

    def to_json(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "stage": self.stage,
            "detail": self.detail,
            "cycles": [[str(x) for x in c] for c in self.cycles],
            "unreachable": [str(x) for x in self.unreachable],
        }


def is_valid(g: RoutedGraph) -> ValidityReport:
    """Проверяет корректность: биоднозначность и только слабые петли."""

    try:
        check_routable(g)

    except NotBranched as e:
        return ValidityReport(False, "branching", str(e))

    except NontrivialOpenArrow as e:
        return ValidityReport(False, "open-arrows", str(e))

    try:
        cf = choice_function(g)

    except NotUnivocal as e:
        return ValidityReport(False, "univocality", str(e))

    try:
        cf_adjoint = choice_function(g.adjoint)

    except NotUnivocal as e:
        return ValidityReport(False, "adjoint-univocality", str(e))

    bg = _build(g, cf, cf_adjoint)
    unreachable = tuple(_sorted_nodes(bg.unreachable))

    if cycles := bg.cycles:
        return ValidityReport(
            False,
            "weak-loops",
            f"граф ветвей содержит недопустимые циклы: {len(cycles)}",
            cycles,
            unreachable,
            bg,
        )

    _LOGGER.debug("Граф корректен")

    return ValidityReport(True, "ok", "", (), unreachable, bg)

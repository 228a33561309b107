"""
Обобщенный маршрутизированный граф процесса, его скелетная суперкарта
и наполнение операциями.
"""

from __future__ import annotations

import dataclasses as dc
import logging
from types import MappingProxyType
from typing import Iterable, Mapping, Self

import numpy as np

from .errors import (
    DimMismatch,
    InvalidBifurcation,
    InvalidGraph,
    MissingDim,
    OneDimViolation,
    ShapeMismatch,
    UncoveredNode,
)
from .qcqc import FUTURE, PAST, OpKey, ProcessVector, QcqcSpec
from .relation import (
    NULL,
    PLAIN,
    AgentSet,
    Atom,
    Composite,
    IndexTuple,
    IndexValue,
    Relation,
    sorted_values,
)
from .routed_graph import Arrow, Isomorphism, RoutedGraph
from .tensor import RoutedMapCheck, SectoredSpace, SectorTensor
from .utils import (
    a_node,
    agents,
    all_subsets,
    arrow_id,
    is_zero,
    prod,
    slot_in,
    slot_out,
    subsets,
    v_node,
)

_LOGGER = logging.getLogger(__name__)

PAST_VALUE = AgentSet()
"""Значение открытой входной стрелки"""

FUTURE_VALUE = Atom(FUTURE)
"""Значение открытой выходной стрелки"""

type DimensionAssignment = Mapping[tuple[str, IndexValue], int]
type RouteEntry = tuple[Mapping[str, IndexValue], Mapping[str, IndexValue], str]


def is_v_node(node: str) -> bool:
    return node.startswith("V")


def is_a_node(node: str) -> bool:
    return node.startswith("A")


def make_route(ins: Iterable[Arrow], outs: Iterable[Arrow], entries: Iterable[RouteEntry]) -> Relation:
    """
    Маршрут узла по записям `(входы, выходы, метка ветви)`.

    Стрелки, не упомянутые в записи, несут нулевое значение.
    """

    ins, outs = list(ins), list(outs)
    pairs, labels = set(), {}

    for k, l, label in entries:
        key = tuple(k.get(a.id, NULL) for a in ins)
        pairs.add((key, tuple(l.get(a.id, NULL) for a in outs)))
        labels[key] = label

    return Relation.of([a.port for a in ins], [a.port for a in outs], pairs, labels)


def set_label(agents_: Iterable[int]) -> str:
    return str(AgentSet.of(agents_))


def generic_graph(n_agents: int) -> RoutedGraph:
    """
    Обобщенный маршрутизированный граф процесса с `N` агентами.

    Узел `V_{n+1}` получает множество `K_n` завершивших работу агентов
    от последнего из них и передает `K_n ∪ {ℓ}` следующему агенту `ℓ`.
    Узел `A_k` передает полученное множество дальше без изменений.
    """

    if n_agents < 1:
        raise InvalidGraph("Число агентов должно быть положительным")

    null = frozenset({NULL}) if n_agents > 1 else frozenset()
    arrows = [
        Arrow(PAST, None, v_node(1), frozenset({PAST_VALUE})),
        Arrow(FUTURE, v_node(n_agents + 1), None, frozenset({FUTURE_VALUE})),
    ]

    for n in agents(n_agents):
        for k in agents(n_agents):
            values = frozenset(AgentSet.of(x) for x in subsets(n_agents, n) if k in x) | null
            arrows.append(Arrow(arrow_id(v_node(n), a_node(k)), v_node(n), a_node(k), values, null))
            arrows.append(Arrow(arrow_id(a_node(k), v_node(n + 1)), a_node(k), v_node(n + 1), values, null))

    nodes = [v_node(n) for n in range(1, n_agents + 2)] + [a_node(k) for k in agents(n_agents)]
    g = _skeleton(nodes, arrows)
    routes = {}

    for n in range(n_agents + 1):
        node = v_node(n + 1)
        routes[node] = make_route(g[0][node], g[1][node], _v_entries(n_agents, n))

    for k in agents(n_agents):
        node = a_node(k)
        routes[node] = make_route(g[0][node], g[1][node], _a_entries(n_agents, k))

    result = RoutedGraph.build(nodes, arrows, routes)
    _LOGGER.debug("Обобщенный граф N=%d: %d узлов, %d стрелок", n_agents, len(nodes), len(arrows))

    return result


def generic_duality(n_agents: int) -> Isomorphism:
    """
    Изоморфизм сопряженного обобщенного графа на исходный.

    Узел `V_m` переходит в `V_{N-m+2}`, стрелка агента `k` со значением `K`
    переходит в стрелку противоположного направления со значением
    `(𝒩 \\ K) ∪ {k}`, открытые стрелки меняются местами.
    """

    everyone = frozenset(agents(n_agents))
    nodes = {v_node(m): v_node(n_agents - m + 2) for m in range(1, n_agents + 2)}
    arrows = {PAST: FUTURE, FUTURE: PAST}
    values: dict[str, dict[IndexValue, IndexValue]] = {
        PAST: {PAST_VALUE: FUTURE_VALUE},
        FUTURE: {FUTURE_VALUE: PAST_VALUE},
    }

    for n in agents(n_agents):
        for k in agents(n_agents):
            node = a_node(k)
            arrows[arrow_id(v_node(n), node)] = arrow_id(node, v_node(n_agents - n + 2))
            arrows[arrow_id(node, v_node(n + 1))] = arrow_id(v_node(n_agents - n + 1), node)

            vmap: dict[IndexValue, IndexValue] = {NULL: NULL}

            for done in subsets(n_agents, n):
                if k in done:
                    vmap[AgentSet.of(done)] = AgentSet.of((everyone - done) | {k})

            values[arrow_id(v_node(n), node)] = vmap
            values[arrow_id(node, v_node(n + 1))] = vmap

    return Isomorphism(nodes, arrows, values)


def _skeleton(nodes: list[str], arrows: list[Arrow]) -> tuple[dict[str, list[Arrow]], dict[str, list[Arrow]]]:
    ins: dict[str, list[Arrow]] = {x: [] for x in nodes}
    outs: dict[str, list[Arrow]] = {x: [] for x in nodes}

    for a in arrows:
        if a.target is not None:
            ins[a.target].append(a)

        if a.source is not None:
            outs[a.source].append(a)

    return ins, outs


def _v_entries(n_agents: int, n: int) -> Iterable[RouteEntry]:
    node = v_node(n + 1)

    for done in subsets(n_agents, n):
        value = AgentSet.of(done)

        if n:
            ins = [{arrow_id(a_node(k), node): value} for k in sorted(done)]

        else:
            ins = [{PAST: PAST_VALUE}]

        if n < n_agents:
            outs = [
                {arrow_id(node, a_node(x)): value.add(x)}
                for x in agents(n_agents)
                if x not in done
            ]

        else:
            outs = [{FUTURE: FUTURE_VALUE}]

        for k in ins:
            for l in outs:
                yield k, l, str(value)


def _a_entries(n_agents: int, k: int) -> Iterable[RouteEntry]:
    node = a_node(k)

    for n in agents(n_agents):
        for done in subsets(n_agents, n):
            if k in done:
                value = AgentSet.of(done)
                yield (
                    {arrow_id(v_node(n), node): value},
                    {arrow_id(node, v_node(n + 1)): value},
                    str(value.remove(k)),
                )


def _check_bifurcations(n_agents: int, bifurcations: Mapping[frozenset[int], int]) -> None:
    everyone = frozenset(agents(n_agents))

    for done in all_subsets(n_agents):
        if len(done) == n_agents:
            continue

        if (x := bifurcations.get(done)) is None:
            raise InvalidBifurcation(f"Не задан выбор для {set_label(done)}")

        if x not in everyone - done:
            raise InvalidBifurcation(f"Выбор {x} для {set_label(done)} недопустим")


def closed_form_choice(n_agents: int, bifurcations: Mapping[frozenset[int], int]) -> dict[str, str]:
    """
    Реализуемые ветви обобщенного графа в замкнутой форме.

    `bifurcations` задает следующего агента для каждого множества
    завершивших работу агентов.
    """

    _check_bifurcations(n_agents, bifurcations)

    done: frozenset[int] = frozenset()
    result = {v_node(1): set_label(done)}

    for n in agents(n_agents):
        k = bifurcations[done]
        result[a_node(k)] = set_label(done)
        done = done | {k}
        result[v_node(n + 1)] = set_label(done)

    return result


def bifurcation_vector(
    n_agents: int, bifurcations: Mapping[frozenset[int], int]
) -> dict[tuple[str, str], IndexTuple]:
    """Вектор выборов функции выбора обобщенного графа."""

    _check_bifurcations(n_agents, bifurcations)
    result = {}

    for done, k in bifurcations.items():
        value = AgentSet.of(done)
        choice = tuple(value.add(x) if x == k else NULL for x in agents(n_agents))
        result[v_node(len(done) + 1), str(value)] = choice

    return result


def qcqc_dimensions(g: RoutedGraph, spec: QcqcSpec) -> DimensionAssignment:
    """
    Размерности секторов обобщенного графа (или его вариантов) по описанию процесса.

    Если вспомогательные системы идут по отдельным стрелкам `V_n → V_{n+1}`,
    секторы стрелок агентов их не содержат.
    """

    ancilla = any(is_v_node(a.source or "") and is_v_node(a.target or "") for a in g.arrows)
    result: dict[tuple[str, IndexValue], int] = {}

    for a in g.arrows:
        for x in a.alphabet:
            match x:
                case _ if x in a.one_dim:
                    dim = 1
                case _ if a.id == PAST:
                    dim = spec.d_P
                case _ if a.id == FUTURE:
                    dim = spec.d_F
                case AgentSet() if is_v_node(a.source or "") and is_a_node(a.target or ""):
                    dim = spec.d_AI * (1 if ancilla else spec.alpha(x.size))
                case AgentSet() if is_a_node(a.source or "") and is_v_node(a.target or ""):
                    dim = spec.d_AO * (1 if ancilla else spec.alpha(x.size))
                case Atom(name) if name.startswith("alpha"):
                    dim = spec.alpha(int(name.removeprefix("alpha")))
                case _:
                    raise MissingDim(f"Не удается определить размерность {a.id}={x}")

            result[a.id, x] = dim

    return result


@dc.dataclass(frozen=True, eq=False)
class SkeletalSupermap:
    """Скелетная суперкарта: граф с секторными пространствами стрелок"""

    graph: RoutedGraph
    """Маршрутизированный граф"""
    dims: DimensionAssignment
    """Размерности секторов"""
    spaces: Mapping[str, SectoredSpace]
    """Секторное пространство каждой стрелки"""

    def node_spaces(self, node: str) -> tuple[list[SectoredSpace], list[SectoredSpace]]:
        """Пространства входящих и исходящих стрелок узла."""

        return (
            [self.spaces[a.id] for a in self.graph.in_arrows(node)],
            [self.spaces[a.id] for a in self.graph.out_arrows(node)],
        )

    def _practical(self, node: str, tuples: Iterable[IndexTuple], arrows: Iterable[Arrow]) -> SectoredSpace:
        arrows = list(arrows)
        sectors = []

        for key in sorted(tuples, key=lambda x: Composite(x).sort_key):
            dims = [self.dims[a.id, v] for a, v in zip(arrows, key) if v not in a.one_dim]
            sectors.append((Composite(key), prod(dims)))

        return SectoredSpace(node, tuple(sectors))

    def practical_in(self, node: str) -> SectoredSpace:
        """Практическое входное пространство узла (одномерные множители опущены)."""

        route = self.graph.route(node)
        return self._practical(f"{node}:in", route.practical_domain, self.graph.in_arrows(node))

    def practical_out(self, node: str) -> SectoredSpace:
        """Практическое выходное пространство узла."""

        route = self.graph.route(node)
        return self._practical(f"{node}:out", route.practical_codomain, self.graph.out_arrows(node))

    def route_check(self, node: str) -> RoutedMapCheck:
        ins, outs = self.node_spaces(node)
        return RoutedMapCheck(self.graph.route(node), tuple(ins), tuple(outs))


def skeletal(g: RoutedGraph, dims: DimensionAssignment) -> SkeletalSupermap:
    """Скелетная суперкарта графа с заданными размерностями секторов."""

    spaces = {}

    for a in g.arrows:
        sectors = []

        for x in sorted_values(a.alphabet):
            if (dim := dims.get((a.id, x))) is None:
                if x not in a.one_dim:
                    raise MissingDim(f"Не задана размерность {a.id}={x}")

                dim = 1

            if x in a.one_dim and dim != 1:
                raise OneDimViolation(f"Одномерное значение {a.id}={x} имеет размерность {dim}")

            sectors.append((x, dim))

        spaces[a.id] = SectoredSpace(a.id, tuple(sectors))

    full = {(a.id, x): spaces[a.id].dims[x] for a in g.arrows for x in a.alphabet}

    return SkeletalSupermap(g, MappingProxyType(full), MappingProxyType(spaces))


@dc.dataclass(frozen=True)
class FleshingOut:
    """Наполнение узлов операциями"""

    tensors: Mapping[str, SectorTensor]
    """Тензор Чоя каждого наполненного узла"""
    adapters: frozenset[str] = frozenset()
    """Узлы-переходники, открывающие слот агента"""

    def __post_init__(self) -> None:
        object.__setattr__(self, "tensors", MappingProxyType(dict(self.tensors)))

    def __or__(self, other: FleshingOut) -> FleshingOut:
        return FleshingOut(self.tensors | other.tensors, self.adapters | other.adapters)

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self.tensors)

    def replace(self, removed: Iterable[str], added: Mapping[str, SectorTensor], adapters: Iterable[str] = ()) -> Self:
        removed = frozenset(removed)
        tensors = {k: v for k, v in self.tensors.items() if k not in removed} | dict(added)

        return type(self)(tensors, (self.adapters - removed) | frozenset(adapters))


def _sector_block(
    s: SkeletalSupermap,
    node: str,
    active: Mapping[str, IndexValue],
    matrix: np.ndarray,
) -> tuple[IndexTuple, np.ndarray]:
    """
    Секторный блок узла по матрице операции.

    Строки матрицы нумеруют активные выходы, столбцы активные входы
    (в каноническом порядке стрелок), остальные стрелки несут нулевое значение.
    """

    ins, outs = s.node_spaces(node)
    values = []

    for space in (*ins, *outs):
        if (x := active.get(space.label)) is None:
            x = NULL if NULL in space.dims else space.values[0]

        values.append(x)

    shape = tuple(sp.dims[x] for sp, x in zip((*ins, *outs), values))
    din = prod(shape[: len(ins)])

    if matrix.shape != (prod(shape) // din, din):
        raise DimMismatch(f"Блок узла {node} формы {matrix.shape} не совпадает с секторами {shape}")

    return tuple(values), matrix.T.reshape(shape)


def _node_tensor(s: SkeletalSupermap, node: str, blocks: Mapping[IndexTuple, np.ndarray]) -> SectorTensor:
    ins, outs = s.node_spaces(node)
    return SectorTensor.of((*ins, *outs), blocks)


def _alpha_values(g: RoutedGraph, node: str) -> dict[str, IndexValue]:
    result = {}

    for a in (*g.in_arrows(node), *g.out_arrows(node)):
        if is_v_node(a.source or "") and is_v_node(a.target or "") and len(a.alphabet) == 1:
            (result[a.id],) = a.alphabet

    return result


def _v_active(key: OpKey) -> tuple[str, dict[str, IndexValue]]:
    n = key.level
    node = v_node(n + 1)
    done = AgentSet.of(key.done)

    if key.is_initial:
        active: dict[str, IndexValue] = {PAST: PAST_VALUE}

    else:
        active = {arrow_id(a_node(key.current), node): done}

    if key.is_final:
        active[FUTURE] = FUTURE_VALUE

    else:
        active[arrow_id(node, a_node(key.target))] = done.add(key.target)

    return node, active


def flesh_v_nodes(s: SkeletalSupermap, spec: QcqcSpec) -> FleshingOut:
    """
    Наполняет V-узлы внутренними операциями процесса.

    Каждый ненулевой блок `V^{→ℓ}_{K\\k,k}` становится секторным блоком
    узла `V_{n+1}` между сектором `K_n` стрелки от `A_k` и сектором
    `K_n ∪ {ℓ}` стрелки к `A_ℓ`.
    """

    blocks: dict[str, dict[IndexTuple, np.ndarray]] = {}

    for key, matrix in spec.ops.items():
        if is_zero(matrix):
            continue

        node, active = _v_active(key)

        if node not in s.graph.routes:
            raise DimMismatch(f"Граф не содержит узел {node}")

        active |= _alpha_values(s.graph, node)
        sector, block = _sector_block(s, node, active, matrix)
        blocks.setdefault(node, {})[sector] = block

    tensors = {}

    for n in range(1, spec.n_agents + 2):
        node = v_node(n)
        tensors[node] = _node_tensor(s, node, blocks.get(node, {}))

    _LOGGER.debug("Наполнено V-узлов: %d, блоков: %d", len(tensors), sum(map(len, blocks.values())))

    return FleshingOut(tensors)


def slot_spaces(k: int, d_AI: int, d_AO: int) -> tuple[SectoredSpace, SectoredSpace]:
    return SectoredSpace.plain(slot_in(k), d_AI), SectoredSpace.plain(slot_out(k), d_AO)


def identity_adapter(d_in: int, d_out: int, d_alpha: int) -> np.ndarray:
    """
    Переходник `(A^I ⊗ α) → A^I` и `A^O → (A^O ⊗ α)` с тождественным `α`.

    Оси результата: вход узла, слот `A^I`, слот `A^O`, выход узла.
    """

    wiring = np.einsum(
        "ip,oq,ab->iapqob",
        np.eye(d_in),
        np.eye(d_out),
        np.eye(d_alpha),
    )

    return wiring.reshape(d_in * d_alpha, d_in, d_out, d_out * d_alpha).astype(complex)


def flesh_a_nodes(s: SkeletalSupermap, d_AI: int, d_AO: int) -> FleshingOut:
    """
    Наполняет A-узлы переходниками, открывающими слоты агентов.

    Сектор `K` входной стрелки от `V_n` передается в слот агента,
    а выход агента вместе с вспомогательной системой уходит в сектор `K`
    выходной стрелки к `V_{n+1}`.
    """

    g = s.graph
    tensors = {}

    for node in g.nodes:
        if not is_a_node(node):
            continue

        k = int(node.removeprefix("A"))
        ins, outs = s.node_spaces(node)
        slot_i, slot_o = slot_spaces(k, d_AI, d_AO)
        blocks = {}

        for br in g.route(node).branches:
            for key_in in br.inputs:
                (key_out,) = br.outputs
                i = next(i for i, x in enumerate(key_in) if x not in g.in_arrows(node)[i].one_dim)
                o = next(i for i, x in enumerate(key_out) if x not in g.out_arrows(node)[i].one_dim)
                dim_in, dim_out = ins[i].dims[key_in[i]], outs[o].dims[key_out[o]]

                if dim_in % d_AI or dim_out % d_AO or dim_in // d_AI != dim_out // d_AO:
                    raise DimMismatch(f"Секторы узла {node} несовместимы со слотом агента")

                wiring = identity_adapter(d_AI, d_AO, dim_in // d_AI)
                shape = tuple(sp.dims[x] for sp, x in zip((*ins, *outs), (*key_in, *key_out)))
                block = wiring.transpose(0, 3, 1, 2).reshape(shape + (d_AI, d_AO))
                blocks[(*key_in, *key_out, PLAIN, PLAIN)] = block

        tensors[node] = SectorTensor.of((*ins, *outs, slot_i, slot_o), blocks)

    return FleshingOut(tensors, frozenset(tensors))


def flesh_out(s: SkeletalSupermap, spec: QcqcSpec) -> FleshingOut:
    """Полное наполнение: внутренние операции и переходники агентов."""

    return flesh_v_nodes(s, spec) | flesh_a_nodes(s, spec.d_AI, spec.d_AO)


def _contract(items: list[tuple[list[str], np.ndarray]]) -> tuple[list[str], np.ndarray]:
    """Свертка блоков по общим меткам с жадным выбором пары по размеру результата."""

    items = list(items)

    while len(items) > 1:
        best = None

        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                (la, a), (lb, b) = items[i], items[j]
                shared = set(la) & set(lb)

                if not shared and best is not None:
                    continue

                size = prod(a.shape) * prod(b.shape) // max(
                    1, prod(a.shape[la.index(x)] for x in shared) ** 2
                )
                rank = (not shared, size)

                if best is None or rank < best[0]:
                    best = rank, i, j

        assert best
        _, i, j = best
        (la, a), (lb, b) = items[i], items[j]
        shared = [x for x in la if x in lb]
        c = np.tensordot(a, b, axes=([la.index(x) for x in shared], [lb.index(x) for x in shared]))
        labels = [x for x in la if x not in shared] + [x for x in lb if x not in shared]
        items = [x for n, x in enumerate(items) if n not in (i, j)] + [(labels, c)]

    return items[0]


def compose_partial(s: SkeletalSupermap, f: FleshingOut) -> SectorTensor:
    """
    Композиция наполненных узлов.

    Ненаполненные узлы остаются открытыми: их стрелки становятся системами
    результата. Сумма берется по глобально согласованным назначениям, и
    для каждого назначения свертываются только соответствующие блоки.
    """

    g = s.graph
    nodes = [x for x in g.nodes if x in f.tensors]
    count: dict[str, int] = {}
    spaces: dict[str, SectoredSpace] = {}

    for node in nodes:
        for sp in f.tensors[node].systems:
            count[sp.label] = count.get(sp.label, 0) + 1
            spaces[sp.label] = sp

    open_labels = [x for x in spaces if count[x] == 1]
    open_systems = [spaces[x] for x in open_labels]
    assignments = g.assignments

    def _value(row: IndexTuple, label: str) -> IndexValue:
        if (i := assignments.position.get(label)) is None:
            return PLAIN

        return row[i]

    result: dict[IndexTuple, np.ndarray] = {}
    terms = 0

    for row in assignments:
        items = []

        for node in nodes:
            t = f.tensors[node]
            key = tuple(_value(row, sp.label) for sp in t.systems)

            if (block := t.blocks.get(key)) is None:
                break

            labels = [sp.label for sp, n in zip(t.systems, block.shape) if n != 1]
            items.append((labels, block.reshape([n for n in block.shape if n != 1])))

        else:
            terms += 1
            key = tuple(_value(row, x) for x in open_labels)
            shape = tuple(sp.dims[v] for sp, v in zip(open_systems, key))
            labels, data = _contract(items) if items else ([], np.ones((), dtype=complex))
            data = data.transpose([labels.index(x) for x in open_labels if x in labels])
            data = data.reshape(shape)

            if (x := result.get(key)) is not None:
                data = x + data

            result[key] = data

    _LOGGER.debug("Композиция: %d из %d назначений дают вклад", terms, len(assignments))

    return SectorTensor.of(open_systems, result)


def compose_fleshed(s: SkeletalSupermap, f: FleshingOut) -> ProcessVector:
    """Вектор процесса, получаемый композицией полностью наполненной суперкарты."""

    if missing := [x for x in s.graph.nodes if x not in f.tensors]:
        raise UncoveredNode(f"Не наполнены узлы: {missing}")

    try:
        w = compose_partial(s, f).to_dense().as_plain()

    except ShapeMismatch as e:
        raise DimMismatch(str(e))

    return ProcessVector(w, sum(1 for x in w.labels if x.endswith(":I")))


def follows_routes(s: SkeletalSupermap, f: FleshingOut) -> dict[str, bool]:
    """Следует ли тензор каждого наполненного узла его маршруту."""

    return {node: t.follows(s.route_check(node)) for node, t in f.tensors.items()}


def branch_counts(g: RoutedGraph) -> dict[str, int]:
    return {x: len(g.branches(x)) for x in g.nodes}


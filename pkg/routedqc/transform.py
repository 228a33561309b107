"""
Преобразования маршрутизированных графов и их наполнений.
"""

from __future__ import annotations

import dataclasses as dc
import enum
import itertools as it
import json
import logging
from typing import Any, Callable, Iterable, Mapping, Self, Sequence

import numpy as np

from .branch_graph import BranchNode, ValidityReport, is_valid
from .errors import (
    InvalidGraph,
    InvalidRelation,
    NotBranched,
    NotIsometryFleshing,
    NotSplittable,
    PreconditionFailed,
)
from .generic import (
    FUTURE_VALUE,
    PAST_VALUE,
    FleshingOut,
    SkeletalSupermap,
    flesh_out,
    is_a_node,
    is_v_node,
    make_route,
    qcqc_dimensions,
    skeletal,
)
from .qcqc import FUTURE, PAST, QcqcSpec
from .relation import (
    NULL,
    AgentSet,
    Atom,
    Composite,
    IndexTuple,
    IndexValue,
    Port,
    Relation,
    compose,
    join_assignments,
    tuple_key,
)
from .routed_graph import Arrow, RoutedGraph
from .tensor import SectoredSpace, SectorTensor
from .utils import (
    a_node,
    agents,
    alpha_label,
    arrow_id,
    is_zero,
    prod,
    resolve_atol,
    subsets,
    v_node,
)

_LOGGER = logging.getLogger(__name__)


def _n_agents(g: RoutedGraph) -> int:
    return sum(1 for x in g.nodes if is_a_node(x))


def alpha_variant(g: RoutedGraph, alpha_dims: Sequence[int]) -> RoutedGraph:
    """
    Добавляет стрелки `V_n → V_{n+1}` для вспомогательных систем `α_n`.

    Значение стрелки одномерно, если размерность `α_n` равна единице.
    """

    n_agents = _n_agents(g)

    if len(alpha_dims) != n_agents:
        raise InvalidGraph(f"Ожидалось {n_agents} размерностей α, получено {len(alpha_dims)}")

    if any(v_node(n) not in g.routes for n in range(1, n_agents + 2)):
        raise InvalidGraph("Граф не является обобщенным графом процесса")

    arrows = list(g.arrows)
    routes = dict(g.routes)

    for n, dim in zip(agents(n_agents), alpha_dims):
        value = Atom(alpha_label(n))
        a = Arrow(
            arrow_id(v_node(n), v_node(n + 1)),
            v_node(n),
            v_node(n + 1),
            frozenset({value}),
            frozenset({value}) if dim == 1 else frozenset(),
        )
        arrows.append(a)
        routes[a.source] = routes[a.source].with_constant(a.port, output=True)
        routes[a.target] = routes[a.target].with_constant(a.port, output=False)

    return RoutedGraph.build(g.nodes, arrows, routes)


def split_node_id(done: Iterable[int]) -> str:
    """Узел `V̂_{n+1}^{K_n}` графа с расщепленными узлами."""

    done = AgentSet.of(done)
    return f"{v_node(done.size + 1)}{done}"


def bar_label(label: str) -> str:
    """Метка дополнительной одномерной ветви расщепленного узла."""

    return f"~{label}"


def split_graph(n_agents: int) -> RoutedGraph:
    """
    Граф с расщепленными V-узлами: отдельный узел для каждого множества `K_n`.

    Промежуточные узлы имеют две ветви: основную `{K_n}` и одномерную
    `~{K_n}`, в которой все стрелки несут нулевое значение.
    """

    if n_agents < 1:
        raise InvalidGraph("Число агентов должно быть положительным")

    everyone = frozenset(agents(n_agents))
    null = frozenset({NULL}) if n_agents > 1 else frozenset()
    first, last = split_node_id(()), split_node_id(everyone)
    arrows = [
        Arrow(PAST, None, first, frozenset({PAST_VALUE})),
        Arrow(FUTURE, last, None, frozenset({FUTURE_VALUE})),
    ]

    for n in agents(n_agents):
        for done in subsets(n_agents, n):
            value = frozenset({AgentSet.of(done)}) | null

            for k in sorted(done):
                source = split_node_id(done - {k})
                arrows.append(Arrow(arrow_id(source, a_node(k)), source, a_node(k), value, null))
                target = split_node_id(done)
                arrows.append(Arrow(arrow_id(a_node(k), target), a_node(k), target, value, null))

    nodes = [split_node_id(x) for n in range(n_agents + 1) for x in subsets(n_agents, n)]
    nodes += [a_node(k) for k in agents(n_agents)]
    ins = {x: [a for a in arrows if a.target == x] for x in nodes}
    outs = {x: [a for a in arrows if a.source == x] for x in nodes}
    routes = {}

    for n in range(n_agents + 1):
        for done in subsets(n_agents, n):
            node, value = split_node_id(done), AgentSet.of(done)

            if n:
                k_entries = [{arrow_id(a_node(k), node): value} for k in sorted(done)]

            else:
                k_entries = [{PAST: PAST_VALUE}]

            if n < n_agents:
                l_entries = [{arrow_id(node, a_node(x)): value.add(x)} for x in sorted(everyone - done)]

            else:
                l_entries = [{FUTURE: FUTURE_VALUE}]

            entries = [(k, l, str(value)) for k in k_entries for l in l_entries]

            if 0 < n < n_agents:
                entries.append(({}, {}, bar_label(str(value))))

            routes[node] = make_route(ins[node], outs[node], entries)

    for k in agents(n_agents):
        node = a_node(k)
        entries = []

        for n in agents(n_agents):
            for done in subsets(n_agents, n):
                if k in done:
                    value = AgentSet.of(done)
                    entries.append(
                        (
                            {arrow_id(split_node_id(done - {k}), node): value},
                            {arrow_id(node, split_node_id(done)): value},
                            str(value.remove(k)),
                        )
                    )

        routes[node] = make_route(ins[node], outs[node], entries)

    return RoutedGraph.build(nodes, arrows, routes)


def _active_axes(t: SectorTensor, key: IndexTuple) -> dict[str, tuple[IndexValue, int]]:
    """Активные (ненулевые) оси блока: значение сектора и номер оси."""

    return {sp.label: (v, i) for i, (sp, v) in enumerate(zip(t.systems, key)) if v != NULL}


def rekey_block(
    t: SectorTensor,
    key: IndexTuple,
    block: np.ndarray,
    systems: Sequence[SectoredSpace],
    rename: Callable[[str, IndexValue], str],
) -> tuple[IndexTuple, np.ndarray]:
    """
    Переносит блок на новые системы.

    Системы с нулевым значением отбрасываются, остальные переименовываются
    функцией `rename`; недостающие системы нового набора получают
    нулевое значение размерности один.
    """

    axes = _active_axes(t, key)
    positions = sorted(i for _, i in axes.values())
    data = block.reshape([block.shape[i] for i in positions])
    active = {rename(x, v): (v, positions.index(i)) for x, (v, i) in axes.items()}
    labels = [sp.label for sp in systems]

    if missing := set(active) - set(labels):
        raise InvalidGraph(f"Системы {sorted(missing)} отсутствуют у узла")

    data = data.transpose([active[x][1] for x in labels if x in active])
    values = tuple(active[x][0] if x in active else NULL for x in labels)
    shape = tuple(sp.dims[v] for sp, v in zip(systems, values))

    return values, data.reshape(shape)


def _branch_matrices(
    g: RoutedGraph, node: str, t: SectorTensor
) -> dict[str, np.ndarray]:
    """Матрица узла на каждой ветви: от входных секторов ветви к выходным."""

    route = g.route(node)
    pin = [t.labels.index(x) for x in route.in_ids]
    pout = [t.labels.index(x) for x in route.out_ids]
    spaces = [t.systems[i] for i in (*pin, *pout)]

    def _dim(key: IndexTuple, side: Sequence[SectoredSpace]) -> int:
        return prod(sp.dims[v] for sp, v in zip(side, key))

    result = {}

    for br in route.branches:
        cols = sorted(br.inputs, key=tuple_key)
        rows = sorted(br.outputs, key=tuple_key)
        cdims = [_dim(x, spaces[: len(pin)]) for x in cols]
        rdims = [_dim(x, spaces[len(pin) :]) for x in rows]
        coff = dict(zip(cols, it.accumulate([0, *cdims])))
        roff = dict(zip(rows, it.accumulate([0, *rdims])))
        matrix = np.zeros((sum(rdims), sum(cdims)), dtype=complex)

        for key, block in t.blocks.items():
            k = tuple(key[i] for i in pin)
            l = tuple(key[i] for i in pout)

            if k not in coff or l not in roff:
                continue

            data = block.transpose([*pin, *pout])
            din = _dim(k, spaces[: len(pin)])
            matrix[roff[l] : roff[l] + data.size // din, coff[k] : coff[k] + din] = (
                data.reshape(din, -1).T
            )

        result[br.label] = matrix

    return result


def is_partial_isometry(matrix: np.ndarray, atol: float) -> bool:
    return float(np.linalg.norm(matrix @ matrix.conj().T @ matrix - matrix)) <= atol


def _split_rename(g: RoutedGraph) -> Callable[[str, IndexValue], str]:
    ids = {a.id for a in g.arrows}

    def _rename(label: str, value: IndexValue) -> str:
        if label in (PAST, FUTURE) or label not in ids or not isinstance(value, AgentSet):
            return label

        a = g.arrow(label)
        source, target = a.source or "", a.target or ""

        if is_v_node(source):
            source = split_node_id(value.members - {int(target.removeprefix("A"))})

        if is_v_node(target):
            target = split_node_id(value.members)

        return arrow_id(source, target)

    return _rename


def _split_owner(g: RoutedGraph, node: str, t: SectorTensor, key: IndexTuple) -> str:
    """Узел графа с расщепленными узлами, которому принадлежит блок."""

    if not is_v_node(node):
        return node

    for a in g.in_arrows(node):
        if a.id in t.labels and isinstance(v := key[t.labels.index(a.id)], AgentSet):
            return split_node_id(v.members)

    return node


def split_fleshing(
    s: SkeletalSupermap,
    f: FleshingOut,
    split: SkeletalSupermap,
    atol: float | None = None,
) -> FleshingOut:
    """
    Наполнение графа с расщепленными узлами по наполнению обобщенного графа.

    Блоки ветви `K_n` узла `V_{n+1}` переходят в узел `V̂_{n+1}^{K_n}`,
    одномерная ветвь получает амплитуду один.
    """

    atol = resolve_atol(atol)
    g = s.graph
    ids = {a.id for a in g.arrows}
    rename = _split_rename(g)
    blocks: dict[str, dict[IndexTuple, np.ndarray]] = {}
    extras: dict[str, list[SectoredSpace]] = {}

    for node, t in f.tensors.items():
        if is_v_node(node):
            for label, matrix in _branch_matrices(g, node, t).items():
                if not is_partial_isometry(matrix, atol):
                    raise NotIsometryFleshing(f"Ветвь {node}^{label} не является частичной изометрией")

        extra = [sp for sp in t.systems if sp.label not in ids]

        for key, block in t.blocks.items():
            owner = _split_owner(g, node, t, key)
            extras[owner] = extra
            ins, outs = split.node_spaces(owner)
            systems = SectorTensor.of((*ins, *outs, *extra), {}).systems
            new_key, new_block = rekey_block(t, key, block, systems, rename)
            blocks.setdefault(owner, {})[new_key] = new_block

    tensors = {}

    for node in split.graph.nodes:
        ins, outs = split.node_spaces(node)
        node_blocks = blocks.get(node, {})
        systems = SectorTensor.of((*ins, *outs, *extras.get(node, ())), {}).systems

        if all(NULL in sp.dims for sp in systems):
            node_blocks[tuple(NULL for _ in systems)] = np.ones((1,) * len(systems), dtype=complex)

        tensors[node] = SectorTensor(systems, node_blocks)

    _LOGGER.debug("Наполнение графа с расщепленными узлами: %d узлов", len(tensors))

    return FleshingOut(tensors, f.adapters)


class MergeDirection(enum.StrEnum):
    """Направление слияния"""

    UP = "up"
    """Единственный потомок V-узла является A-узлом"""
    DOWN = "down"
    """Единственный родитель V-узла является A-узлом"""


def _associated(g: RoutedGraph, first: str, second: str) -> dict[str, set[str]]:
    """Ветви `second`, реализуемые одновременно с каждой ветвью `first`."""

    result: dict[str, set[str]] = {br.label: set() for br in g.branches(first)}

    for row in g.assignments:
        result[g.branch_at(first, row)].add(g.branch_at(second, row))

    return result


def check_merge(g: RoutedGraph, v: str, a: str, direction: MergeDirection) -> ValidityReport:
    """Проверяет условия слияния узла `v` с узлом `a`."""

    if v == a or v not in g.routes or a not in g.routes:
        raise PreconditionFailed(f"Некорректная пара узлов {v}, {a}")

    match direction:
        case MergeDirection.UP:
            links, back = g.out_arrows(v), g.arrows_between(a, v)
            if not links or any(x.target != a for x in links):
                raise PreconditionFailed(f"{a} не является единственным потомком {v}")
        case MergeDirection.DOWN:
            links, back = g.in_arrows(v), g.arrows_between(v, a)
            if not links or any(x.source != a for x in links):
                raise PreconditionFailed(f"{a} не является единственным родителем {v}")

    if back:
        raise PreconditionFailed(f"Стрелки между {v} и {a} идут в обоих направлениях")

    report = is_valid(g)

    if not report.valid:
        raise PreconditionFailed(f"Граф некорректен: {report.summary()}")

    for label, partners in _associated(g, a, v).items():
        if len(partners) != 1:
            raise PreconditionFailed(
                f"Ветвь {a}^{label} связана с {len(partners)} ветвями {v} вместо одной"
            )

    for label, partners in _associated(g, v, a).items():
        if not partners:
            raise PreconditionFailed(f"Ветвь {v}^{label} не связана ни с одной ветвью {a}")

    return report


def _labels_unique(r: Relation) -> bool:
    try:
        return bool(r.branches)

    except InvalidRelation:
        return False


def merge_nodes(g: RoutedGraph, v: str, a: str, direction: MergeDirection) -> RoutedGraph:
    """
    Сливает V-узел с соседним A-узлом.

    Объединенный узел сохраняет имя `a`, его маршрут является композицией
    маршрутов по соединяющим стрелкам, метки ветвей берутся от `a`.
    """

    check_merge(g, v, a, direction)

    route_v, route_a = g.route(v), g.route(a)
    shared = [x.id for x in g.arrows if {x.source, x.target} == {v, a}]
    merged = compose([route_v, route_a], shared)
    joined = join_assignments([route_v, route_a])
    labels = {}

    for row in joined:
        key = joined.project(row, merged.in_ids)
        labels[key] = route_a.branch_of(joined.project(row, route_a.in_ids)).label

    merged = dc.replace(merged, labels=labels)

    if merged.is_branched and not _labels_unique(merged):
        merged = dc.replace(merged, labels={})

    arrows = []

    for x in g.arrows:
        if x.id in shared:
            continue

        if x.source == v:
            x = dc.replace(x, source=a)

        if x.target == v:
            x = dc.replace(x, target=a)

        arrows.append(x)

    routes = {k: r for k, r in g.routes.items() if k not in (v, a)} | {a: merged}
    result = RoutedGraph.build((x for x in g.nodes if x != v), arrows, routes)

    _LOGGER.debug("Слияние %s и %s (%s): %d стрелок удалено", v, a, direction, len(shared))

    return result


def merge_fleshing(fa: SectorTensor, fv: SectorTensor, direction: MergeDirection) -> SectorTensor:
    """Тензор объединенного узла: связующее произведение тензоров узлов."""

    if direction is MergeDirection.UP:
        return fv.link(fa)

    return fa.link(fv)


def merge_fleshed(f: FleshingOut, v: str, a: str, direction: MergeDirection) -> FleshingOut:
    merged = merge_fleshing(f.tensors[a], f.tensors[v], direction)
    return f.replace((v, a), {a: merged}, (a,) if a in f.adapters else ())


@dc.dataclass(frozen=True)
class MergeStep:
    """Шаг слияния"""

    v: str
    """Поглощаемый V-узел"""
    a: str
    """A-узел"""
    direction: MergeDirection
    """Направление"""


def merge_plan(n_agents: int) -> list[MergeStep]:
    """
    Последовательность слияний графа с расщепленными узлами.

    `V̂_2^{k}` сливается с `A_k` вниз, а при `N ≥ 3` также
    `V̂_N^{K}` сливается с `A_{𝒩\\K}` вверх.
    """

    everyone = frozenset(agents(n_agents))
    result = [MergeStep(split_node_id({k}), a_node(k), MergeDirection.DOWN) for k in everyone]

    if n_agents >= 3:
        for done in subsets(n_agents, n_agents - 1):
            (k,) = everyone - done
            result.append(MergeStep(split_node_id(done), a_node(k), MergeDirection.UP))

    return sorted(result, key=lambda x: (x.direction != MergeDirection.DOWN, x.a))


def merged_graph(n_agents: int) -> RoutedGraph:
    g = split_graph(n_agents)

    for step in merge_plan(n_agents):
        g = merge_nodes(g, step.v, step.a, step.direction)

    return g


def drop_arrows(g: RoutedGraph, ids: Iterable[str]) -> RoutedGraph:
    """Удаляет стрелки, оставляя в маршрутах только пары с нулевым значением на них."""

    ids = frozenset(ids)

    if unknown := ids - {x.id for x in g.arrows}:
        raise InvalidGraph(f"Неизвестные стрелки: {sorted(unknown)}")

    routes = {}

    for node, route in g.routes.items():
        if drop := ids & {*route.in_ids, *route.out_ids}:
            route = route.without_arrows(drop)

        routes[node] = route

    return RoutedGraph.build(g.nodes, (x for x in g.arrows if x.id not in ids), routes)


@dc.dataclass(frozen=True)
class RemovalReport:
    """Результат удаления незаселенных стрелок"""

    removed: tuple[str, ...]
    """Удаленные стрелки"""
    vanished: tuple[BranchNode, ...]
    """Исчезнувшие ветви"""
    validity: ValidityReport
    """Корректность полученного графа"""


def _live_rows(g: RoutedGraph, f: FleshingOut) -> list[IndexTuple]:
    assignments = g.assignments
    live = []

    for row in assignments:
        for node, t in f.tensors.items():
            key = tuple(
                row[assignments.position[sp.label]] if sp.label in assignments.position else sp.values[0]
                for sp in t.systems
            )

            if is_zero(t.blocks.get(key)):
                break

        else:
            live.append(row)

    return live


def populated_arrows(g: RoutedGraph, f: FleshingOut) -> frozenset[str]:
    """Стрелки, несущие ненулевое значение хотя бы в одном вкладе наполнения."""

    assignments = g.assignments
    result = set()

    for row in _live_rows(g, f):
        for x in g.arrows:
            if row[assignments.position[x.id]] not in x.one_dim:
                result.add(x.id)

    return frozenset(result)


def reduce_fleshing(f: FleshingOut, removed: Iterable[str]) -> FleshingOut:
    """Наполнение без систем удаленных стрелок (остаются нулевые секторы)."""

    removed = frozenset(removed)
    tensors = {}

    for node, t in f.tensors.items():
        drop = {x: NULL for x in t.labels if x in removed}
        tensors[node] = t.drop_systems(drop) if drop else t

    return FleshingOut(tensors, f.adapters)


def remove_arrows(g: RoutedGraph, source: QcqcSpec | FleshingOut) -> tuple[RoutedGraph, RemovalReport]:
    """
    Удаляет стрелки, на которых наполнение заселяет только нулевой сектор.

    Заселенность определяется точными нулями блоков операторов.
    """

    match source:
        case QcqcSpec():
            s = skeletal(g, qcqc_dimensions(g, source))
            f = flesh_out(s, source)
        case FleshingOut():
            f = source
        case _:
            raise TypeError(f"Неподдерживаемый источник наполнения: {type(source).__name__}")

    populated = populated_arrows(g, f)
    removed = tuple(x.id for x in g.arrows if x.id not in populated and NULL in x.alphabet)
    result = drop_arrows(g, removed)

    before = {BranchNode(n, br.label) for n in g.nodes for br in g.branches(n)}
    after = {BranchNode(n, br.label) for n in result.nodes for br in result.branches(n)}
    vanished = tuple(sorted(before - after, key=lambda x: x.sort_key))

    _LOGGER.debug("Удалено стрелок: %d, исчезло ветвей: %d", len(removed), len(vanished))

    return result, RemovalReport(removed, vanished, is_valid(result))


def local_arrow_id(k: int, l: int, n: int) -> str:
    return arrow_id(a_node(k), a_node(l), f"@{n}")


def local_graph(n_agents: int) -> RoutedGraph:
    """
    Граф процесса, локализованного на агентах.

    Агент, получивший множество `K_n`, сам передает управление следующему
    агенту `ℓ ∉ K_n` со значением `K_n ∪ {ℓ}`, последний агент передает
    управление узлу `V_{N+1}`.
    """

    if n_agents < 2:
        raise InvalidGraph("Локализованный граф требует не менее двух агентов")

    everyone = frozenset(agents(n_agents))
    null = frozenset({NULL})
    first, last = v_node(1), v_node(n_agents + 1)
    arrows = [
        Arrow(PAST, None, first, frozenset({PAST_VALUE})),
        Arrow(FUTURE, last, None, frozenset({FUTURE_VALUE})),
    ]

    for k in everyone:
        arrows.append(Arrow(arrow_id(first, a_node(k)), first, a_node(k), frozenset({AgentSet.of({k})}) | null, null))
        arrows.append(Arrow(arrow_id(a_node(k), last), a_node(k), last, frozenset({AgentSet.of(everyone)}) | null, null))

        for l in everyone - {k}:
            for n in range(2, n_agents + 1):
                values = frozenset(AgentSet.of(x) for x in subsets(n_agents, n) if {k, l} <= x)
                arrows.append(Arrow(local_arrow_id(k, l, n), a_node(k), a_node(l), values | null, null))

    nodes = [first, last, *(a_node(k) for k in everyone)]
    ins = {x: [a for a in arrows if a.target == x] for x in nodes}
    outs = {x: [a for a in arrows if a.source == x] for x in nodes}

    routes = {
        first: make_route(
            ins[first],
            outs[first],
            (({PAST: PAST_VALUE}, {arrow_id(first, a_node(k)): AgentSet.of({k})}, "{}") for k in everyone),
        ),
        last: make_route(
            ins[last],
            outs[last],
            (
                ({arrow_id(a_node(k), last): AgentSet.of(everyone)}, {FUTURE: FUTURE_VALUE}, str(AgentSet.of(everyone)))
                for k in everyone
            ),
        ),
    }

    for l in everyone:
        node = a_node(l)
        entries = []

        for n in agents(n_agents):
            for done in subsets(n_agents, n):
                if l not in done:
                    continue

                value = AgentSet.of(done)

                if n == 1:
                    k_entries = [{arrow_id(first, node): value}]

                else:
                    k_entries = [{local_arrow_id(k, l, n): value} for k in sorted(done - {l})]

                if n == n_agents:
                    l_entries = [{arrow_id(node, last): value}]

                else:
                    l_entries = [
                        {local_arrow_id(l, m, n + 1): value.add(m)} for m in sorted(everyone - done)
                    ]

                entries += [(k, x, str(value.remove(l))) for k in k_entries for x in l_entries]

        routes[node] = make_route(ins[node], outs[node], entries)

    return RoutedGraph.build(nodes, arrows, routes)


def split_node(g: RoutedGraph, node: str) -> RoutedGraph:
    """
    Расщепляет узел на отдельный узел для каждой ветви.

    Каждое ненулевое значение каждой стрелки узла должно принадлежать
    единственной ветви. Стрелка расщепляется на копии для ветвей, которые
    ее используют; если все стрелки копии допускают нулевое значение,
    новый узел получает дополнительную ветвь, где все стрелки нулевые.
    """

    route = g.route(node)

    try:
        branches = route.branches

    except (NotBranched, InvalidRelation) as e:
        raise NotSplittable(f"Маршрут узла {node} не разветвлен: {e}")

    ports = [(p, True) for p in route.inputs] + [(p, False) for p in route.outputs]
    owner: dict[tuple[str, IndexValue], str] = {}
    used: dict[str, list[str]] = {br.label: [] for br in branches}

    for br in branches:
        tuples = [(*k, *l) for k in br.inputs for l in br.outputs]

        for i, (p, _) in enumerate(ports):
            values = {t[i] for t in tuples} - {NULL}

            for x in values:
                if owner.setdefault((p.id, x), br.label) != br.label:
                    raise NotSplittable(f"Значение {p.id}={x} принадлежит нескольким ветвям {node}")

            if values:
                used[br.label].append(p.id)

        if not used[br.label]:
            raise NotSplittable(f"Ветвь {node}^{br.label} не использует ни одной стрелки")

    for p, _ in ports:
        users = {owner[p.id, x] for x in p.alphabet if (p.id, x) in owner}

        if len(users) > 1 and NULL not in p.alphabet:
            raise NotSplittable(f"Стрелка {p.id} используется несколькими ветвями без нулевого значения")

    new_nodes = {br.label: f"{node}{br.label}" for br in branches}
    copies: dict[str, dict[str, Arrow]] = {}
    arrows = [x for x in g.arrows if node not in (x.source, x.target)]

    for br in branches:
        for x in used[br.label]:
            a = g.arrow(x)
            values = frozenset(v for v in a.alphabet if owner.get((x, v)) == br.label) | (a.alphabet & {NULL})
            source = new_nodes[br.label] if a.source == node else a.source
            target = new_nodes[br.label] if a.target == node else a.target
            base = arrow_id(a.source or "", a.target or "")
            suffix = a.id.removeprefix(base) if a.id.startswith(base) else ""
            new_id = a.id if a.is_open else arrow_id(source or "", target or "", suffix)
            copy = Arrow(new_id, source, target, values, a.one_dim & values)
            copies.setdefault(x, {})[br.label] = copy
            arrows.append(copy)

    routes = {k: r for k, r in g.routes.items() if k != node}

    for br in branches:
        mine = [copies[x][br.label] for x in used[br.label]]
        index = {p.id: i for i, (p, _) in enumerate(ports)}
        entries = []

        for k in br.inputs:
            for l in br.outputs:
                full = (*k, *l)
                ins = {c.id: full[index[x]] for x, c in zip(used[br.label], mine) if c.target == new_nodes[br.label]}
                outs = {c.id: full[index[x]] for x, c in zip(used[br.label], mine) if c.source == new_nodes[br.label]}
                entries.append((ins, outs, br.label))

        if all(NULL in c.alphabet for c in mine):
            entries.append(({}, {}, bar_label(br.label)))

        me = new_nodes[br.label]
        routes[me] = make_route(
            [c for c in mine if c.target == me],
            [c for c in mine if c.source == me],
            entries,
        )

    for other, r in g.routes.items():
        if other == node:
            continue

        touched = [x for x in (*r.in_ids, *r.out_ids) if x in copies]

        if touched:
            routes[other] = _split_ports(r, {x: copies[x] for x in touched}, owner)

    nodes = [x for x in g.nodes if x != node] + list(new_nodes.values())

    _LOGGER.debug("Узел %s расщеплен на %d узлов", node, len(new_nodes))

    return RoutedGraph.build(nodes, arrows, routes)


def _split_ports(
    r: Relation,
    copies: Mapping[str, Mapping[str, Arrow]],
    owner: Mapping[tuple[str, IndexValue], str],
) -> Relation:
    """Заменяет порты их копиями: значение уходит в копию своей ветви."""

    def _ports(side: tuple[Port, ...]) -> list[Port]:
        result = []

        for p in side:
            if p.id in copies:
                result += [c.port for _, c in sorted(copies[p.id].items())]

            else:
                result.append(p)

        return result

    def _tuple(side: tuple[Port, ...], t: IndexTuple) -> IndexTuple:
        result: list[IndexValue] = []

        for p, x in zip(side, t):
            if p.id in copies:
                mine = owner.get((p.id, x))
                result += [x if label == mine else NULL for label, _ in sorted(copies[p.id].items())]

            else:
                result.append(x)

        return tuple(result)

    labels = {}

    if r.is_branched:
        labels = {_tuple(r.inputs, k): br.label for br in r.branches for k in br.inputs}

    return Relation.of(
        _ports(r.inputs),
        _ports(r.outputs),
        ((_tuple(r.inputs, k), _tuple(r.outputs, l)) for k, l in r.pairs),
        labels,
    )


def bundle_parallel(g: RoutedGraph) -> RoutedGraph:
    """
    Объединяет параллельные стрелки в одну стрелку с составными значениями.

    Алфавит объединенной стрелки является декартовым произведением алфавитов,
    значение одномерно, если одномерны все его составляющие.
    """

    groups: dict[tuple[str, str], list[Arrow]] = {}

    for x in g.internal_arrows:
        groups.setdefault((x.source or "", x.target or ""), []).append(x)

    arrows = [x for x in g.arrows if x.is_open]
    routes = dict(g.routes)

    for (source, target), members in groups.items():
        if len(members) == 1:
            arrows += members
            continue

        alphabet = frozenset(Composite(v) for v in it.product(*(sorted(m.alphabet, key=lambda x: x.sort_key) for m in members)))
        one_dim = frozenset(
            c for c in alphabet if all(v in m.one_dim for v, m in zip(c.parts, members))
        )
        bundle = Arrow("+".join(m.id for m in members), source, target, alphabet, one_dim)
        arrows.append(bundle)
        routes[source] = _bundle_ports(routes[source], members, bundle)
        routes[target] = _bundle_ports(routes[target], members, bundle)

    return RoutedGraph.build(g.nodes, arrows, routes)


def _bundle_ports(r: Relation, members: Sequence[Arrow], bundle: Arrow) -> Relation:
    ids = [m.id for m in members]

    def _side(side: tuple[Port, ...], t: IndexTuple) -> tuple[list[Port], IndexTuple]:
        ports, values = [], []

        for p, x in zip(side, t):
            if p.id not in ids:
                ports.append(p)
                values.append(x)

        if any(p.id in ids for p in side):
            pos = {p.id: i for i, p in enumerate(side)}
            ports.append(bundle.port)
            values.append(Composite(tuple(t[pos[x]] for x in ids)))

        return ports, tuple(values)

    pairs = [(_side(r.inputs, k)[1], _side(r.outputs, l)[1]) for k, l in r.pairs]

    labels = {}

    if r.is_branched:
        labels = {_side(r.inputs, k)[1]: br.label for br in r.branches for k in br.inputs}

    ins, _ = _side(r.inputs, tuple(NULL for _ in r.inputs))
    outs, _ = _side(r.outputs, tuple(NULL for _ in r.outputs))

    return Relation.of(ins, outs, pairs, labels)


@dc.dataclass(frozen=True)
class TransformRecord:
    """Запись о преобразовании графа"""

    kind: str
    """Вид преобразования: `alpha`, `split-node`, `merge`, `drop`, `bundle`"""
    params: Mapping[str, Any]
    """Параметры"""
    nodes_added: tuple[str, ...] = ()
    """Добавленные узлы"""
    nodes_removed: tuple[str, ...] = ()
    """Удаленные узлы"""
    arrows_added: tuple[str, ...] = ()
    """Добавленные стрелки"""
    arrows_removed: tuple[str, ...] = ()
    """Удаленные стрелки"""

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "nodes_added": list(self.nodes_added),
            "nodes_removed": list(self.nodes_removed),
            "arrows_added": list(self.arrows_added),
            "arrows_removed": list(self.arrows_removed),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> Self:
        return cls(
            data["kind"],
            dict(data.get("params", {})),
            tuple(data.get("nodes_added", ())),
            tuple(data.get("nodes_removed", ())),
            tuple(data.get("arrows_added", ())),
            tuple(data.get("arrows_removed", ())),
        )


def apply_record(g: RoutedGraph, kind: str, params: Mapping[str, Any]) -> RoutedGraph:
    """Применяет преобразование по его виду и параметрам."""

    match kind:
        case "alpha":
            return alpha_variant(g, params["dims"])
        case "split-node":
            return split_node(g, params["node"])
        case "merge":
            return merge_nodes(g, params["v"], params["a"], MergeDirection(params["direction"]))
        case "drop":
            return drop_arrows(g, params["arrows"])
        case "bundle":
            return bundle_parallel(g)

    raise InvalidGraph(f"Неизвестное преобразование {kind!r}")


@dc.dataclass
class TransformLog:
    """Воспроизводимая история преобразований"""

    records: list[TransformRecord] = dc.field(default_factory=list)
    """Записи в порядке применения"""

    def apply(self, g: RoutedGraph, kind: str, params: Mapping[str, Any]) -> RoutedGraph:
        """Применяет преобразование и добавляет запись."""

        result = apply_record(g, kind, params)
        old_arrows, new_arrows = {x.id for x in g.arrows}, {x.id for x in result.arrows}

        self.records.append(
            TransformRecord(
                kind,
                dict(params),
                tuple(x for x in result.nodes if x not in g.routes),
                tuple(x for x in g.nodes if x not in result.routes),
                tuple(sorted(new_arrows - old_arrows)),
                tuple(sorted(old_arrows - new_arrows)),
            )
        )

        return result

    def replay(self, g: RoutedGraph) -> RoutedGraph:
        for record in self.records:
            g = apply_record(g, record.kind, record.params)

        return g

    def to_json(self) -> list[dict[str, Any]]:
        return [x.to_json() for x in self.records]

    @classmethod
    def from_json(cls, data: Iterable[Mapping[str, Any]]) -> Self:
        return cls([TransformRecord.from_json(x) for x in data])

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


def replay(log: TransformLog, g: RoutedGraph) -> RoutedGraph:
    return log.replay(g)



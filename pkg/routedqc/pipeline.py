"""
Сквозные проверки эквивалентности и применение сценариев преобразований.
"""

from __future__ import annotations

import dataclasses as dc
import json
import logging
import pathlib
from typing import Any, Iterable, Literal, Mapping

from .catalog import NamedProcess, get_process, list_processes
from .errors import InvalidGraph, InvalidSpec, UnknownProcess
from .generic import (
    FleshingOut,
    SkeletalSupermap,
    compose_fleshed,
    flesh_out,
    generic_graph,
    qcqc_dimensions,
    skeletal,
)
from .qcqc import ProcessVector, QcqcSpec, load_spec, process_vector
from .routed_graph import RoutedGraph
from .tensor import max_deviation
from .transform import (
    TransformLog,
    alpha_variant,
    merge_fleshed,
    merge_nodes,
    merge_plan,
    reduce_fleshing,
    remove_arrows,
    split_fleshing,
    split_graph,
)
from .utils import resolve_atol

_LOGGER = logging.getLogger(__name__)

type Pipeline = Literal["generic", "alpha", "split", "merged", "removed"]

PIPELINES: tuple[Pipeline, ...] = ("generic", "alpha", "split", "merged", "removed")


@dc.dataclass(frozen=True)
class VerificationResult:
    """Результат сравнения скомпонованной суперкарты с прямым построением"""

    pipeline: str
    """Использованный путь построения"""
    max_dev: float
    """Максимальное поэлементное отклонение"""
    atol: float
    """Допуск"""

    @property
    def passed(self) -> bool:
        return self.max_dev <= self.atol

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        sign = "≤" if self.passed else ">"
        return f"[{self.pipeline}] max|Δ| = {self.max_dev:.3g} {sign} {self.atol:.3g}: {verdict}"

    def to_json(self) -> dict[str, Any]:
        return {
            "pipeline": self.pipeline,
            "max_dev": self.max_dev,
            "atol": self.atol,
            "passed": self.passed,
        }


def _generic(spec: QcqcSpec) -> tuple[SkeletalSupermap, FleshingOut]:
    s = skeletal(g := generic_graph(spec.n_agents), qcqc_dimensions(g, spec))
    return s, flesh_out(s, spec)


def _split(spec: QcqcSpec) -> tuple[SkeletalSupermap, FleshingOut]:
    s, f = _generic(spec)
    split = skeletal(g := split_graph(spec.n_agents), qcqc_dimensions(g, spec))
    return split, split_fleshing(s, f, split)


def build_fleshed(spec: QcqcSpec, pipeline: Pipeline) -> tuple[SkeletalSupermap, FleshingOut]:
    """Наполненная скелетная суперкарта, построенная выбранным путем."""

    match pipeline:
        case "generic":
            return _generic(spec)

        case "alpha":
            g = alpha_variant(generic_graph(spec.n_agents), spec.d_alpha)
            s = skeletal(g, qcqc_dimensions(g, spec))
            return s, flesh_out(s, spec)

        case "split":
            return _split(spec)

        case "merged":
            s, f = _split(spec)
            g = s.graph

            for step in merge_plan(spec.n_agents):
                g = merge_nodes(g, step.v, step.a, step.direction)
                f = merge_fleshed(f, step.v, step.a, step.direction)

            return skeletal(g, s.dims), f

        case "removed":
            s, f = _generic(spec)
            g, report = remove_arrows(s.graph, f)
            _LOGGER.debug("Удалены стрелки: %s", ", ".join(report.removed))
            return skeletal(g, s.dims), reduce_fleshing(f, report.removed)

    raise InvalidSpec(f"Неизвестный путь построения {pipeline!r}")


def verify_equivalence(
    spec: QcqcSpec,
    pipeline: Pipeline = "generic",
    atol: float | None = None,
) -> VerificationResult:
    """Сравнивает композицию наполненной суперкарты с вектором процесса."""

    atol = resolve_atol(atol)
    expected = process_vector(spec, atol=atol)
    actual = compose_fleshed(*build_fleshed(spec, pipeline))
    result = VerificationResult(pipeline, max_deviation(actual.w, expected.w), atol)

    _LOGGER.debug("Проверка эквивалентности: %s", result.summary())

    return result


def composed_vector(spec: QcqcSpec, pipeline: Pipeline = "generic") -> ProcessVector:
    return compose_fleshed(*build_fleshed(spec, pipeline))


def _removal_step(g: RoutedGraph, spec: QcqcSpec | None) -> list[str]:
    if spec is None:
        raise InvalidSpec("Шаг remove требует описания процесса")

    _, report = remove_arrows(g, spec)

    return list(report.removed)


def apply_pipeline(
    g: RoutedGraph,
    steps: Iterable[Mapping[str, Any]],
    spec: QcqcSpec | None = None,
) -> tuple[RoutedGraph, TransformLog]:
    """
    Применяет шаги преобразований по порядку.

    Шаг задается объектом `{"op": ..., ...}`: `alpha` (`dims`, по умолчанию
    из описания процесса), `merge` (`v`, `a`, `direction`), `remove`
    (по описанию процесса), `split-node` (`node`), `bundle`, `drop` (`arrows`).
    """

    log = TransformLog()

    for step in steps:
        match step:
            case {"op": "alpha", **params}:
                if (dims := params.get("dims")) is None:
                    if spec is None:
                        raise InvalidSpec("Шаг alpha требует размерностей или описания процесса")

                    dims = list(spec.d_alpha)

                g = log.apply(g, "alpha", {"dims": list(dims)})
            case {"op": "merge", "v": v, "a": a, **params}:
                g = log.apply(g, "merge", {"v": v, "a": a, "direction": params.get("direction", "down")})
            case {"op": "remove"}:
                g = log.apply(g, "drop", {"arrows": _removal_step(g, spec)})
            case {"op": "split-node", "node": node}:
                g = log.apply(g, "split-node", {"node": node})
            case {"op": "bundle"}:
                g = log.apply(g, "bundle", {})
            case {"op": "drop", "arrows": arrows}:
                g = log.apply(g, "drop", {"arrows": list(arrows)})
            case _:
                raise InvalidGraph(f"Некорректный шаг преобразования: {step!r}")

    return g, log


def load_pipeline(path: str | pathlib.Path) -> list[dict[str, Any]]:
    try:
        data = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))

    except (OSError, json.JSONDecodeError) as e:
        raise InvalidGraph(f"Не удается прочитать сценарий {path}: {e}")

    match data:
        case {"steps": list(steps)}:
            return steps
        case list():
            return data

    raise InvalidGraph("Сценарий должен быть списком шагов")


def load_process(name_or_path: str, **params: Any) -> NamedProcess:
    """Справочный процесс по имени или описание процесса из JSON-файла."""

    if name_or_path in list_processes():
        return get_process(name_or_path, **params)

    path = pathlib.Path(name_or_path)

    if not path.is_file():
        raise UnknownProcess(f"{name_or_path!r} не является ни именем процесса, ни файлом")

    try:
        spec = load_spec(path.read_text(encoding="utf-8"))

    except OSError as e:
        raise InvalidSpec(f"Не удается прочитать {path}: {e}")

    return NamedProcess(path.stem, spec)

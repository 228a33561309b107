"""
Интерфейс командной строки.
"""

from __future__ import annotations

import argparse
import json
import logging
import pathlib
import sys
from typing import Any, Callable

from .branch_graph import build_branch_graph, is_valid
from .catalog import list_processes
from .errors import NotBiunivocal, RoutedQcError
from .generic import generic_graph
from .pipeline import PIPELINES, apply_pipeline, composed_vector, load_pipeline, load_process, verify_equivalence
from .qcqc import dump_spec
from .routed_graph import RoutedGraph
from .transform import alpha_variant, local_graph, merged_graph, split_graph

_LOGGER = logging.getLogger(__name__)

FAMILIES = ("generic", "split", "alpha", "merged", "local")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    """Ошибка загрузки входных данных"""


def _emit(data: Any) -> None:
    print(json.dumps(data, indent=2, ensure_ascii=False, sort_keys=True))


def _read_graph(path: pathlib.Path) -> RoutedGraph:
    try:
        return RoutedGraph.loads(path.read_text(encoding="utf-8"))

    except (OSError, RoutedQcError) as e:
        raise InputError(f"{path}: {e}")


def _process_params(name: str, args: argparse.Namespace) -> dict[str, Any]:
    params = {"d_target": args.d}

    match name:
        case "random":
            params |= {"n_agents": args.n, "seed": args.seed}
        case "fixed-order":
            params |= {"n_agents": args.n}
        case "switch" | "grenoble" | "zurich":
            pass
        case _:
            return {}

    return params


def _family(name: str, n: int, alpha: list[int] | None) -> RoutedGraph:
    match name:
        case "generic":
            return generic_graph(n)
        case "split":
            return split_graph(n)
        case "alpha":
            return alpha_variant(generic_graph(n), alpha or [1] * n)
        case "merged":
            return merged_graph(n)
        case "local":
            return local_graph(n)

    raise InputError(f"Неизвестное семейство графов {name!r}")


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        g = _family(args.family, args.n, args.alpha)

    except RoutedQcError as e:
        raise InputError(str(e))

    print(g.dumps())

    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    report = is_valid(_read_graph(args.graph))

    if args.json:
        _emit(report.to_json())

    else:
        print(report.summary())

    return EXIT_OK if report.valid else EXIT_FAILED


def cmd_branch_graph(args: argparse.Namespace) -> int:
    try:
        bg = build_branch_graph(_read_graph(args.graph))

    except NotBiunivocal as e:
        print(str(e), file=sys.stderr)
        return EXIT_FAILED

    if args.json:
        _emit(bg.to_json())

    else:
        sys.stdout.write(bg.to_dot())

    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        process = load_process(args.process, **_process_params(args.process, args))

    except RoutedQcError as e:
        raise InputError(str(e))

    result = verify_equivalence(process.spec, args.pipeline, args.atol)

    if args.dump:
        args.dump.write_text(composed_vector(process.spec, args.pipeline).w.dump(), encoding="utf-8")

    if args.json:
        _emit({"process": process.name} | result.to_json())

    else:
        print(f"{process.name}: {result.summary()}")

    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_transform(args: argparse.Namespace) -> int:
    g = _read_graph(args.graph)

    try:
        steps = load_pipeline(args.pipeline)
        spec = load_process(args.process).spec if args.process else None

    except RoutedQcError as e:
        raise InputError(str(e))

    result, log = apply_pipeline(g, steps, spec)

    if args.log:
        args.log.write_text(log.dumps(), encoding="utf-8")

    print(result.dumps())

    return EXIT_OK


def cmd_catalog(args: argparse.Namespace) -> int:
    match args.action:
        case "list":
            for name in list_processes():
                print(name)

        case "export":
            if not args.name:
                raise InputError("Не указано имя процесса")

            try:
                process = load_process(args.name, **_process_params(args.name, args))

            except RoutedQcError as e:
                raise InputError(str(e))

            print(dump_spec(process.spec))

    return EXIT_OK


def _add_process_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=2, help="число агентов (random, fixed-order)")
    parser.add_argument("--d", type=int, default=2, help="размерность целевой системы")
    parser.add_argument("--seed", type=int, default=0, help="зерно случайного процесса")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="routedqc", description="Маршрутизированные квантовые схемы")
    parser.add_argument("-v", "--verbose", action="store_true", help="отладочный вывод")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="построить граф")
    p.add_argument("--family", choices=FAMILIES, default="generic")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=int, nargs="+", help="размерности α (семейство alpha)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="проверить корректность графа")
    p.add_argument("graph", type=pathlib.Path)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("branch-graph", help="граф ветвей")
    p.add_argument("graph", type=pathlib.Path)
    output = p.add_mutually_exclusive_group()
    output.add_argument("--dot", action="store_true", help="формат DOT (по умолчанию)")
    output.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_branch_graph)

    p = sub.add_parser("verify", help="сравнить композицию с вектором процесса")
    p.add_argument("--process", required=True, help="имя справочного процесса или JSON-файл")
    p.add_argument("--pipeline", choices=PIPELINES, default="generic")
    p.add_argument("--atol", type=float)
    p.add_argument("--dump", type=pathlib.Path, help="записать скомпонованный вектор")
    p.add_argument("--json", action="store_true")
    _add_process_options(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="применить сценарий преобразований")
    p.add_argument("graph", type=pathlib.Path)
    p.add_argument("pipeline", type=pathlib.Path)
    p.add_argument("--process", help="описание процесса для шагов alpha и remove")
    p.add_argument("--log", type=pathlib.Path, help="записать журнал преобразований")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("catalog", help="справочные процессы")
    p.add_argument("action", choices=("list", "export"))
    p.add_argument("name", nargs="?")
    _add_process_options(p)
    p.set_defaults(func=cmd_catalog)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    func: Callable[[argparse.Namespace], int] = args.func

    try:
        return func(args)

    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    except RoutedQcError as e:
        _LOGGER.debug("Команда завершилась ошибкой", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED

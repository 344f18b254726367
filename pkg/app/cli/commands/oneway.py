"""`oneway`: search for a one-way discrimination witness."""

import argparse
from pathlib import Path

from app.cli.output import emit, stopwatch
from app.models.report import RunReport
from app.models.search import GramSearchProblem
from app.services.onewaysearch import prop4_unitaries, search_witness
from app.utils.exceptions import InvalidArgument, handle_cli_exceptions


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def load_problem(args) -> GramSearchProblem:
    if args.file:
        path = Path(args.file)
        if not path.exists():
            raise InvalidArgument(f"problem file not found: {path}")
        try:
            return GramSearchProblem.model_validate_json(path.read_text())
        except ValueError as e:
            raise InvalidArgument(f"invalid problem file {path}: {e}") from e
    return prop4_unitaries()


@handle_cli_exceptions
def run_oneway(args) -> int:
    problem = load_problem(args)
    with stopwatch() as elapsed:
        result = search_witness(problem, args.restarts, seed=args.seed)

    messages = [
        f"problem={problem.name or args.file} d={problem.d} unitaries={len(problem.unitaries)}",
        f"verdict={result.verdict} best objective={result.best_objective:.6e} "
        f"restarts={result.restarts}",
    ]
    if result.note:
        messages.append(result.note)
    report = RunReport(
        command="oneway",
        parameters={"problem": args.file or args.problem or "prop4", "restarts": args.restarts},
        seed=args.seed,
        passed=True,
        search=[result],
        messages=messages,
        wall_clock_seconds=elapsed(),
    )
    return emit(report, args.json)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "oneway", parents=parents, help="Search for a one-way LOCC feasibility witness"
    )
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--problem", choices=["prop4"], help="Built-in problem (default: prop4)")
    source.add_argument("--file", help="GramSearchProblem JSON file")
    parser.add_argument("--restarts", type=positive_int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=run_oneway)

"""`verify`: exhaustive verification of the built-in marking protocols."""

import logging

from app.cli.output import emit, stopwatch
from app.models.report import RunReport
from app.services.ensembles import b3_set, bell_basis, x4_set
from app.services.locc import communication_directions
from app.services.marking import (
    build_x4_protocol,
    catalytic_b3_protocol,
    catalytic_b4_protocol,
    verify_marking,
)
from app.utils.exceptions import handle_cli_exceptions


logger = logging.getLogger(__name__)

X4_AVERAGE_EBITS = 3.0
LEDGER_TOL = 1e-9


def _experiment(name: str):
    """(protocol, set, m, budget, expected (delta, epsilon) or None)."""
    if name == "x4":
        return build_x4_protocol(), x4_set(), 4, None, None
    if name == "b4-catalytic":
        protocol, budget = catalytic_b4_protocol()
        return protocol, bell_basis(), 4, budget, (2.0, 1.0)
    protocol, budget = catalytic_b3_protocol()
    return protocol, b3_set(), 3, budget, (1.0, 1.0)


@handle_cli_exceptions
def run_verify(args) -> int:
    with stopwatch() as elapsed:
        protocol, s, m, budget, expected = _experiment(args.set_name)
        verdict, ledger = verify_marking(protocol, s, m, budget=budget)

    messages = [
        f"set={s.name} m={m} assignments={len(verdict.assignments)} perfect={verdict.perfect}",
        f"average residual = {ledger.average_residual_ebits:.9f} ebits "
        f"(min {ledger.min_residual_ebits:.6f}, max {ledger.max_residual_ebits:.6f})",
    ]
    passed = verdict.perfect
    if expected is None:
        passed = passed and abs(ledger.average_residual_ebits - X4_AVERAGE_EBITS) <= LEDGER_TOL
    else:
        delta, epsilon = expected
        messages.append(
            f"catalytic budget: delta={ledger.budget.supplied_ebits:g} "
            f"epsilon={ledger.returned_ebits:.9f} surplus={ledger.surplus_ebits:.9f}"
        )
        passed = (
            passed
            and abs(ledger.budget.supplied_ebits - delta) <= LEDGER_TOL
            and abs(ledger.returned_ebits - epsilon) <= LEDGER_TOL
        )
    directions = set()
    for leaf in ledger.leaves:
        directions |= communication_directions(leaf.transcript)
    messages.append(
        "classical communication: " + ", ".join(f"{a}->{b}" for a, b in sorted(directions))
    )

    report = RunReport(
        command="verify",
        parameters={"set": args.set_name},
        passed=passed,
        verdicts=[verdict],
        ledgers=[ledger],
        messages=messages,
        wall_clock_seconds=elapsed(),
    )
    return emit(report, args.json)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "verify", parents=parents, help="Verify a built-in marking protocol on every assignment"
    )
    parser.add_argument("set_name", choices=["x4", "b4-catalytic", "b3-catalytic"])
    parser.set_defaults(handler=run_verify)

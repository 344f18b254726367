"""`bounds` and `rate`: counting arguments and communication rates."""

from app.cli.commands.oneway import positive_int
from app.cli.output import emit
from app.models.report import RunReport
from app.services.ensembles import (
    b3_set,
    bell_basis,
    counting_fact_check,
    rate_compare,
    unmarkable_by_counting,
)
from app.utils.exceptions import handle_cli_exceptions


@handle_cli_exceptions
def run_bounds(args) -> int:
    unmarkable = unmarkable_by_counting(args.K, args.d)
    facts = [counting_fact_check(bell_basis(), 4), counting_fact_check(b3_set(), 2)]
    messages = [
        f"K={args.K} d={args.d}: K! > d^K is {unmarkable}"
        + ("" if unmarkable else " (bound silent)")
    ]
    messages += [f"{f.set_name} m={f.m}: {f.note}" for f in facts]
    report = RunReport(
        command="bounds",
        parameters={"K": args.K, "d": args.d},
        passed=True,
        unmarkable_by_counting=unmarkable,
        bounds=facts,
        messages=messages,
    )
    return emit(report, args.json)


@handle_cli_exceptions
def run_rate(args) -> int:
    rates = rate_compare(args.n, args.d, args.k)
    report = RunReport(
        command="rate",
        parameters={"n": args.n, "d": args.d, "k": args.k},
        passed=True,
        rates=[rates],
        messages=[
            f"n={rates.n} d={rates.d} k={rates.k}: "
            f"discrimination {rates.lsd_rate:.9f} bits/qudit, "
            f"marking {rates.lsm_rate:.9f} bits/qudit"
        ],
    )
    return emit(report, args.json)


def register(subparsers, parents) -> None:
    bounds = subparsers.add_parser(
        "bounds", parents=parents, help="Counting bound K! > d^K and entangled-set fact checks"
    )
    bounds.add_argument("--K", type=positive_int, required=True)
    bounds.add_argument("--d", type=int, required=True)
    bounds.set_defaults(handler=run_bounds)

    rate = subparsers.add_parser(
        "rate", parents=parents, help="Bits per qudit: discrimination vs marking"
    )
    rate.add_argument("--n", type=positive_int, required=True)
    rate.add_argument("--d", type=int, required=True)
    rate.add_argument("--k", type=positive_int, required=True)
    rate.set_defaults(handler=run_rate)

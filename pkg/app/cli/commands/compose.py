"""`compose`: build a marking protocol from a smaller one and verify it."""

import logging

from app.cli.output import emit, stopwatch
from app.models.report import RunReport
from app.services.ensembles import product_basis, product_lsd_protocol
from app.services.marking import (
    compose_m_to_nm,
    lsm_from_lsd,
    product_extend,
    verify_marking,
)
from app.utils.exceptions import InvalidArgument, handle_cli_exceptions


logger = logging.getLogger(__name__)

SOURCES = {"product4": product_basis}


def build_composed(s, m_from: int, m_to: int):
    """Protocol for m_to-marking of s starting from the local discrimination protocol.

    Block composition is used when m_from divides m_to; otherwise the product-set extension
    is applied one slot at a time.
    """
    if not 1 <= m_from <= m_to:
        raise InvalidArgument(f"need 1 <= --from <= --to, got {m_from} and {m_to}")
    if m_to > s.size:
        raise InvalidArgument(f"cannot mark {m_to} states of the {s.size}-member set '{s.name}'")
    lsd = product_lsd_protocol(s)
    protocol = lsd
    for m in range(1, m_from):
        protocol = product_extend(protocol, s, m)
    if m_to % m_from == 0:
        if m_from == 1:
            return lsm_from_lsd(lsd, s, m_to), "lsm_from_lsd"
        return compose_m_to_nm(protocol, s, m_from, m_to // m_from), "compose_m_to_nm"
    for m in range(m_from, m_to):
        protocol = product_extend(protocol, s, m)
    return protocol, "product_extend"


@handle_cli_exceptions
def run_compose(args) -> int:
    s = SOURCES[args.source]()
    with stopwatch() as elapsed:
        protocol, method = build_composed(s, args.m_from, args.m_to)
        verdict, ledger = verify_marking(protocol, s, args.m_to)

    report = RunReport(
        command="compose",
        parameters={"source": args.source, "from": args.m_from, "to": args.m_to, "method": method},
        passed=verdict.perfect,
        verdicts=[verdict],
        ledgers=[ledger],
        messages=[
            f"{method}: {args.m_from}-marking -> {args.m_to}-marking of {s.name}",
            f"assignments={len(verdict.assignments)} perfect={verdict.perfect}",
        ],
        wall_clock_seconds=elapsed(),
    )
    return emit(report, args.json)


def register(subparsers, parents) -> None:
    parser = subparsers.add_parser(
        "compose", parents=parents, help="Compose and verify a larger marking protocol"
    )
    parser.add_argument("source", choices=sorted(SOURCES))
    parser.add_argument("--from", dest="m_from", type=int, required=True)
    parser.add_argument("--to", dest="m_to", type=int, required=True)
    parser.set_defaults(handler=run_compose)

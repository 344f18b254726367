"""Marking protocols, protocol composers and exhaustive marking verification.

Slots are 0-based: the state handed out first sits in slot 0. Set members are addressed by
their 0-based index in the StateSet, so the X4 states chi_1..chi_4 are indices 0..3.
"""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from itertools import permutations
import logging

from app.core.config import settings
from app.models.ensemble import StateSet
from app.models.marking import (
    AssignmentResult,
    CatalyticBudget,
    EntanglementLedger,
    LeafRecord,
    MarkingVerdict,
)
from app.models.protocol import (
    Conclude,
    LocalMeasure,
    LocalPrepare,
    ProtocolNode,
    Teleport,
)
from app.models.state import Bipartition, PartyLayout
from app.services import qcore
from app.services.ensembles import (
    ALICE,
    BOB,
    b3_set,
    bell_basis,
    bell_labels,
    instance_layout,
    part_roles,
    x4_set,
)
from app.services.locc import (
    ProtocolExecutor,
    bell_pair_discriminator,
    correlated_pauli_step,
    leaves_of,
    map_leaves,
    relocate,
    validate_protocol,
)
from app.utils.exceptions import (
    CompositionInvalid,
    InvalidArgument,
    NotProductSet,
    UnsupportedPair,
)


logger = logging.getLogger(__name__)


# ============================================================================
# Building blocks
# ============================================================================


class _BellTensorSet:
    """Bell labels of every member part of a Bell-tensor set, placed in an instance layout."""

    def __init__(self, s: StateSet, layout: PartyLayout):
        labels = bell_labels(s)
        if any(lab is None for lab in labels):
            raise UnsupportedPair(f"set '{s.name}' has members that are not Bell-tensor products")
        self.labels: list[tuple[str, ...]] = labels
        self.roles = part_roles(s.layout)
        self.layout = layout

    def part(self, slot: int, role: str) -> tuple[int, int]:
        return self.layout.factor(slot, ALICE, role), self.layout.factor(slot, BOB, role)

    def members_by_label(self, role: str) -> dict[str, int]:
        k = self.roles.index(role)
        return {labels[k]: i for i, labels in enumerate(self.labels)}

    def pair_step(
        self, slot: int, a: int, b: int, known: dict, infer_slot: int | None, node_id: str
    ):
        """Tell members a and b apart on `slot`; the loser goes to `infer_slot` when given."""
        if a == b or self.labels[a] == self.labels[b]:
            raise InvalidArgument(f"candidates {a} and {b} are the same state")
        k = next(k for k in range(len(self.roles)) if self.labels[a][k] != self.labels[b][k])
        pauli, classes = bell_pair_discriminator(self.labels[a][k], self.labels[b][k])
        winner = {cls: (a if label == self.labels[a][k] else b) for cls, label in classes.items()}
        children = {}
        for cls, idx in winner.items():
            assignment = {**known, slot: idx}
            if infer_slot is not None:
                assignment[infer_slot] = b if idx == a else a
            children[cls] = Conclude(id=f"{node_id}.{cls}", assignment=assignment)
        fa, fb = self.part(slot, self.roles[k])
        return correlated_pauli_step(
            (ALICE, fa), (BOB, fb), pauli, children["C"], children["AC"], node_id=node_id
        )

    def teleport_and_identify(
        self,
        sender: str,
        source_slot: int,
        resource: tuple[int, int],
        resource_slot: int,
        role: str,
        outcomes: dict[int, ProtocolNode],
        node_id: str,
    ) -> Teleport:
        """Teleport the sender's half of `source_slot`'s part and Bell-measure it at the receiver.

        `resource` is (sender-side factor, receiver-side factor) of the pair held in
        `resource_slot`; `outcomes` maps the member index revealed by the Bell measurement to the
        subtree that follows.
        """
        receiver = BOB if sender == ALICE else ALICE
        fa, fb = self.part(source_slot, role)
        source, kept = (fa, fb) if sender == ALICE else (fb, fa)
        # Bell vectors are written (alice, bob); the teleported half lands on resource[1]
        measured = (resource[1], kept) if sender == ALICE else (kept, resource[1])
        by_label = self.members_by_label(role)
        children = {
            label: outcomes[idx] for label, idx in by_label.items() if idx in outcomes
        }
        return Teleport(
            id=f"{node_id}.tp",
            sender=sender,
            receiver=receiver,
            source_factor=source,
            resource_factors=resource,
            resource_slot=resource_slot,
            child=LocalMeasure(
                id=f"{node_id}.bm",
                party=receiver,
                factors=measured,
                basis="bell",
                children=children,
            ),
        )


def _others(used, pool) -> list[int]:
    return [i for i in pool if i not in used]


# ============================================================================
# Concrete protocols
# ============================================================================


def build_x4_protocol() -> ProtocolNode:
    """Perfect 4-LSM of X4 without extra entanglement.

    Step 1 splits chi_1, chi_2 (phi first parts) from chi_3, chi_4 (psi first parts) on slot 0.
    The correlated branch settles p with X on slot 0's second part and then either teleports
    slot 1 through its own phi- half (p = chi_1) or classifies slot 1 (p = chi_2). The
    anti-correlated branch teleports slot 1 through slot 0's phi- half, then possibly slot 2
    through slot 1's now known second part.
    """
    x4 = x4_set()
    layout = instance_layout(x4, 4)
    b = _BellTensorSet(x4, layout)
    members = range(4)

    def second_half(slot):
        a2, b2 = b.part(slot, "second")
        return (b2, a2)

    # p = chi_1: every other second part is phi-
    case_one = {}
    for q in _others({0}, members):
        r, s = _others({0, q}, members)
        case_one[q] = b.pair_step(2, r, s, {0: 0, 1: q}, 3, f"c1.q{q}.pair")
    case_one_node = b.teleport_and_identify(BOB, 1, second_half(1), 1, "first", case_one, "c1.q")

    # p = chi_2: classify q, then a parity step on slot 2 or a teleport through slot 1's phi-
    case_two_ac = {0: b.pair_step(3, 2, 3, {0: 1, 2: 0}, 1, "c2.r0.pair")}
    for r in (2, 3):
        q = 5 - r
        case_two_ac[r] = Conclude(id=f"c2.r{r}", assignment={0: 1, 1: q, 2: r, 3: 0})
    fa, fb = b.part(1, "first")
    case_two_node = correlated_pauli_step(
        (ALICE, fa),
        (BOB, fb),
        "Z",
        b.pair_step(2, 2, 3, {0: 1, 1: 0}, 3, "c2.q0.pair"),
        b.teleport_and_identify(BOB, 2, second_half(1), 1, "first", case_two_ac, "c2.r"),
        node_id="c2.step3",
    )

    fa, fb = b.part(0, "second")
    correlated_branch = correlated_pauli_step(
        (ALICE, fa), (BOB, fb), "X", case_one_node, case_two_node, node_id="step2"
    )

    # p in {chi_3, chi_4}: slot 0's second part is phi-
    anti = {}
    for q in (2, 3):
        r, s = 0, 1
        anti[q] = b.pair_step(2, r, s, {0: 5 - q, 1: q}, 3, f"ac.q{q}.pair")
    for q in (0, 1):
        after_r = {}
        other_g1 = 1 - q
        after_r[other_g1] = b.pair_step(
            3, 2, 3, {1: q, 2: other_g1}, 0, f"ac.q{q}.r{other_g1}.pair"
        )
        for r in (2, 3):
            after_r[r] = Conclude(
                id=f"ac.q{q}.r{r}", assignment={0: 5 - r, 1: q, 2: r, 3: other_g1}
            )
        anti[q] = b.teleport_and_identify(
            BOB, 2, second_half(1), 1, "first", after_r, f"ac.q{q}.r"
        )
    anti_branch = b.teleport_and_identify(BOB, 1, second_half(0), 0, "first", anti, "ac.q")

    fa, fb = b.part(0, "first")
    root = correlated_pauli_step(
        (ALICE, fa), (BOB, fb), "Z", correlated_branch, anti_branch, node_id="step1"
    )
    logger.info(f"Built X4 marking protocol with {len(leaves_of(root))} leaves")
    return root


def _catalytic_bell_protocol(s: StateSet, n_teleports: int) -> tuple[ProtocolNode, CatalyticBudget]:
    """Alice teleports her halves of the first slots to Bob, who Bell-measures each; one parity
    step finishes."""
    resources = [qcore.bell_state("phi+") for _ in range(n_teleports)]
    layout = instance_layout(s, s.size, resources)
    b = _BellTensorSet(s, layout)
    members = range(s.size)

    def resource(k):
        return layout.factor(-(k + 1), ALICE, "resource"), layout.factor(-(k + 1), BOB, "resource")

    def build(slot: int, known: dict) -> ProtocolNode:
        if slot == n_teleports:
            a, c = _others(known.values(), members)
            return b.pair_step(slot, a, c, known, slot + 1, f"pair{slot}")
        outcomes = {
            idx: build(slot + 1, {**known, slot: idx}) for idx in _others(known.values(), members)
        }
        return b.teleport_and_identify(
            ALICE, slot, resource(slot), -(slot + 1), "first", outcomes, f"t{slot}"
        )

    budget = CatalyticBudget(
        supplied_ebits=float(n_teleports), returned_ebits=1.0, resources=resources
    )
    return build(0, {}), budget


def catalytic_b4_protocol() -> tuple[ProtocolNode, CatalyticBudget]:
    """4-LSM of the Bell basis with two supplied phi+ pairs; the last Bell pair stays intact."""
    return _catalytic_bell_protocol(bell_basis(), 2)


def catalytic_b3_protocol() -> tuple[ProtocolNode, CatalyticBudget]:
    """3-LSM of B3 with one supplied phi+ pair, returned intact inside the last slot."""
    return _catalytic_bell_protocol(b3_set(), 1)


# ============================================================================
# Composers
# ============================================================================


def _require_perfect(p: ProtocolNode, s: StateSet, m: int, what: str) -> None:
    try:
        verdict, _ = verify_marking(p, s, m)
    except InvalidArgument as e:
        raise CompositionInvalid(f"{what} cannot run on '{s.name}': {e}") from e
    if not verdict.perfect:
        raise CompositionInvalid(
            f"{what} does not perfectly mark {m} state(s) of '{s.name}' "
            f"({len(verdict.failures)} failing assignments)"
        )


def _sequence(
    stage: Callable[[int], ProtocolNode], n_stages: int, known: dict, depth: int = 0
) -> ProtocolNode | None:
    """Run stage(0), stage(1), ... one after another, merging their conclusions.

    Leaves that would hand an already identified state to a second slot are pruned; a perfect
    stage never reaches them.
    """
    if depth == n_stages:
        return Conclude(id="done", assignment=dict(known))

    def next_stage(leaf: Conclude):
        if set(leaf.assignment.values()) & set(known.values()):
            return None
        return _sequence(stage, n_stages, {**known, **leaf.assignment}, depth + 1)

    return map_leaves(stage(depth), next_stage)


def lsm_from_lsd(lsd: ProtocolNode, s: StateSet, m: int | None = None) -> ProtocolNode:
    """Mark m slots by discriminating slot 0, then slot 1, ... with copies of `lsd`."""
    m = s.size if m is None else m
    if not 1 <= m <= s.size:
        raise InvalidArgument(f"m must lie in 1..{s.size}, got {m}")
    _require_perfect(lsd, s, 1, "discrimination protocol")
    if m == 1:
        return lsd
    f = s.layout.n_factors

    def stage(k):
        return relocate(lsd, k * f, k, id_prefix=f"s{k}.")

    return _sequence(stage, m, {})


def compose_m_to_nm(p_m: ProtocolNode, s: StateSet, m: int, n: int) -> ProtocolNode:
    """Mark n*m slots by running `p_m` on consecutive blocks of m slots."""
    if n < 1 or m < 1:
        raise InvalidArgument(f"need m >= 1 and n >= 1, got m={m}, n={n}")
    if n * m > s.size:
        raise InvalidArgument(f"{n}*{m} slots exceed the {s.size} members of '{s.name}'")
    _require_perfect(p_m, s, m, f"{m}-marking protocol")
    if n == 1:
        return p_m
    f = s.layout.n_factors

    def stage(k):
        return relocate(p_m, k * m * f, k * m, id_prefix=f"b{k}.")

    return _sequence(stage, n, {})


def product_extend(p_m: ProtocolNode, s: StateSet, m: int) -> ProtocolNode:
    """(m+1)-marking of a product set from an m-marking protocol.

    Once slots 0..m-1 are known, each party re-prepares its halves of them and `p_m` is run
    again on slots 1..m; only slot m's verdict is new.
    """
    parties = s.layout.parties
    groups = [s.layout.factors_of(party) for party in parties]
    pieces = []
    for i, state in enumerate(s.states):
        split = qcore.product_factors(state, groups)
        if split is None:
            raise NotProductSet(f"member {i} of '{s.name}' is entangled across parties")
        pieces.append(split)
    if m + 1 > s.size:
        raise InvalidArgument(f"cannot mark {m + 1} states of a {s.size}-member set")
    _require_perfect(p_m, s, m, f"{m}-marking protocol")

    layout = instance_layout(s, m + 1)
    f = s.layout.n_factors
    shifted = relocate(p_m, f, 1, id_prefix=f"x{m}.")

    def after_first(first: Conclude) -> ProtocolNode | None:
        known = dict(first.assignment)
        if sorted(known) != list(range(m)):
            raise CompositionInvalid(f"leaf '{first.id}' does not conclude slots 0..{m - 1}")

        def after_second(second: Conclude):
            merged = dict(known)
            for slot, idx in second.assignment.items():
                if slot in merged and merged[slot] != idx:
                    return None
                if slot not in merged and idx in merged.values():
                    return None
                merged[slot] = idx
            return Conclude(id=f"{second.id}.merged", assignment=merged)

        node = map_leaves(shifted, after_second)
        if node is None:
            return None
        for k in reversed(range(len(parties))):
            factors = tuple(
                i for i in range(m * f) if layout.factor_party[i] == parties[k]
            )
            fresh = qcore.tensor([pieces[known[slot]][k] for slot in range(m)])
            node = LocalPrepare(
                id=f"prep{m}.{parties[k]}",
                party=parties[k],
                factors=factors,
                state=fresh,
                child=node,
            )
        return node

    extended = map_leaves(p_m, after_first)
    if extended is None:
        raise CompositionInvalid("no leaf of the front protocol survives extension")
    return extended


def extend_last_two(p: ProtocolNode, s: StateSet) -> ProtocolNode:
    """Finish a protocol that fixes the first K-2 slots with one parity step on slot K-2.

    The front protocol is not verified, so an oracle (a bare Conclude) can stand in for it.
    """
    K = s.size
    if K < 2:
        raise InvalidArgument("at least two members are needed")
    layout = instance_layout(s, K)
    b = _BellTensorSet(s, layout)

    def finish(leaf: Conclude) -> ProtocolNode:
        known = dict(leaf.assignment)
        if sorted(known) != list(range(K - 2)):
            raise InvalidArgument(f"leaf '{leaf.id}' must fix exactly slots 0..{K - 3}")
        a, c = _others(known.values(), range(K))
        return b.pair_step(K - 2, a, c, known, K - 1, f"{leaf.id or 'front'}.pair")

    return map_leaves(p, finish)


# ============================================================================
# Verification
# ============================================================================


def _check_assignments(assignments, s: StateSet, m: int) -> list[tuple[int, ...]]:
    out = []
    for a in assignments:
        a = tuple(int(i) for i in a)
        if len(a) != m or len(set(a)) != m or any(i < 0 or i >= s.size for i in a):
            raise InvalidArgument(f"{list(a)} is not an ordered choice of {m} distinct members")
        out.append(a)
    return out


def verify_marking(
    p: ProtocolNode,
    s: StateSet,
    m: int,
    budget: CatalyticBudget | None = None,
    assignments=None,
    workers: int | None = None,
) -> tuple[MarkingVerdict, EntanglementLedger]:
    """Run `p` on every ordered choice of m members and account for the leftover entanglement.

    Args:
        p: Protocol over the instance layout (supplied resources first, then m slots)
        s: The known set
        m: Number of distributed states
        budget: Supplied resource pairs, prepended to every instance
        assignments: Restrict to these hidden assignments (default: all, lexicographic)
        workers: Threads for the assignment fan-out (default: settings.WORKERS)

    Returns:
        (verdict, ledger). Leaf weights are branch probability / number of assignments.
    """
    if not 1 <= m <= s.size:
        raise InvalidArgument(f"m must lie in 1..{s.size}, got {m}")
    resources = list(budget.resources) if budget else []
    layout = instance_layout(s, m, resources)
    validate_protocol(p, layout)
    todo = _check_assignments(
        permutations(range(s.size), m) if assignments is None else assignments, s, m
    )
    if not todo:
        raise InvalidArgument("no assignments to verify")

    cut = layout.cut(ALICE)
    slots = sorted(set(layout.factor_slot))
    executor = ProtocolExecutor(layout)

    def run(assignment):
        composite = qcore.tensor(resources + [s.states[i] for i in assignment])
        tree = executor.execute(p, composite)
        expected = dict(enumerate(assignment))
        records, success, wrong = [], 0.0, 0
        for leaf in tree.leaves:
            correct = leaf.verdict == expected
            if correct:
                success += leaf.probability
            else:
                wrong += 1
            records.append(
                LeafRecord(
                    assignment=assignment,
                    probability=leaf.probability,
                    weight=leaf.probability / len(todo),
                    residual_ebits=qcore.entanglement_entropy(leaf.final_state, cut),
                    slot_residuals=_slot_residuals(leaf.final_state, layout, slots),
                    verdict=leaf.verdict,
                    correct=correct,
                    transcript=leaf.transcript,
                )
            )
        result = AssignmentResult(
            assignment=assignment,
            success_probability=success,
            n_leaves=len(tree.leaves),
            mislabeled_leaves=wrong,
        )
        return result, records

    workers = settings.WORKERS if workers is None else workers
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, todo))

    per_assignment = [r for r, _ in results]
    leaves = [leaf for _, records in results for leaf in records]
    perfect = all(
        r.mislabeled_leaves == 0 and r.success_probability >= 1 - settings.NORM_TOL
        for r in per_assignment
    )
    verdict = MarkingVerdict(assignments=per_assignment, perfect=perfect)

    residuals = [leaf.residual_ebits for leaf in leaves]
    ledger = EntanglementLedger(
        leaves=leaves,
        average_residual_ebits=sum(leaf.weight * leaf.residual_ebits for leaf in leaves),
        min_residual_ebits=min(residuals),
        max_residual_ebits=max(residuals),
    )
    if budget is not None:
        returned = min(ledger.min_residual_ebits, budget.supplied_ebits)
        ledger.budget = budget
        ledger.returned_ebits = returned
        ledger.surplus_ebits = ledger.min_residual_ebits - returned
        ledger.consumed_ebits = budget.supplied_ebits - returned

    if perfect:
        logger.info(
            f"Verified {len(todo)} assignments of '{s.name}' (m={m}): perfect, "
            f"average residual {ledger.average_residual_ebits:.6f} ebits"
        )
    else:
        logger.warning(
            f"Marking of '{s.name}' (m={m}) is not perfect: "
            f"{len(verdict.failures)} of {len(todo)} assignments fail"
        )
    return verdict, ledger


def _slot_residuals(state, layout: PartyLayout, slots) -> dict[int, float]:
    out = {}
    for slot in slots:
        factors = layout.factors_in_slot(slot)
        part = qcore.reduced_pure_state(state, factors)
        if part is None:
            continue
        left = [j for j, f in enumerate(factors) if layout.factor_party[f] == ALICE]
        if not left or len(left) == len(factors):
            out[slot] = 0.0
            continue
        out[slot] = qcore.entanglement_entropy(part, Bipartition.of(left, len(factors)))
    return out

"""Known state sets, permutation ensembles, counting bounds and rate arithmetic."""

from itertools import permutations
import logging
from math import factorial, log2, perm, prod

import numpy as np
from scipy.stats import unitary_group

from app.core.config import settings
from app.models.ensemble import CountingReport, MarkingInstance, RateReport, StateSet
from app.models.protocol import Conclude, LocalMeasure, ProtocolNode
from app.models.state import PartyLayout, PureState
from app.services import qcore
from app.utils.exceptions import InvalidArgument


logger = logging.getLogger(__name__)

ALICE = "alice"
BOB = "bob"

BELL_PAIR_LAYOUT = PartyLayout(
    factor_party=(ALICE, BOB),
    factor_slot=(0, 0),
    factor_role=("first", "first"),
)

# A1 B1 A2 B2: the first part of every member precedes the second
TWO_PAIR_LAYOUT = PartyLayout(
    factor_party=(ALICE, BOB, ALICE, BOB),
    factor_slot=(0, 0, 0, 0),
    factor_role=("first", "first", "second", "second"),
)

RESOURCE_LAYOUT = PartyLayout(
    factor_party=(ALICE, BOB),
    factor_slot=(0, 0),
    factor_role=("resource", "resource"),
)


# ============================================================================
# Built-in sets
# ============================================================================


def bell_basis() -> StateSet:
    states = [qcore.bell_state(label) for label in qcore.BELL_LABELS]
    return StateSet(
        name="B4", states=states, layout=BELL_PAIR_LAYOUT, labels=list(qcore.BELL_LABELS)
    )


def b3_set() -> StateSet:
    labels = list(qcore.BELL_LABELS[:3])
    states = [qcore.bell_state(label) for label in labels]
    return StateSet(name="B3", states=states, layout=BELL_PAIR_LAYOUT, labels=labels)


X4_PARTS = (
    ("phi+", "phi+"),
    ("phi-", "phi-"),
    ("psi+", "phi-"),
    ("psi-", "phi-"),
)


def x4_set() -> StateSet:
    """Four two-pair states: the first part is any Bell state, the second fixes chi_1 apart."""
    states = [qcore.tensor([qcore.bell_state(a), qcore.bell_state(b)]) for a, b in X4_PARTS]
    return StateSet(
        name="X4",
        states=states,
        layout=TWO_PAIR_LAYOUT,
        labels=[f"{a}|{b}" for a, b in X4_PARTS],
    )


def product_basis() -> StateSet:
    """Computational basis of C2 (x) C2 with one qubit per party."""
    digits = [(0, 0), (0, 1), (1, 0), (1, 1)]
    states = [qcore.basis_state(d, (2, 2)) for d in digits]
    return StateSet(
        name="product4",
        states=states,
        layout=BELL_PAIR_LAYOUT,
        labels=[f"{a}{b}" for a, b in digits],
    )


def random_product_set(K: int, seed: int) -> StateSet:
    """K members of a random locally distinguishable qubit product basis, in random order.

    The leading party's qubit lies in a Haar-random basis; the other party's basis is drawn
    afresh for each of the two leading outcomes. A coin decides whether Alice or Bob leads.
    """
    if not 1 <= K <= 4:
        raise InvalidArgument(f"a qubit product basis has 4 members; cannot draw K={K}")
    rng = np.random.default_rng(seed)
    outer = unitary_group.rvs(2, random_state=rng)
    inner = [unitary_group.rvs(2, random_state=rng) for _ in range(2)]
    alice_leads = bool(rng.integers(2))
    states = []
    for i in rng.choice(4, size=K, replace=False):
        a, b = divmod(int(i), 2)
        parts = [outer[:, a], inner[a][:, b]]
        if not alice_leads:
            parts.reverse()
        states.append(qcore.make_state(np.kron(*parts), (2, 2), normalize=True))
    return StateSet(name=f"random-product-{seed}", states=states, layout=BELL_PAIR_LAYOUT)


# ============================================================================
# Permutation ensembles and instances
# ============================================================================


def _check_m(s: StateSet, m: int) -> None:
    if not 1 <= m <= s.size:
        raise InvalidArgument(f"m must lie in 1..{s.size} for set '{s.name}', got {m}")


def instance_layout(s: StateSet, m: int, resources: list[PureState] | None = None) -> PartyLayout:
    """Resources first (slots -1, -2, ...), then m copies of the member layout (slots 0..m-1)."""
    resources = resources or []
    if any(r.dims != (2, 2) for r in resources):
        raise InvalidArgument("supplied resources must be two-qubit states")
    layouts = [RESOURCE_LAYOUT] * len(resources) + [s.layout] * m
    slots = [-(i + 1) for i in range(len(resources))] + list(range(m))
    return PartyLayout.concat(layouts, slots)


def permutation_ensemble(s: StateSet, m: int) -> StateSet:
    """All ordered m-tuples of distinct members, tensored, in lexicographic index order."""
    _check_m(s, m)
    if m == 1:
        return s
    tuples = list(permutations(range(s.size), m))
    states = [qcore.tensor([s.states[i] for i in t]) for t in tuples]
    layout = PartyLayout(
        factor_party=s.layout.factor_party * m,
        factor_slot=(0,) * (s.layout.n_factors * m),
        factor_role=tuple(f"{j}:{role}" for j in range(m) for role in s.layout.factor_role),
    )
    logger.debug(f"Permutation ensemble of '{s.name}' with m={m}: {len(states)} states")
    return StateSet(
        name=f"{s.name}^P{m}",
        states=states,
        layout=layout,
        labels=["".join(str(i + 1) for i in t) for t in tuples],
        pairwise_orthogonal=s.pairwise_orthogonal,
    )


def random_instance(s: StateSet, m: int, seed: int | None) -> MarkingInstance:
    _check_m(s, m)
    rng = np.random.default_rng(seed)
    assignment = tuple(int(i) for i in rng.choice(s.size, size=m, replace=False))
    return MarkingInstance(
        source=s,
        m=m,
        hidden_assignment=assignment,
        composite=qcore.tensor([s.states[i] for i in assignment]),
        layout=instance_layout(s, m),
    )


# ============================================================================
# Bounds and rates
# ============================================================================


def unmarkable_by_counting(K: int, d: int) -> bool:
    """K! > d^K. Sufficient for unmarkability only; False means the bound is silent."""
    if K < 1 or d < 2:
        raise InvalidArgument(f"need K >= 1 and d >= 2, got K={K}, d={d}")
    return factorial(K) > d**K


def _is_maximally_entangled(state: PureState, layout: PartyLayout) -> bool:
    cut = layout.cut(ALICE)
    d_alice = prod(state.dims[f] for f in cut.left)
    d_bob = prod(state.dims[f] for f in cut.right)
    if d_alice != d_bob:
        return False
    return abs(qcore.entanglement_entropy(state, cut) - log2(d_alice)) <= np.sqrt(settings.NORM_TOL)


def counting_fact_check(s: StateSet, m: int) -> CountingReport:
    """Do the m-tuples of `s` outnumber one party's local dimension, all maximally entangled?"""
    _check_m(s, m)
    size = perm(s.size, m)
    local_dim = prod(s.dims[f] for f in s.layout.factors_of(ALICE)) ** m
    # tensor products of maximally entangled members stay maximally entangled
    all_max = all(_is_maximally_entangled(state, s.layout) for state in s.states)
    applies = all_max and size > local_dim
    note = (
        f"{size} maximally entangled states in local dimension {local_dim}: "
        "not locally distinguishable"
        if applies
        else "bound silent"
    )
    return CountingReport(
        set_name=s.name,
        m=m,
        ensemble_size=size,
        local_dimension=local_dim,
        all_maximally_entangled=all_max,
        bound_applies=applies,
        note=note,
    )


def rate_compare(n: int, d: int, k: int) -> RateReport:
    """Classical bits per qudit: LSD of n states on k copies vs marking all n at once."""
    if n < 1 or k < 1 or d < 2:
        raise InvalidArgument(f"need n >= 1, k >= 1 and d >= 2, got n={n}, k={k}, d={d}")
    lsm_rate = sum(log2(i) for i in range(2, n + 1)) / n
    return RateReport(n=n, d=d, k=k, lsd_rate=log2(n) / k, lsm_rate=lsm_rate)


# ============================================================================
# Bell-tensor labelling and product-set protocols
# ============================================================================


def part_roles(layout: PartyLayout) -> list[str]:
    return list(dict.fromkeys(layout.factor_role))


def bell_labels(s: StateSet) -> list[tuple[str, ...] | None]:
    """Per member, the Bell label of each (alice, bob) part, or None if it is not Bell-tensor."""
    out = []
    bells = {label: qcore.bell_state(label) for label in qcore.BELL_LABELS}
    floor = 1 - settings.NORM_TOL
    for state in s.states:
        labels = []
        for role in part_roles(s.layout):
            try:
                pair = [s.layout.factor(0, ALICE, role), s.layout.factor(0, BOB, role)]
            except InvalidArgument:
                labels = None
                break
            part = None
            if state.dims[pair[0]] == 2 and state.dims[pair[1]] == 2:
                part = qcore.reduced_pure_state(state, pair)
            match = None
            if part is not None:
                close = (k for k, b in bells.items() if qcore.fidelity(part, b) >= floor)
                match = next(close, None)
            if match is None:
                labels = None
                break
            labels.append(match)
        out.append(tuple(labels) if labels is not None else None)
    return out


def _local_basis(vectors: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Orthonormal qubit basis containing every vector (up to phase), and each vector's column."""
    columns: list[np.ndarray] = []
    which = []
    for v in vectors:
        for j, c in enumerate(columns):
            if abs(np.vdot(c, v)) ** 2 >= 1 - settings.NORM_TOL:
                which.append(j)
                break
        else:
            if any(abs(np.vdot(c, v)) > np.sqrt(settings.NORM_TOL) for c in columns):
                raise InvalidArgument("local parts are neither equal nor orthogonal")
            columns.append(v)
            which.append(len(columns) - 1)
    if len(columns) == 1:
        a, b = columns[0]
        columns.append(np.array([-np.conj(b), np.conj(a)]))
    return np.stack(columns, axis=1), which


def _measure(party: str, factor: int, basis: np.ndarray, children, node_id: str) -> LocalMeasure:
    identity = np.allclose(basis, np.eye(2))
    return LocalMeasure(
        id=node_id,
        party=party,
        factors=(factor,),
        basis="Z",
        basis_matrix=None if identity else basis,
        children=children,
    )


def _leader_then_follower(split: list[list[PureState]], leader: int) -> ProtocolNode:
    """The leader measures once; the follower's basis depends on the leader's outcome."""
    parties = (ALICE, BOB)
    follower = 1 - leader
    basis, column = _local_basis([parts[leader].amps for parts in split])
    children = {}
    for c in sorted(set(column)):
        group = [i for i, col in enumerate(column) if col == c]
        inner, inner_column = _local_basis([split[i][follower].amps for i in group])
        if len(set(inner_column)) != len(group):
            raise InvalidArgument(f"members {group} coincide on both local parts")
        leaves = {
            str(b): Conclude(id=f"lsd.{c}{b}", assignment={0: i})
            for i, b in zip(group, inner_column, strict=True)
        }
        children[str(c)] = _measure(
            parties[follower], follower, inner, leaves, f"lsd.{parties[follower]}.{c}"
        )
    return _measure(parties[leader], leader, basis, children, f"lsd.{parties[leader]}")


def product_lsd_protocol(s: StateSet) -> ProtocolNode:
    """One-way local discrimination of a qubit product set.

    Alice leads when her parts fit one basis and Bob's parts are separable within each of her
    outcomes; otherwise Bob leads.
    """
    if s.layout.n_factors != 2 or s.dims != (2, 2):
        raise InvalidArgument("product discrimination is implemented for one qubit per party")
    split = [qcore.product_factors(state, [[0], [1]]) for state in s.states]
    if any(parts is None for parts in split):
        raise InvalidArgument(f"set '{s.name}' has an entangled member")
    problems = []
    for leader in (0, 1):
        try:
            return _leader_then_follower(split, leader)
        except InvalidArgument as e:
            problems.append(f"{(ALICE, BOB)[leader]} first: {e}")
    raise InvalidArgument(
        f"set '{s.name}' has no one-way local discrimination ({'; '.join(problems)})"
    )

"""LOCC protocol execution.

Protocol trees are executed exhaustively: every measurement outcome with nonzero
probability opens a branch, and each branch ends at a Conclude leaf carrying its
probability, transcript, post-protocol state and verdict.

Classical communication is implicit: a node may depend on everything announced earlier on
its branch. Measured factors are marked consumed for the rest of the branch and cannot be
measured again until a LocalPrepare replaces them with a fresh local state.
"""

from collections.abc import Callable
import logging
from math import prod

import numpy as np

from app.core.config import settings
from app.models.protocol import (
    BranchOutcome,
    BranchTree,
    Conclude,
    CorrelatedMeasure,
    LocalMeasure,
    LocalPrepare,
    LocalUnitary,
    ProtocolNode,
    Teleport,
    TranscriptEntry,
)
from app.models.state import PartyLayout, PureState, UnitaryOp
from app.services import qcore
from app.utils.exceptions import (
    InvalidArgument,
    LocalityViolation,
    ProtocolIncomplete,
    ResourceInvalid,
)


logger = logging.getLogger(__name__)

CORRELATED = "C"
ANTICORRELATED = "AC"


# ============================================================================
# Static validation
# ============================================================================


def _children(node: ProtocolNode) -> list[ProtocolNode]:
    if isinstance(node, LocalMeasure | CorrelatedMeasure):
        return list(node.children.values())
    if isinstance(node, Conclude):
        return []
    return [node.child]


def _require_owned(layout: PartyLayout, party: str, factors, node_id: str) -> None:
    for f in factors:
        if f < 0 or f >= layout.n_factors:
            raise InvalidArgument(f"node '{node_id}': factor {f} out of range")
        if layout.factor_party[f] != party:
            raise LocalityViolation(
                f"node '{node_id}': party '{party}' acts on factor {f} "
                f"held by '{layout.factor_party[f]}'"
            )


def validate_protocol(node: ProtocolNode, layout: PartyLayout) -> None:
    """Reject nonlocal steps, out-of-range factors and conclusions about unknown slots."""
    stack = [node]
    slots = set(layout.slots)
    while stack:
        n = stack.pop()
        if isinstance(n, LocalMeasure | LocalUnitary | LocalPrepare):
            if len(set(n.factors)) != len(n.factors) or not n.factors:
                raise InvalidArgument(f"node '{n.id}': bad factor list {list(n.factors)}")
            _require_owned(layout, n.party, n.factors, n.id)
        elif isinstance(n, Teleport):
            if n.sender == n.receiver:
                raise InvalidArgument(f"node '{n.id}': teleport sender and receiver coincide")
            _require_owned(layout, n.sender, (n.source_factor, n.resource_factors[0]), n.id)
            _require_owned(layout, n.receiver, (n.resource_factors[1],), n.id)
            found = {layout.factor_slot[f] for f in n.resource_factors}
            if n.resource_slot is not None and found != {n.resource_slot}:
                raise InvalidArgument(
                    f"node '{n.id}': shared pair expected in slot {n.resource_slot}, "
                    f"layout puts factors {list(n.resource_factors)} in slots {sorted(found)}"
                )
        elif isinstance(n, CorrelatedMeasure):
            if n.party_a == n.party_b:
                raise InvalidArgument(
                    f"node '{n.id}': a correlated step needs two distinct parties"
                )
            _require_owned(layout, n.party_a, (n.factor_a,), n.id)
            _require_owned(layout, n.party_b, (n.factor_b,), n.id)
        elif isinstance(n, Conclude):
            unknown = set(n.assignment) - slots
            if unknown:
                raise InvalidArgument(f"node '{n.id}': conclusion names unknown slots {unknown}")
        stack.extend(_children(n))


# ============================================================================
# Execution
# ============================================================================


class ProtocolExecutor:
    """Exhaustive branch enumeration of a protocol tree over one input state."""

    def __init__(self, layout: PartyLayout, prune_tol: float | None = None):
        self.layout = layout
        self.prune_tol = settings.PRUNE_TOL if prune_tol is None else prune_tol

    def execute(self, protocol: ProtocolNode, state: PureState) -> BranchTree:
        if state.n_factors != self.layout.n_factors:
            raise InvalidArgument(
                f"input has {state.n_factors} factors but the layout describes "
                f"{self.layout.n_factors}"
            )
        validate_protocol(protocol, self.layout)
        leaves: list[BranchOutcome] = []
        self._run(protocol, state, frozenset(), (), 1.0, "root", leaves)
        logger.debug(f"Protocol execution finished with {len(leaves)} leaves")
        return BranchTree(input_dims=state.dims, layout=self.layout, leaves=leaves)

    def _run(self, node, state, consumed, transcript, prob, path, leaves) -> None:
        node_id = node.id or path

        if isinstance(node, Conclude):
            leaves.append(
                BranchOutcome(
                    probability=prob,
                    transcript=transcript,
                    final_state=state,
                    verdict=dict(node.assignment),
                )
            )
            return

        if isinstance(node, LocalMeasure):
            self._check_unconsumed(node.factors, consumed, node_id)
            block = prod(state.dims[f] for f in node.factors)
            if node.basis_matrix is not None:
                basis = node.basis_matrix
                labels = tuple(str(i) for i in range(block))
            else:
                basis, labels = qcore.named_basis(node.basis, block)
            for outcome in qcore.measure_projective(state, node.factors, basis, self.prune_tol):
                label = labels[outcome.index]
                child = node.children.get(label)
                if child is None:
                    raise ProtocolIncomplete(
                        f"node '{node_id}': outcome '{label}' occurs with probability "
                        f"{outcome.probability:.3g} but has no child"
                    )
                self._run(
                    child,
                    outcome.post,
                    consumed | set(node.factors),
                    transcript
                    + (TranscriptEntry(node_id=node_id, party=node.party, outcome=label),),
                    prob * outcome.probability,
                    f"{path}.{label}",
                    leaves,
                )
            return

        if isinstance(node, LocalUnitary):
            after = qcore.apply_local_unitary(state, node.factors, node.u)
            entry = TranscriptEntry(node_id=node_id, party=node.party, outcome=None)
            self._run(node.child, after, consumed, transcript + (entry,), prob, path, leaves)
            return

        if isinstance(node, Teleport):
            pair = list(node.resource_factors)
            self._check_unconsumed([node.source_factor, *pair], consumed, node_id)
            if any(state.dims[f] != 2 for f in [node.source_factor, *pair]):
                raise InvalidArgument(f"node '{node_id}': teleportation is defined for qubits")
            resource = qcore.reduced_pure_state(state, pair)
            if resource is None:
                raise ResourceInvalid(
                    f"node '{node_id}': resource pair {pair} is entangled with other factors"
                )
            expanded = teleport_expand(node.model_copy(update={"id": node_id}), resource)
            self._run(expanded, state, consumed, transcript, prob, path, leaves)
            return

        if isinstance(node, CorrelatedMeasure):
            self._run_correlated(node, node_id, state, consumed, transcript, prob, path, leaves)
            return

        if isinstance(node, LocalPrepare):
            # discarding is local only while the factors are unentangled with the rest
            after = qcore.replace_factors(state, node.factors, node.state)
            entry = TranscriptEntry(node_id=node_id, party=node.party, outcome=None)
            refreshed = consumed - set(node.factors)
            self._run(node.child, after, refreshed, transcript + (entry,), prob, path, leaves)
            return

        raise InvalidArgument(f"unknown node type {type(node).__name__}")

    def _run_correlated(self, node, node_id, state, consumed, transcript, prob, path, leaves):
        self._check_unconsumed([node.factor_a, node.factor_b], consumed, node_id)
        if state.dims[node.factor_a] != 2 or state.dims[node.factor_b] != 2:
            raise InvalidArgument(f"node '{node_id}': correlated steps act on single qubits")
        basis, labels = qcore.named_basis(node.pauli, 2)
        used = consumed | {node.factor_a, node.factor_b}
        for first in qcore.measure_projective(state, [node.factor_a], basis, self.prune_tol):
            for second in qcore.measure_projective(
                first.post, [node.factor_b], basis, self.prune_tol
            ):
                cls = CORRELATED if first.index == second.index else ANTICORRELATED
                child = node.children.get(cls)
                if child is None:
                    raise ProtocolIncomplete(f"node '{node_id}': class '{cls}' has no child")
                entries = (
                    TranscriptEntry(
                        node_id=node_id, party=node.party_a, outcome=labels[first.index]
                    ),
                    TranscriptEntry(
                        node_id=node_id,
                        party=node.party_b,
                        outcome=f"{labels[second.index]}:{cls}",
                    ),
                )
                self._run(
                    child,
                    second.post,
                    used,
                    transcript + entries,
                    prob * first.probability * second.probability,
                    f"{path}.{cls}",
                    leaves,
                )

    @staticmethod
    def _check_unconsumed(factors, consumed, node_id) -> None:
        spent = [f for f in factors if f in consumed]
        if spent:
            raise InvalidArgument(f"node '{node_id}': factors {spent} were already measured")


def execute(p: ProtocolNode, input: PureState, layout: PartyLayout) -> BranchTree:
    return ProtocolExecutor(layout).execute(p, input)


# ============================================================================
# Teleportation
# ============================================================================


def _check_maximally_entangled(resource: PureState) -> np.ndarray:
    if resource.dims != (2, 2):
        raise ResourceInvalid(f"teleport resource must be a qubit pair, got dims {resource.dims}")
    coeffs = resource.amps.reshape(2, 2)
    scaled = np.sqrt(2) * coeffs
    if np.abs(scaled.conj().T @ scaled - np.eye(2)).max() > np.sqrt(settings.NORM_TOL):
        raise ResourceInvalid("teleport resource is not maximally entangled")
    return coeffs


def teleport_expand(t: Teleport, resource: PureState | None = None) -> ProtocolNode:
    """Bell measurement at the sender followed by the matching correction at the receiver.

    For a resource R (2x2 coefficient matrix) and Bell outcome B_k, the receiver holds
    R^T B_k^dag |source> / 2, so the correction is 2 B_k conj(R). With |phi+> this is
    the familiar {I, Z, X, ZX} table.
    """
    resource = qcore.bell_state("phi+") if resource is None else resource
    r = _check_maximally_entangled(resource)
    basis, labels = qcore.named_basis("bell", 4)
    prefix = t.id or "teleport"
    children = {}
    for k, label in enumerate(labels):
        b = basis[:, k].reshape(2, 2)
        correction = UnitaryOp.of(2 * b @ r.conj(), label=f"fix[{label}]")
        children[label] = LocalUnitary(
            id=f"{prefix}.fix.{label}",
            party=t.receiver,
            factors=(t.resource_factors[1],),
            u=correction,
            child=t.child,
        )
    return LocalMeasure(
        id=f"{prefix}.bell",
        party=t.sender,
        factors=(t.source_factor, t.resource_factors[0]),
        basis="bell",
        children=children,
    )


# ============================================================================
# Bell-pair classifiers
# ============================================================================


def correlated_pauli_step(
    first: tuple[str, int],
    second: tuple[str, int],
    pauli: str,
    on_correlated: ProtocolNode | None = None,
    on_anticorrelated: ProtocolNode | None = None,
    node_id: str = "",
) -> CorrelatedMeasure:
    """Two-sided Pauli measurement coarse-grained to C (equal) / AC (unequal) outcomes."""
    (party_a, factor_a), (party_b, factor_b) = first, second
    if party_a == party_b:
        raise InvalidArgument("a correlated step compares outcomes of two different parties")
    if pauli not in ("X", "Z"):
        raise InvalidArgument(f"correlated steps use X or Z, got {pauli!r}")
    return CorrelatedMeasure(
        id=node_id,
        party_a=party_a,
        factor_a=factor_a,
        party_b=party_b,
        factor_b=factor_b,
        pauli=pauli,
        children={
            CORRELATED: on_correlated or Conclude(id=f"{node_id}.C", assignment={}),
            ANTICORRELATED: on_anticorrelated or Conclude(id=f"{node_id}.AC", assignment={}),
        },
    )


def bell_pair_discriminator(a: str, b: str) -> tuple[str, dict[str, str]]:
    """Pauli choice and C/AC -> label map that separates two different Bell states.

    Z parity separates phi from psi; X parity separates + from -. When both tags differ
    Z is used.
    """
    for label in (a, b):
        if label not in qcore.BELL_LABELS:
            raise InvalidArgument(f"not a Bell label: {label!r}")
    if a == b:
        raise InvalidArgument(f"cannot discriminate {a} from itself")
    if a[:3] != b[:3]:
        phi, psi = (a, b) if a.startswith("phi") else (b, a)
        return "Z", {CORRELATED: phi, ANTICORRELATED: psi}
    plus, minus = (a, b) if a.endswith("+") else (b, a)
    return "X", {CORRELATED: plus, ANTICORRELATED: minus}


# ============================================================================
# Tree algebra
# ============================================================================


def map_leaves(
    node: ProtocolNode, fn: Callable[[Conclude], ProtocolNode | None]
) -> ProtocolNode | None:
    """Replace every Conclude by fn(conclude); subtrees left without leaves are pruned."""
    if isinstance(node, Conclude):
        return fn(node)
    if isinstance(node, LocalMeasure | CorrelatedMeasure):
        children = {}
        for key, child in node.children.items():
            mapped = map_leaves(child, fn)
            if mapped is not None:
                children[key] = mapped
        if not children:
            return None
        return node.model_copy(update={"children": children})
    child = map_leaves(node.child, fn)
    if child is None:
        return None
    return node.model_copy(update={"child": child})


def relocate(
    node: ProtocolNode, factor_offset: int, slot_offset: int, id_prefix: str = ""
) -> ProtocolNode:
    """Shift every factor index and concluded slot, e.g. to run a one-slot protocol on slot k."""

    def new_id(old: str) -> str:
        return f"{id_prefix}{old}" if old else old

    if isinstance(node, Conclude):
        return Conclude(
            id=new_id(node.id),
            assignment={slot + slot_offset: idx for slot, idx in node.assignment.items()},
        )
    update = {"id": new_id(node.id)}
    if isinstance(node, LocalMeasure | LocalUnitary | LocalPrepare):
        update["factors"] = tuple(f + factor_offset for f in node.factors)
    elif isinstance(node, Teleport):
        update["source_factor"] = node.source_factor + factor_offset
        update["resource_factors"] = tuple(f + factor_offset for f in node.resource_factors)
        if node.resource_slot is not None and node.resource_slot >= 0:
            update["resource_slot"] = node.resource_slot + slot_offset
    elif isinstance(node, CorrelatedMeasure):
        update["factor_a"] = node.factor_a + factor_offset
        update["factor_b"] = node.factor_b + factor_offset
    if isinstance(node, LocalMeasure | CorrelatedMeasure):
        update["children"] = {
            key: relocate(child, factor_offset, slot_offset, id_prefix)
            for key, child in node.children.items()
        }
    else:
        update["child"] = relocate(node.child, factor_offset, slot_offset, id_prefix)
    return node.model_copy(update=update)


def leaves_of(node: ProtocolNode) -> list[Conclude]:
    out, stack = [], [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Conclude):
            out.append(n)
        else:
            stack.extend(_children(n))
    return out


# ============================================================================
# Classical communication analysis
# ============================================================================


def communication_directions(transcript) -> set[tuple[str, str]]:
    """(X, Y) pairs such that Y acted after X announced an outcome on this branch."""
    directions, announced = set(), set()
    for entry in transcript:
        directions.update((x, entry.party) for x in announced if x != entry.party)
        if entry.outcome is not None:
            announced.add(entry.party)
    return directions


def tree_communication(node: ProtocolNode) -> set[tuple[str, str]]:
    """Static over-approximation: (X, Y) whenever a step by Y sits below a measurement by X."""
    directions = set()

    def walk(n, measured: frozenset):
        if isinstance(n, Conclude):
            return
        if isinstance(n, Teleport):
            directions.update((x, n.sender) for x in measured if x != n.sender)
            directions.update((x, n.receiver) for x in measured | {n.sender} if x != n.receiver)
            walk(n.child, measured | {n.sender})
            return
        if isinstance(n, CorrelatedMeasure):
            directions.update((x, n.party_a) for x in measured if x != n.party_a)
            directions.update(
                (x, n.party_b) for x in measured | {n.party_a} if x != n.party_b
            )
            for child in n.children.values():
                walk(child, measured | {n.party_a, n.party_b})
            return
        directions.update((x, n.party) for x in measured if x != n.party)
        after = measured | {n.party} if isinstance(n, LocalMeasure) else measured
        for child in _children(n):
            walk(child, after)

    walk(node, frozenset())
    return directions


def is_one_way(node: ProtocolNode) -> bool:
    """True when classical messages only ever flow from one party to another."""
    return len(tree_communication(node)) <= 1

"""Dense pure-state linear algebra.

Every function is pure: inputs are never mutated and every returned state is a new
normalized PureState. Factor indices always refer to positions in ``state.dims``.
"""

from functools import lru_cache
from math import log2, prod
from typing import NamedTuple

import numpy as np

from app.core.config import settings
from app.models.state import Bipartition, PureState, UnitaryOp
from app.utils.exceptions import InvalidArgument


BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")

_S = 1 / np.sqrt(2)
_BELL_VECTORS = {
    "phi+": np.array([_S, 0, 0, _S], dtype=complex),
    "phi-": np.array([_S, 0, 0, -_S], dtype=complex),
    "psi+": np.array([0, _S, _S, 0], dtype=complex),
    "psi-": np.array([0, _S, -_S, 0], dtype=complex),
}

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class Outcome(NamedTuple):
    index: int
    probability: float
    post: PureState


# ============================================================================
# Construction
# ============================================================================


def make_state(amps, dims, normalize: bool = False) -> PureState:
    amps = np.asarray(amps, dtype=complex).reshape(-1)
    if normalize:
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise InvalidArgument("cannot normalize the zero vector")
        amps = amps / norm
    return PureState(amps=amps, dims=tuple(int(d) for d in dims))


def basis_state(digits, dims) -> PureState:
    """Computational basis vector |digits> over `dims`."""
    if len(digits) != len(dims):
        raise InvalidArgument(f"{len(digits)} digits for {len(dims)} factors")
    amps = np.zeros(prod(dims), dtype=complex)
    amps[np.ravel_multi_index(tuple(digits), tuple(dims))] = 1.0
    return make_state(amps, dims)


def tensor(parts: list[PureState]) -> PureState:
    if not parts:
        raise InvalidArgument("tensor() needs at least one state")
    amps = parts[0].amps
    dims = list(parts[0].dims)
    for part in parts[1:]:
        amps = np.kron(amps, part.amps)
        dims.extend(part.dims)
    return make_state(amps, dims)


def bell_state(kind: str) -> PureState:
    if kind not in _BELL_VECTORS:
        raise InvalidArgument(f"unknown Bell state {kind!r}; expected one of {BELL_LABELS}")
    return make_state(_BELL_VECTORS[kind], (2, 2))


def ghz_plus(d: int) -> PureState:
    """(1/sqrt d) sum_i |ii> on dims [d, d]."""
    if d < 2:
        raise InvalidArgument(f"dimension must be >= 2, got {d}")
    amps = np.zeros(d * d, dtype=complex)
    amps[np.arange(d) * (d + 1)] = 1 / np.sqrt(d)
    return make_state(amps, (d, d))


def pauli(name: str) -> UnitaryOp:
    """Tensor product of Pauli letters, e.g. "IZX" acts as I (x) Z (x) X."""
    if not name or any(c not in PAULIS for c in name):
        raise InvalidArgument(f"not a Pauli string: {name!r}")
    matrix = PAULIS[name[0]]
    for c in name[1:]:
        matrix = np.kron(matrix, PAULIS[c])
    return UnitaryOp.of(matrix, label=name)


@lru_cache(maxsize=32)
def _named_basis(name: str, dim: int) -> tuple[np.ndarray, tuple[str, ...]]:
    if name == "Z":
        return np.eye(dim, dtype=complex), tuple(str(i) for i in range(dim))
    if name == "X" and dim == 2:
        return np.array([[_S, _S], [_S, -_S]], dtype=complex), ("+", "-")
    if name == "bell" and dim == 4:
        return np.stack([_BELL_VECTORS[k] for k in BELL_LABELS], axis=1), BELL_LABELS
    raise InvalidArgument(f"no named basis {name!r} for dimension {dim}")


def named_basis(name: str, dim: int) -> tuple[np.ndarray, tuple[str, ...]]:
    """Basis matrix (columns are basis vectors) and outcome labels."""
    matrix, labels = _named_basis(name, dim)
    return matrix.copy(), labels


# ============================================================================
# Factor bookkeeping
# ============================================================================


def _check_factors(s: PureState, factors) -> list[int]:
    factors = [int(f) for f in factors]
    if not factors:
        raise InvalidArgument("factor list is empty")
    if len(set(factors)) != len(factors):
        raise InvalidArgument(f"repeated factor in {factors}")
    if any(f < 0 or f >= s.n_factors for f in factors):
        raise InvalidArgument(f"factor index out of range in {factors} for {s.n_factors} factors")
    return factors


def _front(s: PureState, factors: list[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Matrix view with `factors` as rows (in the given order) and everything else as columns."""
    t = np.moveaxis(s.as_tensor(), factors, list(range(len(factors))))
    rows = prod(s.dims[f] for f in factors)
    return t.reshape(rows, -1), t.shape


def _back(matrix: np.ndarray, shape: tuple[int, ...], factors: list[int]) -> np.ndarray:
    t = matrix.reshape(shape)
    return np.moveaxis(t, list(range(len(factors))), factors).reshape(-1)


def _canonical_phase(amps: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the leading amplitude is real and nonnegative."""
    mags = np.abs(amps)
    lead = int(np.argmax(mags > 1e-6 * mags.max()))
    phase = amps[lead] / mags[lead]
    return amps / phase


def permute_factors(s: PureState, order) -> PureState:
    """New factor i is old factor order[i]."""
    order = [int(o) for o in order]
    if sorted(order) != list(range(s.n_factors)):
        raise InvalidArgument(f"{order} is not a permutation of {s.n_factors} factors")
    amps = np.transpose(s.as_tensor(), order).reshape(-1)
    return make_state(amps, [s.dims[o] for o in order])


def regroup(s: PureState, dims) -> PureState:
    """Same amplitudes under another factorization of the same total dimension."""
    dims = [int(d) for d in dims]
    if prod(dims) != s.dim:
        raise InvalidArgument(f"dims {dims} do not multiply to {s.dim}")
    return make_state(s.amps, dims)


def fidelity(a: PureState, b: PureState) -> float:
    if a.dim != b.dim:
        raise InvalidArgument(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


def reduced_pure_state(s: PureState, factors, tol: float | None = None) -> PureState | None:
    """State of `factors` when they are unentangled with the rest, otherwise None."""
    tol = settings.NORM_TOL if tol is None else tol
    factors = _check_factors(s, factors)
    dims = [s.dims[f] for f in factors]
    if len(factors) == s.n_factors:
        return permute_factors(s, factors)
    matrix, _ = _front(s, factors)
    rho = matrix @ matrix.conj().T
    evals, evecs = np.linalg.eigh(rho)
    if evals[-1] < 1 - tol:
        return None
    return make_state(_canonical_phase(evecs[:, -1]), dims, normalize=True)


def product_factors(s: PureState, groups) -> list[PureState] | None:
    """Split `s` into one pure state per factor group, or None if any group is entangled."""
    covered = sorted(f for g in groups for f in g)
    if covered != list(range(s.n_factors)):
        raise InvalidArgument(f"groups {groups} do not partition {s.n_factors} factors")
    parts = []
    for group in groups:
        part = reduced_pure_state(s, group)
        if part is None:
            return None
        parts.append(part)
    return parts


def replace_factors(s: PureState, factors, new: PureState) -> PureState:
    """Swap the content of unentangled `factors` for `new`, leaving the rest untouched."""
    factors = _check_factors(s, factors)
    if tuple(s.dims[f] for f in factors) != new.dims:
        raise InvalidArgument(
            f"replacement dims {list(new.dims)} do not match factors {factors} "
            f"with dims {[s.dims[f] for f in factors]}"
        )
    current = reduced_pure_state(s, factors)
    if current is None:
        raise InvalidArgument(f"factors {factors} are entangled with the rest of the state")
    if len(factors) == s.n_factors:
        return permute_factors(new, np.argsort(factors))
    matrix, shape = _front(s, factors)
    rest = current.amps.conj() @ matrix
    rest = rest / np.linalg.norm(rest)
    return make_state(_back(np.outer(new.amps, rest), shape, factors), s.dims, normalize=True)


# ============================================================================
# Local operations
# ============================================================================


def apply_local_unitary(s: PureState, factors, u: UnitaryOp) -> PureState:
    factors = _check_factors(s, factors)
    block = prod(s.dims[f] for f in factors)
    if block != u.dim:
        raise InvalidArgument(
            f"unitary of dimension {u.dim} cannot act on factors {factors} "
            f"(joint dimension {block})"
        )
    matrix, shape = _front(s, factors)
    return make_state(_back(u.matrix @ matrix, shape, factors), s.dims, normalize=True)


def measure_projective(
    s: PureState, factors, basis: np.ndarray, prune_tol: float | None = None
) -> list[Outcome]:
    """Projective measurement of `factors` in `basis` (columns are the basis vectors).

    Measured factors stay in the state, collapsed onto the observed basis vector.
    Outcomes with probability below the pruning threshold are omitted.
    """
    prune_tol = settings.PRUNE_TOL if prune_tol is None else prune_tol
    factors = _check_factors(s, factors)
    basis = np.asarray(basis, dtype=complex)
    block = prod(s.dims[f] for f in factors)
    if basis.shape != (block, block):
        raise InvalidArgument(
            f"basis of shape {basis.shape} is not a complete basis for joint dimension {block}"
        )
    if np.abs(basis.conj().T @ basis - np.eye(block)).max() > settings.NORM_TOL:
        raise InvalidArgument("measurement basis is not orthonormal and complete")

    matrix, shape = _front(s, factors)
    coeffs = basis.conj().T @ matrix
    probs = np.einsum("ij,ij->i", coeffs, coeffs.conj()).real

    outcomes = []
    for k, p in enumerate(probs):
        if p < prune_tol:
            continue
        post = np.outer(basis[:, k], coeffs[k]) / np.sqrt(p)
        amps = _canonical_phase(_back(post, shape, factors))
        outcomes.append(Outcome(k, float(p), make_state(amps, s.dims, normalize=True)))
    return outcomes


# ============================================================================
# Entanglement
# ============================================================================


def schmidt_coefficients(s: PureState, cut: Bipartition) -> np.ndarray:
    if not cut.covers(s.n_factors):
        raise InvalidArgument(
            f"cut {cut.left}|{cut.right} does not partition {s.n_factors} factors"
        )
    matrix, _ = _front(s, list(cut.left))
    coeffs = np.linalg.svd(matrix, compute_uv=False)
    return coeffs[coeffs > np.sqrt(settings.PRUNE_TOL)]


def entanglement_entropy(s: PureState, cut: Bipartition) -> float:
    """Von Neumann entropy of the `cut.left` marginal in ebits (log base 2, 0 log 0 = 0)."""
    lam = schmidt_coefficients(s, cut) ** 2
    lam = lam[lam > 0]
    entropy = float(-np.sum(lam * np.log2(lam)))
    d_left = prod(s.dims[f] for f in cut.left)
    d_right = prod(s.dims[f] for f in cut.right)
    return min(max(entropy, 0.0), log2(min(d_left, d_right)))

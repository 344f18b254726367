"""Random-restart search for a vector chi with orthonormal images {U_k chi}.

For maximally entangled ensembles {(U_k (x) I)|phi>} one-way discrimination is possible exactly
when such a chi exists. The objective is f(chi) = sum_{i<j} |<chi|U_i^dag U_j|chi>|^2 on the
unit sphere; f = 0 certifies a witness, while failing to reach 0 is only numerical evidence.
"""

from concurrent.futures import ThreadPoolExecutor
import logging

import numpy as np

from app.core.config import settings
from app.models.search import GramSearchProblem, GramSearchResult
from app.services import qcore
from app.utils.exceptions import InvalidArgument


logger = logging.getLogger(__name__)

PROP4_PAULIS = ("IZX", "IXZ", "ZXI", "ZIX", "XIZ", "XZI")

ARMIJO = 1e-4
MAX_BACKTRACKS = 60
STALL_TOL = 1e-13
MIN_STEP, MAX_STEP = 1e-10, 1e3

HEURISTIC_NOTE = (
    "heuristic: random-restart local search found no witness; this is evidence, not a proof "
    "of infeasibility"
)


def problem_from_paulis(paulis, name: str = "") -> GramSearchProblem:
    unitaries = [qcore.pauli(p) for p in paulis]
    return GramSearchProblem(unitaries=unitaries, d=unitaries[0].dim, name=name)


def prop4_unitaries() -> GramSearchProblem:
    """Six Pauli products mapping phi+^(x)3 onto the orderings of three distinct Bell states."""
    return problem_from_paulis(PROP4_PAULIS, name="prop4")


def _stack(prob: GramSearchProblem) -> np.ndarray:
    return np.stack([u.matrix for u in prob.unitaries])


def _check_unit(chi, prob: GramSearchProblem) -> np.ndarray:
    chi = np.asarray(chi, dtype=complex).reshape(-1)
    if chi.shape[0] != prob.d:
        raise InvalidArgument(f"chi has dimension {chi.shape[0]}, problem acts on C^{prob.d}")
    if abs(np.linalg.norm(chi) - 1.0) > np.sqrt(settings.NORM_TOL):
        raise InvalidArgument(f"chi is not a unit vector (norm={np.linalg.norm(chi)!r})")
    return chi


def _value_and_gradient(chi: np.ndarray, us: np.ndarray) -> tuple[float, np.ndarray]:
    psi = np.einsum("kab,b->ak", us, chi)
    gram = psi.conj().T @ psi
    off = gram - np.diag(np.diag(gram))
    value = 0.5 * float(np.sum(np.abs(off) ** 2))
    # gradient w.r.t. (Re chi, Im chi), packed as one complex vector
    grad = 2 * np.einsum("kba,bk->a", us.conj(), psi @ off)
    tangent = grad - np.real(np.vdot(chi, grad)) * chi
    return value, tangent


def gram_objective(chi, prob: GramSearchProblem) -> float:
    chi = _check_unit(chi, prob)
    value, _ = _value_and_gradient(chi, _stack(prob))
    return value


def gram_gradient(chi, prob: GramSearchProblem) -> np.ndarray:
    """Real-coordinate gradient of f, projected onto the tangent space of the sphere at chi."""
    chi = _check_unit(chi, prob)
    _, tangent = _value_and_gradient(chi, _stack(prob))
    return tangent


def _descend(
    chi: np.ndarray, us: np.ndarray, tol: float, max_iterations: int
) -> tuple[float, np.ndarray, int]:
    """Projected gradient descent with Barzilai-Borwein steps and Armijo backtracking."""
    f, g = _value_and_gradient(chi, us)
    step = 1.0
    prev = None
    for it in range(max_iterations):
        gnorm2 = float(np.real(np.vdot(g, g)))
        if f <= tol or np.sqrt(gnorm2) <= settings.GRAD_TOL:
            return f, chi, it
        if prev is not None:
            s, y = chi - prev[0], g - prev[1]
            sy = abs(float(np.real(np.vdot(s, y))))
            if sy > 0:
                step = min(max(float(np.real(np.vdot(s, s))) / sy, MIN_STEP), MAX_STEP)
        for _ in range(MAX_BACKTRACKS):
            trial = chi - step * g
            trial = trial / np.linalg.norm(trial)
            f_trial, g_trial = _value_and_gradient(trial, us)
            if f_trial <= f - ARMIJO * step * gnorm2:
                break
            step *= 0.5
        else:
            return f, chi, it
        stalled = f - f_trial <= STALL_TOL * max(f, 1e-300)
        prev = (chi, g)
        chi, f, g = trial, f_trial, g_trial
        if stalled:
            return f, chi, it + 1
    return f, chi, max_iterations


def search_witness(
    prob: GramSearchProblem,
    restarts: int,
    seed: int | None = 0,
    tol: float | None = None,
    max_iterations: int | None = None,
    workers: int | None = None,
) -> GramSearchResult:
    if restarts < 1:
        raise InvalidArgument(f"restarts must be >= 1, got {restarts}")
    tol = settings.FEAS_TOL if tol is None else tol
    max_iterations = settings.MAX_ITERATIONS if max_iterations is None else max_iterations
    workers = settings.WORKERS if workers is None else workers
    us = _stack(prob)
    children = np.random.SeedSequence(seed).spawn(restarts)

    def run(child):
        rng = np.random.default_rng(child)
        start = rng.standard_normal(prob.d) + 1j * rng.standard_normal(prob.d)
        return _descend(start / np.linalg.norm(start), us, tol, max_iterations)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        runs = list(pool.map(run, children))

    minima = [f for f, _, _ in runs]
    best = int(np.argmin(minima))
    feasible = minima[best] <= tol
    for k, (f, _, its) in enumerate(runs):
        logger.debug(f"restart {k}: f={f:.3e} after {its} iterations")
    if feasible:
        logger.info(f"Witness found for '{prob.name}' with f={minima[best]:.3e}")
    else:
        logger.warning(
            f"No witness for '{prob.name}' in {restarts} restarts (best f={minima[best]:.6e})"
        )
    return GramSearchResult(
        problem=prob.name,
        best_chi=runs[best][1],
        best_objective=minima[best],
        restarts=restarts,
        restart_minima=minima,
        iterations=[its for _, _, its in runs],
        seed=seed,
        tolerance=tol,
        verdict="Feasible" if feasible else "NoWitnessFound",
        note="" if feasible else HEURISTIC_NOTE,
    )

"""Tests for the one-way feasibility search."""

from hypothesis import given, strategies as st
import numpy as np
import pytest

from app.services import qcore
from app.services.ensembles import b3_set, permutation_ensemble
from app.services.onewaysearch import (
    HEURISTIC_NOTE,
    gram_gradient,
    gram_objective,
    problem_from_paulis,
    prop4_unitaries,
    search_witness,
)
from app.utils.exceptions import InvalidArgument


IZ = problem_from_paulis(["I", "Z"], name="IZ")
IX = problem_from_paulis(["I", "X"], name="IX")
FOUR_TWO_QUBIT = problem_from_paulis(["II", "ZI", "IZ", "ZZ"], name="four")

PLUS = np.array([1, 1]) / np.sqrt(2)
ZERO = np.array([1, 0])

# NoWitnessFound threshold, and the value at |0>|+>|+i>
PROP4_FLOOR_RANGE = (1e-3, 1.0 + 1e-9)


def unit(v):
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


# ============================================================================
# OBJECTIVE TESTS
# ============================================================================


class TestObjective:
    """Test the off-diagonal Gram objective."""

    def test_plus_is_a_witness_for_iz(self):
        """Z maps |+> to |->, so the images are orthonormal."""
        assert gram_objective(PLUS, IZ) == pytest.approx(0.0, abs=1e-15)

    def test_zero_is_not_a_witness_for_iz(self):
        """Z fixes |0>, so the single overlap is 1."""
        assert gram_objective(ZERO, IZ) == pytest.approx(1.0)

    def test_uniform_vector_on_prop4(self):
        """The uniform vector leaves three units of overlap."""
        chi = np.full(8, 1 / np.sqrt(8))

        assert gram_objective(chi, prop4_unitaries()) == pytest.approx(3.0)

    def test_z_x_y_eigenvector_on_prop4(self):
        """|0>|+>|+i> overlaps only through the Z X Y product, so one unit is left."""
        chi = np.kron(np.kron(ZERO, PLUS), np.array([1, 1j]) / np.sqrt(2))

        assert gram_objective(chi, prop4_unitaries()) == pytest.approx(1.0)

    def test_non_unit_vector_rejected(self):
        """The objective is defined on the unit sphere."""
        with pytest.raises(InvalidArgument, match="unit"):
            gram_objective([1, 1], IZ)

    def test_wrong_dimension_rejected(self):
        """chi must live where the unitaries act."""
        with pytest.raises(InvalidArgument, match="dimension"):
            gram_objective(np.full(4, 0.5), IZ)

    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
    def test_phase_invariance(self, seed, theta):
        """A global phase does not change any overlap."""
        rng = np.random.default_rng(seed)
        chi = unit(rng.standard_normal(8) + 1j * rng.standard_normal(8))

        assert gram_objective(np.exp(1j * theta) * chi, prop4_unitaries()) == pytest.approx(
            gram_objective(chi, prop4_unitaries()), abs=1e-12
        )


class TestGradient:
    """Test the projected gradient."""

    @given(st.integers(0, 2**32 - 1))
    def test_matches_finite_differences(self, seed):
        """Directional derivatives along tangent vectors agree with Re<g, v>."""
        rng = np.random.default_rng(seed)
        prob = prop4_unitaries()
        chi = unit(rng.standard_normal(8) + 1j * rng.standard_normal(8))
        v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        v = v - np.real(np.vdot(chi, v)) * chi
        h = 1e-6

        forward = gram_objective(unit(chi + h * v), prob)
        backward = gram_objective(unit(chi - h * v), prob)
        numeric = (forward - backward) / (2 * h)

        analytic = np.real(np.vdot(gram_gradient(chi, prob), v))
        assert numeric == pytest.approx(analytic, rel=1e-4, abs=1e-6)

    @given(st.integers(0, 2**32 - 1))
    def test_gradient_is_tangent(self, seed):
        """The gradient has no radial component."""
        rng = np.random.default_rng(seed)
        chi = unit(rng.standard_normal(8) + 1j * rng.standard_normal(8))

        g = gram_gradient(chi, prop4_unitaries())

        assert np.real(np.vdot(chi, g)) == pytest.approx(0.0, abs=1e-12)

    def test_vanishes_at_a_witness(self):
        """A global minimum is a stationary point."""
        assert np.allclose(gram_gradient(PLUS, IZ), 0.0)


# ============================================================================
# PROBLEM CONSTRUCTION TESTS
# ============================================================================


def local_image(paulis):
    """(U (x) I)|phi_0(8)>, rewritten as three Alice|Bob qubit pairs."""
    rotated = qcore.apply_local_unitary(qcore.ghz_plus(8), [0], qcore.pauli(paulis))
    qubits = qcore.regroup(rotated, [2] * 6)
    return qcore.permute_factors(qubits, [0, 3, 1, 4, 2, 5])


class TestProblemConstruction:
    """Test the built-in unitaries against the permutation ensemble they encode."""

    def test_images_are_the_orderings_of_three_bell_states(self):
        """Each unitary produces exactly one ordering of phi+, phi-, psi+."""
        ensemble = permutation_ensemble(b3_set(), 3)

        matched = []
        for u in prop4_unitaries().unitaries:
            image = local_image(u.label)
            overlaps = [qcore.fidelity(image, member) for member in ensemble.states]
            best = int(np.argmax(overlaps))
            assert overlaps[best] == pytest.approx(1.0)
            matched.append(ensemble.labels[best])

        assert matched == ["123", "132", "231", "213", "312", "321"]
        assert sorted(matched) == ensemble.labels


# ============================================================================
# SEARCH TESTS
# ============================================================================


class TestSearch:
    """Test random-restart search."""

    @pytest.mark.parametrize("problem", [IZ, IX, FOUR_TWO_QUBIT], ids=["iz", "ix", "four"])
    def test_controls_are_feasible(self, problem):
        """Sets with a known witness are found within a few restarts."""
        result = search_witness(problem, restarts=50, seed=1)

        assert result.verdict == "Feasible"
        assert result.best_objective <= result.tolerance
        assert result.note == ""
        assert gram_objective(result.best_chi, problem) <= result.tolerance

    @pytest.mark.slow
    def test_prop4_has_no_witness(self):
        """No restart drives the six Pauli products to orthonormal images."""
        result = search_witness(prop4_unitaries(), restarts=200, seed=0)

        assert result.verdict == "NoWitnessFound"
        assert PROP4_FLOOR_RANGE[0] <= result.best_objective <= PROP4_FLOOR_RANGE[1]
        assert result.note == HEURISTIC_NOTE

    @pytest.mark.slow
    def test_prop4_floor_is_a_stable_regression_value(self):
        """The seeded floor is the same number on every run and thread count."""
        serial = search_witness(prop4_unitaries(), restarts=200, seed=0, workers=1)
        threaded = search_witness(prop4_unitaries(), restarts=200, seed=0, workers=4)

        assert serial.best_objective == threaded.best_objective
        assert serial.restart_minima == threaded.restart_minima
        assert gram_objective(serial.best_chi, prop4_unitaries()) == pytest.approx(
            serial.best_objective, abs=1e-12
        )

    def test_seeded_runs_are_reproducible(self):
        """The same seed gives the same minima, whatever the thread count."""
        first = search_witness(prop4_unitaries(), restarts=4, seed=5, workers=1)
        second = search_witness(prop4_unitaries(), restarts=4, seed=5, workers=3)

        assert first.restart_minima == second.restart_minima
        assert np.array_equal(first.best_chi, second.best_chi)

    def test_one_minimum_per_restart(self):
        """Every restart reports its own local minimum."""
        result = search_witness(IZ, restarts=7, seed=2)

        assert len(result.restart_minima) == 7
        assert len(result.iterations) == 7
        assert result.best_objective == min(result.restart_minima)

    def test_zero_restarts_rejected(self):
        """At least one restart is needed."""
        with pytest.raises(InvalidArgument):
            search_witness(IZ, restarts=0)

    def test_mismatched_dimensions_rejected(self):
        """All unitaries must act on the same space."""
        with pytest.raises(ValueError):
            problem_from_paulis(["I", "ZZ"])

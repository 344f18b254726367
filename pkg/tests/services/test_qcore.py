"""Tests for dense pure-state operations."""

from math import log2

from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
import numpy as np
import pytest

from app.models.state import Bipartition
from app.services import qcore
from app.utils.exceptions import InvalidArgument


finite = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)


def complex_vectors(n):
    """Nonzero complex vectors of length n (normalization is left to make_state)."""
    pairs = arrays(np.float64, (n, 2), elements=finite)
    return pairs.map(lambda p: p[:, 0] + 1j * p[:, 1]).filter(lambda v: np.linalg.norm(v) > 1e-3)


def as_qubit_pairs(state):
    """[8, 8] -> A1 B1 A2 B2 A3 B3."""
    qubits = qcore.regroup(state, [2] * 6)
    return qcore.permute_factors(qubits, [0, 3, 1, 4, 2, 5])


# ============================================================================
# CONSTRUCTION TESTS
# ============================================================================


class TestConstruction:
    """Test state constructors."""

    def test_basis_state(self):
        """|10> over (2, 3) puts weight on index 3."""
        state = qcore.basis_state((1, 0), (2, 3))

        assert state.amps[3] == 1
        assert np.count_nonzero(state.amps) == 1

    def test_tensor_dims_and_amplitudes(self):
        """Tensor concatenates dims and takes the Kronecker product."""
        state = qcore.tensor([qcore.basis_state((1,), (2,)), qcore.bell_state("phi+")])

        assert state.dims == (2, 2, 2)
        assert np.allclose(state.amps, np.kron([0, 1], qcore.bell_state("phi+").amps))

    def test_tensor_of_nothing(self):
        """An empty tensor product is an InvalidArgument."""
        with pytest.raises(InvalidArgument):
            qcore.tensor([])

    def test_unknown_bell_label(self):
        """Only the four Bell labels are accepted."""
        with pytest.raises(InvalidArgument):
            qcore.bell_state("phi0")

    def test_ghz_plus_is_maximally_entangled(self):
        """(1/sqrt d) sum |ii> carries log2 d ebits."""
        state = qcore.ghz_plus(3)

        assert qcore.entanglement_entropy(state, Bipartition.of([0], 2)) == pytest.approx(log2(3))

    def test_ghz_plus_eight_is_three_bell_pairs(self):
        """Splitting each side into qubits and pairing them gives phi+ three times."""
        pairs = as_qubit_pairs(qcore.ghz_plus(8))

        expected = qcore.tensor([qcore.bell_state("phi+")] * 3)
        assert qcore.fidelity(pairs, expected) == pytest.approx(1.0)

    def test_local_pauli_string_on_ghz_plus(self):
        """I (x) Z (x) X on Alice's side turns the three pairs into phi+, phi-, psi+."""
        rotated = qcore.apply_local_unitary(qcore.ghz_plus(8), [0], qcore.pauli("IZX"))

        expected = qcore.tensor([qcore.bell_state(k) for k in ("phi+", "phi-", "psi+")])
        assert qcore.fidelity(as_qubit_pairs(rotated), expected) == pytest.approx(1.0)

    def test_pauli_string(self):
        """Pauli strings multiply out left to right as tensor products."""
        u = qcore.pauli("ZX")

        assert np.allclose(u.matrix, np.kron(qcore.PAULIS["Z"], qcore.PAULIS["X"]))
        assert u.label == "ZX"

    def test_make_state_zero_vector(self):
        """The zero vector cannot be normalized."""
        with pytest.raises(InvalidArgument, match="zero"):
            qcore.make_state([0, 0], (2,), normalize=True)


# ============================================================================
# FACTOR BOOKKEEPING TESTS
# ============================================================================


class TestFactors:
    """Test permutation, regrouping and factor extraction."""

    def test_permute_swaps_factors(self):
        """Swapping two factors of |01> gives |10>."""
        state = qcore.permute_factors(qcore.basis_state((0, 1), (2, 2)), [1, 0])

        assert state == qcore.basis_state((1, 0), (2, 2))

    def test_permute_rejects_non_permutation(self):
        """Orders must be permutations of the factor indices."""
        with pytest.raises(InvalidArgument):
            qcore.permute_factors(qcore.bell_state("phi+"), [0, 0])

    def test_regroup(self):
        """Two qubits can be viewed as one ququart."""
        assert qcore.regroup(qcore.bell_state("psi+"), [4]).dims == (4,)

    def test_reduced_pure_state_of_product(self):
        """A product factor is recovered exactly."""
        state = qcore.tensor([qcore.bell_state("psi-"), qcore.basis_state((1,), (2,))])

        part = qcore.reduced_pure_state(state, [2])

        assert qcore.fidelity(part, qcore.basis_state((1,), (2,))) == pytest.approx(1.0)

    def test_reduced_pure_state_of_entangled_factor(self):
        """Half of a Bell pair has no pure reduced state."""
        assert qcore.reduced_pure_state(qcore.bell_state("phi+"), [0]) is None

    def test_product_factors(self):
        """Splitting a product into groups returns one state per group."""
        state = qcore.tensor([qcore.bell_state("phi-"), qcore.bell_state("psi+")])

        parts = qcore.product_factors(state, [[0, 1], [2, 3]])

        assert qcore.fidelity(parts[0], qcore.bell_state("phi-")) == pytest.approx(1.0)
        assert qcore.fidelity(parts[1], qcore.bell_state("psi+")) == pytest.approx(1.0)
        assert qcore.product_factors(state, [[0, 2], [1, 3]]) is None

    def test_replace_factors(self):
        """Replacing an unentangled factor leaves the rest untouched."""
        state = qcore.tensor([qcore.basis_state((0,), (2,)), qcore.bell_state("phi+")])

        replaced = qcore.replace_factors(state, [0], qcore.basis_state((1,), (2,)))

        expected = qcore.tensor([qcore.basis_state((1,), (2,)), qcore.bell_state("phi+")])
        assert qcore.fidelity(replaced, expected) == pytest.approx(1.0)

    def test_replace_entangled_factor_rejected(self):
        """Half of a Bell pair cannot be replaced."""
        with pytest.raises(InvalidArgument, match="entangled"):
            qcore.replace_factors(qcore.bell_state("phi+"), [0], qcore.basis_state((0,), (2,)))


# ============================================================================
# LOCAL OPERATION TESTS
# ============================================================================


class TestLocalOperations:
    """Test unitaries and projective measurements."""

    def test_unitary_on_one_factor(self):
        """X on the second qubit of |00> gives |01>."""
        state = qcore.apply_local_unitary(qcore.basis_state((0, 0), (2, 2)), [1], qcore.pauli("X"))

        assert state == qcore.basis_state((0, 1), (2, 2))

    def test_unitary_dimension_mismatch(self):
        """A 2x2 unitary cannot act on two qubits."""
        with pytest.raises(InvalidArgument, match="cannot act"):
            qcore.apply_local_unitary(qcore.bell_state("phi+"), [0, 1], qcore.pauli("X"))

    def test_measure_half_of_bell_pair(self):
        """Z on half of phi+ gives 0 and 1 with probability 1/2 and collapses both halves."""
        outcomes = qcore.measure_projective(qcore.bell_state("phi+"), [0], np.eye(2))

        assert [o.index for o in outcomes] == [0, 1]
        assert [o.probability for o in outcomes] == pytest.approx([0.5, 0.5])
        collapsed = qcore.basis_state((1, 1), (2, 2))
        assert qcore.fidelity(outcomes[1].post, collapsed) == pytest.approx(1.0)

    def test_bell_measurement_is_deterministic_on_bell_state(self):
        """Measuring psi- in the Bell basis always returns psi-."""
        basis, labels = qcore.named_basis("bell", 4)

        outcomes = qcore.measure_projective(qcore.bell_state("psi-"), [0, 1], basis)

        assert len(outcomes) == 1
        assert labels[outcomes[0].index] == "psi-"
        assert outcomes[0].probability == pytest.approx(1.0)

    def test_post_state_phase_is_canonical(self):
        """The leading amplitude of a post-measurement state is real and nonnegative."""
        state = qcore.make_state([0, 1j], (2,))

        post = qcore.measure_projective(state, [0], np.eye(2))[0].post

        assert post.amps[1] == pytest.approx(1.0)

    def test_incomplete_basis_rejected(self):
        """A basis must be square, orthonormal and complete."""
        with pytest.raises(InvalidArgument):
            qcore.measure_projective(qcore.bell_state("phi+"), [0], np.array([[1, 1], [0, 1]]))

    def test_repeated_factor_rejected(self):
        """Factor lists may not repeat."""
        with pytest.raises(InvalidArgument, match="repeated"):
            qcore.measure_projective(qcore.bell_state("phi+"), [0, 0], np.eye(4))

    @given(complex_vectors(8), st.sampled_from([[0], [1, 2], [2, 0], [0, 1, 2]]))
    def test_measurement_conserves_probability(self, amps, factors):
        """Outcome probabilities of any projective measurement sum to 1."""
        state = qcore.make_state(amps, (2, 2, 2), normalize=True)
        dim = 2 ** len(factors)
        q, _ = np.linalg.qr(np.arange(dim * dim).reshape(dim, dim) + 1j * np.eye(dim))

        outcomes = qcore.measure_projective(state, factors, q)

        assert sum(o.probability for o in outcomes) == pytest.approx(1.0, abs=1e-9)


# ============================================================================
# ENTANGLEMENT TESTS
# ============================================================================


class TestEntanglement:
    """Test Schmidt coefficients and entropy."""

    def test_bell_pair_has_one_ebit(self):
        """Every Bell state carries exactly one ebit."""
        for label in qcore.BELL_LABELS:
            entropy = qcore.entanglement_entropy(qcore.bell_state(label), Bipartition.of([0], 2))
            assert entropy == pytest.approx(1.0)

    def test_product_state_has_no_entanglement(self):
        """A product state has a single Schmidt coefficient and zero entropy."""
        state = qcore.basis_state((0, 1), (2, 2))
        cut = Bipartition.of([0], 2)

        assert qcore.schmidt_coefficients(state, cut) == pytest.approx([1.0])
        assert qcore.entanglement_entropy(state, cut) == 0.0

    def test_cut_must_cover_state(self):
        """A cut over a different number of factors is rejected."""
        with pytest.raises(InvalidArgument):
            qcore.schmidt_coefficients(qcore.bell_state("phi+"), Bipartition.of([0], 3))

    @given(complex_vectors(4), complex_vectors(4))
    def test_entropy_is_additive(self, a, b):
        """Entropy of a tensor product across the party cut is the sum of the parts."""
        first = qcore.make_state(a, (2, 2), normalize=True)
        second = qcore.make_state(b, (2, 2), normalize=True)
        both = qcore.tensor([first, second])

        total = qcore.entanglement_entropy(both, Bipartition.of([0, 2], 4))
        cut = Bipartition.of([0], 2)
        parts = qcore.entanglement_entropy(first, cut) + qcore.entanglement_entropy(second, cut)

        assert total == pytest.approx(parts, abs=1e-6)

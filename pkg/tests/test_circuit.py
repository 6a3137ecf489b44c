import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from locsim.circuit import (CHIP_INPUTS, CHIP_OUTPUTS, TransitionMatrix, chip_amplitudes, chip_unitary, compose,
                            coupler_matrix, embed, output_distribution, phase_matrix)
from locsim.errors import DomainError, StructuralError

A = CHIP_INPUTS.index("a")
PORTS = {label: i for i, label in enumerate(CHIP_OUTPUTS)}

etas = st.floats(0.0, 1.0)
phases = st.floats(-20.0, 20.0, allow_nan=False)


def random_unitary(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return TransitionMatrix(q * (np.diag(r) / np.abs(np.diag(r))))


class TestCoupler:
    def test_balanced(self):
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(coupler_matrix(0.5).entries, [[s, 1j * s], [1j * s, s]], atol=1e-15)

    def test_full_reflectivity_is_identity(self):
        np.testing.assert_array_equal(coupler_matrix(1.0).entries, np.eye(2))

    def test_zero_reflectivity_swaps(self):
        np.testing.assert_array_equal(coupler_matrix(0.0).entries, [[0, 1j], [1j, 0]])

    @pytest.mark.parametrize("eta", [-0.01, 1.0001, math.nan, math.inf])
    def test_domain(self, eta):
        with pytest.raises(DomainError):
            coupler_matrix(eta)

    @given(etas)
    def test_unitary(self, eta):
        assert coupler_matrix(eta).is_unitary()


class TestPhase:
    @pytest.mark.parametrize("phi, expected", [(0.0, 1), (math.pi, -1), (math.pi / 2, 1j)])
    def test_values(self, phi, expected):
        assert phase_matrix(phi).entries[0, 0] == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("phi", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, phi):
        with pytest.raises(DomainError):
            phase_matrix(phi)

    @given(phases)
    def test_unit_modulus(self, phi):
        assert abs(phase_matrix(phi).entries[0, 0]) == pytest.approx(1.0, abs=1e-15)


class TestEmbed:
    def test_identity(self):
        assert embed(TransitionMatrix.identity(2), [0, 1], 4).allclose(TransitionMatrix.identity(4), atol=0)

    def test_block_placement(self):
        u = embed(coupler_matrix(0.5), [1, 2], 4).entries
        s = 1 / math.sqrt(2)
        expected = np.eye(4, dtype=complex)
        expected[1:3, 1:3] = [[s, 1j * s], [1j * s, s]]
        np.testing.assert_allclose(u, expected, atol=1e-15)

    def test_phase(self):
        np.testing.assert_allclose(embed(phase_matrix(math.pi), [3], 4).entries, np.diag([1, 1, 1, -1]),
                                   atol=1e-15)

    def test_reversed_mode_order(self):
        # (2, 0) means the element's first row/column is mode 2
        m = TransitionMatrix([[1, 2], [3, 4]])
        u = embed(m, [2, 0], 3).entries
        assert u[2, 2] == 1 and u[2, 0] == 2 and u[0, 2] == 3 and u[0, 0] == 4 and u[1, 1] == 1

    @pytest.mark.parametrize("modes, dim", [([0, 0], 4), ([0, 4], 4), ([-1, 1], 4), ([0], 4)])
    def test_structural_errors(self, modes, dim):
        with pytest.raises(StructuralError):
            embed(coupler_matrix(0.5), modes, dim)


class TestCompose:
    def test_single(self):
        u = random_unitary(3, np.random.default_rng(0))
        assert compose([u]).allclose(u, atol=0)

    def test_inverse(self):
        u = random_unitary(5, np.random.default_rng(1))
        assert compose([u, u.dagger()]).allclose(TransitionMatrix.identity(5), atol=1e-10)

    def test_order_first_applied_first(self):
        a = TransitionMatrix([[0, 1], [1, 0]])
        b = TransitionMatrix([[1, 0], [0, 1j]])
        # light meets a, then b: U = b @ a
        np.testing.assert_array_equal(compose([a, b]).entries, b.entries @ a.entries)

    def test_dim_mismatch(self):
        with pytest.raises(StructuralError):
            compose([TransitionMatrix.identity(2), TransitionMatrix.identity(3)])

    def test_empty(self):
        with pytest.raises(StructuralError):
            compose([])

    def test_mach_zehnder_against_symbolic_product(self):
        phi = sympy.symbols("phi", real=True)
        s = 1 / sympy.sqrt(2)
        dc = sympy.Matrix([[s, sympy.I * s], [sympy.I * s, s]])
        ps = sympy.Matrix([[1, 0], [0, sympy.exp(sympy.I * phi)]])
        mz = sympy.lambdify(phi, dc * ps * dc, "numpy")
        for value in np.linspace(0, 2 * np.pi, 17):
            u = compose([coupler_matrix(0.5), embed(phase_matrix(value), [1], 2), coupler_matrix(0.5)])
            np.testing.assert_allclose(u.entries, np.array(mz(value), dtype=complex), atol=1e-14)
            assert abs(u.entries[0, 0]) == pytest.approx(abs(math.sin(value / 2)), abs=1e-14)

    def test_associative(self):
        rng = np.random.default_rng(2)
        a, b, c = (random_unitary(6, rng) for _ in range(3))
        assert compose([a, b, c]).allclose(compose([compose([a, b]), c]), atol=1e-12)


def explicit_chip(phi, e1=0.5, e2=0.5, e3=1 / 3, e4=1 / 3):
    """Chip matrix written out by hand, without embed/compose."""
    def dc(eta, m, n):
        u = np.eye(4, dtype=complex)
        r, t = math.sqrt(eta), 1j * math.sqrt(1 - eta)
        u[m, m] = u[n, n] = r
        u[m, n] = u[n, m] = t
        return u

    ps = np.diag([1, 1, 1, np.exp(1j * phi)])
    return dc(e2, 2, 3) @ dc(e4, 3, 1) @ dc(e3, 2, 0) @ ps @ dc(e1, 2, 3)


class TestChip:
    def probs(self, phi):
        d = output_distribution(chip_unitary(phi), A, CHIP_OUTPUTS)
        return [d[p] for p in "efgh"]

    def test_phi_zero(self):
        np.testing.assert_allclose(self.probs(0.0), [1 / 3, 1 / 3, 0, 1 / 3], atol=1e-12)

    def test_phi_pi(self):
        np.testing.assert_allclose(self.probs(math.pi), [1 / 3, 1 / 3, 1 / 3, 0], atol=1e-12)

    def test_phi_half_pi_matches_explicit_product(self):
        col = explicit_chip(math.pi / 2)[:, A]
        assert abs(col[PORTS["g"]]) ** 2 == pytest.approx(1 / 6, abs=1e-12)
        assert abs(col[PORTS["h"]]) ** 2 == pytest.approx(1 / 6, abs=1e-12)
        np.testing.assert_allclose(chip_unitary(math.pi / 2).entries, explicit_chip(math.pi / 2), atol=1e-14)

    def test_g_probability_grid(self):
        for phi in np.linspace(0, 2 * np.pi, 32, endpoint=False):
            p_g = abs(explicit_chip(phi)[PORTS["g"], A]) ** 2
            assert self.probs(phi)[2] == pytest.approx(math.sin(phi / 2) ** 2 / 3, abs=1e-12)
            assert p_g == pytest.approx(math.sin(phi / 2) ** 2 / 3, abs=1e-12)

    def test_closed_form_up_to_global_phase(self):
        for phi in np.linspace(0, 2 * np.pi, 64, endpoint=False):
            col = chip_unitary(phi).entries[:, A]
            ref = np.array([chip_amplitudes(phi)[p] for p in "efgh"])
            g = ref[0] / col[0]
            np.testing.assert_allclose(col * g, ref, atol=1e-9)

    def test_arm_share_and_tap_independence(self):
        grid = np.linspace(0, 2 * np.pi, 200)
        p = np.array([self.probs(phi) for phi in grid])
        np.testing.assert_allclose(p[:, 2] + p[:, 3], 1 / 3, atol=1e-9)
        assert np.ptp(p[:, 0]) < 1e-9 and np.ptp(p[:, 1]) < 1e-9

    def test_h_bright_at_zero(self):
        assert self.probs(0.0)[3] == pytest.approx(1 / 3)

    def test_random_parameters_unitary(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            u = chip_unitary(rng.uniform(-10, 10), rng.uniform(0, 1, 4))
            assert u.unitarity_error() < 1e-10

    def test_bad_eta(self):
        with pytest.raises(DomainError):
            chip_unitary(0.0, (0.5, 0.5, 1.2, 1 / 3))
        with pytest.raises(StructuralError):
            chip_unitary(0.0, (0.5, 0.5))


class TestOutputDistribution:
    def test_identity(self):
        d = output_distribution(TransitionMatrix.identity(4), 2)
        np.testing.assert_array_equal(d.probabilities, [0, 0, 1, 0])

    def test_out_of_range(self):
        with pytest.raises(StructuralError):
            output_distribution(TransitionMatrix.identity(4), 4)

    @settings(max_examples=50)
    @given(phases, st.tuples(etas, etas, etas, etas), st.integers(0, 3))
    def test_normalized(self, phi, ets, col):
        d = output_distribution(chip_unitary(phi, ets), col)
        assert d.total == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(d.probabilities, np.abs(d.amplitudes) ** 2)

    def test_immutable(self):
        d = output_distribution(chip_unitary(0.3), A)
        with pytest.raises(ValueError):
            d.probabilities[0] = 1.0

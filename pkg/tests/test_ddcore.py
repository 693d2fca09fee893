"""Lattice geometry and operator tests."""

import numpy as np
import pytest

from ddhop.ddcore import (DDGrid, LinearOperator, cyclic_shift_power, dft_matrix,
                          doppler_phase_power, isfft_tx, sfft_rx)


def random_complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestDDGrid:
    def test_symbol_period_ties_to_spacing(self):
        g = DDGrid(M=128, N=16, delta_f=15e3)
        assert g.T * g.delta_f == 1.0
        assert g.T_s == g.T / g.M
        assert g.size == 128 * 16

    def test_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            DDGrid(M=0, N=4)
        with pytest.raises(ValueError):
            DDGrid(M=4, N=4, delta_f=-1.0)

    def test_vectorize_is_column_stacked(self):
        g = DDGrid(M=3, N=2)
        X = np.arange(6).reshape(3, 2, order="F").astype(complex)
        v = g.vectorize(X)
        # index c = alpha + beta*M
        for alpha in range(3):
            for beta in range(2):
                assert v[alpha + beta * 3] == X[alpha, beta]

    def test_devectorize_roundtrip(self):
        g = DDGrid(M=5, N=4)
        rng = np.random.default_rng(0)
        X = random_complex(rng, (5, 4))
        assert np.array_equal(g.devectorize(g.vectorize(X)), X)

    def test_shape_errors(self):
        g = DDGrid(M=4, N=4)
        with pytest.raises(ValueError):
            g.vectorize(np.zeros((4, 5)))
        with pytest.raises(ValueError):
            g.devectorize(np.zeros(15))


class TestSfft:
    def test_zero_in_zero_out(self):
        g = DDGrid(M=4, N=4)
        assert not sfft_rx(np.zeros(16, complex), g).any()

    def test_impulse_two_by_two(self):
        # unit impulse at c=0 spreads over row 0 with 1/sqrt(2) weights
        g = DDGrid(M=2, N=2)
        x = np.zeros(4, complex)
        x[0] = 1.0
        W = g.devectorize(sfft_rx(x, g))
        assert np.allclose(W[0], [1 / np.sqrt(2), 1 / np.sqrt(2)])
        assert np.allclose(W[1], 0.0)

    def test_unitary_on_random_inputs(self):
        g = DDGrid(M=8, N=4)
        rng = np.random.default_rng(1)
        for _ in range(100):
            x = random_complex(rng, g.size)
            y = sfft_rx(x, g)
            assert np.isclose(np.linalg.norm(y), np.linalg.norm(x), rtol=1e-12)

    def test_matches_right_multiplication_by_dft(self):
        g = DDGrid(M=4, N=8)
        rng = np.random.default_rng(2)
        X = random_complex(rng, (4, 8))
        W = g.devectorize(sfft_rx(g.vectorize(X), g))
        assert np.allclose(W, X @ dft_matrix(8), atol=1e-12)

    def test_length_mismatch(self):
        g = DDGrid(M=4, N=4)
        with pytest.raises(ValueError):
            sfft_rx(np.zeros(15, complex), g)


class TestIsfft:
    def test_inverse_pair(self):
        g = DDGrid(M=8, N=4)
        rng = np.random.default_rng(3)
        x = random_complex(rng, g.size)
        assert np.allclose(isfft_tx(sfft_rx(x, g), g), x, rtol=1e-12, atol=1e-12)
        assert np.allclose(sfft_rx(isfft_tx(x, g), g), x, rtol=1e-12, atol=1e-12)

    def test_zero(self):
        g = DDGrid(M=4, N=2)
        assert not isfft_tx(np.zeros(8, complex), g).any()

    def test_dd_impulse_becomes_phase_ramp(self):
        # impulse at (alpha=l, beta=k) -> s[l + m*M] = exp(2j pi k m / N)/sqrt(N)
        g = DDGrid(M=4, N=8)
        l, k = 2, 3
        X = np.zeros((4, 8), complex)
        X[l, k] = 1.0
        s = isfft_tx(g.vectorize(X), g)
        for m in range(8):
            expect = np.exp(2j * np.pi * k * m / 8) / np.sqrt(8)
            assert abs(s[l + m * 4] - expect) < 1e-12
        mask = np.ones(32, bool)
        mask[l + np.arange(8) * 4] = False
        assert np.allclose(s[mask], 0.0, atol=1e-12)


class TestCyclicShift:
    def test_zero_power_is_identity(self):
        op = cyclic_shift_power(0.0, 8)
        x = np.arange(8).astype(complex)
        assert np.allclose(op(x), x)

    def test_unit_shift(self):
        op = cyclic_shift_power(1.0, 4)
        assert np.allclose(op(np.array([1, 0, 0, 0], complex)), [0, 1, 0, 0])

    def test_fractional_matches_dense_eigenbasis(self):
        n = 16
        F = dft_matrix(n)
        for x in (0.5, 1.3, -0.7):
            D = np.diag(np.exp(-2j * np.pi * x * np.arange(n) / n))
            dense = F.conj().T @ D @ F
            got = cyclic_shift_power(x, n).materialize()
            assert np.max(np.abs(got - dense)) < 1e-10

    def test_group_property(self):
        rng = np.random.default_rng(4)
        n = 32
        v = random_complex(rng, n)
        for a, b in [(0.3, 1.4), (0.5, 0.5), (-0.2, 2.7)]:
            lhs = cyclic_shift_power(a, n)(cyclic_shift_power(b, n)(v))
            rhs = cyclic_shift_power(a + b, n)(v)
            assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_integer_shift_has_no_leakage(self):
        n = 16
        dense = cyclic_shift_power(3, n).materialize()
        expect = np.roll(np.eye(n), 3, axis=0)
        assert np.max(np.abs(dense - expect)) < 1e-12


class TestDopplerPhase:
    def test_zero_power_identity(self):
        op = doppler_phase_power(0.0, 8)
        x = np.arange(8).astype(complex)
        assert np.allclose(op(x), x)

    def test_unit_power_small(self):
        op = doppler_phase_power(1.0, 2)
        assert np.allclose(op.materialize(), np.diag([1.0, -1.0]), atol=1e-12)

    def test_fractional_entries(self):
        op = doppler_phase_power(2.5, 4)
        dense = op.materialize()
        c = np.arange(4)
        assert np.allclose(np.diag(dense), np.exp(2j * np.pi * 2.5 * c / 4))
        assert np.allclose(np.abs(np.diag(dense)), 1.0)

    def test_group_property_exact(self):
        a, b = 0.7, 1.9
        n = 12
        lhs = doppler_phase_power(a, n).materialize() @ \
            doppler_phase_power(b, n).materialize()
        rhs = doppler_phase_power(a + b, n).materialize()
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestLinearOperator:
    def test_dense_matches_fast_apply(self):
        rng = np.random.default_rng(5)
        n = 16
        op = cyclic_shift_power(0.25, n)
        dense = op.materialize()
        for _ in range(10):
            x = random_complex(rng, n)
            assert np.linalg.norm(op(x) - dense @ x) <= 1e-10 * np.linalg.norm(x)

    def test_dense_cap(self):
        op = LinearOperator(5000, lambda x: x)
        with pytest.raises(ValueError):
            op.materialize()

    def test_compose(self):
        n = 8
        a = cyclic_shift_power(1.0, n)
        b = doppler_phase_power(1.0, n)
        x = np.arange(n).astype(complex)
        assert np.allclose(a.compose(b)(x), a(b(x)))

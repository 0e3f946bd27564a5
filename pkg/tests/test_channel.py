"""Channel matrices, seeded streams, noise model, and rate quantities."""

import math
from fractions import Fraction

import numpy as np
import pytest

from ergodic_align import (
    ChannelMatrix,
    MatrixStream,
    NoiseModel,
    PrimeField,
    child_dof,
    draw_matrix,
    relative_entropy,
    scheme_dof,
)

# upper 0.999 quantiles of chi-square, keyed by degrees of freedom
CHI2_999 = {1: 10.83, 3: 16.27, 15: 37.70}


class TestChannelMatrix:
    def test_rejects_zero_entries(self):
        f = PrimeField(3)
        with pytest.raises(ValueError):
            ChannelMatrix(np.array([[1, 0], [1, 2]]), 0, f)

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            ChannelMatrix(np.ones((2, 3), dtype=int), 0, PrimeField(3))

    def test_entries_read_only(self):
        m = ChannelMatrix(np.array([[1, 2], [2, 1]]), 0, PrimeField(3))
        with pytest.raises(ValueError):
            m.entries[0, 0] = 2


class TestDrawMatrix:
    def test_q2_is_all_ones(self):
        f = PrimeField(2)
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = draw_matrix(3, f, rng)
            assert (m.entries == 1).all()

    def test_no_zero_entries_ever(self):
        rng = np.random.default_rng(1)
        for q in (3, 5, 7):
            f = PrimeField(q)
            for _ in range(50):
                m = draw_matrix(4, f, rng)
                assert (m.entries >= 1).all() and (m.entries < q).all()

    def test_q3_scalar_is_fair(self):
        # n=1, q=3: entry 1 or 2 each w.p. 1/2, binomial z-test at 3 sigma
        f = PrimeField(3)
        rng = np.random.default_rng(2)
        trials = 100_000
        ones = sum(draw_matrix(1, f, rng).entries[0, 0] == 1 for _ in range(trials))
        sigma = math.sqrt(trials * 0.25)
        assert abs(ones - trials / 2) < 3 * sigma

    def test_interference_row_uniform_chi_square(self):
        # receiver 0's cross row at n=3, q=3 is uniform on {1,2}^2
        f = PrimeField(3)
        rng = np.random.default_rng(3)
        trials = 100_000
        counts = np.zeros((2, 2))
        for _ in range(trials):
            row = draw_matrix(3, f, rng).entries[0, 1:]
            counts[row[0] - 1, row[1] - 1] += 1
        expected = trials / 4
        chi2 = ((counts - expected) ** 2 / expected).sum()
        assert chi2 < CHI2_999[3]


class TestMatrixStream:
    def test_reproducible(self):
        f = PrimeField(5)
        a = MatrixStream(3, f, seed=99)
        b = MatrixStream(3, f, seed=99)
        for _ in range(10):
            assert np.array_equal(a.next_matrix().entries, b.next_matrix().entries)

    def test_streams_differ(self):
        f = PrimeField(5)
        a = MatrixStream(3, f, seed=99, stream=0)
        b = MatrixStream(3, f, seed=99, stream=1)
        assert not np.array_equal(a.peek(20), b.peek(20))

    def test_peek_does_not_consume(self):
        f = PrimeField(3)
        s = MatrixStream(2, f, seed=1)
        first = s.peek(5).copy()
        assert np.array_equal(s.peek(5), first)
        assert s.slot == 0
        s.consume(2)
        assert s.slot == 2
        assert np.array_equal(s.peek(3), first[2:5])

    def test_peek_consume_matches_next_matrix(self):
        f = PrimeField(7)
        a = MatrixStream(2, f, seed=5, block_size=4)
        b = MatrixStream(2, f, seed=5, block_size=64)
        seq_a = [a.next_matrix().entries for _ in range(20)]
        big = b.peek(20).copy()
        assert np.array_equal(np.stack(seq_a), big)

    def test_slot_numbers_increase(self):
        f = PrimeField(3)
        s = MatrixStream(2, f, seed=0)
        slots = [s.next_matrix().slot for _ in range(5)]
        assert slots == [0, 1, 2, 3, 4]


class TestNoiseModel:
    def test_pmf_sums_to_one(self):
        f = PrimeField(5)
        for rho in (0.0, 0.3, 0.8, 1.0):
            pmf = NoiseModel(rho, f).pmf()
            assert pmf.sum() == pytest.approx(1.0)
            assert pmf[0] == pytest.approx(1 - rho)

    def test_rho_range(self):
        with pytest.raises(ValueError):
            NoiseModel(1.5, PrimeField(3))


class TestRelativeEntropy:
    def test_noiseless(self):
        for q in (2, 3, 5, 7):
            d = relative_entropy(NoiseModel(0.0, PrimeField(q)))
            assert d == pytest.approx(math.log2(q))

    def test_uniform_noise_zero(self):
        for q in (3, 5):
            rho = (q - 1) / q
            assert relative_entropy(NoiseModel(rho, PrimeField(q))) == pytest.approx(0.0, abs=1e-12)

    def test_binary_extreme(self):
        assert relative_entropy(NoiseModel(0.5, PrimeField(2))) == pytest.approx(0.0)

    def test_monotone_in_rho(self):
        f = PrimeField(5)
        grid = np.linspace(0, 4 / 5, 30)
        vals = [relative_entropy(NoiseModel(r, f)) for r in grid]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_bounds(self):
        for q in (3, 7):
            for rho in (0.1, 0.5, 0.9):
                d = relative_entropy(NoiseModel(rho, PrimeField(q)))
                assert -1e-12 <= d <= math.log2(q) + 1e-12


class TestDof:
    def test_scheme_dof(self):
        assert scheme_dof(1) == Fraction(1, 2)
        assert scheme_dof(0) == Fraction(1)
        with pytest.raises(ValueError):
            scheme_dof(-1)

    def test_child_dof(self):
        assert child_dof(3, 6, 1) == Fraction(1, 4)
        assert child_dof(2, 4, 1) == Fraction(1, 4)
        with pytest.raises(ValueError):
            child_dof(5, 4, 1)

"""Scheme runs: matching, recovery coefficients, beamforming, decoding."""

import itertools

import numpy as np
import pytest

import ergodic_align.schemes as schemes
from ergodic_align import (
    ChannelMatrix,
    Composition,
    MatrixStream,
    MessageBank,
    PrimeField,
    SchemeSpec,
    child_run,
    decode,
    jap_run,
    japb_run,
    ngjv_run,
    ngjv_trial,
    recovery_check,
    run_scheme,
    tdma_run,
)
from ergodic_align.schemes import DelayBudgetExceeded, ngjv_valid


class _ListStream:
    """Serves preset matrices first, then falls back to a seeded stream."""

    def __init__(self, field, n, mats, seed=0):
        self.field = field
        self.n = n
        self.block_size = 8
        self._tail = MatrixStream(n, field, seed=seed)
        self._mats = [np.asarray(m, dtype=np.int64) for m in mats]
        self.slot = 0

    def peek(self, size):
        head = self._mats[:size]
        if len(head) < size:
            tail = self._tail.peek(size - len(head))
            head = head + [tail[i] for i in range(size - len(head))]
        return np.stack(head)

    def consume(self, count):
        drop = min(count, len(self._mats))
        self._mats = self._mats[drop:]
        if count > drop:
            self._tail.consume(count - drop)
        self.slot += count

    def next_matrix(self):
        block = self.peek(1)
        m = ChannelMatrix(block[0].copy(), self.slot, self.field)
        self.consume(1)
        return m


class TestComposition:
    def test_parse_and_sums(self):
        a = Composition.parse("1,2,3")
        assert a.n == 6 and a.K == 3
        assert a.partial_sums == (1, 3, 6)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Composition((1, 0, 2))
        with pytest.raises(ValueError):
            Composition(())

    def test_parse_garbage(self):
        with pytest.raises(ValueError):
            Composition.parse("1,x")


class TestRecoveryCheck:
    def test_single_slot_absent(self):
        f = PrimeField(5)
        m = ChannelMatrix(np.array([[1, 2], [3, 4]]), 0, f)
        assert recovery_check([m], 0) is None
        assert recovery_check([m], 1) is None

    def test_complement_pair_gives_ones(self):
        f = PrimeField(5)
        rng = np.random.default_rng(11)
        for _ in range(20):
            e = rng.integers(1, 5, size=(3, 3))
            comp = (np.eye(3, dtype=np.int64) - e) % 5
            if (comp == 0).any():
                continue
            m0 = ChannelMatrix(e, 0, f)
            m1 = ChannelMatrix(comp, 1, f)
            for j in range(3):
                assert recovery_check([m0, m1], j) == (1, 1)

    def test_two_slot_closed_form_exhaustive_q3(self):
        # n=2: recovery for receiver 0 succeeds iff the diag/cross ratios at
        # the two slots differ
        f = PrimeField(3)
        inv = {1: 1, 2: 2}
        for h in itertools.product((1, 2), repeat=4):
            m0 = ChannelMatrix(np.array([[h[0], h[1]], [1, 1]]), 0, f)
            m1 = ChannelMatrix(np.array([[h[2], h[3]], [1, 1]]), 1, f)
            lam = recovery_check([m0, m1], 0)
            ratios_differ = (h[0] * inv[h[1]]) % 3 != (h[2] * inv[h[3]]) % 3
            assert (lam is not None) == ratios_differ
            if lam is not None:
                assert (lam[0] * h[1] + lam[1] * h[3]) % 3 == 0
                assert (lam[0] * h[0] + lam[1] * h[2]) % 3 == 1

    def test_coefficients_rescaled_to_unit_diagonal(self):
        f = PrimeField(7)
        rng = np.random.default_rng(3)
        found = 0
        while found < 10:
            mats = [ChannelMatrix(rng.integers(1, 7, size=(3, 3)), t, f)
                    for t in range(3)]
            lam = recovery_check(mats, 1)
            if lam is None:
                continue
            found += 1
            diag = sum(l * m.entries[1, 1] for l, m in zip(lam, mats)) % 7
            assert diag == 1

    def test_errors(self):
        f = PrimeField(3)
        m2 = ChannelMatrix(np.array([[1, 2], [2, 1]]), 0, f)
        m3 = ChannelMatrix(np.ones((3, 3), dtype=np.int64), 1, f)
        with pytest.raises(ValueError):
            recovery_check([], 0)
        with pytest.raises(ValueError):
            recovery_check([m2, m3], 0)
        with pytest.raises(ValueError):
            recovery_check([m2], 5)


class TestNgjv:
    def test_validity_predicate(self):
        f = PrimeField(3)
        good = ChannelMatrix(np.array([[2, 1], [1, 2]]), 0, f)
        bad = ChannelMatrix(np.array([[1, 1], [1, 2]]), 0, f)
        assert ngjv_valid(good)
        assert not ngjv_valid(bad)

    def test_waits_for_exact_complement(self):
        f = PrimeField(5)
        h0 = np.array([[2, 3], [4, 2]])
        target = (np.eye(2, dtype=np.int64) - h0) % 5
        filler = np.full((2, 2), 3, dtype=np.int64)
        stream = _ListStream(f, 2, [filler, filler, target])
        run = ngjv_run(ChannelMatrix(h0, 0, f), stream)
        assert run.total_delay == 3
        assert run.rounds[0].lambdas[0] == (1, 1)
        assert np.array_equal(run.slot_matrices[3], target)

    def test_rejects_q2_and_invalid_start(self):
        f3 = PrimeField(3)
        with pytest.raises(ValueError):
            ngjv_run(ChannelMatrix(np.ones((2, 2), dtype=np.int64), 0, PrimeField(2)),
                     MatrixStream(2, PrimeField(2), seed=0))
        bad = ChannelMatrix(np.array([[1, 2], [2, 2]]), 0, f3)
        with pytest.raises(ValueError):
            ngjv_run(bad, MatrixStream(2, f3, seed=0))

    def test_trial_counts_resamples(self):
        f = PrimeField(3)
        bad = np.array([[1, 2], [2, 2]])     # diagonal 1 -> rejected
        good = np.array([[2, 2], [2, 2]])
        target = (np.eye(2, dtype=np.int64) - good) % 3
        stream = _ListStream(f, 2, [bad, bad, good, target])
        run = ngjv_trial(2, f, stream)
        assert run.resamples == 2
        assert run.total_delay == 1

    def test_geometric_mean_n1(self):
        # n=1, q=3: wait for one exact value among {1,2}, mean 2
        f = PrimeField(3)
        delays = []
        for t in range(4000):
            run = ngjv_trial(1, f, MatrixStream(1, f, seed=123, stream=t))
            delays.append(run.total_delay)
        mean = np.mean(delays)
        se = np.std(delays, ddof=1) / np.sqrt(len(delays))
        assert abs(mean - 2.0) < 3 * se + 0.05

    def test_max_slots_raises(self):
        f = PrimeField(7)
        h0 = np.full((3, 3), 2, dtype=np.int64)
        with pytest.raises(DelayBudgetExceeded):
            ngjv_run(ChannelMatrix(h0, 0, f), MatrixStream(3, f, seed=0),
                     max_slots=16)


class TestJap:
    def test_complement_matches_in_one_slot(self):
        f = PrimeField(5)
        rng = np.random.default_rng(5)
        h0 = rng.integers(2, 5, size=(3, 3))
        target = (np.eye(3, dtype=np.int64) - h0) % 5
        assert (target != 0).all()
        stream = _ListStream(f, 3, [target])
        run = jap_run(Composition((3,)), ChannelMatrix(h0, 0, f), stream)
        assert run.total_delay == 1

    def test_accepts_everything_ngjv_accepts(self):
        # any slot equal to I - H0 qualifies for the single-round scheme
        f = PrimeField(7)
        rng = np.random.default_rng(9)
        for _ in range(10):
            h0 = rng.integers(2, 7, size=(3, 3))
            target = (np.eye(3, dtype=np.int64) - h0) % 7
            if (target == 0).any():
                continue
            run = jap_run(Composition((3,)), ChannelMatrix(h0, 0, f),
                          _ListStream(f, 3, [target]))
            assert run.total_delay == 1

    def test_round_structure(self):
        f = PrimeField(3)
        stream = MatrixStream(4, f, seed=21)
        run = jap_run(Composition((1, 1, 2)), stream.next_matrix(), stream)
        assert [r.receivers for r in run.rounds] == [(0,), (1,), (2, 3)]
        assert run.slots[0] == 0
        assert run.total_delay == run.slots[-1] - run.slots[0]
        assert run.total_delay == sum(run.waits)

    def test_wrong_weight_rejected(self):
        f = PrimeField(3)
        stream = MatrixStream(3, f, seed=0)
        with pytest.raises(ValueError):
            jap_run(Composition((1, 1)), stream.next_matrix(), stream)

    def test_first_match_debug_mode(self):
        f = PrimeField(3)
        schemes.DEBUG_FIRST_MATCH = True
        try:
            for t in range(5):
                stream = MatrixStream(3, f, seed=77, stream=t)
                jap_run(Composition((1, 2)), stream.next_matrix(), stream)
        finally:
            schemes.DEBUG_FIRST_MATCH = False


class TestJapb:
    def test_all_singletons_match_every_slot(self):
        # a = [1,...,1]: beamforming serves each round on the very next slot
        f = PrimeField(5)
        for seed in range(5):
            stream = MatrixStream(4, f, seed=seed)
            run = japb_run(Composition((1, 1, 1, 1)), stream.next_matrix(), stream)
            assert run.waits == [1, 1, 1, 1]
            assert run.total_delay == 4

    def test_beamformed_interference_rows_match_start(self):
        f = PrimeField(7)
        stream = MatrixStream(4, f, seed=31)
        run = japb_run(Composition((2, 2)), stream.next_matrix(), stream)
        h0 = run.slot_matrices[run.slots[0]]
        for k, rec in enumerate(run.rounds, start=1):
            l = rec.receivers[0]
            eff = run.slot_matrices[rec.slot]
            cross = [i for i in range(4) if i != l]
            assert np.array_equal(eff[l, cross], h0[l, cross])
            assert eff[l, l] != h0[l, l]

    def test_single_round_diagonal_identity(self):
        # JAP-B([n]) yields diagonal D0, D1 with D0 H[t0] + D1 Heff[t1] = I
        f = PrimeField(5)
        stream = MatrixStream(3, f, seed=13)
        run = japb_run(Composition((3,)), stream.next_matrix(), stream)
        h0 = run.slot_matrices[run.slots[0]]
        h1 = run.slot_matrices[run.slots[1]]
        lam = np.array([run.rounds[0].lambdas[j] for j in range(3)])
        combo = (lam[:, 0:1] * h0 + lam[:, 1:2] * h1) % 5
        assert np.array_equal(combo, np.eye(3, dtype=np.int64))

    def test_rejects_q2(self):
        f = PrimeField(2)
        stream = MatrixStream(3, f, seed=0)
        with pytest.raises(ValueError):
            japb_run(Composition((1, 2)), stream.next_matrix(), stream)


class TestTdma:
    def test_delay_is_n(self):
        f = PrimeField(3)
        run = tdma_run(4, MatrixStream(4, f, seed=1))
        assert run.total_delay == 4
        assert [r.receivers for r in run.rounds] == [(0,), (1,), (2,), (3,)]

    def test_single_user(self):
        f = PrimeField(5)
        run = tdma_run(1, MatrixStream(1, f, seed=2))
        assert run.total_delay == 1
        assert SchemeSpec("tdma").dof(1) == 1

    def test_effective_matrix_single_column(self):
        f = PrimeField(7)
        run = tdma_run(3, MatrixStream(3, f, seed=3))
        for j, t in enumerate(run.slots):
            eff = run.slot_matrices[t]
            mask = np.zeros((3, 3), dtype=bool)
            mask[:, j] = True
            assert (eff[~mask] == 0).all()
            assert (eff[:, j] != 0).all()


class TestChild:
    def test_dof_and_subset_order(self):
        f = PrimeField(3)
        parent = SchemeSpec("japb", a=Composition((3,)))
        run = child_run(parent, 3, 6, f, MatrixStream(6, f, seed=4), max_slots=200_000)
        assert run.dof == SchemeSpec("child", parent=parent, m=3).dof(6)
        assert str(run.dof) == "1/4"
        assert run.subsets == list(itertools.combinations(range(6), 3))
        assert run.total_delay == sum(r.total_delay for r in run.subruns)

    def test_ngjv_parent_dof(self):
        spec = SchemeSpec("child", parent=SchemeSpec("ngjv"), m=2)
        assert str(spec.dof(4)) == "1/4"

    def test_m_equals_n_degenerates_to_parent(self):
        f = PrimeField(3)
        parent = SchemeSpec("jap", a=Composition((1, 2)))
        direct_stream = MatrixStream(3, f, seed=6)
        direct = run_scheme(parent, 3, f, direct_stream)
        child_stream = MatrixStream(3, f, seed=6)
        child = child_run(parent, 3, 3, f, child_stream)
        assert len(child.subruns) == 1
        assert child.total_delay == direct.total_delay

    def test_m_out_of_range(self):
        f = PrimeField(3)
        with pytest.raises(ValueError):
            child_run(SchemeSpec("ngjv"), 5, 4, f, MatrixStream(4, f, seed=0))


class TestSchemeSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SchemeSpec("nope")
        with pytest.raises(ValueError):
            SchemeSpec("jap")
        with pytest.raises(ValueError):
            SchemeSpec("child", parent=SchemeSpec("tdma"), m=2)

    def test_labels(self):
        assert SchemeSpec("ngjv").label() == "ngjv"
        assert SchemeSpec("jap", a=Composition((1, 2))).label() == "jap[1,2]"
        lbl = SchemeSpec("child", parent=SchemeSpec("ngjv"), m=2).label()
        assert lbl == "child(m=2,ngjv)"

    def test_dof_values(self):
        assert str(SchemeSpec("ngjv").dof(4)) == "1/2"
        assert str(SchemeSpec("tdma").dof(5)) == "1/5"
        assert str(SchemeSpec("jap", a=Composition((1, 2))).dof(3)) == "1/3"


class TestDecode:
    @pytest.mark.parametrize("q", [3, 5, 7])
    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_all_schemes_roundtrip(self, n, q):
        f = PrimeField(q)
        specs = [SchemeSpec("tdma")]
        # full-matrix pairing has mean delay (q-1)^(n^2); keep it tractable
        if q >= 3 and (q - 1) ** (n * n) <= 100_000:
            specs.append(SchemeSpec("ngjv"))
        if n >= 2:
            a = Composition(tuple([1] * (n - 2) + [2]) if n > 2 else (1, 1))
            specs.append(SchemeSpec("jap", a=a))
            if q >= 3:
                specs.append(SchemeSpec("japb", a=a))
                specs.append(SchemeSpec("child", parent=SchemeSpec("ngjv"), m=2))
        rng = np.random.default_rng(1000 * n + q)
        for spec in specs:
            for t in range(3):
                stream = MatrixStream(n, f, seed=500 + t, stream=t)
                run = run_scheme(spec, n, f, stream, max_slots=500_000)
                bank = MessageBank.random(run, rng)
                assert bank.verify_stored()
                assert np.array_equal(decode(run, bank), bank.messages), spec.label()

    def test_corruption_detected(self):
        f = PrimeField(5)
        stream = MatrixStream(3, f, seed=9)
        run = run_scheme(SchemeSpec("jap", a=Composition((1, 2))), 3, f, stream)
        rng = np.random.default_rng(2)
        for receiver in range(3):
            bank = MessageBank.random(run, rng)
            bank.corrupt(receiver)
            assert not np.array_equal(decode(run, bank), bank.messages)

    def test_message_validation(self):
        f = PrimeField(3)
        run = tdma_run(2, MatrixStream(2, f, seed=0))
        with pytest.raises(ValueError):
            MessageBank(run, np.array([[5, 1], [1, 1]]))
        with pytest.raises(ValueError):
            MessageBank(run, np.array([[1, 1]]))

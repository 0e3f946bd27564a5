"""Executable alignment schemes over a fading-matrix stream.

Each run consumes slots from a MatrixStream, waits for matchable channel
states, and records the matched slots together with the per-receiver
combination coefficients that cancel interference.  Decoding then recombines
stored pseudomessages and must reproduce every message exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .channel import ChannelMatrix, MatrixStream, child_dof, scheme_dof
from .gfq import PrimeField

# When enabled, every stream scan re-verifies that no earlier slot in the
# scanned prefix would also have qualified (first-match semantics).
DEBUG_FIRST_MATCH = False


class DelayBudgetExceeded(RuntimeError):
    """A scan passed its slot cap without finding a match."""


@dataclass(frozen=True)
class Composition:
    """Ordered positive integers [a_1, ..., a_K] with sum n; round k of a
    round-based scheme serves a_k receivers."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if not parts or any(p < 1 for p in parts):
            raise ValueError(f"composition parts must be positive, got {parts}")
        object.__setattr__(self, "parts", parts)

    @classmethod
    def parse(cls, text: str) -> "Composition":
        try:
            return cls(tuple(int(t) for t in text.split(",")))
        except ValueError as exc:
            raise ValueError(f"bad composition {text!r}: {exc}") from None

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def K(self) -> int:
        return len(self.parts)

    @property
    def partial_sums(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate(self.parts))

    def __str__(self):
        return "[" + ",".join(str(p) for p in self.parts) + "]"


@dataclass(frozen=True)
class RoundRecord:
    """One matched round: slot, receivers served, and for each receiver the
    coefficients combining the pseudomessages of ``slots``."""

    k: int
    slot: int
    receivers: tuple[int, ...]
    slots: tuple[int, ...]
    lambdas: dict[int, tuple[int, ...]]


def _make_round_record(k, slot, receivers, slots, lam_rows, matrices, q) -> RoundRecord:
    """Build a RoundRecord, asserting the recovery identities at creation:
    each receiver's combination zeroes its interference row and leaves a
    diagonal coefficient of exactly 1."""
    lambdas = {}
    for idx, j in enumerate(receivers):
        lam = np.asarray(lam_rows[idx], dtype=np.int64)
        rows = np.stack([m[j] for m in matrices])
        combo = (lam @ rows) % q
        diag = combo[j]
        combo[j] = 0
        if np.any(combo != 0) or diag != 1:
            raise AssertionError(
                f"round {k}: recovery identity violated for receiver {j}"
            )
        lambdas[j] = tuple(int(v) for v in lam)
    return RoundRecord(k, slot, tuple(receivers), tuple(slots), lambdas)


@dataclass
class SchemeRun:
    """A completed run: matched slots t_0..t_K, per-round records and waits,
    and the effective matrix stored for each matched slot."""

    scheme: str
    params: dict
    n: int
    q: int
    slots: list[int]
    rounds: list[RoundRecord]
    waits: list[int]
    total_delay: int
    slot_matrices: dict[int, np.ndarray]
    resamples: int = 0

    def __post_init__(self):
        served = [j for r in self.rounds for j in r.receivers]
        if sorted(served) != list(range(self.n)):
            raise AssertionError("each receiver must be served exactly once")
        if any(b <= a for a, b in zip(self.slots, self.slots[1:])):
            raise AssertionError("matched slots must be strictly increasing")


@dataclass
class ChildRun:
    """Time-shared run: a parent scheme executed on every m-subset of users."""

    scheme: str
    params: dict
    n: int
    q: int
    m: int
    subsets: list[tuple[int, ...]]
    subruns: list[SchemeRun]
    total_delay: int
    dof: Fraction


class _SubnetStream:
    """View of a base stream restricted to an m-subset of users; the parent
    scheme sees m-by-m matrices while slots advance on the base stream."""

    def __init__(self, base, subset):
        self.base = base
        self.idx = np.asarray(subset, dtype=np.int64)
        self.n = len(subset)
        self.field = base.field
        self.block_size = base.block_size

    @property
    def slot(self):
        return self.base.slot

    def peek(self, size):
        block = self.base.peek(size)
        return np.ascontiguousarray(block[:, self.idx[:, None], self.idx[None, :]])

    def consume(self, count):
        self.base.consume(count)

    def next_matrix(self) -> ChannelMatrix:
        block = self.peek(1)
        mat = ChannelMatrix(block[0].copy(), self.slot, self.field)
        self.consume(1)
        return mat


def _entries(mat) -> np.ndarray:
    return mat.entries if isinstance(mat, ChannelMatrix) else np.asarray(mat, dtype=np.int64)


def recovery_check(history: Sequence, j: int) -> Optional[tuple[int, ...]]:
    """Coefficients letting receiver j recover its message from the slots in
    ``history`` (channel matrices, oldest first), or None.

    The combination zeroes receiver j's interference vector at every slot
    while keeping the diagonal combination nonzero; it is rescaled so the
    diagonal combination equals exactly 1.  The full null space of the
    stacked interference vectors is searched, so a usable dependence is
    found whenever one exists.
    """
    if not history:
        raise ValueError("history must be non-empty")
    mats = [_entries(m) for m in history]
    n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise ValueError("history matrices must share one size")
    if not 0 <= j < n:
        raise ValueError(f"receiver index {j} out of range for n={n}")
    q = history[0].field.q if isinstance(history[0], ChannelMatrix) else None
    if q is None:
        raise ValueError("history must contain ChannelMatrix values")
    others = [i for i in range(n) if i != j]
    intf = np.stack([m[j, others] for m in mats]) if others else np.empty((len(mats), 0), np.int64)
    diag = np.array([m[j, j] for m in mats], dtype=np.int64)
    lam = _kernels.solve_recovery(intf, diag, q)
    if lam.size == 0:
        return None
    return tuple(int(v) for v in lam)


def _candidate_qualifies(cand, hist, r_lo, r_hi, beamform, q) -> bool:
    """Whether a single candidate slot would complete the current round."""
    block = cand[np.newaxis].astype(np.int64)
    pos, _, _ = _kernels.scan_round(block, hist, r_lo, r_hi, 1 if beamform else 0, q)
    return pos == 0


def _scan_for_round(stream, hist_arr, r_lo, r_hi, beamform, q, max_slots=None):
    """Consume the stream until the first slot serving receivers
    r_lo..r_hi-1; returns (wait, lam_rows, effective_matrix)."""
    wait = 0
    scanned = [] if DEBUG_FIRST_MATCH else None
    while True:
        block = stream.peek(stream.block_size)
        pos, lam, eff = _kernels.scan_round(
            block, hist_arr, r_lo, r_hi, 1 if beamform else 0, q
        )
        if pos >= 0:
            if scanned is not None:
                for earlier in scanned + [block[i] for i in range(pos)]:
                    assert not _candidate_qualifies(
                        earlier, hist_arr, r_lo, r_hi, beamform, q
                    ), "scan skipped a qualifying slot"
            stream.consume(pos + 1)
            return wait + pos + 1, np.asarray(lam), np.asarray(eff)
        if scanned is not None:
            scanned.extend(block[i].copy() for i in range(len(block)))
        stream.consume(len(block))
        wait += len(block)
        if max_slots is not None and wait >= max_slots:
            raise DelayBudgetExceeded(f"no match within {max_slots} slots")


def _run_rounds(name, a, H0, stream, beamform, max_slots) -> SchemeRun:
    n = H0.n
    q = H0.field.q
    if a.n != n:
        raise ValueError(f"composition {a} has weight {a.n}, expected n={n}")
    if a.K > n:
        raise ValueError(f"composition {a} has more rounds than users")
    if beamform and q < 3:
        raise ValueError("beamforming needs q >= 3")
    hist = [np.asarray(H0.entries, dtype=np.int64)]
    slots = [H0.slot]
    rounds, waits = [], []
    bounds = (0,) + a.partial_sums
    for k in range(1, a.K + 1):
        r_lo, r_hi = bounds[k - 1], bounds[k]
        wait, lam, eff = _scan_for_round(
            stream, np.stack(hist), r_lo, r_hi, beamform, q, max_slots
        )
        t_k = slots[-1] + wait
        hist.append(eff)
        slots.append(t_k)
        waits.append(wait)
        rounds.append(
            _make_round_record(
                k, t_k, range(r_lo, r_hi), tuple(slots), lam, hist, q
            )
        )
    return SchemeRun(
        scheme=name,
        params={"a": a.parts},
        n=n,
        q=q,
        slots=slots,
        rounds=rounds,
        waits=waits,
        total_delay=slots[-1] - slots[0],
        slot_matrices={t: m for t, m in zip(slots, hist)},
    )


def jap_run(a: Composition, H0: ChannelMatrix, stream, max_slots=None) -> SchemeRun:
    """Round-based matching: round k waits for the first slot on which ALL
    a_k receivers of the round can recover from the accumulated history."""
    return _run_rounds("jap", a, H0, stream, beamform=False, max_slots=max_slots)


def japb_run(a: Composition, H0: ChannelMatrix, stream, max_slots=None) -> SchemeRun:
    """Like jap_run, but the first receiver of each round is served for free
    by per-transmitter column scaling, so only the other a_k - 1 receivers
    must pass the recovery test.  Requires q >= 3."""
    return _run_rounds("japb", a, H0, stream, beamform=True, max_slots=max_slots)


def ngjv_valid(H0: ChannelMatrix) -> bool:
    """Whether I - H0 is itself a valid channel matrix (no zero entries).

    Off-diagonal targets -h_ji are always nonzero; a diagonal target
    1 - h_jj vanishes exactly when h_jj == 1.
    """
    return bool(np.all(np.diagonal(H0.entries) != 1))


def ngjv_run(H0: ChannelMatrix, stream, max_slots=None) -> SchemeRun:
    """Pair H0 with the complementary matrix I - H0: wait for that exact
    matrix, after which every receiver recovers with coefficients (1, 1)."""
    n, q = H0.n, H0.field.q
    if q < 3:
        raise ValueError("pairing with the complement matrix needs q >= 3")
    if not ngjv_valid(H0):
        raise ValueError("I - H0 has a zero entry; redraw H0")
    target = (np.eye(n, dtype=np.int64) - H0.entries) % q
    wait = 0
    while True:
        block = stream.peek(stream.block_size)
        pos = _kernels.scan_target(block, target)
        if pos >= 0:
            stream.consume(pos + 1)
            wait += pos + 1
            break
        stream.consume(len(block))
        wait += len(block)
        if max_slots is not None and wait >= max_slots:
            raise DelayBudgetExceeded(f"no match within {max_slots} slots")
    slots = [H0.slot, H0.slot + wait]
    mats = [np.asarray(H0.entries, dtype=np.int64), target]
    record = _make_round_record(
        1, slots[1], range(n), tuple(slots), [(1, 1)] * n, mats, q
    )
    return SchemeRun(
        scheme="ngjv",
        params={},
        n=n,
        q=q,
        slots=slots,
        rounds=[record],
        waits=[wait],
        total_delay=wait,
        slot_matrices={t: m for t, m in zip(slots, mats)},
    )


def ngjv_trial(n: int, field: PrimeField, stream, max_slots=None) -> SchemeRun:
    """Draw a start matrix from the stream (redrawing while I - H0 would
    contain a zero entry, with the rejection count recorded) and run the
    complement-pairing scheme."""
    resamples = 0
    while True:
        H0 = stream.next_matrix()
        if ngjv_valid(H0):
            break
        resamples += 1
    run = ngjv_run(H0, stream, max_slots=max_slots)
    run.resamples = resamples
    return run


def tdma_run(n: int, stream) -> SchemeRun:
    """Resource division: each user gets one exclusive slot; delay n slots."""
    if n < 1:
        raise ValueError(f"need at least one user, got n={n}")
    rounds, slots, mats = [], [], []
    for j in range(n):
        mat = stream.next_matrix()
        q = mat.field.q
        eff = np.zeros((n, n), dtype=np.int64)
        eff[:, j] = mat.entries[:, j]  # only transmitter j is active
        lam = (mat.field.inv(int(mat.entries[j, j])),)
        rounds.append(
            _make_round_record(j + 1, mat.slot, (j,), (mat.slot,), [lam], [eff], q)
        )
        slots.append(mat.slot)
        mats.append(eff)
    return SchemeRun(
        scheme="tdma",
        params={},
        n=n,
        q=stream.field.q,
        slots=slots,
        rounds=rounds,
        waits=[1] * n,
        total_delay=n,
        slot_matrices={t: m for t, m in zip(slots, mats)},
    )


@dataclass(frozen=True)
class SchemeSpec:
    """Which scheme to run: 'ngjv' | 'tdma' | 'jap' | 'japb' | 'child'."""

    kind: str
    a: Optional[Composition] = None
    parent: Optional["SchemeSpec"] = None
    m: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("ngjv", "tdma", "jap", "japb", "child"):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.kind in ("jap", "japb") and self.a is None:
            raise ValueError(f"{self.kind} needs a composition")
        if self.kind == "child":
            if self.parent is None or self.m is None:
                raise ValueError("child needs a parent scheme and m")
            if self.parent.kind not in ("ngjv", "jap", "japb"):
                raise ValueError(f"unsupported parent scheme {self.parent.kind!r}")

    def rounds_beyond_first(self, n: int) -> int:
        """K, the number of extra slots a message is split across."""
        if self.kind == "ngjv":
            return 1
        if self.kind == "tdma":
            return n - 1
        if self.kind in ("jap", "japb"):
            return self.a.K
        return self.parent.rounds_beyond_first(self.m)

    def dof(self, n: int) -> Fraction:
        if self.kind == "tdma":
            return Fraction(1, n)
        if self.kind == "child":
            return child_dof(self.m, n, self.parent.rounds_beyond_first(self.m))
        return scheme_dof(self.rounds_beyond_first(n))

    def label(self) -> str:
        if self.kind in ("jap", "japb"):
            return f"{self.kind}{self.a}"
        if self.kind == "child":
            return f"child(m={self.m},{self.parent.label()})"
        return self.kind


def child_run(parent: SchemeSpec, m: int, n: int, field: PrimeField, stream,
              max_slots=None) -> ChildRun:
    """Run the m-user parent on every m-subset of the n users, in
    lexicographic subset order; the other users stay silent."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    subsets, subruns = [], []
    for subset in itertools.combinations(range(n), m):
        sub = _SubnetStream(stream, subset)
        subruns.append(run_scheme(parent, m, field, sub, max_slots=max_slots))
        subsets.append(subset)
    spec = SchemeSpec("child", parent=parent, m=m)
    return ChildRun(
        scheme="child",
        params={"parent": parent.label(), "m": m},
        n=n,
        q=field.q,
        m=m,
        subsets=subsets,
        subruns=subruns,
        total_delay=sum(r.total_delay for r in subruns),
        dof=spec.dof(n),
    )


def run_scheme(spec: SchemeSpec, n: int, field: PrimeField, stream, max_slots=None):
    """Execute one full run of ``spec`` on a fresh stream position."""
    if spec.kind == "ngjv":
        return ngjv_trial(n, field, stream, max_slots=max_slots)
    if spec.kind == "tdma":
        return tdma_run(n, stream)
    if spec.kind == "jap":
        return jap_run(spec.a, stream.next_matrix(), stream, max_slots=max_slots)
    if spec.kind == "japb":
        return japb_run(spec.a, stream.next_matrix(), stream, max_slots=max_slots)
    if spec.kind == "child":
        return child_run(spec.parent, spec.m, n, field, stream, max_slots=max_slots)
    raise ValueError(f"unknown scheme {spec.kind!r}")


class MessageBank:
    """Messages plus the pseudomessages each receiver stored during a run.

    The pseudomessage of receiver j at a matched slot t is the j-th row of
    ``M[t] @ W`` over GF(q), with M[t] the effective matrix stored by the
    run.  ``corrupt`` flips one stored symbol for negative controls.
    """

    def __init__(self, run, messages: np.ndarray):
        messages = np.asarray(messages, dtype=np.int64)
        q = run.q
        if messages.ndim != 2 or messages.shape[0] != run.n:
            raise ValueError(f"need one message per user, shape {messages.shape}")
        if np.any(messages < 0) or np.any(messages >= q):
            raise ValueError("message symbols must be residues in [0, q)")
        self.run = run
        self.messages = messages
        if isinstance(run, ChildRun):
            self.sub_banks = [
                MessageBank(sr, messages[list(subset)])
                for subset, sr in zip(run.subsets, run.subruns)
            ]
            self.pseudos = None
        else:
            self.sub_banks = None
            self.pseudos = {
                t: (m @ messages) % q for t, m in run.slot_matrices.items()
            }

    @classmethod
    def random(cls, run, rng: np.random.Generator, length: int = 8) -> "MessageBank":
        return cls(run, rng.integers(0, run.q, size=(run.n, length), dtype=np.int64))

    def verify_stored(self) -> bool:
        """Recompute every stored pseudomessage from the run matrices."""
        if self.sub_banks is not None:
            return all(b.verify_stored() for b in self.sub_banks)
        return all(
            np.array_equal(self.pseudos[t], (m @ self.messages) % self.run.q)
            for t, m in self.run.slot_matrices.items()
        )

    def corrupt(self, receiver: int, symbol: int = 0) -> None:
        """Flip one symbol of a pseudomessage the receiver actually combines
        with a nonzero coefficient."""
        if self.sub_banks is not None:
            self.sub_banks[0].corrupt(0, symbol)
            return
        for rec in self.run.rounds:
            if receiver in rec.receivers:
                lam = rec.lambdas[receiver]
                slot = next(t for t, l in zip(rec.slots, lam) if l != 0)
                self.pseudos[slot][receiver, symbol] = (
                    self.pseudos[slot][receiver, symbol] + 1
                ) % self.run.q
                return
        raise ValueError(f"receiver {receiver} not served in this run")


def decode(run, bank: MessageBank) -> np.ndarray:
    """Recombine each receiver's stored pseudomessages with its recorded
    coefficients; for an uncorrupted bank this equals the messages exactly."""
    if isinstance(run, ChildRun):
        # every user appears in several subnetworks; its message is taken
        # from the first one, so a corrupted stored symbol there surfaces as
        # a decode mismatch rather than being masked by a later subnet
        out = np.full_like(bank.messages, -1)
        done = np.zeros(run.n, dtype=bool)
        for subset, sr, sb in zip(run.subsets, run.subruns, bank.sub_banks):
            sub_decoded = decode(sr, sb)
            for local, user in enumerate(subset):
                if not done[user]:
                    out[user] = sub_decoded[local]
                    done[user] = True
        return out
    q = run.q
    out = np.zeros_like(bank.messages)
    for rec in run.rounds:
        for j in rec.receivers:
            acc = np.zeros(bank.messages.shape[1], dtype=np.int64)
            for t, lam in zip(rec.slots, rec.lambdas[j]):
                acc = (acc + lam * bank.pseudos[t][j]) % q
            out[j] = acc
    return out

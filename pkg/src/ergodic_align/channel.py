"""Ergodic finite-field channel model: fading streams, noise, rate quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .gfq import PrimeField


@dataclass(frozen=True)
class ChannelMatrix:
    """One time slot's fading matrix; entry (j, i) couples transmitter i to
    receiver j.  Every entry is a nonzero residue."""

    entries: np.ndarray
    slot: int
    field: PrimeField

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.int64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError(f"channel matrix must be square, got shape {e.shape}")
        if np.any(e <= 0) or np.any(e >= self.field.q):
            raise ValueError("channel entries must be nonzero residues in [1, q)")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def draw_matrix(n: int, field: PrimeField, rng: np.random.Generator, slot: int = 0) -> ChannelMatrix:
    """Draw an n-by-n matrix with IID entries uniform on {1, ..., q-1}."""
    if n < 1:
        raise ValueError(f"need at least one user, got n={n}")
    entries = rng.integers(1, field.q, size=(n, n), dtype=np.int64)
    return ChannelMatrix(entries, slot, field)


class MatrixStream:
    """Buffered IID stream of fading matrices with reproducible seeding.

    Split rule for parallel work: worker/trial ``k`` of master seed ``s``
    uses ``numpy.random.SeedSequence(entropy=s, spawn_key=(k,))`` feeding a
    PCG64 generator, so streams are independent and bit-for-bit reproducible
    across runs and backends.

    ``peek``/``consume`` let a scheme scan ahead without discarding unused
    slots, so two schemes driven by the same seed see the identical matrix
    sequence slot by slot.
    """

    def __init__(self, n: int, field: PrimeField, seed: int, stream: int = 0,
                 block_size: int = 256):
        if n < 1:
            raise ValueError(f"need at least one user, got n={n}")
        self.n = n
        self.field = field
        self.block_size = int(block_size)
        self._rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),)))
        )
        self._buf = np.empty((0, n, n), dtype=np.int64)
        self._cursor = 0
        self.slot = 0  # absolute index of the next unconsumed slot

    def peek(self, size: int) -> np.ndarray:
        """Entries of the next ``size`` slots without consuming them."""
        avail = len(self._buf) - self._cursor
        if avail < size:
            fresh = self._rng.integers(
                1, self.field.q,
                size=(max(size - avail, self.block_size), self.n, self.n),
                dtype=np.int64,
            )
            self._buf = np.concatenate([self._buf[self._cursor:], fresh])
            self._cursor = 0
        return self._buf[self._cursor:self._cursor + size]

    def consume(self, count: int) -> None:
        self._cursor += count
        self.slot += count

    def next_matrix(self) -> ChannelMatrix:
        block = self.peek(1)
        mat = ChannelMatrix(block[0].copy(), self.slot, self.field)
        self.consume(1)
        return mat


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise: zero with probability 1-rho, else uniform on the
    nonzero residues."""

    rho: float
    field: PrimeField

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")

    def pmf(self) -> np.ndarray:
        q = self.field.q
        p = np.full(q, self.rho / (q - 1))
        p[0] = 1.0 - self.rho
        return p


def relative_entropy(noise: NoiseModel) -> float:
    """log2(q) - H(Z) in bits: the single-user capacity benchmark."""
    p = noise.pmf()
    nz = p[p > 0]
    h = float(-(nz * np.log2(nz)).sum())
    return math.log2(noise.field.q) - h


def scheme_dof(K: int) -> Fraction:
    """Degrees of freedom of a K+1-slot matching scheme: 1/(K+1)."""
    if K < 0:
        raise ValueError(f"round count must be >= 0, got K={K}")
    return Fraction(1, K + 1)


def child_dof(m: int, n: int, K: int) -> Fraction:
    """Degrees of freedom when an m-user parent with K rounds beyond the
    first is time-shared across an n-user network: m / (n (K+1))."""
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    return Fraction(m, n * (K + 1))

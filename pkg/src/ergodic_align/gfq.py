"""Exact arithmetic and small dense linear algebra over prime fields GF(q)."""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels

MAX_FIELD_SIZE = 2**31


class FieldMismatchError(ValueError):
    """Operands belong to different prime fields."""


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    for p in range(2, math.isqrt(q) + 1):
        if q % p == 0:
            return False
    return True


class PrimeField:
    """The field of integers modulo a prime q, with q < 2**31.

    Immutable; instances compare equal by field size and are safe to share
    between concurrent workers.
    """

    __slots__ = ("q",)

    def __init__(self, q: int):
        if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
            raise TypeError(f"field size must be an integer, got {type(q).__name__}")
        q = int(q)
        if q < 2 or q >= MAX_FIELD_SIZE:
            raise ValueError(f"field size must be in [2, 2**31), got {q}")
        if not _is_prime(q):
            raise ValueError(f"field size must be prime, got {q}")
        object.__setattr__(self, "q", q)

    def __setattr__(self, name, value):
        raise AttributeError("PrimeField is immutable")

    def __eq__(self, other):
        return isinstance(other, PrimeField) and other.q == self.q

    def __hash__(self):
        return hash(("PrimeField", self.q))

    def __repr__(self):
        return f"PrimeField({self.q})"

    def element(self, value: int) -> "FieldElement":
        return FieldElement(int(value) % self.q, self)

    def vector(self, values) -> "FieldVector":
        return FieldVector(values, self)

    def inv(self, value: int) -> int:
        """Multiplicative inverse of a nonzero residue, as a plain int."""
        v = int(value) % self.q
        if v == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return pow(v, self.q - 2, self.q)


class FieldElement:
    """A residue in [0, q) tied to its PrimeField. Immutable."""

    __slots__ = ("value", "field")

    def __init__(self, value: int, field: PrimeField):
        value = int(value)
        if not 0 <= value < field.q:
            raise ValueError(f"residue {value} outside [0, {field.q})")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "field", field)

    def __setattr__(self, name, value):
        raise AttributeError("FieldElement is immutable")

    def _coerce(self, other: "FieldElement") -> "FieldElement":
        if not isinstance(other, FieldElement):
            raise TypeError(f"expected FieldElement, got {type(other).__name__}")
        if other.field != self.field:
            raise FieldMismatchError(
                f"cannot mix elements of GF({self.field.q}) and GF({other.field.q})"
            )
        return other

    def __add__(self, other):
        other = self._coerce(other)
        return FieldElement((self.value + other.value) % self.field.q, self.field)

    def __sub__(self, other):
        other = self._coerce(other)
        return FieldElement((self.value - other.value) % self.field.q, self.field)

    def __mul__(self, other):
        other = self._coerce(other)
        return FieldElement((self.value * other.value) % self.field.q, self.field)

    def __neg__(self):
        return FieldElement((-self.value) % self.field.q, self.field)

    def inv(self) -> "FieldElement":
        return FieldElement(self.field.inv(self.value), self.field)

    def __eq__(self, other):
        return (
            isinstance(other, FieldElement)
            and other.field == self.field
            and other.value == self.value
        )

    def __hash__(self):
        return hash((self.field.q, self.value))

    def __repr__(self):
        return f"GF{self.field.q}({self.value})"


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    """(a + b) mod q; the operands must live in the same field."""
    return a + b


def mul_inv(a: FieldElement) -> FieldElement:
    """The element b with a*b == 1; raises ZeroDivisionError on zero."""
    return a.inv()


class FieldVector:
    """A fixed-length vector of residues over one PrimeField."""

    __slots__ = ("values", "field")

    def __init__(self, values, field: PrimeField):
        vals = []
        for v in values:
            if isinstance(v, FieldElement):
                if v.field != field:
                    raise FieldMismatchError("vector entry from a different field")
                vals.append(v.value)
            else:
                vals.append(int(v) % field.q)
        arr = np.asarray(vals, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "field", field)

    def __setattr__(self, name, value):
        raise AttributeError("FieldVector is immutable")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i) -> FieldElement:
        return FieldElement(int(self.values[i]), self.field)

    def __iter__(self):
        return (FieldElement(int(v), self.field) for v in self.values)

    def __eq__(self, other):
        return (
            isinstance(other, FieldVector)
            and other.field == self.field
            and np.array_equal(other.values, self.values)
        )

    def __repr__(self):
        return f"FieldVector({list(self.values)!r}, GF({self.field.q}))"


def _stack(vectors: Sequence[FieldVector]) -> tuple[np.ndarray, PrimeField]:
    if not vectors:
        raise ValueError("need at least one vector")
    field = vectors[0].field
    length = len(vectors[0])
    for v in vectors[1:]:
        if v.field != field:
            raise FieldMismatchError("vectors from different fields")
        if len(v) != length:
            raise ValueError("vectors of different lengths")
    return np.stack([v.values for v in vectors]), field


def linear_dependence(vectors: Sequence[FieldVector]) -> Optional[FieldVector]:
    """Coefficients of a vanishing combination, or None if independent.

    When the last vector lies in the span of the earlier ones, the returned
    coefficients have a nonzero last entry (the event round-based matching
    tests for).  The first nonzero coefficient is normalized to 1.  The
    returned combination is re-verified to be exactly zero before returning.
    """
    mat, field = _stack(vectors)
    lam = _kernels.dependence_with_last(mat, field.q)
    if lam.size == 0:
        return None
    combo = (lam @ mat) % field.q
    if np.any(combo != 0) or not np.any(lam != 0):
        raise AssertionError("internal error: reported dependence does not vanish")
    return FieldVector(lam, field)


def rank(vectors: Iterable[FieldVector]) -> int:
    """Rank of the given vectors over their common field; 0 for an empty list."""
    vectors = list(vectors)
    if not vectors:
        return 0
    mat, field = _stack(vectors)
    return int(_kernels.rank_mod(mat, field.q))

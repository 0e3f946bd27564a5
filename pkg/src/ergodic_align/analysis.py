"""Delay-exponent formulas, exact probability oracles, Monte Carlo estimation,
the best-composition optimizer, bounds, and large-network asymptotics."""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .channel import ChannelMatrix, MatrixStream
from .gfq import PrimeField
from .schemes import Composition, SchemeSpec, run_scheme

ENUMERATION_LIMIT = 10**8


class EnumerationTooLarge(ValueError):
    """An exact oracle would evaluate more than ENUMERATION_LIMIT points."""


class BudgetExceeded(RuntimeError):
    """A search passed its wall-clock deadline before completing."""


# ---------------------------------------------------------------------------
# Closed-form delay exponents
# ---------------------------------------------------------------------------


def jap_exponent(a: Composition) -> tuple[list[int], int]:
    """Per-round and overall delay exponents of round-based matching without
    beamforming: round k contributes a_k * (n - k - 1)."""
    n = a.n
    per_round = [a_k * (n - k - 1) for k, a_k in enumerate(a.parts, start=1)]
    return per_round, max(per_round)


def japb_exponent(a: Composition) -> tuple[list[int], int]:
    """Per-round and overall exponents with one beamformed receiver per
    round: round k contributes (a_k - 1) * (n - k - 1)."""
    n = a.n
    per_round = [(a_k - 1) * (n - k - 1) for k, a_k in enumerate(a.parts, start=1)]
    return per_round, max(per_round)


# ---------------------------------------------------------------------------
# Optimizer over compositions
# ---------------------------------------------------------------------------


def compositions(n: int, K: int) -> Iterator[Composition]:
    """All ordered compositions of n into exactly K positive parts."""
    if not 1 <= K <= n:
        return
    for cuts in itertools.combinations(range(1, n), K - 1):
        edges = (0,) + cuts + (n,)
        yield Composition(tuple(b - a for a, b in zip(edges, edges[1:])))


def _partitions(n: int, K: int, lo: int = 1) -> Iterator[tuple[int, ...]]:
    """Non-decreasing K-tuples of integers >= lo summing to n."""
    if K == 1:
        if n >= lo:
            yield (n,)
        return
    for first in range(lo, n // K + 1):
        for rest in _partitions(n - first, K - 1, first):
            yield (first,) + rest


@dataclass(frozen=True)
class Optimum:
    """Best overall beamformed exponent over compositions of n into K
    parts, with the full argmin set (possibly truncated, count exact)."""

    n: int
    K: int
    T: int
    argmins: tuple[Composition, ...]
    argmin_count: int
    unique: bool

    def __post_init__(self):
        for c in self.argmins:
            if c.n != self.n or c.K != self.K:
                raise AssertionError("argmin outside the composition family")
            if japb_exponent(c)[1] != self.T:
                raise AssertionError("listed argmin does not attain the optimum")


def _check_deadline(deadline: Optional[float]) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded("optimizer passed its time budget")


def optimize(n: int, K: int, max_argmins: int = 1000,
             deadline: Optional[float] = None) -> Optimum:
    """Minimize the beamformed exponent over all compositions of n into K
    parts.

    The minimum is found by scanning only non-decreasing compositions:
    sorting a composition's parts ascending never increases the objective
    (larger parts move to rounds with smaller weights n-k-1), so the
    partition scan is exhaustive for the optimal value.  The argmin SET is
    then recovered exactly: a composition attains the optimum iff every part
    respects the per-round cap c_k <= 1 + T // (n-k-1) (rounds with
    non-positive weight are uncapped), and bounded compositions are counted
    by dynamic programming and enumerated lexicographically.
    """
    if not 1 <= K <= n:
        raise ValueError(f"need 1 <= K <= n, got K={K}, n={n}")
    best = None
    for parts in _partitions(n, K):
        _check_deadline(deadline)
        t = japb_exponent(Composition(parts))[1]
        if best is None or t < best:
            best = t
    weights = [n - k - 1 for k in range(1, K + 1)]
    caps = [1 + best // w if w > 0 else n for w in weights]

    counts = {}  # (position, remaining) -> number of bounded completions

    def count_from(pos: int, remaining: int) -> int:
        if pos == K:
            return 1 if remaining == 0 else 0
        key = (pos, remaining)
        if key not in counts:
            counts[key] = sum(
                count_from(pos + 1, remaining - v)
                for v in range(1, min(caps[pos], remaining) + 1)
            )
        return counts[key]

    total = count_from(0, n)
    argmins = []

    def emit(pos: int, remaining: int, prefix: tuple[int, ...]) -> None:
        if len(argmins) >= max_argmins:
            return
        _check_deadline(deadline)
        if pos == K:
            if remaining == 0:
                argmins.append(Composition(prefix))
            return
        for v in range(1, min(caps[pos], remaining) + 1):
            if count_from(pos + 1, remaining - v):
                emit(pos + 1, remaining - v, prefix + (v,))

    emit(0, n, ())
    return Optimum(n, K, best, tuple(argmins), total, total == 1)


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


def bounds(n: int, K: int) -> tuple[Fraction, Fraction]:
    """Exact bracket for the optimal exponent:
    (n/K)(n-2) - (2n-K-2) <= T(n,K) <= (n/K)(n-2)."""
    if not 1 <= K <= n - 2:
        raise ValueError(f"need 1 <= K <= n-2, got K={K}, n={n}")
    upper = Fraction(n, K) * (n - 2)
    lower = upper - (2 * n - K - 2)
    return lower, upper


def harmonic_bounds(n: int, K: int) -> tuple[Fraction, Fraction, Optional[Fraction]]:
    """S(n,K) = sum_{k=1..K} 1/(n-k-1) with the bracket
    K/(n-2) <= S <= K/(n-K-2); the upper bound needs K <= n-3."""
    if not 1 <= K <= n - 2:
        raise ValueError(f"need 1 <= K <= n-2, got K={K}, n={n}")
    s = sum((Fraction(1, n - k - 1) for k in range(1, K + 1)), Fraction(0))
    lower = Fraction(K, n - 2)
    upper = Fraction(K, n - K - 2) if K <= n - 3 else None
    return s, lower, upper


# ---------------------------------------------------------------------------
# Large-network regimes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegimeParams:
    """Scaling regime: 'I' holds DOF = alpha constant (alpha in (0, 1/2]);
    'II' holds DOF = beta/n (beta >= 1)."""

    regime: str
    alpha: Optional[Fraction] = None
    beta: Optional[Fraction] = None

    def __post_init__(self):
        if self.regime == "I":
            if self.alpha is None or not 0 < self.alpha <= Fraction(1, 2):
                raise ValueError(f"regime I needs alpha in (0, 1/2], got {self.alpha}")
        elif self.regime == "II":
            if self.beta is None or self.beta < 1:
                raise ValueError(f"regime II needs beta >= 1, got {self.beta}")
        else:
            raise ValueError(f"regime must be 'I' or 'II', got {self.regime!r}")


def regime_parent(params: RegimeParams, n: int):
    """Predicted parent exponent at n users: regime I gives the asymptote
    n^2 / (floor(1/alpha) - 1); regime II gives the bracket
    [(beta-2) n, beta n]."""
    if params.regime == "I":
        denom = math.floor(1 / params.alpha) - 1
        return Fraction(n * n, denom)
    lo = (params.beta - 2) * n
    hi = params.beta * n
    return (lo, hi)


def regime_child(params: RegimeParams, n: int) -> int:
    """Exact child exponent (m-1)(m-2): regime I uses m = floor(2 alpha n);
    regime II uses m = floor(2 beta), constant in n."""
    if params.regime == "I":
        m = math.floor(2 * params.alpha * n)
        if m < 1:
            raise ValueError(f"floor(2 alpha n) = {m} < 1 at n={n}")
    else:
        m = math.floor(2 * params.beta)
        if m > n:
            raise ValueError(f"floor(2 beta) = {m} exceeds n={n}")
    return (m - 1) * (m - 2)


# ---------------------------------------------------------------------------
# Exact probability oracles
# ---------------------------------------------------------------------------


def lemma3_failure(q: int, L: int) -> Fraction:
    """P(V_1 + ... + V_L == 0) for IID V_m uniform on the nonzero residues:
    1/q + (-1)^L / (q (q-1)^(L-1)).

    The alternating sign matters: L = 1 must give 0, which the unsigned
    variant of the same expression gets wrong for every odd L.
    """
    if L < 1:
        raise ValueError(f"need L >= 1, got {L}")
    return Fraction(1, q) + Fraction((-1) ** L, q * (q - 1) ** (L - 1))


def _entries_of(m) -> np.ndarray:
    return m.entries if isinstance(m, ChannelMatrix) else np.asarray(m, dtype=np.int64)


def _round_receivers(a: Composition, k: int, beamform: bool) -> list[int]:
    bounds_ = (0,) + a.partial_sums
    r_lo, r_hi = bounds_[k - 1], bounds_[k]
    return list(range(r_lo + (1 if beamform else 0), r_hi))


def _recoverable_bruteforce(intf: np.ndarray, diag: np.ndarray, q: int) -> bool:
    """Whether ANY coefficient tuple cancels the interference rows while
    keeping the diagonal combination nonzero; exhaustive over q^(k+1) tuples,
    independent of the elimination-based kernel."""
    L = intf.shape[0]
    for lam in itertools.product(range(q), repeat=L):
        if all(v == 0 for v in lam):
            continue
        if any(sum(l * x for l, x in zip(lam, col)) % q for col in intf.T):
            continue
        if sum(l * d for l, d in zip(lam, diag)) % q:
            return True
    return False


def exact_round_probability(a: Composition, k: int, history: Sequence,
                            field: PrimeField, beamform: bool = False,
                            method: str = "rows") -> Fraction:
    """Exact probability that a fresh slot completes round k given the
    matched history (effective matrices of slots t_0..t_{k-1}).

    method='rows' enumerates the (q-1)^n candidate rows of each constrained
    receiver separately and multiplies (rows are independent); it uses the
    same recovery kernel as the simulator.  method='matrices' enumerates all
    (q-1)^(n^2) candidate matrices and tests recovery by brute-force
    coefficient search, giving a fully independent second route.  With
    beamforming the first receiver of the round is unconstrained.
    """
    if not 1 <= k <= a.K:
        raise ValueError(f"round index {k} outside 1..{a.K}")
    if len(history) != k:
        raise ValueError(f"round {k} needs {k} history matrices, got {len(history)}")
    n, q = a.n, field.q
    mats = [_entries_of(m) for m in history]
    receivers = _round_receivers(a, k, beamform)
    if not receivers:
        return Fraction(1)
    others = {j: [i for i in range(n) if i != j] for j in receivers}

    if method == "rows":
        if len(receivers) * (q - 1) ** n > ENUMERATION_LIMIT:
            raise EnumerationTooLarge(
                f"row enumeration exceeds {ENUMERATION_LIMIT} points"
            )
        prob = Fraction(1)
        for j in receivers:
            hist_intf = np.stack([m[j, others[j]] for m in mats])
            hist_diag = np.array([m[j, j] for m in mats], dtype=np.int64)
            good = int(_kernels.count_recovery_rows(hist_intf, hist_diag, q))
            prob *= Fraction(good, (q - 1) ** n)
        return prob

    if method == "matrices":
        points = (q - 1) ** (n * n) * q ** (k + 1)
        if points > ENUMERATION_LIMIT:
            raise EnumerationTooLarge(
                f"matrix enumeration exceeds {ENUMERATION_LIMIT} points"
            )
        good = 0
        total = 0
        for flat in itertools.product(range(1, q), repeat=n * n):
            cand = np.array(flat, dtype=np.int64).reshape(n, n)
            total += 1
            ok = True
            for j in receivers:
                intf = np.stack([m[j, others[j]] for m in mats] + [cand[j, others[j]]])
                diag = np.array([m[j, j] for m in mats] + [cand[j, j]], dtype=np.int64)
                if not _recoverable_bruteforce(intf, diag, q):
                    ok = False
                    break
            if ok:
                good += 1
        return Fraction(good, total)

    raise ValueError(f"method must be 'rows' or 'matrices', got {method!r}")


def span_fullness(basis: Sequence, field: PrimeField) -> Fraction:
    """Exact proportion of span vectors with no zero entry.

    Enumerates all q^k coefficient tuples over the given basis rows; if the
    rows are dependent every span vector is counted equally often, so the
    proportion is unaffected.
    """
    rows = np.stack([_entries_of(v) if hasattr(v, "entries") else
                     np.asarray(getattr(v, "values", v), dtype=np.int64)
                     for v in basis])
    k = rows.shape[0]
    q = field.q
    if q ** k > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"span enumeration exceeds {ENUMERATION_LIMIT} points")
    good = int(_kernels.count_full_span(rows % q, q))
    return Fraction(good, q ** k)


# ---------------------------------------------------------------------------
# Monte Carlo estimation and exponent fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DelayStats:
    """Summary of independent runs: mean total delay in slots, its standard
    error, and per-round mean waits where the scheme has rounds."""

    scheme: str
    n: int
    q: int
    trials: int
    mean_delay: float
    std_error: float
    per_round_means: Optional[tuple[float, ...]]
    resample_rate: float = 0.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"need trials >= 1, got {self.trials}")
        if self.std_error < 0:
            raise AssertionError("standard error must be nonnegative")


def monte_carlo(spec: SchemeSpec, n: int, q: int, trials: int, seed: int,
                threads: int = 1, max_slots: Optional[int] = None) -> DelayStats:
    """Estimate the mean delay of a scheme over independent seeded runs.

    Trial t draws its matrices from stream index t of the master seed, so
    results are reproducible for any thread count; threads only partition
    the trial range.
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    field = PrimeField(q)

    def run_range(lo: int, hi: int):
        delays = np.empty(hi - lo)
        waits = None
        resamples = 0
        for t in range(lo, hi):
            stream = MatrixStream(n, field, seed, stream=t)
            run = run_scheme(spec, n, field, stream, max_slots=max_slots)
            delays[t - lo] = run.total_delay
            if hasattr(run, "waits"):
                w = np.asarray(run.waits, dtype=float)
                waits = w if waits is None else waits + w
            resamples += getattr(run, "resamples", 0)
        return delays, waits, resamples

    if threads > 1 and trials > 1:
        step = -(-trials // threads)
        spans = [(lo, min(lo + step, trials)) for lo in range(0, trials, step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: run_range(*s), spans))
    else:
        parts = [run_range(0, trials)]

    delays = np.concatenate([p[0] for p in parts])
    wait_sums = [p[1] for p in parts if p[1] is not None]
    per_round = None
    if wait_sums and all(w.shape == wait_sums[0].shape for w in wait_sums):
        per_round = tuple(float(v) for v in sum(wait_sums) / trials)
    mean = float(delays.mean())
    se = float(delays.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return DelayStats(
        scheme=spec.label(), n=n, q=q, trials=trials,
        mean_delay=mean, std_error=se, per_round_means=per_round,
        resample_rate=sum(p[2] for p in parts) / trials,
    )


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares fit of log(mean delay) against log(field size).

    ``slope`` uses log q on the x axis; ``slope_qm1`` refits against
    log(q-1), which converges from the other side for schemes whose delay is
    a power of q-1.  ``intercept`` is the natural-log intercept of the log q
    fit.
    """

    q_values: tuple[int, ...]
    mean_delays: tuple[float, ...]
    slope: float
    intercept: float
    slope_qm1: float

    def __post_init__(self):
        if len(self.q_values) < 3:
            raise ValueError("need at least 3 field sizes to fit")


def fit_exponent(sweep: Sequence[tuple[int, float]]) -> ExponentFit:
    """Fit delay ~ C * q^T on log-log axes from (q, mean delay) pairs."""
    if len(sweep) < 3:
        raise ValueError(f"need at least 3 field sizes, got {len(sweep)}")
    qs = np.array([s[0] for s in sweep], dtype=float)
    ds = np.array([s[1] for s in sweep], dtype=float)
    if np.any(ds <= 0) or len(set(qs)) < 3:
        raise ValueError("delays must be positive and field sizes distinct")
    slope, intercept = np.polyfit(np.log(qs), np.log(ds), 1)
    slope_qm1, _ = np.polyfit(np.log(qs - 1), np.log(ds), 1)
    return ExponentFit(
        q_values=tuple(int(v) for v in qs),
        mean_delays=tuple(float(v) for v in ds),
        slope=float(slope),
        intercept=float(intercept),
        slope_qm1=float(slope_qm1),
    )

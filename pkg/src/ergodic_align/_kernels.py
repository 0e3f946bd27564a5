"""Hot numeric kernels over GF(q), with a numba backend and a NumPy fallback.

Backend selection is controlled by the ``ERGODIC_ALIGN_BACKEND`` environment
variable:

* ``numba`` -- require numba, fail if it cannot be imported
* ``numpy`` -- force the pure NumPy/Python fallback
* unset / ``auto`` -- use numba when importable, fallback otherwise

All kernels operate on small int64 arrays holding residues in ``[0, q)`` with
``q < 2**31``, so every intermediate product fits in int64.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "modpow",
    "modinv",
    "nullspace_mod",
    "solve_recovery",
    "dependence_with_last",
    "rank_mod",
    "beamform_effective",
    "scan_round",
    "scan_target",
    "count_recovery_rows",
    "count_full_span",
]


# ---------------------------------------------------------------------------
# Reference implementations.  These double as the NumPy fallback; when numba
# is active each body is compiled with @njit and the module-level names below
# are rebound to the compiled versions (the bodies call each other through
# those module-level names, so the whole call graph stays inside nopython
# code on the numba path).
# ---------------------------------------------------------------------------


def _modpow(a, e, q):
    r = 1
    b = a % q
    while e > 0:
        if e & 1:
            r = (r * b) % q
        b = (b * b) % q
        e >>= 1
    return r


def _modinv(a, q):
    # q is prime, so a**(q-2) inverts any nonzero a
    return modpow(a, q - 2, q)


def _nullspace_mod(mat, q):
    """Basis of {x : mat @ x == 0 (mod q)}.

    Returns ``(dim, basis)`` where the first ``dim`` rows of ``basis``
    (shape ``(cols, cols)``) span the null space.
    """
    r, c = mat.shape
    m = mat % q
    m = m.copy()
    piv_row = np.full(c, -1, np.int64)  # column -> pivot row, -1 if free
    row = 0
    for col in range(c):
        if row >= r:
            break
        p = -1
        for i in range(row, r):
            if m[i, col] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != row:
            for j in range(c):
                t = m[row, j]
                m[row, j] = m[p, j]
                m[p, j] = t
        inv = modinv(m[row, col], q)
        for j in range(c):
            m[row, j] = (m[row, j] * inv) % q
        for i in range(r):
            if i != row and m[i, col] != 0:
                f = m[i, col]
                for j in range(c):
                    m[i, j] = (m[i, j] - f * m[row, j]) % q
        piv_row[col] = row
        row += 1
    basis = np.zeros((c, c), np.int64)
    dim = 0
    for col in range(c):
        if piv_row[col] >= 0:
            continue
        basis[dim, col] = 1
        for pc in range(c):
            pr = piv_row[pc]
            if pr >= 0:
                basis[dim, pc] = (-m[pr, col]) % q
        dim += 1
    return dim, basis


def _solve_recovery(intf, diag, q):
    """Coefficients lam with lam @ intf == 0 and lam @ diag == 1 (mod q).

    ``intf`` is ``(L, d)``: one interference vector per combined slot.
    Returns a length-L array, or a length-0 array when no dependence of the
    interference vectors has a nonzero diagonal combination.  The diagonal
    functional is linear on the null space, so it vanishes everywhere iff it
    vanishes on every basis vector; scanning the basis is exhaustive.
    """
    L = intf.shape[0]
    dim, basis = nullspace_mod(intf.T.copy(), q)
    for b in range(dim):
        s = 0
        for i in range(L):
            s = (s + basis[b, i] * diag[i]) % q
        if s != 0:
            inv = modinv(s, q)
            lam = np.empty(L, np.int64)
            for i in range(L):
                lam[i] = (basis[b, i] * inv) % q
            return lam
    return np.empty(0, np.int64)


def _dependence_with_last(vecs, q):
    """Nonzero lam with lam @ vecs == 0 (mod q), or length-0 if independent.

    Prefers a dependence whose last coefficient is nonzero when one exists;
    the first nonzero coefficient is scaled to 1.
    """
    L = vecs.shape[0]
    dim, basis = nullspace_mod(vecs.T.copy(), q)
    if dim == 0:
        return np.empty(0, np.int64)
    pick = 0
    for b in range(dim):
        if basis[b, L - 1] != 0:
            pick = b
            break
    lam = basis[pick, :L].copy()
    for i in range(L):
        if lam[i] != 0:
            inv = modinv(lam[i], q)
            for j in range(L):
                lam[j] = (lam[j] * inv) % q
            break
    return lam


def _rank_mod(mat, q):
    r, c = mat.shape
    m = mat % q
    m = m.copy()
    rank = 0
    for col in range(c):
        if rank >= r:
            break
        p = -1
        for i in range(rank, r):
            if m[i, col] != 0:
                p = i
                break
        if p < 0:
            continue
        if p != rank:
            for j in range(c):
                t = m[rank, j]
                m[rank, j] = m[p, j]
                m[p, j] = t
        inv = modinv(m[rank, col], q)
        for j in range(c):
            m[rank, j] = (m[rank, j] * inv) % q
        for i in range(rank + 1, r):
            if m[i, col] != 0:
                f = m[i, col]
                for j in range(c):
                    m[i, j] = (m[i, j] - f * m[rank, j]) % q
        rank += 1
    return rank


def _beamform_effective(cand, t0_row, l, q):
    """Column-scale a candidate matrix so receiver l needs no matching.

    Every transmitter i scales its symbol so that receiver l sees the same
    cross coefficients as at the start slot; transmitter l instead steers its
    own coefficient to a fixed value different from its start-slot one (any
    such value exists once q >= 3), which keeps the desired-signal
    combination nonzero.
    """
    n = cand.shape[0]
    eff = np.empty((n, n), np.int64)
    c = (t0_row[l] + 1) % q
    if c == 0:
        c = 1
    for i in range(n):
        if i == l:
            s = (c * modinv(cand[l, i], q)) % q
        else:
            s = (t0_row[i] * modinv(cand[l, i], q)) % q
        for jj in range(n):
            eff[jj, i] = (cand[jj, i] * s) % q
    return eff


def _scan_round(block, hist, r_lo, r_hi, beamform, q):
    """First slot in ``block`` serving receivers ``r_lo..r_hi-1``.

    ``hist`` holds the effective matrices of the already matched slots.  With
    ``beamform != 0`` receiver ``r_lo`` is served by column scaling and only
    the remaining receivers must pass the recovery test.

    Returns ``(pos, lam, eff)``: position inside the block (-1 if none
    qualifies), per-receiver coefficient rows of length ``k+1``, and the
    effective matrix of the matched slot.
    """
    B = block.shape[0]
    n = block.shape[1]
    k = hist.shape[0]
    nr = r_hi - r_lo
    lam_out = np.zeros((nr, k + 1), np.int64)
    eff = np.zeros((n, n), np.int64)
    for pos in range(B):
        if beamform != 0:
            eff = beamform_effective(block[pos], hist[0, r_lo], r_lo, q)
        else:
            eff = block[pos].copy()
        ok = True
        for idx in range(nr):
            if beamform != 0 and idx == 0:
                continue
            j = r_lo + idx
            intf = np.empty((k + 1, n - 1), np.int64)
            diag = np.empty(k + 1, np.int64)
            for m in range(k + 1):
                col = 0
                for i in range(n):
                    v = hist[m, j, i] if m < k else eff[j, i]
                    if i == j:
                        diag[m] = v
                    else:
                        intf[m, col] = v
                        col += 1
            lam = solve_recovery(intf, diag, q)
            if lam.shape[0] == 0:
                ok = False
                break
            for m in range(k + 1):
                lam_out[idx, m] = lam[m]
        if ok:
            if beamform != 0:
                l = r_lo
                denom = (eff[l, l] - hist[0, l, l]) % q
                lk = modinv(denom, q)
                for m in range(k + 1):
                    lam_out[0, m] = 0
                lam_out[0, 0] = (q - lk) % q
                lam_out[0, k] = lk
            return pos, lam_out, eff
    return -1, lam_out, eff


def _scan_target(block, target):
    """Index of the first matrix in ``block`` equal to ``target``, or -1."""
    B = block.shape[0]
    n = block.shape[1]
    for pos in range(B):
        hit = True
        for i in range(n):
            for j in range(n):
                if block[pos, i, j] != target[i, j]:
                    hit = False
                    break
            if not hit:
                break
        if hit:
            return pos
    return -1


def _scan_target_numpy(block, target):
    hits = np.nonzero((block == target).all(axis=2).all(axis=1))[0]
    return int(hits[0]) if hits.size else -1


def _count_recovery_rows(hist_intf, hist_diag, q):
    """Count candidate rows completing a usable dependence.

    Enumerates all ``(q-1)**(d+1)`` next-slot rows for one receiver (d
    interference entries plus the diagonal entry) and counts those for which
    a dependence with nonzero diagonal combination exists.
    """
    k, d = hist_intf.shape
    intf = np.empty((k + 1, d), np.int64)
    diag = np.empty(k + 1, np.int64)
    for m in range(k):
        for j in range(d):
            intf[m, j] = hist_intf[m, j]
        diag[m] = hist_diag[m]
    vals = np.ones(d + 1, np.int64)
    total = (q - 1) ** (d + 1)
    count = 0
    for _ in range(total):
        for j in range(d):
            intf[k, j] = vals[j]
        diag[k] = vals[d]
        lam = solve_recovery(intf, diag, q)
        if lam.shape[0] != 0:
            count += 1
        i = 0
        while i <= d:
            vals[i] += 1
            if vals[i] == q:
                vals[i] = 1
                i += 1
            else:
                break
    return count


def _count_full_span(basis, q):
    """Number of vectors in the span of ``basis`` with no zero entries."""
    k, d = basis.shape
    coef = np.zeros(k, np.int64)
    total = q**k
    count = 0
    for _ in range(total):
        allnz = True
        for j in range(d):
            s = 0
            for i in range(k):
                s += coef[i] * basis[i, j]
            if s % q == 0:
                allnz = False
                break
        if allnz:
            count += 1
        i = 0
        while i < k:
            coef[i] += 1
            if coef[i] == q:
                coef[i] = 0
                i += 1
            else:
                break
    return count


# ---------------------------------------------------------------------------
# Backend wiring
# ---------------------------------------------------------------------------


def _pick_backend():
    choice = os.environ.get("ERGODIC_ALIGN_BACKEND", "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"ERGODIC_ALIGN_BACKEND must be 'numba', 'numpy' or unset, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _pick_backend()

if BACKEND == "numba":
    from numba import njit

    _jit = njit(cache=True, nogil=True)
    modpow = _jit(_modpow)
    modinv = _jit(_modinv)
    nullspace_mod = _jit(_nullspace_mod)
    solve_recovery = _jit(_solve_recovery)
    dependence_with_last = _jit(_dependence_with_last)
    rank_mod = _jit(_rank_mod)
    beamform_effective = _jit(_beamform_effective)
    scan_round = _jit(_scan_round)
    scan_target = _jit(_scan_target)
    count_recovery_rows = _jit(_count_recovery_rows)
    count_full_span = _jit(_count_full_span)
else:
    modpow = _modpow
    modinv = _modinv
    nullspace_mod = _nullspace_mod
    solve_recovery = _solve_recovery
    dependence_with_last = _dependence_with_last
    rank_mod = _rank_mod
    beamform_effective = _beamform_effective
    scan_round = _scan_round
    scan_target = _scan_target_numpy
    count_recovery_rows = _count_recovery_rows
    count_full_span = _count_full_span

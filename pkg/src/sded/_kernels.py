"""Hot inner loops: simplex pricing, ratio test, eta-file updates, CDF stratification.

Each kernel exists twice: an explicit-loop version compiled with numba and a
vectorized numpy version. Both follow the same tie-breaking rules so the
solver takes identical pivots either way. ``SDED_NUMBA=0`` in the
environment (read at import) selects the numpy versions; so does a missing
numba install.
"""
import os

import numpy as np

# Nonbasic status codes shared with the simplex.
BASIC = 0
AT_LOWER = 1
AT_UPPER = 2
FREE_ZERO = 3

TIE_TOL = 1e-12


def _numba_requested():
    return os.environ.get("SDED_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


try:
    if not _numba_requested():
        raise ImportError("disabled by SDED_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


# -- entering-variable selection -------------------------------------------------------

def _select_entering_loop(d, status, tol, bland):
    best = -1
    best_score = 0.0
    direction = 0
    for j in range(d.shape[0]):
        s = status[j]
        dj = d[j]
        if s == AT_LOWER:
            if dj >= -tol:
                continue
            dirj = 1
        elif s == AT_UPPER:
            if dj <= tol:
                continue
            dirj = -1
        elif s == FREE_ZERO:
            if abs(dj) <= tol:
                continue
            dirj = 1 if dj < 0 else -1
        else:
            continue
        if bland:
            return j, dirj
        score = abs(dj)
        if score > best_score:
            best_score = score
            best = j
            direction = dirj
    return best, direction


def _select_entering_numpy(d, status, tol, bland):
    eligible = (
        ((status == AT_LOWER) & (d < -tol))
        | ((status == AT_UPPER) & (d > tol))
        | ((status == FREE_ZERO) & (np.abs(d) > tol))
    )
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        return -1, 0
    if bland:
        j = int(idx[0])
    else:
        j = int(idx[np.argmax(np.abs(d[idx]))])
    return j, (1 if d[j] < 0 else -1)


# -- ratio test ------------------------------------------------------------------------

def _ratio_test_loop(x_b, alpha, lb_b, ub_b, direction, pivot_tol, bland, basis_ids):
    """Return (row, step, to_upper); row -1 means no basic variable blocks."""
    m = x_b.shape[0]
    steps = np.full(m, np.inf)
    upper = np.zeros(m, dtype=np.bool_)
    best = np.inf
    for i in range(m):
        rate = -direction * alpha[i]
        if rate < -pivot_tol:
            if lb_b[i] > -np.inf:
                t = (x_b[i] - lb_b[i]) / (-rate)
                steps[i] = t if t > 0.0 else 0.0
        elif rate > pivot_tol:
            if ub_b[i] < np.inf:
                t = (ub_b[i] - x_b[i]) / rate
                steps[i] = t if t > 0.0 else 0.0
                upper[i] = True
        if steps[i] < best:
            best = steps[i]
    if best == np.inf:
        return -1, np.inf, False
    row = -1
    for i in range(m):
        if steps[i] <= best + TIE_TOL:
            if row < 0:
                row = i
            elif bland:
                if basis_ids[i] < basis_ids[row]:
                    row = i
            elif abs(alpha[i]) > abs(alpha[row]):
                row = i
    return row, best, upper[row]


def _ratio_test_numpy(x_b, alpha, lb_b, ub_b, direction, pivot_tol, bland, basis_ids):
    rate = -direction * alpha
    steps = np.full(x_b.shape[0], np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        dec = (rate < -pivot_tol) & np.isfinite(lb_b)
        inc = (rate > pivot_tol) & np.isfinite(ub_b)
        steps[dec] = np.maximum((x_b[dec] - lb_b[dec]) / (-rate[dec]), 0.0)
        steps[inc] = np.maximum((ub_b[inc] - x_b[inc]) / rate[inc], 0.0)
    best = steps.min() if steps.size else np.inf
    if best == np.inf:
        return -1, np.inf, False
    ties = np.flatnonzero(steps <= best + TIE_TOL)
    if bland:
        row = int(ties[np.argmin(basis_ids[ties])])
    else:
        row = int(ties[np.argmax(np.abs(alpha[ties]))])
    return row, float(best), bool(inc[row])


# -- product-form eta file ----------------------------------------------------------
# etas[e] is the eta column of update e and rows[e] its pivot row; FTRAN applies
# them oldest first, BTRAN newest first. Both work in place.

def _eta_ftran_loop(z, rows, etas, count):
    for e in range(count):
        r = rows[e]
        zr = z[r]
        if zr != 0.0:
            eta = etas[e]
            for i in range(z.shape[0]):
                z[i] += eta[i] * zr
            z[r] = eta[r] * zr
    return z


def _eta_btran_loop(w, rows, etas, count):
    for e in range(count - 1, -1, -1):
        eta = etas[e]
        acc = 0.0
        for i in range(w.shape[0]):
            acc += w[i] * eta[i]
        w[rows[e]] = acc
    return w


def _eta_ftran_numpy(z, rows, etas, count):
    for e in range(count):
        r = rows[e]
        zr = z[r]
        if zr != 0.0:
            z += etas[e] * zr
            z[r] = etas[e, r] * zr
    return z


def _eta_btran_numpy(w, rows, etas, count):
    for e in range(count - 1, -1, -1):
        w[rows[e]] = w @ etas[e]
    return w


# -- stratification --------------------------------------------------------------------

def _stratify_loop(support, probs, k):
    """Probability-weighted mean of each of k equal-mass CDF segments."""
    total = 0.0
    for p in probs:
        total += p
    reps = np.zeros(k)
    mass = np.zeros(k)
    lo = 0.0
    j = 0
    for i in range(support.shape[0]):
        hi = lo + probs[i]
        while j < k:
            edge_lo = total * j / k
            edge_hi = total * (j + 1) / k
            overlap = min(hi, edge_hi) - max(lo, edge_lo)
            if overlap > 0.0:
                reps[j] += overlap * support[i]
                mass[j] += overlap
            if hi >= edge_hi and j < k - 1:
                j += 1
            else:
                break
        lo = hi
    for j in range(k):
        if mass[j] > 0.0:
            reps[j] /= mass[j]
    return reps


def _stratify_numpy(support, probs, k):
    total = probs.sum()
    hi = np.cumsum(probs)
    lo = np.concatenate(([0.0], hi[:-1]))
    edges = total * np.arange(k + 1) / k
    overlap = np.minimum(hi[None, :], edges[1:, None]) - np.maximum(lo[None, :], edges[:-1, None])
    overlap = np.clip(overlap, 0.0, None)
    mass = overlap.sum(axis=1)
    weighted = overlap @ support
    return np.divide(weighted, mass, out=np.zeros(k), where=mass > 0)


select_entering_jit = njit(cache=True)(_select_entering_loop)
ratio_test_jit = njit(cache=True)(_ratio_test_loop)
stratify_jit = njit(cache=True)(_stratify_loop)
eta_ftran_jit = njit(cache=True)(_eta_ftran_loop)
eta_btran_jit = njit(cache=True)(_eta_btran_loop)

if HAVE_NUMBA:
    select_entering = select_entering_jit
    ratio_test = ratio_test_jit
    stratify_kernel = stratify_jit
    eta_ftran = eta_ftran_jit
    eta_btran = eta_btran_jit
else:
    select_entering = _select_entering_numpy
    ratio_test = _ratio_test_numpy
    stratify_kernel = _stratify_numpy
    eta_ftran = _eta_ftran_numpy
    eta_btran = _eta_btran_numpy

BACKEND = "numba" if HAVE_NUMBA else "numpy"

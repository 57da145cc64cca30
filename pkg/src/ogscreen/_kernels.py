"""Compiled inner loops. Groups are passed in CSR form (ptr, idx)."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def prox_bcd(v, tau, ptr, idx, weights, order, xi, max_iter, tol):
    """Cyclic block ascent on the dual of the overlapping group prox.

    ``xi`` is aligned with ``idx`` and updated in place. Returns the primal
    point ``v - sum_g xi_g``, the number of sweeps and a convergence flag.
    """
    b = v.copy()
    for k in range(idx.shape[0]):
        b[idx[k]] -= xi[k]
    for sweep in range(max_iter):
        biggest = 0.0
        for g in order:
            lo = ptr[g]
            hi = ptr[g + 1]
            radius = tau * weights[g]
            s = 0.0
            for k in range(lo, hi):
                z = b[idx[k]] + xi[k]
                s += z * z
            nz = math.sqrt(s)
            scale = 1.0
            if nz > radius:
                scale = radius / nz
            change = 0.0
            for k in range(lo, hi):
                j = idx[k]
                z = b[j] + xi[k]
                new = z * scale
                change += (new - xi[k]) ** 2
                xi[k] = new
                b[j] = z - new
            change = math.sqrt(change)
            if change > biggest:
                biggest = change
        if biggest < tol:
            return b, sweep + 1, True
    return b, max_iter, False


@njit(cache=True)
def saturate(corr, weight, d):
    """One coordinate of the budgeted subgradient fit: returns (w, d_next, residual_sq)."""
    ratio = corr / weight
    root = math.sqrt(d) if d > 0.0 else 0.0
    if abs(ratio) <= root:
        return ratio, d - ratio * ratio, 0.0
    w = root if corr > 0 else -root
    r = corr - weight * w
    return w, 0.0, r * r


@njit(cache=True)
def ols_lhs(corr, ptr, idx, weights, cand_ptr, cand, out):
    """Left-hand side of the overlap-aware test for every group."""
    n_features = corr.shape[0]
    # stamp[j] == g marks feature j as still unprocessed while testing group g
    stamp = np.full(n_features, -1, dtype=np.int64)
    hp = np.empty(n_features, dtype=np.int64)
    for g in range(ptr.shape[0] - 1):
        for k in range(ptr[g], ptr[g + 1]):
            stamp[idx[k]] = g
        acc = 0.0
        for c in range(cand_ptr[g], cand_ptr[g + 1]):
            h = cand[c]
            m = 0
            s = 0.0
            for k in range(ptr[h], ptr[h + 1]):
                j = idx[k]
                if stamp[j] == g:
                    hp[m] = j
                    m += 1
                    s += corr[j] * corr[j]
            if m == 0:
                continue
            wh = weights[h]
            if math.sqrt(s) > wh:
                d = 1.0
                for t in range(m):
                    w, d, r = saturate(corr[hp[t]], wh, d)
                    acc += r
            for t in range(m):
                stamp[hp[t]] = -1
        rest = 0.0
        for k in range(ptr[g], ptr[g + 1]):
            j = idx[k]
            if stamp[j] == g:
                rest += corr[j] * corr[j]
                stamp[j] = -1
        out[g] = math.sqrt(acc + rest)
    return out


@njit(cache=True)
def sols_lhs(corr, ptr, idx, c, out):
    """Left-hand side when the inclusive groups are the l1 singletons of weight ``c``."""
    for g in range(ptr.shape[0] - 1):
        lo = ptr[g]
        hi = ptr[g + 1]
        if hi - lo == 1:
            out[g] = abs(corr[idx[lo]])
            continue
        acc = 0.0
        for k in range(lo, hi):
            a = abs(corr[idx[k]])
            if a > c:
                acc += (a - c) ** 2
        out[g] = math.sqrt(acc)
    return out


@njit(cache=True)
def group_sq_norms(u, ptr, idx, out):
    for g in range(ptr.shape[0] - 1):
        s = 0.0
        for k in range(ptr[g], ptr[g + 1]):
            s += u[idx[k]] ** 2
        out[g] = s
    return out

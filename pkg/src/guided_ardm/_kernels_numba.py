"""Numba-compiled twins of the kernels in ``_kernels_numpy``.

Same signatures, same semantics; loops instead of vectorized calls. All
functions are cached to disk so repeat imports skip compilation.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def normalize_from_log(log_w):
    n = log_w.shape[0]
    m = -np.inf
    for i in range(n):
        if log_w[i] > m:
            m = log_w[i]
    out = np.empty(n, dtype=np.float64)
    if not np.isfinite(m):
        for i in range(n):
            out[i] = np.nan
        return out, -np.inf
    s = 0.0
    for i in range(n):
        out[i] = np.exp(log_w[i] - m)
        s += out[i]
    for i in range(n):
        out[i] /= s
    return out, m + np.log(s)


@njit(cache=True)
def effective_sample_size(w):
    s = 0.0
    for i in range(w.shape[0]):
        s += w[i] * w[i]
    return 1.0 / s


@njit(cache=True)
def systematic_resample(w, u, n_out):
    n = w.shape[0]
    out = np.empty(n_out, dtype=np.int64)
    acc = w[0]
    j = 0
    for k in range(n_out):
        point = (k + u) / n_out
        while point >= acc and j < n - 1:
            j += 1
            acc += w[j]
        out[k] = j
    return out


@njit(cache=True)
def categorical_draw(probs, u):
    acc = 0.0
    last = -1
    for i in range(probs.shape[0]):
        p = probs[i]
        if p > 0.0:
            last = i
            acc += p
            if u < acc:
                return i
    return last


@njit(cache=True)
def guided_probs(base, log_w):
    n = base.shape[0]
    m = -np.inf
    for i in range(n):
        if base[i] > 0.0 and log_w[i] > m:
            m = log_w[i]
    out = np.zeros(n, dtype=np.float64)
    if not np.isfinite(m):
        return out, -np.inf
    s = 0.0
    for i in range(n):
        if base[i] > 0.0:
            out[i] = base[i] * np.exp(log_w[i] - m)
            s += out[i]
    if s <= 0.0:
        for i in range(n):
            out[i] = 0.0
        return out, -np.inf
    for i in range(n):
        out[i] /= s
    return out, m + np.log(s)


@njit(cache=True)
def tv_distance_flat(p, q):
    s = 0.0
    for i in range(p.shape[0]):
        d = p[i] - q[i]
        s += d if d >= 0.0 else -d
    return 0.5 * s

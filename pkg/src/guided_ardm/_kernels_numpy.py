"""Pure-numpy implementations of the hot numeric kernels.

Reference backend; the numba twins in ``_kernels_numba`` must agree with
these to float rounding. Contract checks live in the callers, not here.
"""

import numpy as np


def normalize_from_log(log_w):
    """Max-subtracted softmax of a log-weight vector.

    Returns (weights, log_norm) with weights summing to 1 and
    log_norm = logsumexp(log_w). All -inf input yields weights of nan
    and log_norm of -inf; callers treat that as a degenerate system.
    """
    m = float(np.max(log_w))
    if not np.isfinite(m):
        return np.full_like(log_w, np.nan), -np.inf
    e = np.exp(log_w - m)
    s = float(e.sum())
    return e / s, m + np.log(s)


def effective_sample_size(w):
    return 1.0 / float(np.dot(w, w))


def systematic_resample(w, u, n_out):
    """Ancestor indices at the evenly spaced points (k + u) / n_out.

    Output is sorted by construction. Counts per index differ from
    n_out * w_i by less than 1.
    """
    edges = np.cumsum(w)
    edges[-1] = max(edges[-1], 1.0)  # guard the last point against rounding
    points = (np.arange(n_out) + u) / n_out
    return np.searchsorted(edges, points, side="right").astype(np.int64)


def categorical_draw(probs, u):
    """Inverse-CDF draw over a probability vector.

    Zero-probability categories are never returned; u at or beyond the
    accumulated mass falls back to the last positive category.
    """
    c = np.cumsum(probs)
    idx = int(np.searchsorted(c, u, side="right"))
    if idx >= probs.shape[0]:
        idx = int(np.flatnonzero(probs > 0.0)[-1])
    return idx


def guided_probs(base, log_w):
    """Reweight base probabilities by per-category log weights.

    probs_v proportional to base_v * exp(log_w_v), computed over the
    support of base only (log_w outside the support is ignored). Returns
    (probs, log_norm) with log_norm = log sum_v base_v * exp(log_w_v).
    A fully annihilated support yields (zeros, -inf).
    """
    support = base > 0.0
    lw = np.where(support, log_w, -np.inf)
    m = float(np.max(lw))
    if not np.isfinite(m):
        return np.zeros_like(base), -np.inf
    out = base * np.exp(lw - m)
    s = float(out.sum())
    if s <= 0.0:
        return np.zeros_like(base), -np.inf
    return out / s, m + np.log(s)


def tv_distance_flat(p, q):
    return 0.5 * float(np.abs(p - q).sum())

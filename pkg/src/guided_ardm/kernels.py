"""Backend dispatch for the numeric kernels.

Two interchangeable implementations exist: vectorized numpy
(``_kernels_numpy``) and numba-compiled loops (``_kernels_numba``). The
active backend is chosen at import time from the ``GUIDED_ARDM_BACKEND``
environment variable:

* unset or empty: numba when importable, numpy otherwise
* ``numba``: require numba, fail loudly if unavailable
* ``numpy``: force the pure-numpy path

``set_backend`` switches at runtime (used by the benchmark and the
backend-equivalence tests). All callers go through the module-level
wrappers, so a switch takes effect immediately.
"""

import os

import numpy as np

from . import _kernels_numpy

_requested = os.environ.get("GUIDED_ARDM_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"GUIDED_ARDM_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

_impl = _kernels_numpy
BACKEND = "numpy"

if _requested != "numpy":
    try:
        from . import _kernels_numba

        _impl = _kernels_numba
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        # fall back silently when no explicit backend was asked for


def available_backends():
    out = ["numpy"]
    try:
        from . import _kernels_numba  # noqa: F401

        out.append("numba")
    except ImportError:
        pass
    return out


def set_backend(name):
    """Switch the active kernel backend; returns the previous name."""
    global _impl, BACKEND
    previous = BACKEND
    if name == "numpy":
        _impl = _kernels_numpy
    elif name == "numba":
        from . import _kernels_numba

        _impl = _kernels_numba
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return previous


def get_backend():
    return BACKEND


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def normalize_from_log(log_w):
    return _impl.normalize_from_log(_f64(log_w))


def effective_sample_size(w):
    return _impl.effective_sample_size(_f64(w))


def systematic_resample(w, u, n_out):
    return _impl.systematic_resample(_f64(w), float(u), int(n_out))


def categorical_draw(probs, u):
    return int(_impl.categorical_draw(_f64(probs), float(u)))


def guided_probs(base, log_w):
    return _impl.guided_probs(_f64(base), _f64(log_w))


def tv_distance_flat(p, q):
    return _impl.tv_distance_flat(_f64(p), _f64(q))


def warmup():
    """Touch every kernel once so compiled backends pay JIT cost up front."""
    w = np.array([0.5, 0.3, 0.2])
    normalize_from_log(np.log(w))
    effective_sample_size(w)
    systematic_resample(w, 0.5, 10)
    categorical_draw(w, 0.4)
    guided_probs(w, np.array([0.1, -0.2, 0.0]))
    tv_distance_flat(w, w[::-1])

"""Foundational types for order-agnostic sequential sampling.

Defines the shared vocabulary: categorical distributions, partially
assigned samples, generation orders, and the log-domain particle-weight
operations. Everything here is immutable and pure; the particle methods
build on these without any hidden state.

Weights are carried in log space throughout. Logits are clamped to
[-LOGIT_CLAMP, LOGIT_CLAMP] before exponentiation so a weight ratio is
always finite and positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

UNASSIGNED = -1

LOGIT_CLAMP = 60.0

# A log-domain importance weight; plain float, named for readability.
LogWeight = float


class DegenerateParticleSystem(RuntimeError):
    """Every particle weight vanished; normalization is impossible."""


class UnreachablePrefix(ValueError):
    """Conditioning event has zero probability under the joint."""


class SupportViolation(ValueError):
    """Model assigns zero probability where the data distribution does not."""


class GuidanceCollapse(RuntimeError):
    """Guidance annihilated the support of a proposal distribution."""


def clamp_logit(x: float) -> float:
    """Clamp a logit into [-LOGIT_CLAMP, LOGIT_CLAMP]; nan is rejected."""
    if math.isnan(x):
        raise ValueError("logit is nan")
    return min(max(float(x), -LOGIT_CLAMP), LOGIT_CLAMP)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, slots=True, eq=False)
class Categorical:
    """Distribution over a finite category set.

    probs must be nonnegative and sum to 1 within 1e-9; the array is
    stored read-only so instances can be shared freely.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = _readonly(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or p.shape[0] == 0:
            raise ValueError("probs must be a nonempty vector")
        if np.any(p < 0.0):
            raise ValueError("probs must be nonnegative")
        s = float(p.sum())
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"probs must sum to 1 within 1e-9, got {s!r}")

    @property
    def num_categories(self) -> int:
        return self.probs.shape[0]

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0.0)

    def sample(self, u: float) -> int:
        """Inverse-CDF draw from a uniform u in [0, 1)."""
        if not 0.0 <= u < 1.0:
            raise ValueError("u must lie in [0, 1)")
        return kernels.categorical_draw(self.probs, u)


@dataclass(frozen=True, slots=True)
class MaskedSample:
    """Partial assignment over a discrete product space.

    values[i] is either UNASSIGNED or a category index in
    range(categories[i]). During sequential generation the assigned set
    after t steps is exactly the first t positions of the order.
    """

    categories: tuple[int, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        cats = tuple(int(c) for c in self.categories)
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "values", vals)
        if len(cats) == 0:
            raise ValueError("need at least one variable")
        if len(vals) != len(cats):
            raise ValueError("values length must match categories length")
        for i, (d, v) in enumerate(zip(cats, vals)):
            if d < 1:
                raise ValueError(f"variable {i} needs at least one category")
            if v != UNASSIGNED and not 0 <= v < d:
                raise ValueError(f"value {v} out of range at position {i}")

    @classmethod
    def fully_masked(cls, categories) -> "MaskedSample":
        categories = tuple(categories)
        return cls(categories, (UNASSIGNED,) * len(categories))

    @property
    def dimension(self) -> int:
        return len(self.categories)

    def is_assigned(self, position: int) -> bool:
        return self.values[position] != UNASSIGNED

    def assigned_positions(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.values) if v != UNASSIGNED)

    @property
    def num_assigned(self) -> int:
        return self.dimension - self.values.count(UNASSIGNED)

    @property
    def is_complete(self) -> bool:
        return UNASSIGNED not in self.values

    def assign(self, position: int, value: int) -> "MaskedSample":
        """New sample with one more position filled in."""
        if self.values[position] != UNASSIGNED:
            raise ValueError(f"position {position} already assigned")
        value = int(value)
        if not 0 <= value < self.categories[position]:
            raise ValueError(f"value {value} out of range at position {position}")
        vals = self.values[:position] + (value,) + self.values[position + 1:]
        out = object.__new__(MaskedSample)
        object.__setattr__(out, "categories", self.categories)
        object.__setattr__(out, "values", vals)
        return out


@dataclass(frozen=True, slots=True)
class GenerationOrder:
    """Permutation of variable positions; order[t-1] is filled at step t."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        object.__setattr__(self, "perm", perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("order must be a permutation of 0..D-1")

    @classmethod
    def identity(cls, dimension: int) -> "GenerationOrder":
        return cls(tuple(range(dimension)))

    def __len__(self) -> int:
        return len(self.perm)

    def __iter__(self):
        return iter(self.perm)

    def __getitem__(self, t: int) -> int:
        return self.perm[t]


@dataclass
class EvalCounters:
    """Monotone counts of model-conditional and discriminator evaluations."""

    model_evals: int = 0
    disc_evals: int = 0

    def merge(self, other: "EvalCounters") -> None:
        self.model_evals += other.model_evals
        self.disc_evals += other.disc_evals


def _checked_normalize(log_weights) -> tuple[np.ndarray, float]:
    lw = np.asarray(log_weights, dtype=np.float64)
    if lw.ndim != 1 or lw.shape[0] == 0:
        raise ValueError("log_weights must be a nonempty vector")
    if np.any(np.isnan(lw)):
        raise ValueError("log_weights contain nan")
    w, log_norm = kernels.normalize_from_log(lw)
    if not np.isfinite(log_norm):
        raise DegenerateParticleSystem(
            "degenerate particle system: every log weight is -inf"
        )
    return w, log_norm


def normalize_weights(log_weights) -> np.ndarray:
    """Normalized linear weights from log weights via max-subtraction.

    Raises DegenerateParticleSystem when every entry is -inf. The result
    sums to 1 within 1e-12.
    """
    w, _ = _checked_normalize(log_weights)
    return w


def _check_normalized(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] == 0:
        raise ValueError("weights must be a nonempty vector")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    s = float(w.sum())
    if abs(s - 1.0) > 1e-6:
        raise ValueError(f"weights must be normalized within 1e-6, got sum {s!r}")
    return w


def effective_sample_size(weights) -> float:
    """ESS = 1 / sum of squared weights; lies in [1, N] for N weights."""
    w = _check_normalized(weights)
    return kernels.effective_sample_size(w)


def systematic_resample(weights, u: float, n_draws: int | None = None) -> np.ndarray:
    """Ancestor indices from one uniform; low variance, sorted output.

    Draw k lands at position (k + u) / n_draws of the cumulative weight
    profile, so each index i appears a number of times within 1 of
    n_draws * weights[i].
    """
    w = _check_normalized(weights)
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    n = w.shape[0] if n_draws is None else int(n_draws)
    if n < 1:
        raise ValueError("n_draws must be positive")
    return kernels.systematic_resample(w, u, n)

"""Prefix discriminators and the weight ratios they induce.

A discriminator scores a partial sample with a logit; the induced
importance weight is W = exp(logit) = d / (1 - d) for d = sigmoid(logit).
The optimal discriminator for a (data, model) pair has

    logit(prefix) = log p_data(prefix) - log p_model(prefix)

with both sides marginalized over the unassigned variables, so its weight
is exactly the prefix likelihood ratio. Guided samplers consume only the
logit; clamping to the shared LOGIT_CLAMP bound keeps every weight finite
and positive.

The fully masked prefix always scores 0: before anything is assigned the
two distributions are indistinguishable and W must be 1.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    LOGIT_CLAMP,
    MaskedSample,
    SupportViolation,
    UNASSIGNED,
    clamp_logit,
)
from .models import TabularJoint


@dataclass(frozen=True, slots=True)
class WeightRatio:
    """An importance weight carried in log space; value = exp(log_w)."""

    log_w: float

    @classmethod
    def from_logit(cls, logit: float) -> "WeightRatio":
        return cls(clamp_logit(logit))

    @property
    def value(self) -> float:
        return math.exp(self.log_w)


class Discriminator(abc.ABC):
    """Scores partial samples; logit 0 means 'no information'."""

    @abc.abstractmethod
    def logit(self, partial: MaskedSample) -> float:
        """Finite logit for the prefix; fully masked input returns 0."""

    def weight(self, partial: MaskedSample) -> WeightRatio:
        return WeightRatio.from_logit(self.logit(partial))


class OptimalDiscriminator(Discriminator):
    """Exact prefix likelihood-ratio discriminator for a tabular pair.

    Raises SupportViolation when the model gives zero mass to a prefix
    that the data distribution can reach: the ratio is infinite there and
    no finite logit is faithful.
    """

    def __init__(self, p_data: TabularJoint, p_model: TabularJoint):
        if p_data.categories != p_model.categories:
            raise ValueError("the two joints must share categories")
        self.p_data = p_data
        self.p_model = p_model
        self._logit_of = lru_cache(maxsize=1 << 16)(self._logit_uncached)

    def _logit_uncached(self, values: tuple[int, ...]) -> float:
        partial = MaskedSample(self.p_data.categories, values)
        md = self.p_data.marginal(partial)
        mm = self.p_model.marginal(partial)
        if mm <= 0.0:
            if md > 0.0:
                raise SupportViolation(
                    f"model support excludes a data-reachable prefix: {values}"
                )
            return 0.0
        if md <= 0.0:
            return -LOGIT_CLAMP
        return clamp_logit(math.log(md) - math.log(mm))

    def logit(self, partial: MaskedSample) -> float:
        if partial.num_assigned == 0:
            return 0.0
        return self._logit_of(partial.values)


def final_step_exact(t: int, dimension: int) -> float:
    """Default corruption schedule: full attenuation except the last step."""
    return 0.0 if t == dimension else 1.0


def constant_schedule(t: int, dimension: int) -> float:
    return 1.0


class CorruptedDiscriminator(Discriminator):
    """Attenuates another discriminator's logits toward zero.

    logit'(prefix) = (1 - epsilon * s(t)) * logit(prefix) with t the number
    of assigned variables. epsilon = 0 reproduces the base exactly; the
    attenuation never increases a logit's magnitude, so clamped inputs
    stay clamped.
    """

    def __init__(self, base: Discriminator, epsilon: float, schedule=None):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self.base = base
        self.epsilon = float(epsilon)
        self.schedule = final_step_exact if schedule is None else schedule

    def logit(self, partial: MaskedSample) -> float:
        s = float(self.schedule(partial.num_assigned, partial.dimension))
        if not 0.0 <= s <= 1.0:
            raise ValueError("schedule values must lie in [0, 1]")
        factor = 1.0 - self.epsilon * s
        if factor == 0.0:
            return 0.0
        if factor == 1.0:
            return self.base.logit(partial)
        return factor * self.base.logit(partial)


class ConstantDiscriminator(Discriminator):
    """Same logit everywhere (except the mandatory 0 on empty prefixes).

    Guided samplers correct with the ratio of candidate weights, so a
    constant logit changes nothing; useful as a null control.
    """

    def __init__(self, logit_value: float = 0.0):
        self.logit_value = clamp_logit(logit_value)

    def logit(self, partial: MaskedSample) -> float:
        return 0.0 if partial.num_assigned == 0 else self.logit_value


def optimal_discriminator(p_data: TabularJoint, p_model: TabularJoint) -> OptimalDiscriminator:
    return OptimalDiscriminator(p_data, p_model)


def corrupt(base: Discriminator, epsilon: float, schedule=None) -> CorruptedDiscriminator:
    return CorruptedDiscriminator(base, epsilon, schedule)


def discriminator_loss(disc: Discriminator, real_prefixes, fake_prefixes) -> float:
    """Mean log d over real prefixes plus mean log(1 - d) over fake ones.

    d = sigmoid(logit); both terms are computed through softplus so the
    result is stable for large logits. A d of exactly 0 on a real prefix
    (or 1 on a fake one) contributes -inf.
    """
    real = list(real_prefixes)
    fake = list(fake_prefixes)
    if not real or not fake:
        raise ValueError("need at least one real and one fake prefix")
    lr = np.array([disc.logit(p) for p in real], dtype=np.float64)
    lf = np.array([disc.logit(p) for p in fake], dtype=np.float64)
    log_d = -np.logaddexp(0.0, -lr)
    log_one_minus_d = -np.logaddexp(0.0, lf)
    return float(log_d.mean() + log_one_minus_d.mean())


def sample_prefixes(joint: TabularJoint, count: int, generator: np.random.Generator):
    """Prefixes distributed as the loss expects.

    Each prefix comes from a full joint sample, a uniform order, and a
    uniform step count t in 1..D, keeping the first t ordered positions.
    """
    out = []
    d = joint.dimension
    for _ in range(count):
        full = joint.sample(generator)
        perm = generator.permutation(d)
        t = int(generator.integers(1, d + 1))
        values = [UNASSIGNED] * d
        for k in range(t):
            values[perm[k]] = full.values[perm[k]]
        out.append(MaskedSample(joint.categories, tuple(values)))
    return out

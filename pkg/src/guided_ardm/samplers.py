"""Sequential samplers: plain order-agnostic generation and its guided form.

Both walk a fixed generation order, filling one position per step. The
guided variant reweights each step's model conditional by the
discriminator weight of every candidate one-step extension:

    corrected(v) proportional to W(prefix + v) * base(v)

The previous step's weight W(prefix) is constant across candidates and
cancels in the normalization, so only the candidate weights are needed.
With the optimal discriminator the corrected step equals the data
conditional exactly, which is what the verification suite checks.

Candidates are evaluated in ascending category order, and zero-probability
candidates are skipped entirely: they get no discriminator call and zero
corrected mass. One uniform is consumed per step, from the (PROPAGATE, t)
stream, element 0; the SMC samplers use the same streams, which is what
makes their single-particle runs reduce to these samplers bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import (
    Categorical,
    EvalCounters,
    GenerationOrder,
    GuidanceCollapse,
    MaskedSample,
)
from .discriminator import Discriminator
from .models import ConditionalModel
from .rng import PROPAGATE, KeyedRng


@dataclass(frozen=True, slots=True, eq=False)
class StepDistribution:
    """One step's base and corrected distributions.

    candidate_log_weights[v] is log W(prefix + v) for candidates in the
    base support and -inf elsewhere. log_normalizer is
    log sum_v base(v) * W(prefix + v), the step's guidance normalizer;
    corrected is None only when guidance annihilated the entire support
    (every corrected mass underflowed), in which case log_normalizer is
    -inf.
    """

    base: Categorical
    corrected: Categorical | None
    candidate_log_weights: np.ndarray
    log_normalizer: float

    @property
    def collapsed(self) -> bool:
        return self.corrected is None


def step_distribution(
    model: ConditionalModel,
    discriminator: Discriminator,
    partial: MaskedSample,
    position: int,
    counters: EvalCounters | None = None,
    *,
    raise_on_collapse: bool = True,
) -> StepDistribution:
    """Base conditional plus its discriminator-corrected form.

    Costs one model evaluation and one discriminator evaluation per
    base-support candidate.
    """
    base = model.conditional(partial, position)
    if counters is not None:
        counters.model_evals += 1
    log_w = np.full(base.num_categories, -math.inf)
    for v in base.support():
        log_w[v] = discriminator.logit(partial.assign(position, int(v)))
        if counters is not None:
            counters.disc_evals += 1
    probs, log_norm = kernels.guided_probs(base.probs, log_w)
    if not np.isfinite(log_norm):
        if raise_on_collapse:
            raise GuidanceCollapse("guidance annihilated support")
        corrected = None
    else:
        corrected = Categorical(probs)
    log_w.flags.writeable = False
    return StepDistribution(base, corrected, log_w, log_norm)


@dataclass(frozen=True, slots=True, eq=False)
class SampleRun:
    """A completed draw plus the evaluation counts it cost."""

    sample: MaskedSample
    counters: EvalCounters


def _check_run_args(model: ConditionalModel, order: GenerationOrder) -> None:
    if len(order) != model.dimension:
        raise ValueError("order length must match the model dimension")


def ardm_sample(
    model: ConditionalModel, order: GenerationOrder, rng: KeyedRng
) -> SampleRun:
    """Unguided sequential draw; exactly D model evaluations."""
    _check_run_args(model, order)
    counters = EvalCounters()
    partial = MaskedSample.fully_masked(model.categories)
    for t, pos in enumerate(order, start=1):
        base = model.conditional(partial, pos)
        counters.model_evals += 1
        u = rng.uniforms(PROPAGATE, t, count=1)[0]
        partial = partial.assign(pos, base.sample(float(u)))
    return SampleRun(partial, counters)


def ardg_sample(
    model: ConditionalModel,
    discriminator: Discriminator,
    order: GenerationOrder,
    rng: KeyedRng,
) -> SampleRun:
    """Guided sequential draw.

    D model evaluations plus one discriminator evaluation per supported
    candidate at each step (sum of support sizes along the path).
    """
    _check_run_args(model, order)
    counters = EvalCounters()
    partial = MaskedSample.fully_masked(model.categories)
    for t, pos in enumerate(order, start=1):
        sd = step_distribution(model, discriminator, partial, pos, counters)
        u = rng.uniforms(PROPAGATE, t, count=1)[0]
        partial = partial.assign(pos, sd.corrected.sample(float(u)))
    return SampleRun(partial, counters)

"""Particle samplers targeting the discriminator-weighted model.

At step t the target over prefixes is gamma_t = W_t * p_model(prefix),
which telescopes to the data distribution at t = D when the discriminator
is exact. Two variants:

* Bootstrap (bsdg_sample): propose from the model conditional, reweight
  by the weight ratio W_t / W_{t-1}. ESS is checked at the top of each
  step, on the incoming weights, before propagation; the very first check
  (t = 1, uniform weights) is vacuous but still runs and is logged.
* Fully adapted (fadg_sample): the look-ahead computes each particle's
  normalizer C = sum_v base(v) * W_t(prefix + v) / W_{t-1}; new weights
  are w_{t-1} * C, which depend only on the prefix, not on the value
  about to be drawn. Resampling is therefore done after weighting and
  before propagation, and the per-candidate weights computed in the
  look-ahead are reused both for the proposal (the guided step
  distribution) and for the next step's W_{t-1} cache, so the
  discriminator runs exactly once per supported candidate.

Both use systematic resampling triggered when ESS < threshold * N, share
the generation order across particles, and return one sample drawn from
the final weights. Particle identity is positional: ancestor indices are
sorted, and all RNG consumption follows the keyed-stream contract (one
uniform block per (purpose, step); one uniform per triggered resample).
With N = 1 resampling never triggers (ESS is identically 1, the
threshold is below 1) and the runs reduce bit-exactly to ardm_sample /
ardg_sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (
    Categorical,
    DegenerateParticleSystem,
    EvalCounters,
    GenerationOrder,
    GuidanceCollapse,
    MaskedSample,
    _checked_normalize,
    systematic_resample,
)
from .discriminator import Discriminator
from .models import ConditionalModel
from .rng import PROPAGATE, RESAMPLE, SELECT, KeyedRng
from .samplers import StepDistribution, step_distribution

DEFAULT_NUM_PARTICLES = 10
DEFAULT_ESS_THRESHOLD = 0.7


@dataclass
class ParticleSet:
    """N partial samples advancing in lockstep through one order.

    weights are the normalized linear weights, log_weights their
    log-domain twins, prev_log_w[i] caches log W_t(prefix_i) from the
    last completed step. step counts completed propagations.
    """

    order: GenerationOrder
    particles: list[MaskedSample]
    weights: np.ndarray
    log_weights: np.ndarray
    prev_log_w: np.ndarray
    step: int = 0

    @classmethod
    def initial(cls, categories, order: GenerationOrder, n_particles: int) -> "ParticleSet":
        if n_particles < 1:
            raise ValueError("need at least one particle")
        blank = MaskedSample.fully_masked(categories)
        n = int(n_particles)
        return cls(
            order=order,
            particles=[blank] * n,
            weights=np.full(n, 1.0 / n),
            log_weights=np.full(n, -math.log(n)),
            prev_log_w=np.zeros(n),
            step=0,
        )

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    def clone(self) -> "ParticleSet":
        return ParticleSet(
            order=self.order,
            particles=list(self.particles),
            weights=self.weights.copy(),
            log_weights=self.log_weights.copy(),
            prev_log_w=self.prev_log_w.copy(),
            step=self.step,
        )

    def _apply_resample(self, indices: np.ndarray) -> None:
        n = self.n_particles
        self.particles = [self.particles[int(j)] for j in indices]
        self.prev_log_w = self.prev_log_w[indices].copy()
        self.weights = np.full(n, 1.0 / n)
        self.log_weights = np.full(n, -math.log(n))


@dataclass
class SmcDiagnostics:
    """Per-run trace: ESS at each check, resampling events, eval counts."""

    n_particles: int
    ess_threshold: float
    ess_trace: list[float] = field(default_factory=list)
    resampled: list[bool] = field(default_factory=list)
    counters: EvalCounters = field(default_factory=EvalCounters)
    final_weights: np.ndarray | None = None

    def to_json(self) -> dict:
        return {
            "n_particles": self.n_particles,
            "ess_threshold": self.ess_threshold,
            "ess_trace": [float(e) for e in self.ess_trace],
            "resampled": [bool(r) for r in self.resampled],
            "model_evals": self.counters.model_evals,
            "disc_evals": self.counters.disc_evals,
            "final_weights": (
                None
                if self.final_weights is None
                else [float(w) for w in self.final_weights]
            ),
        }


@dataclass(frozen=True, slots=True, eq=False)
class SmcRun:
    sample: MaskedSample
    diagnostics: SmcDiagnostics
    particles: ParticleSet | None = None


def _fail_degenerate(diag: SmcDiagnostics) -> DegenerateParticleSystem:
    err = DegenerateParticleSystem(
        "degenerate particle system: every particle weight vanished"
    )
    err.diagnostics = diag
    return err


def _check_smc_args(model, order, n_particles, ess_threshold):
    if len(order) != model.dimension:
        raise ValueError("order length must match the model dimension")
    if n_particles < 1:
        raise ValueError("n_particles must be positive")
    if not 0.0 <= ess_threshold <= 1.0:
        raise ValueError("ess_threshold must lie in [0, 1]")


def _maybe_resample(
    ps: ParticleSet, diag: SmcDiagnostics, ess_threshold: float, rng: KeyedRng, t: int
) -> None:
    """Log the ESS check on ps.weights; resample iff it falls short."""
    ess = kernels.effective_sample_size(ps.weights)
    diag.ess_trace.append(ess)
    trigger = ess < ess_threshold * ps.n_particles
    diag.resampled.append(trigger)
    if trigger:
        u = rng.uniform(RESAMPLE, t)
        ps._apply_resample(systematic_resample(ps.weights, u))


def select_final(particle_set: ParticleSet, rng: KeyedRng) -> MaskedSample:
    """One categorical draw over the final normalized weights."""
    u = rng.uniform(SELECT)
    k = kernels.categorical_draw(particle_set.weights, u)
    return particle_set.particles[k]


def bsdg_sample(
    model: ConditionalModel,
    discriminator: Discriminator,
    order: GenerationOrder,
    n_particles: int = DEFAULT_NUM_PARTICLES,
    ess_threshold: float = DEFAULT_ESS_THRESHOLD,
    rng: KeyedRng | None = None,
    *,
    keep_particles: bool = False,
) -> SmcRun:
    """Bootstrap particle run; 2 * N * D evaluations (N model + N disc per step)."""
    if rng is None:
        raise ValueError("rng is required")
    _check_smc_args(model, order, n_particles, ess_threshold)
    n = int(n_particles)
    diag = SmcDiagnostics(n_particles=n, ess_threshold=float(ess_threshold))
    ps = ParticleSet.initial(model.categories, order, n)
    for t, pos in enumerate(order, start=1):
        _maybe_resample(ps, diag, ess_threshold, rng, t)
        us = rng.uniforms(PROPAGATE, t, count=n)
        log_incr = np.empty(n)
        for i in range(n):
            base = model.conditional(ps.particles[i], pos)
            diag.counters.model_evals += 1
            extended = ps.particles[i].assign(pos, base.sample(float(us[i])))
            log_w_t = discriminator.logit(extended)
            diag.counters.disc_evals += 1
            log_incr[i] = log_w_t - ps.prev_log_w[i]
            ps.particles[i] = extended
            ps.prev_log_w[i] = log_w_t
        log_unnorm = ps.log_weights + log_incr
        try:
            ps.weights, log_norm = _checked_normalize(log_unnorm)
        except DegenerateParticleSystem:
            raise _fail_degenerate(diag) from None
        ps.log_weights = log_unnorm - log_norm
        ps.step = t
    diag.final_weights = ps.weights.copy()
    sample = select_final(ps, rng)
    return SmcRun(sample, diag, ps if keep_particles else None)


@dataclass(frozen=True, slots=True, eq=False)
class Lookahead:
    """Fully adapted step preparation: proposals and prefix weights.

    step_dists[i] is particle i's guided step distribution; log_c[i] is
    log of C_i = sum_v base_i(v) * W_t(prefix_i + v) / W_{t-1}(prefix_i);
    weights/log_weights are the normalized update w_{t-1} * C. These
    depend only on the current prefixes, never on the values drawn
    afterwards, so recomputing the look-ahead after propagation of the
    same particle set reproduces them bit for bit.
    """

    step_dists: tuple[StepDistribution, ...]
    log_c: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray


def fadg_lookahead(
    model: ConditionalModel,
    discriminator: Discriminator,
    particle_set: ParticleSet,
    counters: EvalCounters | None = None,
) -> Lookahead:
    """Score every particle's next step before anything is drawn.

    Costs N model evaluations plus one discriminator evaluation per
    supported candidate per particle. Raises GuidanceCollapse only when
    every particle's support is annihilated; a single collapsed particle
    just receives zero weight.
    """
    ps = particle_set
    if ps.step >= len(ps.order):
        raise ValueError("particle set is already complete")
    pos = ps.order[ps.step]
    n = ps.n_particles
    step_dists = []
    log_c = np.empty(n)
    for i in range(n):
        sd = step_distribution(
            model,
            discriminator,
            ps.particles[i],
            pos,
            counters,
            raise_on_collapse=False,
        )
        step_dists.append(sd)
        log_c[i] = sd.log_normalizer - ps.prev_log_w[i]
    log_unnorm = ps.log_weights + log_c
    try:
        weights, log_norm = _checked_normalize(log_unnorm)
    except DegenerateParticleSystem:
        raise GuidanceCollapse(
            "guidance annihilated support for every particle"
        ) from None
    return Lookahead(
        step_dists=tuple(step_dists),
        log_c=log_c,
        weights=weights,
        log_weights=log_unnorm - log_norm,
    )


def fadg_sample(
    model: ConditionalModel,
    discriminator: Discriminator,
    order: GenerationOrder,
    n_particles: int = DEFAULT_NUM_PARTICLES,
    ess_threshold: float = DEFAULT_ESS_THRESHOLD,
    rng: KeyedRng | None = None,
    *,
    keep_particles: bool = False,
    step_probe=None,
) -> SmcRun:
    """Fully adapted particle run.

    N model evaluations per step plus N discriminator evaluations per
    supported candidate; resampling happens between the look-ahead
    weighting and propagation, carrying each ancestor's step distribution
    along with it. step_probe, when given, is called after each step's
    propagation as step_probe(t, pre_step_state, lookahead) with a clone
    of the particle set as it entered the step; it exists so tests can
    re-run the look-ahead on the identical state and compare bits.
    """
    if rng is None:
        raise ValueError("rng is required")
    _check_smc_args(model, order, n_particles, ess_threshold)
    n = int(n_particles)
    diag = SmcDiagnostics(n_particles=n, ess_threshold=float(ess_threshold))
    ps = ParticleSet.initial(model.categories, order, n)
    for t, pos in enumerate(order, start=1):
        pre_state = ps.clone() if step_probe is not None else None
        try:
            la = fadg_lookahead(model, discriminator, ps, diag.counters)
        except GuidanceCollapse as err:
            err.diagnostics = diag
            raise
        ess = kernels.effective_sample_size(la.weights)
        diag.ess_trace.append(ess)
        trigger = ess < ess_threshold * n
        diag.resampled.append(trigger)
        if trigger:
            u = rng.uniform(RESAMPLE, t)
            idx = systematic_resample(la.weights, u)
            step_dists = [la.step_dists[int(j)] for j in idx]
            ps.particles = [ps.particles[int(j)] for j in idx]
            ps.weights = np.full(n, 1.0 / n)
            ps.log_weights = np.full(n, -math.log(n))
        else:
            step_dists = list(la.step_dists)
            ps.weights = la.weights
            ps.log_weights = la.log_weights
        us = rng.uniforms(PROPAGATE, t, count=n)
        prev_log_w = np.empty(n)
        for i in range(n):
            sd = step_dists[i]
            # A collapsed particle has zero weight; any proposal keeps the
            # weighted system consistent, so fall back to the base step.
            proposal = sd.base if sd.collapsed else sd.corrected
            v = proposal.sample(float(us[i]))
            ps.particles[i] = ps.particles[i].assign(pos, v)
            prev_log_w[i] = sd.candidate_log_weights[v]
        ps.prev_log_w = prev_log_w
        ps.step = t
        if step_probe is not None:
            step_probe(t, pre_state, la)
    diag.final_weights = ps.weights.copy()
    sample = select_final(ps, rng)
    return SmcRun(sample, diag, ps if keep_particles else None)

import math

import numpy as np
import pytest
from scipy import stats

from guided_ardm import (
    ConstantDiscriminator,
    EvalCounters,
    GenerationOrder,
    GuidanceCollapse,
    KeyedRng,
    MaskedSample,
    TabularJoint,
    ardg_sample,
    ardm_sample,
    optimal_discriminator,
    step_distribution,
)
from guided_ardm.discriminator import Discriminator
from conftest import enumerate_partials, random_joint


def _pair(seed, cats=(2, 3, 2), zeros=0):
    rng = np.random.default_rng(seed)
    return random_joint(rng, cats, zeros=zeros), random_joint(rng, cats, zeros=zeros)


class _CountingDisc(Discriminator):
    """Wraps a discriminator and records every prefix it is asked about."""

    def __init__(self, base):
        self.base = base
        self.calls = []

    def logit(self, partial):
        self.calls.append(partial)
        return self.base.logit(partial)


class _RawLogitDisc(Discriminator):
    def __init__(self, fn):
        self.fn = fn

    def logit(self, partial):
        return self.fn(partial)


class TestStepDistribution:
    def test_optimal_guidance_recovers_data_conditional(self):
        # with the exact discriminator the corrected step must equal the
        # data conditional wherever both distributions give the prefix mass
        p_data, p_model = _pair(60)
        disc = optimal_discriminator(p_data, p_model)
        worst = 0.0
        for partial in enumerate_partials(p_data.categories):
            if partial.is_complete:
                continue
            pos = min(i for i in range(len(p_data.categories)) if not partial.is_assigned(i))
            if p_data.marginal(partial) <= 0.0 or p_model.marginal(partial) <= 0.0:
                continue
            sd = step_distribution(p_model, disc, partial, pos)
            want = p_data.conditional(partial, pos)
            worst = max(worst, float(np.max(np.abs(sd.corrected.probs - want.probs))))
        assert worst <= 1e-9

    def test_constant_discriminator_changes_nothing(self):
        p_data, p_model = _pair(61)
        disc = ConstantDiscriminator(2.5)
        m = MaskedSample.fully_masked(p_model.categories)
        sd = step_distribution(p_model, disc, m, 1)
        assert np.allclose(sd.corrected.probs, sd.base.probs, atol=1e-12)

    def test_zero_probability_candidates_not_queried(self):
        # base support excludes value 1 at position 0; the discriminator
        # must only see the surviving candidates, in ascending value order
        p_model = TabularJoint([3, 2], [0.3, 0.1, 0.0, 0.0, 0.4, 0.2])
        disc = _CountingDisc(ConstantDiscriminator(0.0))
        m = MaskedSample.fully_masked((3, 2))
        sd = step_distribution(p_model, disc, m, 0)
        assert [c.values[0] for c in disc.calls] == [0, 2]
        assert sd.candidate_log_weights[1] == -math.inf
        assert sd.corrected.probs[1] == 0.0

    def test_counters(self):
        p_data, p_model = _pair(62)
        disc = optimal_discriminator(p_data, p_model)
        counters = EvalCounters()
        m = MaskedSample.fully_masked(p_model.categories)
        step_distribution(p_model, disc, m, 1, counters)
        assert counters.model_evals == 1
        assert counters.disc_evals == p_model.categories[1]

    def test_collapse_raises_by_default(self):
        p_model = TabularJoint([2], [0.5, 0.5])
        disc = _RawLogitDisc(lambda p: -math.inf)
        m = MaskedSample.fully_masked((2,))
        with pytest.raises(GuidanceCollapse):
            step_distribution(p_model, disc, m, 0)

    def test_collapse_optional(self):
        p_model = TabularJoint([2], [0.5, 0.5])
        disc = _RawLogitDisc(lambda p: -math.inf)
        m = MaskedSample.fully_masked((2,))
        sd = step_distribution(p_model, disc, m, 0, raise_on_collapse=False)
        assert sd.collapsed
        assert sd.corrected is None
        assert sd.log_normalizer == -math.inf

    def test_log_normalizer_is_weighted_base_mass(self):
        # normalizer = log sum_v base_v * W(prefix+v)
        p_data, p_model = _pair(63)
        disc = optimal_discriminator(p_data, p_model)
        m = MaskedSample.fully_masked(p_model.categories).assign(0, 1)
        sd = step_distribution(p_model, disc, m, 2)
        total = sum(
            float(sd.base.probs[v]) * math.exp(disc.logit(m.assign(2, v)))
            for v in sd.base.support()
        )
        assert sd.log_normalizer == pytest.approx(math.log(total), abs=1e-12)


class TestArdm:
    def test_matches_exact_distribution(self):
        rng = np.random.default_rng(64)
        p_model = random_joint(rng, (2, 2, 2))
        m = 20000
        counts = np.zeros(8)
        for k in range(m):
            srng = KeyedRng(900).child(k)
            order = GenerationOrder(tuple(int(i) for i in srng.stream(3).permutation(3)))
            run = ardm_sample(p_model, order, srng)
            counts[np.ravel_multi_index(run.sample.values, (2, 2, 2))] += 1
        _, p = stats.chisquare(counts, p_model.table.ravel() * m)
        assert p > 1e-3

    def test_counters(self):
        p_model = random_joint(np.random.default_rng(65), (2, 3, 2))
        run = ardm_sample(p_model, GenerationOrder((2, 0, 1)), KeyedRng(1))
        assert run.counters.model_evals == 3
        assert run.counters.disc_evals == 0
        assert run.sample.is_complete

    def test_deterministic_under_same_rng(self):
        p_model = random_joint(np.random.default_rng(66), (2, 2, 3))
        order = GenerationOrder((1, 2, 0))
        a = ardm_sample(p_model, order, KeyedRng(77))
        b = ardm_sample(p_model, order, KeyedRng(77))
        assert a.sample.values == b.sample.values


class TestArdg:
    def test_empirical_matches_guided_chain(self):
        # with the exact discriminator, ardg draws from p_data itself
        p_data, p_model = _pair(67)
        disc = optimal_discriminator(p_data, p_model)
        m = 20000
        cats = p_data.categories
        counts = np.zeros(int(np.prod(cats)))
        for k in range(m):
            srng = KeyedRng(901).child(k)
            perm = srng.stream(3).permutation(len(cats))
            order = GenerationOrder(tuple(int(i) for i in perm))
            run = ardg_sample(p_model, disc, order, srng)
            counts[np.ravel_multi_index(run.sample.values, cats)] += 1
        _, p = stats.chisquare(counts, p_data.table.ravel() * m)
        assert p > 1e-3

    def test_counters_full_support(self):
        p_data, p_model = _pair(68)
        disc = optimal_discriminator(p_data, p_model)
        order = GenerationOrder((0, 1, 2))
        run = ardg_sample(p_model, disc, order, KeyedRng(5))
        assert run.counters.model_evals == 3
        assert run.counters.disc_evals == sum(p_model.categories)

    def test_counters_deficit_with_holes(self):
        # a zero-probability candidate saves exactly one discriminator call
        p_model = TabularJoint([3, 2], [0.3, 0.1, 0.0, 0.0, 0.4, 0.2])
        p_data = TabularJoint([3, 2], [0.2, 0.2, 0.0, 0.0, 0.3, 0.3])
        disc = optimal_discriminator(p_data, p_model)
        order = GenerationOrder((0, 1))
        run = ardg_sample(p_model, disc, order, KeyedRng(6))
        assert run.counters.model_evals == 2
        assert run.counters.disc_evals == 4  # 2 live values at pos 0, 2 at pos 1

    def test_deterministic_under_same_rng(self):
        p_data, p_model = _pair(69)
        disc = optimal_discriminator(p_data, p_model)
        order = GenerationOrder((2, 0, 1))
        a = ardg_sample(p_model, disc, order, KeyedRng(88))
        b = ardg_sample(p_model, disc, order, KeyedRng(88))
        assert a.sample.values == b.sample.values

    def test_collapse_propagates(self):
        p_model = TabularJoint([2], [0.5, 0.5])
        disc = _RawLogitDisc(lambda p: -math.inf)
        with pytest.raises(GuidanceCollapse):
            ardg_sample(p_model, disc, GenerationOrder((0,)), KeyedRng(9))

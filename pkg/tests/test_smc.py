import math

import numpy as np
import pytest

from guided_ardm import (
    DegenerateParticleSystem,
    GenerationOrder,
    KeyedRng,
    MaskedSample,
    ParticleSet,
    TabularJoint,
    ardg_sample,
    ardm_sample,
    bsdg_sample,
    fadg_lookahead,
    fadg_sample,
    optimal_discriminator,
    select_final,
    step_distribution,
)
from guided_ardm.discriminator import Discriminator
from conftest import random_joint


def _pair(seed, cats=(2, 3, 2), zeros=0):
    rng = np.random.default_rng(seed)
    return random_joint(rng, cats, zeros=zeros), random_joint(rng, cats, zeros=zeros)


def _order(srng, d):
    return GenerationOrder(tuple(int(i) for i in srng.stream(3).permutation(d)))


class _RawLogitDisc(Discriminator):
    def __init__(self, fn):
        self.fn = fn

    def logit(self, partial):
        return self.fn(partial)


class TestSingleParticleReduction:
    def test_bsdg_reduces_to_ardm(self):
        # with one particle resampling is a no-op and the proposal is the
        # model itself, so the draw sequence matches the plain sampler
        for seed in range(25):
            p_data, p_model = _pair(100 + seed)
            disc = optimal_discriminator(p_data, p_model)
            srng = KeyedRng(seed).child(0)
            order = _order(srng, 3)
            plain = ardm_sample(p_model, order, srng)
            smc = bsdg_sample(p_model, disc, order, n_particles=1, rng=srng)
            assert smc.sample.values == plain.sample.values

    def test_fadg_reduces_to_ardg(self):
        for seed in range(25):
            p_data, p_model = _pair(200 + seed)
            disc = optimal_discriminator(p_data, p_model)
            srng = KeyedRng(seed).child(1)
            order = _order(srng, 3)
            plain = ardg_sample(p_model, disc, order, srng)
            smc = fadg_sample(p_model, disc, order, n_particles=1, rng=srng)
            assert smc.sample.values == plain.sample.values

    def test_reduction_with_support_holes(self):
        rng = np.random.default_rng(301)
        p_model = random_joint(rng, (2, 2, 3), zeros=3)
        p_data = random_joint(rng, (2, 2, 3), zeros=0)
        disc = optimal_discriminator(p_data, p_model)
        for seed in range(10):
            srng = KeyedRng(50 + seed)
            order = _order(srng, 3)
            plain = ardm_sample(p_model, order, srng)
            smc = bsdg_sample(p_model, disc, order, n_particles=1, rng=srng)
            assert smc.sample.values == plain.sample.values


class TestBsdg:
    def test_counters(self):
        p_data, p_model = _pair(302)
        disc = optimal_discriminator(p_data, p_model)
        n = 7
        run = bsdg_sample(p_model, disc, GenerationOrder((0, 1, 2)), n_particles=n, rng=KeyedRng(1))
        assert run.diagnostics.counters.model_evals == n * 3
        assert run.diagnostics.counters.disc_evals == n * 3

    def test_diagnostics_shape(self):
        p_data, p_model = _pair(303)
        disc = optimal_discriminator(p_data, p_model)
        n = 6
        run = bsdg_sample(p_model, disc, GenerationOrder((2, 1, 0)), n_particles=n, rng=KeyedRng(2))
        diag = run.diagnostics
        assert diag.n_particles == n
        assert len(diag.ess_trace) == 3
        assert len(diag.resampled) == 3
        for ess, did in zip(diag.ess_trace, diag.resampled):
            assert 1.0 - 1e-9 <= ess <= n + 1e-9
            assert did == (ess < diag.ess_threshold * n)
        assert sum(diag.final_weights) == pytest.approx(1.0, abs=1e-9)

    def test_first_step_check_vacuous(self):
        # initial weights are uniform so the opening ESS test never fires
        p_data, p_model = _pair(304)
        disc = optimal_discriminator(p_data, p_model)
        run = bsdg_sample(p_model, disc, GenerationOrder((0, 1, 2)), n_particles=5, rng=KeyedRng(3))
        assert run.diagnostics.ess_trace[0] == pytest.approx(5.0)
        assert run.diagnostics.resampled[0] is False

    def test_degenerate_raises_with_diagnostics(self):
        p_model = TabularJoint([2, 2], [0.25, 0.25, 0.25, 0.25])
        disc = _RawLogitDisc(lambda p: -math.inf)
        with pytest.raises(DegenerateParticleSystem) as exc:
            bsdg_sample(p_model, disc, GenerationOrder((0, 1)), n_particles=4, rng=KeyedRng(4))
        assert exc.value.diagnostics is not None
        assert exc.value.diagnostics.n_particles == 4

    def test_keep_particles(self):
        p_data, p_model = _pair(305)
        disc = optimal_discriminator(p_data, p_model)
        run = bsdg_sample(
            p_model, disc, GenerationOrder((0, 1, 2)), n_particles=3,
            rng=KeyedRng(5), keep_particles=True,
        )
        assert run.particles is not None
        assert len(run.particles.particles) == 3
        for part in run.particles.particles:
            assert part.is_complete

    def test_validates_arguments(self):
        p_data, p_model = _pair(306)
        disc = optimal_discriminator(p_data, p_model)
        with pytest.raises(ValueError):
            bsdg_sample(p_model, disc, GenerationOrder((0, 1, 2)), n_particles=0, rng=KeyedRng(6))
        with pytest.raises(ValueError):
            bsdg_sample(
                p_model, disc, GenerationOrder((0, 1, 2)),
                n_particles=2, ess_threshold=1.5, rng=KeyedRng(6),
            )


class TestFadgLookahead:
    def test_log_c_matches_direct_sum_at_start(self):
        # at t=0 every particle is empty with prev weight 1, so the
        # incremental constant is just the guided-step normalizer
        p_data, p_model = _pair(307)
        disc = optimal_discriminator(p_data, p_model)
        order = GenerationOrder((1, 0, 2))
        ps = ParticleSet.initial(p_model.categories, order, 4)
        la = fadg_lookahead(p_model, disc, ps)
        m = MaskedSample.fully_masked(p_model.categories)
        sd = step_distribution(p_model, disc, m, 1)
        for i in range(4):
            assert la.log_c[i] == pytest.approx(sd.log_normalizer, abs=1e-12)
        assert np.allclose(la.weights, 0.25, atol=1e-12)

    def test_pure_function_of_state(self):
        p_data, p_model = _pair(308)
        disc = optimal_discriminator(p_data, p_model)
        order = GenerationOrder((0, 2, 1))
        ps = ParticleSet.initial(p_model.categories, order, 3)
        a = fadg_lookahead(p_model, disc, ps)
        b = fadg_lookahead(p_model, disc, ps)
        assert np.array_equal(a.log_c, b.log_c)
        assert np.array_equal(a.weights, b.weights)


class TestFadg:
    def test_counters_full_support(self):
        p_data, p_model = _pair(309)
        disc = optimal_discriminator(p_data, p_model)
        n = 4
        run = fadg_sample(p_model, disc, GenerationOrder((0, 1, 2)), n_particles=n, rng=KeyedRng(7))
        assert run.diagnostics.counters.model_evals == n * 3
        assert run.diagnostics.counters.disc_evals == n * sum(p_model.categories)

    def test_lookahead_unaffected_by_propagation(self):
        # the step weights must be fixed before any candidate is drawn;
        # the probe sees the pre-step state and the lookahead actually used,
        # and recomputing from that state must give the same weights bitwise
        p_data, p_model = _pair(310)
        disc = optimal_discriminator(p_data, p_model)
        seen = []

        def probe(t, pre_state, la):
            recomputed = fadg_lookahead(p_model, disc, pre_state)
            seen.append((t, np.array_equal(la.weights, recomputed.weights),
                         np.array_equal(la.log_c, recomputed.log_c)))

        for seed in range(20):
            seen.clear()
            srng = KeyedRng(600 + seed)
            order = _order(srng, 3)
            fadg_sample(p_model, disc, order, n_particles=5, rng=srng, step_probe=probe)
            assert len(seen) == 3
            assert all(w_ok and c_ok for _, w_ok, c_ok in seen)

    def test_diagnostics_shape(self):
        p_data, p_model = _pair(311)
        disc = optimal_discriminator(p_data, p_model)
        n = 8
        run = fadg_sample(p_model, disc, GenerationOrder((2, 0, 1)), n_particles=n, rng=KeyedRng(8))
        diag = run.diagnostics
        assert len(diag.ess_trace) == 3
        for ess, did in zip(diag.ess_trace, diag.resampled):
            assert 1.0 - 1e-9 <= ess <= n + 1e-9
            assert did == (ess < diag.ess_threshold * n)

    def test_degenerate_all_particles(self):
        p_model = TabularJoint([2, 2], [0.25, 0.25, 0.25, 0.25])
        disc = _RawLogitDisc(lambda p: -math.inf)
        with pytest.raises(Exception) as exc:
            fadg_sample(p_model, disc, GenerationOrder((0, 1)), n_particles=3, rng=KeyedRng(9))
        assert "support" in str(exc.value) or "degenerate" in str(exc.value)

    def test_exact_discriminator_keeps_weights_flat(self):
        # exact lookahead weights equal the data/model prefix ratio times the
        # previous weight; resampling therefore almost never triggers at the
        # optimum, and every final weight stays strictly positive
        p_data, p_model = _pair(312)
        disc = optimal_discriminator(p_data, p_model)
        run = fadg_sample(p_model, disc, GenerationOrder((0, 1, 2)), n_particles=6, rng=KeyedRng(10))
        assert all(w > 0 for w in run.diagnostics.final_weights)


class TestSelectFinal:
    def test_frequencies_follow_weights(self):
        cats = (2,)
        order = GenerationOrder((0,))
        parts = [
            MaskedSample(cats, (0,)),
            MaskedSample(cats, (1,)),
        ]
        ps = ParticleSet.initial(cats, order, 2)
        ps.particles[0] = parts[0]
        ps.particles[1] = parts[1]
        ps.weights[:] = [0.8, 0.2]
        counts = np.zeros(2)
        m = 5000
        for k in range(m):
            srng = KeyedRng(700).child(k)
            s = select_final(ps, srng)
            counts[s.values[0]] += 1
        assert counts[0] / m == pytest.approx(0.8, abs=0.02)

    def test_point_mass(self):
        cats = (2,)
        ps = ParticleSet.initial(cats, GenerationOrder((0,)), 3)
        for i in range(3):
            ps.particles[i] = MaskedSample(cats, (i % 2,))
        ps.weights[:] = [0.0, 1.0, 0.0]
        for k in range(20):
            assert select_final(ps, KeyedRng(k)).values == (1,)

import math

import numpy as np
import pytest
from scipy import stats

from noisegate.errors import InvalidInputError
from noisegate.fpt import (
    FptEnsemble,
    McConfig,
    empirical_wait_time,
    ks_exponential,
    simulate_bitflip_fpt,
    simulate_delayed_fpt,
    survival_curve,
)
from noisegate.mfpt import ReducedBoundaries, mfpt_t1
from noisegate.noise import NoiseSpec, stream

SQ2 = math.sqrt(2.0)


def ensemble_of(samples, n_paths=None):
    x = np.asarray(samples, dtype=float)
    return FptEnsemble(x, n_paths or x.size, (n_paths or x.size) - x.size, math.inf, 1e-3, "sample")


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(n_paths=0, dt=0.01),
        dict(n_paths=10, dt=0.0),
        dict(n_paths=10, dt=0.01, max_time=0.5),
        dict(n_paths=10, dt=0.01, crossing="spline"),
        dict(n_paths=10, dt=0.01, workers=0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(InvalidInputError):
            McConfig(**kw)

    def test_coarse_dt(self, unit_noise):
        with pytest.raises(InvalidInputError):
            simulate_delayed_fpt(unit_noise, -0.5, McConfig(100, dt=0.05))

    def test_bitflip_order(self, unit_noise):
        with pytest.raises(InvalidInputError):
            simulate_bitflip_fpt(unit_noise, -0.5, -0.5, McConfig(100, dt=0.005))


class TestSimulation:
    def test_replay(self, unit_noise):
        mc = McConfig(3000, dt=0.005, seed=12)
        a = simulate_bitflip_fpt(unit_noise, -0.2, -1.0, mc)
        b = simulate_bitflip_fpt(unit_noise, -0.2, -1.0, mc)
        assert np.array_equal(a.samples, b.samples)
        c = simulate_bitflip_fpt(unit_noise, -0.2, -1.0, McConfig(3000, dt=0.005, seed=13))
        assert not np.array_equal(a.samples, c.samples)

    def test_workers_do_not_matter(self, unit_noise):
        one = simulate_delayed_fpt(unit_noise, -0.5, McConfig(5000, dt=0.005, seed=4))
        four = simulate_delayed_fpt(unit_noise, -0.5, McConfig(5000, dt=0.005, seed=4, workers=4))
        assert np.array_equal(one.samples, four.samples)

    def test_samples_non_negative(self, unit_noise):
        ens = simulate_delayed_fpt(unit_noise, 0.3 * SQ2, McConfig(2000, dt=0.005))
        assert ens.samples.min() >= 0 and ens.censored_count == 0

    def test_unreachable_level_censors(self, unit_noise):
        ens = simulate_bitflip_fpt(unit_noise, -0.5 * SQ2, -8 * SQ2, McConfig(500, dt=0.02, max_time=50.0))
        assert ens.censored_fraction > 0.99
        assert ens.warning

    def test_tau_scales_times(self):
        mc = lambda tau: McConfig(2000, dt=tau / 200, seed=1)
        a = simulate_delayed_fpt(NoiseSpec(1.0, 1.0), -0.7, mc(1.0))
        b = simulate_delayed_fpt(NoiseSpec(1.0, 1e-9), -0.7, mc(1e-9))
        np.testing.assert_allclose(b.samples, a.samples * 1e-9, rtol=1e-12)

    def test_dt_refinement(self, unit_noise):
        b_e = 0.3 * SQ2
        coarse = simulate_delayed_fpt(unit_noise, b_e, McConfig(600_000, dt=1 / 200, seed=21))
        fine = simulate_delayed_fpt(unit_noise, b_e, McConfig(600_000, dt=1 / 400, seed=22))
        diff = abs(coarse.mean - fine.mean)
        se = math.hypot(coarse.std_err, fine.std_err)
        # the resolvable shift is bounded by statistics; 1% of the mean is the target
        assert diff < max(0.01 * fine.mean, 3 * se)
        assert 3 * se < 0.01 * fine.mean

    def test_sampled_crossing_bias_is_large(self, unit_noise):
        # plain sample-and-compare overshoots, the bridge estimate does not
        rb = ReducedBoundaries(-1.0)
        ref = mfpt_t1(rb, 1.0)
        b_e = -SQ2
        plain = simulate_delayed_fpt(unit_noise, b_e, McConfig(20_000, dt=1 / 200, crossing="sample"))
        bridge = simulate_delayed_fpt(unit_noise, b_e, McConfig(20_000, dt=1 / 200))
        assert plain.mean / ref - 1 > 0.08
        assert abs(bridge.mean / ref - 1) < 0.03


class TestSurvival:
    def test_examples(self):
        rng = stream(30)
        n = 20_000
        ens = ensemble_of(rng.exponential(2.0, n))
        pts = survival_curve(ens, [0.0, ens.mean, 5.0, 10.0])
        assert pts[0].surviving == 1.0
        assert abs(pts[1].surviving - math.exp(-1)) < 3 * pts[1].std_err
        s = [p.surviving for p in pts]
        assert all(b <= a for a, b in zip(s, s[1:]))

    def test_censored_paths_survive(self):
        ens = ensemble_of([1.0, 2.0], n_paths=4)
        assert [p.surviving for p in survival_curve(ens, [0.5, 1.5, 3.0])] == [1.0, 0.75, 0.5]

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            survival_curve(ensemble_of([], n_paths=3), [1.0])


class TestWaitTime:
    def test_exponential_samples(self):
        ens = ensemble_of(stream(31).exponential(1.0, 100_000))
        assert empirical_wait_time(ens, 0.4, 0.4 * math.exp(-2)) == pytest.approx(2.0, rel=0.03)
        assert empirical_wait_time(ens, 0.4, 0.5) == 0.0

    def test_too_small(self):
        with pytest.raises(InvalidInputError):
            empirical_wait_time(ensemble_of([1.0, 2.0], n_paths=4), 0.5, 0.1)


class TestKs:
    def test_too_few(self):
        with pytest.raises(InvalidInputError):
            ks_exponential(ensemble_of(np.ones(50)))

    def test_constant_samples(self):
        res = ks_exponential(ensemble_of(np.full(1000, 3.0)))
        assert res.statistic > 0.6
        assert res.p_value < 1e-100
        assert "asymptotic" in res.note

    def test_false_rejection_rate(self):
        rng = stream(32)
        reps, alpha = 200, 0.01
        rejected = sum(ks_exponential(ensemble_of(rng.exponential(1.7, 500))).p_value < alpha for _ in range(reps))
        # fitted mean makes the asymptotic p-value conservative; binomial 3 SE above 1%
        assert rejected <= alpha * reps + 3 * math.sqrt(reps * alpha * (1 - alpha))
        rejected_lf = 0
        rng = stream(33)
        for _ in range(reps):
            rejected_lf += ks_exponential(ensemble_of(rng.exponential(1.7, 500))).lilliefors_p_value < alpha
        assert rejected_lf <= alpha * reps + 3 * math.sqrt(reps * alpha * (1 - alpha))

    def test_detects_non_exponential(self):
        res = ks_exponential(ensemble_of(stream(34).gamma(4.0, 1.0, 2000)))
        assert res.p_value < 1e-6 and res.lilliefors_p_value <= 0.001

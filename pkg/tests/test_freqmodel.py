"""Frequency-prior construction, weight estimation, and importance weights.

tau_exact is validated against a direct power-product evaluation (no
log-space) wherever that route cannot underflow, weight_estimate against a
closed-form enumeration oracle for a two-value prior, and the lower bounds
against frozen hand-computed constants.
"""
import math

import numpy as np
import pytest
from scipy import stats

from noisylab import (
    FrequencySample,
    PriorSpec,
    build_prior,
    capped,
    estimate_tau,
    large_interval,
    sample_frequencies,
    small_interval,
    tau_exact,
    tau_lower_large,
    tau_lower_small,
    tau_monte_carlo,
    weight_estimate,
)


def _tau_direct(values: np.ndarray, n: int, l: int) -> float:
    # independent route: raw powers, safe only while (1-v)^(n-l) stays normal
    num = np.mean(values ** (l + 1) * (1.0 - values) ** (n - l))
    den = np.mean(values**l * (1.0 - values) ** (n - l))
    return float(num / den)


class TestPriorSpec:
    def test_values_kept_as_given(self):
        p = PriorSpec(np.array([0.1, 0.2]))
        np.testing.assert_array_equal(p.values, [0.1, 0.2])
        assert not p.normalized
        assert p.pi_max() == 0.2
        assert p.n_values == 2

    def test_positivity_and_range_enforced(self):
        with pytest.raises(ValueError):
            PriorSpec(np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            PriorSpec(np.array([-0.1, 0.5]))
        with pytest.raises(ValueError):
            PriorSpec(np.array([0.5, 1.5]))
        with pytest.raises(ValueError):
            PriorSpec(np.array([]))
        with pytest.raises(ValueError):
            PriorSpec(np.array([np.nan]))

    def test_regime_flag_thresholds(self):
        prior = build_prior("uniform", n=100)  # pi_max = 0.01 <= 1/20
        assert prior.regime_ok(n=1000, l=100)
        assert not prior.regime_ok(n=999, l=10)  # n too small
        assert not prior.regime_ok(n=1000, l=101)  # l > n/10
        small = build_prior("uniform", n=99)
        assert not small.regime_ok(n=1000, l=10)  # too few values
        peaked = PriorSpec(np.concatenate([[0.2], np.full(199, 0.004)]))
        assert not peaked.regime_ok(n=10_000, l=10)  # pi_max > 1/20


class TestBuildPrior:
    def test_uniform(self):
        p = build_prior("uniform", n=4)
        np.testing.assert_array_equal(p.values, [0.25, 0.25, 0.25, 0.25])
        assert p.generator == "uniform"

    def test_zipf_harmonic_weights(self):
        p = build_prior("zipf", n=3, exponent=1.0)
        np.testing.assert_allclose(p.values, [6 / 11, 3 / 11, 2 / 11], rtol=1e-12)
        np.testing.assert_allclose(p.values, [0.545455, 0.272727, 0.181818], atol=5e-7)
        assert p.normalized

    def test_zipf_exponent_shapes_the_decay(self):
        p = build_prior("zipf", n=10, exponent=1.5)
        np.testing.assert_allclose(p.values[0] / p.values[1], 2**1.5, rtol=1e-12)

    def test_explicit_raw(self):
        p = build_prior("explicit", values=[0.1, 0.2])
        np.testing.assert_array_equal(p.values, [0.1, 0.2])

    def test_cap_applied_when_requested(self):
        p = build_prior("zipf", n=1000, exponent=1.1, cap=0.05)
        assert p.pi_max() <= 0.05 + 1e-12
        np.testing.assert_allclose(p.values.sum(), 1.0, atol=1e-9)
        assert "+cap" in p.generator

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            build_prior("uniform")
        with pytest.raises(ValueError):
            build_prior("zipf", n=10)
        with pytest.raises(ValueError):
            build_prior("zipf", n=10, exponent=0.0)
        with pytest.raises(ValueError):
            build_prior("explicit", values=[0.0, 1.0])
        with pytest.raises(ValueError):
            build_prior("pareto", n=10)


class TestCapped:
    def test_total_preserved_and_cap_respected(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            n = int(rng.integers(2, 50))
            raw = rng.uniform(0.01, 1.0, size=n)
            raw = raw / raw.sum()  # normalized input
            cap = float(rng.uniform(1.5 / n, 0.9))
            out = capped(PriorSpec(raw), cap)
            assert out.values.max() <= cap * (1.0 + 1e-12)
            np.testing.assert_allclose(out.values.sum(), raw.sum(), rtol=1e-12)

    def test_rank_order_preserved(self):
        raw = np.array([0.5, 0.25, 0.15, 0.1])
        out = capped(PriorSpec(raw), 0.3).values
        assert np.all(np.argsort(raw) == np.argsort(out))

    def test_unpinned_entries_share_a_common_scale(self):
        raw = np.array([0.5, 0.25, 0.15, 0.1])
        out = capped(PriorSpec(raw), 0.3).values
        free = out < 0.3 - 1e-12
        ratios = out[free] / raw[free]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)

    def test_noop_when_already_under_cap(self):
        raw = np.array([0.2, 0.3, 0.5])
        out = capped(PriorSpec(raw), 0.5)
        np.testing.assert_allclose(out.values, raw, rtol=1e-12)

    def test_infeasible_cap_rejected(self):
        with pytest.raises(ValueError):
            capped(PriorSpec(np.array([0.5, 0.5])), 0.3)
        with pytest.raises(ValueError):
            capped(PriorSpec(np.array([0.5, 0.5])), 0.0)


class TestSampleFrequencies:
    def test_single_distinct_value_gives_uniform_split(self):
        rng = np.random.default_rng(0)
        sample = sample_frequencies(PriorSpec(np.full(7, 0.3)), rng)
        np.testing.assert_allclose(sample.d, 1.0 / 7.0, rtol=1e-14)

    def test_normalization_forced(self):
        # two slots realizing (0.3, 0.1) must normalize to (0.75, 0.25);
        # drive the rng until both values appear once in either order
        prior = PriorSpec(np.array([0.3, 0.1]))
        rng = np.random.default_rng(1)
        seen = False
        for _ in range(50):
            s = sample_frequencies(prior, rng)
            if abs(s.d.max() - 0.75) < 1e-12:
                np.testing.assert_allclose(sorted(s.d), [0.25, 0.75], rtol=1e-12)
                seen = True
                break
        assert seen

    def test_mean_slot_frequency_is_one_over_n(self):
        prior = PriorSpec(np.linspace(0.001, 0.05, 25))
        rng = np.random.default_rng(2)
        reps = 4000
        means = np.empty(reps)
        for i in range(reps):
            means[i] = sample_frequencies(prior, rng).d.mean()
        # exchangeability forces E[D(x)] = 1/N exactly
        np.testing.assert_allclose(means.mean(), 1.0 / 25.0, atol=1e-12)

    def test_sample_validity_contract(self):
        with pytest.raises(ValueError):
            FrequencySample(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            FrequencySample(np.array([-0.1, 1.1]))


class TestWeightEstimate:
    def test_full_interval_is_exactly_one(self):
        prior = build_prior("zipf", n=50, exponent=1.1)
        for seed in (0, 7, 123):
            est = weight_estimate(prior, (0.0, 1.0), 500, np.random.default_rng(seed))
            assert est.value == 1.0
            assert est.stderr == 0.0

    def test_single_value_prior_mass_all_inside(self):
        n = 16
        prior = PriorSpec(np.full(n, 0.02))
        est = weight_estimate(prior, (1.0 / (2 * n), 2.0 / n), 200, np.random.default_rng(3))
        assert est.value == 1.0

    def test_empty_interval_is_zero(self):
        prior = build_prior("uniform", n=100)  # every D(x) near 0.01
        est = weight_estimate(prior, (0.5, 1.0), 300, np.random.default_rng(4))
        assert est.value == 0.0

    def test_two_value_prior_matches_enumeration_oracle(self):
        # With only 2 distinct candidate values the realized mass depends
        # solely on how many of the N slots draw the first one, so the
        # expectation is a finite binomial sum -- an exact oracle for the
        # Monte-Carlo route.
        a, b, n = 0.05, 0.02, 16
        prior = PriorSpec(np.array([a] * (n // 2) + [b] * (n // 2)))
        lo, hi = 0.055, 0.12
        exact = 0.0
        for k in range(n + 1):
            total = k * a + (n - k) * b
            d_a, d_b = a / total, b / total
            mass = 0.0
            if lo <= d_a <= hi:
                mass += k * a / total
            if lo <= d_b <= hi:
                mass += (n - k) * b / total
            exact += stats.binom.pmf(k, n, 0.5) * mass
        est = weight_estimate(prior, (lo, hi), 40_000, np.random.default_rng(5))
        assert est.stderr > 0.0
        assert abs(est.value - exact) <= 5.0 * est.stderr

    def test_interval_validation(self):
        prior = build_prior("uniform", n=4)
        with pytest.raises(ValueError):
            weight_estimate(prior, (0.6, 0.4), 10, np.random.default_rng(0))
        with pytest.raises(ValueError):
            weight_estimate(prior, (0.0, 1.0), 0, np.random.default_rng(0))


class TestTauExact:
    def test_two_value_anchor(self):
        prior = PriorSpec(np.array([0.1, 0.2]))
        got = tau_exact(prior, n=10, l=3)
        num = 0.5 * (0.1**4 * 0.9**7 + 0.2**4 * 0.8**7)
        den = 0.5 * (0.1**3 * 0.9**7 + 0.2**3 * 0.8**7)
        np.testing.assert_allclose(got, num / den, rtol=1e-13)
        np.testing.assert_allclose(got, 0.177815733, rtol=1e-9)

    def test_point_mass_identity_is_bitwise(self):
        for c in (0.001, 0.3, 1.0 / 3.0):
            prior = PriorSpec(np.array([c]))
            for n, l in [(1, 1), (10, 3), (10_000, 10), (10**7, 5)]:
                assert tau_exact(prior, n, l) == c
        # many equal slots behave identically to one
        wide = PriorSpec(np.full(1000, 0.001))
        assert tau_exact(wide, 10_000, 17) == 0.001

    def test_log_space_matches_direct_evaluation(self):
        rng = np.random.default_rng(6)
        for _ in range(300):
            size = int(rng.integers(2, 30))
            values = rng.uniform(0.001, 0.6, size=size)
            n = int(rng.integers(2, 51))
            l = int(rng.integers(1, n + 1))
            prior = PriorSpec(values)
            np.testing.assert_allclose(
                tau_exact(prior, n, l), _tau_direct(values, n, l), rtol=1e-12
            )

    def test_deep_n_does_not_underflow(self):
        prior = PriorSpec(np.array([0.001, 0.002]))
        got = tau_exact(prior, n=10**7, l=10)
        assert 0.0 < got <= 0.002
        assert math.isfinite(got)

    def test_bounded_by_largest_prior_value(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            values = rng.uniform(0.001, 0.9, size=int(rng.integers(1, 20)))
            n = int(rng.integers(1, 1000))
            l = int(rng.integers(1, n + 1))
            got = tau_exact(PriorSpec(values), n, l)
            assert 0.0 < got <= values.max() * (1.0 + 1e-12)

    def test_monotone_in_l_for_two_point_prior(self):
        prior = PriorSpec(np.array([0.05, 0.3]))
        vals = [tau_exact(prior, 100, l) for l in range(1, 101)]
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_appearance_count_validation(self):
        prior = PriorSpec(np.array([0.1]))
        with pytest.raises(ValueError):
            tau_exact(prior, 10, 0)
        with pytest.raises(ValueError):
            tau_exact(prior, 10, 11)


class TestTauMonteCarlo:
    def test_agrees_with_closed_form_at_large_slot_count(self):
        # normalized-mode sampling converges to the raw-mode ratio as the
        # number of slots grows; at N=1000 the residual bias is far below
        # the Monte-Carlo standard error used here
        prior = build_prior("zipf", n=1000, exponent=1.1, cap=0.05)
        exact = tau_exact(prior, n=10_000, l=10)
        est = tau_monte_carlo(prior, n=10_000, l=10, replicates=2000, rng=np.random.default_rng(9))
        assert est.stderr > 0.0
        assert abs(est.value - exact) <= 5.0 * est.stderr

    def test_point_mass_replicates_are_constant(self):
        prior = PriorSpec(np.full(64, 0.015625))
        est = tau_monte_carlo(prior, n=1000, l=3, replicates=50, rng=np.random.default_rng(10))
        np.testing.assert_allclose(est.value, 1.0 / 64.0, rtol=1e-12)
        assert est.stderr <= 1e-15

    def test_replicate_validation(self):
        prior = PriorSpec(np.array([0.1, 0.2]))
        with pytest.raises(ValueError):
            tau_monte_carlo(prior, 10, 3, 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            tau_monte_carlo(prior, 10, 11, 10, np.random.default_rng(0))


class TestTauLowerBounds:
    def test_large_regime_anchor(self):
        np.testing.assert_allclose(
            tau_lower_large(10**4, 100, 1.0), 3.9603960396039605e-05, rtol=1e-14
        )
        np.testing.assert_allclose(tau_lower_large(10**4, 100, 1.0), 3.9604e-5, rtol=1e-5)

    def test_small_regime_anchor(self):
        np.testing.assert_allclose(
            tau_lower_small(1001, 5, 1.0), 0.4 * (4.0 / 1000.0) / 1.1**5, rtol=1e-14
        )
        np.testing.assert_allclose(tau_lower_small(1001, 5, 1.0), 9.9348e-4, rtol=1e-4)

    def test_vacuous_cases(self):
        assert tau_lower_large(100, 1, 1.0) == 0.0
        assert tau_lower_large(100, 7, 0.0) == 0.0
        with pytest.warns(UserWarning):
            assert tau_lower_small(100, 1, 1.0) == 0.0
        assert tau_lower_small(100, 7, 0.0) == 0.0

    def test_weight_range_validation(self):
        with pytest.raises(ValueError):
            tau_lower_large(100, 7, 1.5)
        with pytest.raises(ValueError):
            tau_lower_small(100, 7, -0.1)
        with pytest.raises(ValueError):
            tau_lower_large(5, 7, 0.5)

    def test_interval_definitions(self):
        lo, hi = large_interval(10_000, 100)
        np.testing.assert_allclose(lo, (2.0 / 3.0) * 99.0 / 9999.0, rtol=1e-14)
        np.testing.assert_allclose(hi, (4.0 / 3.0) * 100.0 / 10_000.0, rtol=1e-14)
        lo, hi = small_interval(1001, 5)
        np.testing.assert_allclose(lo, 0.7 * 4.0 / 1000.0, rtol=1e-14)
        np.testing.assert_allclose(hi, (4.0 / 3.0) * 4.0 / 1000.0, rtol=1e-14)


class TestEstimateTau:
    def test_bounds_sit_below_exact_in_regime(self):
        prior = build_prior("zipf", n=1000, exponent=1.1, cap=0.05)
        rng = np.random.default_rng(11)
        for l in (2, 10, 100):
            est = estimate_tau(prior, 10_000, l, rng)
            assert est.regime_ok
            assert est.exact >= est.lower_large
            assert est.exact >= est.lower_small
            assert est.mc is None

    def test_monte_carlo_route_attached_on_request(self):
        prior = build_prior("zipf", n=200, exponent=1.1, cap=0.05)
        est = estimate_tau(
            prior, 2000, 5, np.random.default_rng(12), mc_replicates=500
        )
        assert est.mc is not None and est.mc_stderr is not None
        assert abs(est.mc - est.exact) <= 6.0 * est.mc_stderr + 1e-4

    def test_single_appearance_flagged_vacuous(self):
        prior = build_prior("uniform", n=100)
        with pytest.warns(UserWarning):
            est = estimate_tau(prior, 1000, 1, np.random.default_rng(13))
        assert est.lower_large == 0.0
        assert est.lower_small == 0.0
        assert est.exact > 0.0

import math

import numpy as np
import pytest

from resoforge.fourier import OneDTrigPoly, TrigPoly, generators, l1, lacunary_potential
from resoforge.genericity import (
    CutoffBelowThresholdError,
    GenericityParams,
    check_low_mode_morse,
    check_lower_bound,
    check_membership,
    degeneracy_locus,
    empirical_genericity,
    sample_product_measure,
    threshold_N,
)
from resoforge.morse import critical_points


class TestThreshold:
    def test_hand_value_n2_s1_delta1(self):
        # 2 (44 ln 2 + 2 ln(4/e)) evaluated independently
        want = 2.0 * (44.0 * math.log(2.0) + 2.0 * math.log(4.0 / math.e))
        assert threshold_N(2, 1.0, 1.0) == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(62.54, abs=0.01)

    def test_always_at_least_two_c_s(self):
        for n in (1, 2, 3):
            for s in (0.1, 0.5, 1.0, 3.0):
                for delta in (1e-6, 0.01, 1.0):
                    assert threshold_N(n, s, delta) >= 2 * max(1.0, 1.0 / s) - 1e-12

    def test_monotone_in_delta_and_s(self):
        deltas = np.logspace(-6, 0, 12)
        for a, b in zip(deltas, deltas[1:]):
            assert threshold_N(2, 1.0, a) >= threshold_N(2, 1.0, b)
        widths = np.linspace(0.1, 4.0, 12)
        for a, b in zip(widths, widths[1:]):
            assert threshold_N(2, a, 0.3) >= threshold_N(2, b, 0.3)

    def test_halving_delta_adds_2log2_over_s(self):
        for s in (0.5, 1.0, 2.0):
            d = 0.25
            lhs = threshold_N(2, s, d / 2) - threshold_N(2, s, d)
            assert lhs == pytest.approx(2 * math.log(2.0) / s, rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            threshold_N(0, 1.0, 0.5)
        with pytest.raises(ValueError):
            threshold_N(2, 1.0, 1.5)


def small_window_params(n=2, s=1.0, delta=0.5, beta=1e-3, K_max=70):
    return GenericityParams(n=n, s=s, delta=delta, beta=beta, K_max=K_max)


class TestLowerBound:
    def test_lacunary_passes_any_delta(self):
        params = small_window_params(delta=1.0)
        f = lacunary_potential(2, 1.0, k_max=params.K_max)
        failures, checked, margin = check_lower_bound(f, params)
        assert not failures and checked > 0
        assert margin >= 0.0

    def test_missing_mode_fails_with_witness(self):
        params = small_window_params(delta=1.0)
        f = lacunary_potential(2, 1.0, k_max=params.K_max)
        victim = next(k for k in generators(2, params.K_max)
                      if l1(k) >= params.N)
        coeffs = dict(f.coeffs)
        coeffs.pop(victim)
        g = TrigPoly(2, coeffs)  # no rule: missing coefficient is zero
        failures, _, _ = check_lower_bound(g, params)
        assert any(fail.k == victim and fail.reason == "lower-bound"
                   for fail in failures)

    def test_boundary_equality_passes(self):
        params = small_window_params(delta=0.5, K_max=66)
        n, s = 2, 1.0
        coeffs = {
            k: params.delta * l1(k) ** (-n) * math.exp(-l1(k) * s)
            for k in generators(n, params.K_max) if l1(k) >= params.N
        }
        f = TrigPoly(n, coeffs)
        failures, checked, margin = check_lower_bound(f, params)
        assert not failures and checked == len(coeffs)
        assert margin == pytest.approx(0.0, abs=1e-12)

    def test_cutoff_below_threshold(self):
        params = GenericityParams(n=2, s=1.0, delta=1.0, beta=0.1, K_max=10)
        f = lacunary_potential(2, 1.0, k_max=10)
        with pytest.raises(CutoffBelowThresholdError, match="cutoff below threshold"):
            check_lower_bound(f, params)


class TestLowModeMorse:
    def test_lacunary_beta_window(self):
        # every projection is 2 e^{-s|k|_1} cos: passes iff beta <= the minimum
        params = GenericityParams(n=2, s=4.0, delta=1.0, beta=1e-30, K_max=20)
        f = lacunary_potential(2, 4.0, k_max=params.N + 1)
        failures, checked, margin = check_low_mode_morse(f, params)
        assert not failures and checked > 0
        hi = math.floor(params.N)
        min_beta = 2 * math.exp(-4.0 * hi)
        tight = GenericityParams(n=2, s=4.0, delta=1.0, beta=2 * min_beta, K_max=20)
        failures, _, _ = check_low_mode_morse(f, tight)
        assert failures  # beta above the weakest projection's constant

    def test_vanishing_projection_recorded(self):
        params = GenericityParams(n=2, s=4.0, delta=1.0, beta=0.0, K_max=20)
        f = TrigPoly(2, {(1, 0): 1.0})
        failures, _, _ = check_low_mode_morse(f, params)
        assert any(fail.reason == "morse" for fail in failures)
        assert not any(fail.k == (1, 0) for fail in failures)

    def test_beta_zero_trivially_passes_where_morse(self):
        params = GenericityParams(n=2, s=4.0, delta=1.0, beta=0.0, K_max=20)
        f = lacunary_potential(2, 4.0, k_max=params.N + 1)
        failures, _, _ = check_low_mode_morse(f, params)
        assert not failures

    def test_equal_critical_values_failure(self):
        # pi_k f = cos(theta) + a cos(2 theta + phi): an even function of
        # (theta - theta*) for phi = 0 has two equal-value saddles when a
        # is large enough; search a phase that forces an equal pair
        base = {1: 0.5}
        found = None
        for a in (0.6, 0.8):
            F = OneDTrigPoly({**base, 2: a / 2})
            rep = critical_points(F)
            if rep.count == 4 and rep.min_value_gap < 1e-9 * 2:
                found = F
                break
        assert found is not None
        rep = critical_points(found)
        assert not rep.distinct_values


class TestMembership:
    def test_lacunary_in_class(self):
        params = GenericityParams(n=2, s=4.0, delta=1.0, beta=1e-30, K_max=20)
        f = lacunary_potential(2, 4.0, k_max=20)
        report = check_membership(f, params)
        assert report.in_class
        assert report.proved_beyond_cutoff
        assert report.window == (params.N, 20)
        assert report.margins["lower_bound"] >= 0

    def test_openness_probe(self):
        # perturbations below the report margins keep the potential passing
        # (beta sits below the weakest low-mode projection constant 2e^{-2N})
        params = GenericityParams(n=2, s=4.0, delta=0.5, beta=1e-30, K_max=20)
        f = lacunary_potential(2, 4.0, k_max=20)
        report = check_membership(f, params)
        assert report.in_class
        rng = np.random.default_rng(8)
        # weighted-sup-ball perturbation small against both margins
        delta_prime = 1e-3 * min(1.0, report.margins["lower_bound"])
        for _ in range(10):
            pert = {}
            for k in generators(2, 6):
                w = rng.normal() + 1j * rng.normal()
                w /= max(1.0, abs(w))
                pert[k] = f.coeff(k) + delta_prime * w * math.exp(-4.0 * l1(k))
            g = TrigPoly(2, {**{k: f.coeff(k) for k in f.coeffs}, **pert})
            g = TrigPoly(2, g.coeffs, rule=f.rule, rule_cutoff=f.rule_cutoff)
            assert check_membership(g, params).in_class

    def test_high_mode_projections_morse_with_distinct_values(self):
        # the forward direction of the class decomposition: a sampled
        # potential passing both checks has Morse projections with distinct
        # values in the verified high-mode window
        params = GenericityParams(n=2, s=2.0, delta=0.2, beta=1e-30, K_max=33)
        rng_seed = 0
        f = sample_product_measure(2, 2.0, 33, rng_seed)
        lb_failures, _, _ = check_lower_bound(f, params)
        window = [k for k in generators(2, 33) if l1(k) >= params.N]
        for k in window:
            if any(fail.k == k for fail in lb_failures):
                continue
            from resoforge.fourier import project_lattice

            F = project_lattice(f, k)
            if F.is_zero:
                continue
            rep = critical_points(F)
            assert rep.beta > 0
            assert rep.distinct_values


class TestProductMeasure:
    def test_determinism(self):
        a = sample_product_measure(2, 1.0, 6, 1234)
        b = sample_product_measure(2, 1.0, 6, 1234)
        assert a.coeffs == b.coeffs

    def test_disk_second_moment(self):
        from resoforge.genericity import _philox, _uniform_disk

        w = _uniform_disk(_philox(7), 10 ** 5)
        assert np.mean(np.abs(w) ** 2) == pytest.approx(0.5, abs=0.01)

    def test_weighted_coefficients_in_disk(self):
        f = sample_product_measure(3, 0.7, 5, 99)
        for k, c in f.coeffs.items():
            assert abs(c) * math.exp(l1(k) * 0.7) <= 1.0 + 1e-12

    def test_every_half_lattice_mode_occupied(self):
        from resoforge.fourier import iter_half_ball

        f = sample_product_measure(2, 1.0, 4, 5)
        modes = set(iter_half_ball(2, 4))
        assert set(f.coeffs) <= modes
        # probability of an exact zero draw is nil
        assert len(f.coeffs) == len(modes)


class TestEmpiricalGenericity:
    def test_delta_squared_trend(self):
        a = empirical_genericity(2, 1.0, 0.3, 1500, 5, window=(1, 6))
        b = empirical_genericity(2, 1.0, 0.15, 1500, 6, window=(1, 6))
        fail_a = 1 - a.fraction_pass
        fail_b = 1 - b.fraction_pass
        assert fail_b > 0
        assert 2.0 <= fail_a / fail_b <= 8.0

    def test_fraction_tends_to_one_for_small_delta(self):
        est = empirical_genericity(2, 1.0, 0.01, 400, 11, window=(1, 6))
        assert est.fraction_pass >= 0.99

    def test_confidence_interval_brackets(self):
        est = empirical_genericity(2, 1.0, 0.4, 500, 3, window=(1, 6))
        assert est.ci_low <= est.fraction_pass <= est.ci_high

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            empirical_genericity(2, 1.0, 0.5, 0, 1)


class TestDegeneracyLocus:
    def test_zero_residual_gives_origin(self):
        locus = degeneracy_locus(OneDTrigPoly({}))
        assert locus.gamma1.tolist() == [0j]
        assert locus.gamma2.size == 0
        assert locus.distance(0.3 + 0.1j) == pytest.approx(abs(0.3 + 0.1j))

    def test_cos_two_theta_curve_value(self):
        # z(0) = (i G'(0) + G''(0))/2 = -2 for G = cos 2 theta
        G = OneDTrigPoly({2: 0.5})
        locus = degeneracy_locus(G, grid=128)
        assert locus.distance(-2.0 + 0.0j) < 1e-3

    def test_rejects_low_modes(self):
        with pytest.raises(ValueError):
            degeneracy_locus(OneDTrigPoly({1: 0.5}))

    def test_far_coefficients_give_morse_distinct(self):
        G = OneDTrigPoly({2: 0.15, 3: 0.1j})
        locus = degeneracy_locus(G, grid=192)
        rng = np.random.default_rng(17)
        for _ in range(12):
            z = rng.normal() + 1j * rng.normal()
            if locus.distance(z) < 0.3:
                continue
            F = OneDTrigPoly({1: z, **G.coeffs})
            rep = critical_points(F)
            assert rep.beta > 0
            assert rep.distinct_values

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from resoforge.cover import free_params
from resoforge.fourier import TrigPoly, lacunary_potential, project_lattice, two_mode_potential
from resoforge.genericity import threshold_N
from resoforge.lieseries import (
    AveragedNF,
    NaturalHam,
    SmallDivisorError,
    TaylorFourierSeries,
    TruncationLedger,
    cosine_rescale,
    kinetic_series,
    lie_step_nonres,
    lie_step_res,
    nf_remainder_norm,
    solve_homological,
    verify_conjugacy,
)

TWO_PI = 2 * math.pi


def series(n=2, y0=(0.7, 0.31), deg=2, cutoff=8):
    return TaylorFourierSeries(n, np.asarray(y0, dtype=float), deg, cutoff)


class TestSeriesAlgebra:
    def test_kinetic_exact(self):
        rng = np.random.default_rng(0)
        h = kinetic_series(2, np.array([0.7, 0.31]), 3, 6)
        for _ in range(20):
            y = rng.normal(size=2)
            assert h.evaluate(y, np.zeros(2)).real == pytest.approx(
                0.5 * float(y @ y), rel=1e-14
            )

    def test_poisson_bracket_vs_finite_differences(self):
        rng = np.random.default_rng(1)
        F = series(deg=3)
        F.add_term((1, 0), (1, 0), 0.3 + 0.1j)
        F.add_term((-1, 0), (1, 0), 0.3 - 0.1j)
        F.add_term((0, 2), (0, 1), 0.2)
        F.add_term((0, -2), (0, 1), 0.2)
        G = series(deg=3)
        G.add_term((1, 1), (0, 0), 0.5)
        G.add_term((-1, -1), (0, 0), 0.5)
        G.add_term((0, 1), (2, 0), -0.1j)
        G.add_term((0, -1), (2, 0), 0.1j)
        bracket = F.poisson(G, TruncationLedger())

        def fd_bracket(y, x, h=1e-6):
            def F_(y_, x_):
                return F.evaluate(y_, x_).real

            def G_(y_, x_):
                return G.evaluate(y_, x_).real

            total = 0.0
            for j in range(2):
                ey = np.zeros(2)
                ey[j] = h
                dF_y = (F_(y + ey, x) - F_(y - ey, x)) / (2 * h)
                dG_y = (G_(y + ey, x) - G_(y - ey, x)) / (2 * h)
                dF_x = (F_(y, x + ey) - F_(y, x - ey)) / (2 * h)
                dG_x = (G_(y, x + ey) - G_(y, x - ey)) / (2 * h)
                total += dF_x * dG_y - dF_y * dG_x
            return total

        for _ in range(10):
            y = np.array([0.7, 0.31]) + rng.uniform(-0.1, 0.1, 2)
            x = rng.uniform(0, TWO_PI, 2)
            assert bracket.evaluate(y, x).real == pytest.approx(
                fd_bracket(y, x), abs=5e-7
            )

    def test_reality_preserved(self):
        F = series()
        F.add_term((1, 0), (0, 0), 0.3 + 0.2j)
        F.add_term((-1, 0), (0, 0), 0.3 - 0.2j)
        G = series()
        G.add_term((1, 1), (1, 0), 0.1j)
        G.add_term((-1, -1), (1, 0), -0.1j)
        assert F.poisson(G, TruncationLedger()).reality_defect() < 1e-15

    def test_truncation_ledger(self):
        F = series(deg=1, cutoff=2)
        led = TruncationLedger()
        F.add_term((3, 0), (0, 0), 2.0, led)       # beyond cutoff
        F.add_term((1, 0), (1, 1), 1.5, led)       # beyond degree
        assert led.dropped == pytest.approx(3.5)
        assert F.is_empty

    def test_gradients(self):
        F = series(deg=2)
        F.add_term((1, 1), (1, 0), 0.2 + 0.05j)
        F.add_term((-1, -1), (1, 0), 0.2 - 0.05j)
        y = np.array([0.75, 0.28])
        x = np.array([0.4, 1.3])
        val, dy, dx = F.eval_grads(y, x)
        h = 1e-7
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            assert dy[j] == pytest.approx(
                (F.evaluate(y + e, x).real - F.evaluate(y - e, x).real) / (2 * h),
                abs=1e-6,
            )
            assert dx[j] == pytest.approx(
                (F.evaluate(y, x + e).real - F.evaluate(y, x - e).real) / (2 * h),
                abs=1e-6,
            )


class TestHomological:
    def test_single_mode_inverse(self):
        # chi for B = cos(k.x) must be sin(k.x)/(y0.k) at degree zero
        y0 = np.array([0.7, 0.31])
        B = series(deg=2, cutoff=4)
        B.add_term((1, 1), (0, 0), 0.5)
        B.add_term((-1, -1), (0, 0), 0.5)
        chi, log, _ = solve_homological(B, y0, 1e-6, "test")
        div = float(y0 @ [1, 1])
        assert chi.terms[((1, 1), (0, 0))] == pytest.approx(0.5 / (1j * div))
        assert dict(log)[(1, 1)] == pytest.approx(abs(div))

    def test_small_divisor_raises_with_witness(self):
        y0 = np.array([0.5, -0.5])
        B = series(deg=2, cutoff=4)
        B.add_term((1, 1), (0, 0), 0.5)
        with pytest.raises(SmallDivisorError) as err:
            solve_homological(B, y0, 1e-6, "test")
        assert err.value.mode == (1, 1)

    def test_bracket_with_kinetic_cancels_band(self):
        # {h, chi} + B vanishes within the retained degrees
        y0 = np.array([0.7, 0.31])
        h = kinetic_series(2, y0, 4, 6)
        B = series(deg=4, cutoff=6)
        B.add_term((1, 1), (0, 0), 0.5)
        B.add_term((-1, -1), (0, 0), 0.5)
        B.add_term((1, 0), (1, 0), 0.2)
        B.add_term((-1, 0), (1, 0), 0.2)
        chi, _, _ = solve_homological(B, y0, 1e-6, "test")
        resid = h.poisson(chi, TruncationLedger()).plus(B)
        low = {key: c for key, c in resid.terms.items() if sum(key[1]) < 4}
        worst = max((abs(c) for c in low.values()), default=0.0)
        assert worst < 1e-14


def nonres_setup(eps=1e-3, order=1, deg=2, f=None):
    f = TrigPoly.from_cosines(2, {(1, 0): 1.0, (1, 1): 0.7}) if f is None else f
    params = free_params(2, 1.0, alpha=0.02, K0=2, K=8)
    y0 = np.array([0.7, 0.31])
    ham = NaturalHam(2, eps, f)
    return ham, lie_step_nonres(ham, params, y0, order=order, max_degree=deg), params, y0


class TestNonresonantStep:
    def test_band_support_exactly_empty(self):
        _, nf, _, _ = nonres_setup(order=2, deg=3)
        assert nf.band_coefficient_maxima() == 0.0

    def test_identity_step_when_no_band_modes(self):
        f = TrigPoly.from_cosines(2, {(3, 2): 0.6, (4, -3): 0.2})  # all above K0
        ham, nf, _, _ = nonres_setup(f=f)
        assert not nf.chi
        assert nf.g_o[1].is_empty
        # the remainder is the potential itself
        rng = np.random.default_rng(2)
        for _ in range(10):
            x = rng.uniform(0, TWO_PI, 2)
            assert nf.f_rem[1].evaluate(nf.base_point, x).real == pytest.approx(
                f.evaluate(x).real, abs=1e-14
            )

    def test_single_mode_normal_part_second_order(self):
        f = TrigPoly.from_cosines(2, {(1, 1): 1.0})
        _, nf, _, _ = nonres_setup(order=2, f=f)
        assert nf.g_o[1].is_empty            # zero average at first order
        assert not nf.g_o[2].is_empty        # O(eps^2) y-dependent normal part
        assert nf.band_coefficient_maxima() == 0.0

    def test_divisor_log_threshold(self):
        _, nf, params, y0 = nonres_setup()
        assert nf.divisor_log
        for mode, value in nf.divisor_log:
            assert value > params.alpha / 2
            assert value == pytest.approx(abs(float(np.dot(y0, mode))))

    def test_resonant_base_point_rejected(self):
        f = TrigPoly.from_cosines(2, {(1, 0): 1.0})
        params = free_params(2, 1.0, alpha=0.3, K0=2, K=8)
        ham = NaturalHam(2, 1e-3, f)
        with pytest.raises(SmallDivisorError, match="resonant at base point"):
            lie_step_nonres(ham, params, np.array([0.1, 0.8]), order=1)


class TestResonantStep:
    def setup_method(self):
        self.f = two_mode_potential(1.0)
        self.params = free_params(2, 1.0, alpha=0.03, K0=2, K=6)
        self.y0 = np.array([0.5, -0.5])
        self.k = (1, 1)

    def test_projection_recovered_exactly_at_order_one(self):
        ham = NaturalHam(2, 1e-3, self.f)
        nf = lie_step_res(ham, self.k, self.params, self.y0, order=1)
        pk = project_lattice(self.f, self.k)
        # g_res grade 1 must equal pi_k f coefficientwise, exactly
        terms = dict(nf.g_res[1].terms)
        for j, c in pk.coeffs.items():
            mode = tuple(j * v for v in self.k)
            assert terms.pop((mode, (0, 0))) == c
            mode_neg = tuple(-j * v for v in self.k)
            assert terms.pop((mode_neg, (0, 0))) == np.conj(c)
        assert not terms

    def test_line_annihilation_exact(self):
        ham = NaturalHam(2, 1e-3, self.f)
        nf = lie_step_res(ham, self.k, self.params, self.y0, order=2, max_degree=3)
        assert nf.band_coefficient_maxima() == 0.0

    def test_pure_line_potential_untouched(self):
        f = TrigPoly.from_cosines(2, {(1, 1): 0.8})
        ham = NaturalHam(2, 1e-3, f)
        nf = lie_step_res(ham, self.k, self.params, self.y0, order=1)
        assert not nf.chi
        assert all(t.is_empty for t in nf.f_rem[1:])

    def test_off_line_divisor_guard(self):
        params = free_params(2, 1.0, alpha=0.2, K0=2, K=6)
        ham = NaturalHam(2, 1e-3, self.f)
        with pytest.raises(SmallDivisorError):
            lie_step_res(ham, self.k, params, np.array([0.05, -0.04]), order=1)


class TestRemainderNorm:
    def test_zero_remainder(self):
        f = TrigPoly.from_cosines(2, {(1, 1): 0.8})
        params = free_params(2, 1.0, alpha=0.03, K0=2, K=6)
        ham = NaturalHam(2, 1e-3, f)
        nf = lie_step_res(ham, (1, 1), params, np.array([0.5, -0.5]), order=1)
        assert nf_remainder_norm(nf, 0.1, 0.5) == 0.0

    def test_single_mode_amplitude(self):
        f = TrigPoly.from_cosines(2, {(2, 1): 0.0})
        params = free_params(2, 1.0, alpha=0.02, K0=2, K=8)
        nf = lie_step_nonres(NaturalHam(2, 0.5, f), params, np.array([0.7, 0.31]))
        a, m = 0.37, 3
        nf.f_rem[1].add_term((2, 1), (0, 0), a)
        assert nf_remainder_norm(nf, 0.1, 0.8) == pytest.approx(
            0.5 * a * math.exp(m * 0.8)
        )

    def test_smoothing_factor(self):
        f = TrigPoly.from_cosines(2, {(1, 0): 1.0, (3, 2): 0.5, (4, -2): 0.25})
        _, nf, _, _ = nonres_setup(order=1, f=f)
        s, sp = 0.8, 0.3
        minband = min(
            sum(abs(v) for v in k)
            for j in range(1, nf.order + 1)
            for (k, _m) in nf.f_rem[j].terms
        )
        lhs = nf_remainder_norm(nf, 0.05, sp)
        rhs = math.exp(-(s - sp) * minband) * nf_remainder_norm(nf, 0.05, s)
        assert lhs <= rhs * (1 + 1e-12)


class TestConjugacy:
    def test_zero_perturbation(self):
        f = TrigPoly(2, {})
        params = free_params(2, 1.0, alpha=0.02, K0=2, K=8)
        ham = NaturalHam(2, 1e-3, f)
        nf = lie_step_nonres(ham, params, np.array([0.7, 0.31]), order=1)
        rep = verify_conjugacy(ham, nf, [(np.array([0.7, 0.31]), np.zeros(2))])
        assert rep.max_residual == 0.0
        assert rep.max_displacement == 0.0

    def test_order_one_richardson_ratio(self):
        f = TrigPoly.from_cosines(2, {(1, 0): 1.0})
        params = free_params(2, 1.0, alpha=0.02, K0=2, K=8)
        y0 = np.array([0.7, 0.31])
        rng = np.random.default_rng(3)
        pts = [(y0 + rng.uniform(-0.01, 0.01, 2), rng.uniform(0, TWO_PI, 2))
               for _ in range(4)]
        res = {}
        for eps in (1e-2, 5e-3):
            ham = NaturalHam(2, eps, f)
            nf = lie_step_nonres(ham, params, y0, order=1, max_degree=3)
            res[eps] = verify_conjugacy(ham, nf, pts, rtol=1e-13, atol=1e-14)
        ratio = res[1e-2].max_residual / res[5e-3].max_residual
        assert ratio == pytest.approx(4.0, rel=0.2)

    def test_displacement_threshold_reported(self):
        f = TrigPoly.from_cosines(2, {(1, 0): 1.0})
        params = free_params(2, 1.0, alpha=0.02, K0=2, K=8)
        y0 = np.array([0.7, 0.31])
        ham = NaturalHam(2, 1e-3, f)
        nf = lie_step_nonres(ham, params, y0, order=1)
        rep = verify_conjugacy(ham, nf, [(y0, np.zeros(2))], params=params)
        assert rep.displacement_threshold == pytest.approx(
            params.r_o / (2 ** 7 * params.K0)
        )
        assert rep.displacement_ok in (True, False)

    def test_energy_conserved_along_flow(self):
        # sanity: the natural Hamiltonian is conserved by its own flow
        f = two_mode_potential(1.0)
        ham = NaturalHam(2, 1e-2, f)

        def rhs(_t, z):
            dy, dx = ham.grad(z[:2], z[2:])
            return np.concatenate([-dx, dy])

        z0 = np.array([0.4, -0.3, 1.0, 2.0])
        sol = solve_ivp(rhs, (0, 20.0), z0, method="DOP853",
                        rtol=1e-12, atol=1e-12)
        e0 = ham.value(z0[:2], z0[2:])
        e1 = ham.value(sol.y[:2, -1], sol.y[2:, -1])
        assert abs(e1 - e0) < 1e-10


class TestCosineRescale:
    def setup_method(self):
        # wide strip so the threshold N is desk-scale; k = (4,3) sits above it
        self.s = 8.0
        self.n = 2
        self.k = (4, 3)
        self.params = free_params(2, self.s, alpha=1e-3, K0=7, K=42)
        self.y0 = np.array([0.48, -0.64])

    def test_pure_line_identity_exact(self):
        a = math.exp(-self.s * 7)
        f = TrigPoly(2, {self.k: a})
        ham = NaturalHam(2, 1e-3, f)
        nf = lie_step_res(ham, self.k, self.params, self.y0, order=1)
        form = cosine_rescale(nf, f, 1.0, self.params)
        assert form.F_star.is_zero
        assert all(t.is_empty for t in form.g_star_grades)
        assert form.identity_residual < 1e-15
        assert form.eta == pytest.approx(2 * a)

    def test_lacunary_f_star_below_threshold(self):
        f = lacunary_potential(2, self.s, k_max=9)
        ham = NaturalHam(2, 1e-4, f)
        nf = lie_step_res(ham, self.k, self.params, self.y0, order=1)
        form = cosine_rescale(nf, f, 1.0, self.params)
        # lacunary rays carry no |j| >= 2 modes at all
        assert 2 * abs(f.coeff(self.k)) * form.F_star.tail_strip1 <= 2 ** -40
        assert form.F_star.is_zero
        assert form.identity_residual < 1e-12

    def test_theta_k_scale_invariant(self):
        f = lacunary_potential(2, self.s, k_max=9)
        ham = NaturalHam(2, 1e-4, f)
        nf = lie_step_res(ham, self.k, self.params, self.y0, order=1)
        base = cosine_rescale(nf, f, 1.0, self.params)
        scaled_f = TrigPoly(2, {k: 7.0 * c for k, c in f.coeffs.items()})
        nf2 = lie_step_res(NaturalHam(2, 1e-4, scaled_f), self.k, self.params,
                           self.y0, order=1)
        scaled = cosine_rescale(nf2, scaled_f, 1.0, self.params)
        assert scaled.theta_k == pytest.approx(base.theta_k, abs=1e-12)

    def test_below_threshold_rejected(self):
        f = lacunary_potential(2, 1.0, k_max=8)
        params = free_params(2, 1.0, alpha=1e-3, K0=2, K=12)
        ham = NaturalHam(2, 1e-4, f)
        nf = lie_step_res(ham, (1, 1), params, np.array([0.5, -0.5]), order=1)
        with pytest.raises(ValueError, match="below the threshold"):
            cosine_rescale(nf, f, 1.0, params)

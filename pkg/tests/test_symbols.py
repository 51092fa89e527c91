import math

import numpy as np
import pytest

from fraclab import (CarlemanWeightParams, HolmgrenMap, MultiTermSpec,
                     PhasePoint, SampleRegion, anisotropic_scale, c_alpha,
                     c_alpha_sharp, char_set_sample, constant_field,
                     diagonal_variable_field, find_min_varpi,
                     full_region_sample, garding_precondition_check,
                     global_coefficients, identity_field, imag_part_margin,
                     lambda_symbol, lemma21_check, lemma61_check,
                     poisson_bracket, poisson_bracket_generic,
                     pushforward_operator, real_part_constant,
                     real_part_margin, region_for, rotating_anisotropic_field,
                     symbol_gradients, total_symbol,
                     weighted_principal_symbol)
from fraclab.symbols import _weighted_batch, bracket_report_batch

RNG = np.random.default_rng(20240817)


def random_spd_field(n, rng):
    m = rng.normal(size=(n, n))
    return constant_field(m @ m.T + n * np.eye(n))


def random_point(n, rng, sigma=None):
    return PhasePoint(
        t=rng.uniform(0.1, 0.9),
        x=np.concatenate([rng.uniform(-0.2, 0.2, n - 1), [rng.uniform(0.0, 0.05)]]),
        tau=rng.uniform(0.5, 3.0) * rng.choice([-1.0, 1.0]),
        xi=rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n),
        sigma=rng.uniform(0.5, 3.0) if sigma is None else sigma,
    )


class TestElementary:
    def test_lambda_zeroth_power(self):
        assert lambda_symbol(0.0, 0.7, 3.4, np.array([1.0, -2.0])) == 1.0

    def test_lambda_unit_base(self):
        assert lambda_symbol(1.3, 0.9, 0.0, np.zeros(2)) == 1.0

    def test_lambda_hand_value(self):
        # order 2, alpha 1: exponent 1, base 1 + 3i
        val = lambda_symbol(2.0, 1.0, 3.0, np.zeros(1))
        assert abs(val - (1.0 + 3.0j)) < 1e-15

    def test_c_alpha_values(self):
        assert abs(c_alpha(1.0) - math.sqrt(2.0) / 2.0) < 1e-15
        assert abs(c_alpha(1.8) - 0.3090169943749474) < 1e-15
        assert abs(c_alpha(0.5) - math.sqrt(2.0) / 2.0) < 1e-15

    def test_sharp_constant_is_valid_everywhere(self):
        taus = np.concatenate([np.logspace(0.0, 6.0, 4000),
                               -np.logspace(0.0, 6.0, 4000)])
        for alpha in np.linspace(0.1, 1.9, 19):
            margin = imag_part_margin(alpha, taus,
                                      constant=c_alpha_sharp(alpha))
            assert margin >= -1e-12

    def test_classical_constant_valid_only_above_one(self):
        # the min(sqrt(2)/2, .) constant overestimates the infimum of
        # |sin(alpha arctan tau)| for alpha < 1, whose value is sin(alpha pi/4)
        taus = np.logspace(0.0, 6.0, 4000)
        assert imag_part_margin(1.25, taus) >= 0.0
        assert imag_part_margin(0.5, taus) < 0.0

    def test_real_part_bound(self):
        taus = np.linspace(-1.0, 1.0, 2001)
        for alpha in (0.3, 1.0, 1.7):
            assert real_part_margin(alpha, taus) >= -1e-12
            assert 0.0 < real_part_constant(alpha) < 1.0


class TestTotalSymbol:
    def test_hand_value_without_drift(self):
        point = PhasePoint(t=0.0, x=np.zeros(1), tau=0.0,
                           xi=np.array([2.0]), sigma=0.0)
        spec = MultiTermSpec(orders=(1.0,), weights=(1.0,))
        hmap = HolmgrenMap(y_hat=np.zeros(1), c=1.0, X=0.1, T=1.0)
        val = total_symbol(point, spec, identity_field(1), hmap, drift=None)
        assert abs(val.value - 5.0) < 1e-15

    def test_zero_duals_give_weight_sum(self):
        spec = MultiTermSpec(orders=(1.5, 0.5), weights=(1.0, 0.7))
        point = PhasePoint(t=0.2, x=np.array([0.1, 0.0]), tau=0.0,
                           xi=np.zeros(2), sigma=0.0)
        hmap = HolmgrenMap(y_hat=np.zeros(2), c=1.0, X=0.05, T=1.0)
        val = total_symbol(point, spec, identity_field(2), hmap, drift=None)
        assert abs(val.value - 1.7) < 1e-15

    def test_quadratic_homogeneity(self):
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        field = random_spd_field(2, np.random.default_rng(5))
        hmap = HolmgrenMap(y_hat=np.zeros(2), c=1.0, X=0.05, T=1.0)
        x = np.array([0.1, 0.02])
        xi = np.array([0.7, -1.1])
        p1 = total_symbol(PhasePoint(t=0.0, x=x, tau=0.0, xi=xi, sigma=0.0),
                          spec, field, hmap, drift=None).value
        p2 = total_symbol(PhasePoint(t=0.0, x=x, tau=0.0, xi=2 * xi, sigma=0.0),
                          spec, field, hmap, drift=None).value
        assert abs((p2 - 1.0) - 4.0 * (p1 - 1.0)) < 1e-12

    def test_drift_conventions(self):
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        hmap = HolmgrenMap(y_hat=np.zeros(1), c=1.0, X=0.1, T=1.0)
        point = PhasePoint(t=0.0, x=np.zeros(1), tau=1.3,
                           xi=np.array([2.0]), sigma=0.0)
        field = identity_field(1)
        bare = total_symbol(point, spec, field, hmap, drift=None).value
        shown = total_symbol(point, spec, field, hmap, drift="displayed").value
        conj = total_symbol(point, spec, field, hmap, drift="conjugation").value
        expected_shown = (0.1 * 1j**0.5 * (1.3 - 1j) ** (-0.5) * 2.0)
        expected_conj = (0.1 * (1.0 + 1.3j) ** (-0.5) * 2.0)
        assert abs((shown - bare) - expected_shown) < 1e-14
        assert abs((conj - bare) - expected_conj) < 1e-14

    def test_sigma_must_vanish(self):
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        hmap = HolmgrenMap(y_hat=np.zeros(1), c=1.0, X=0.1, T=1.0)
        point = PhasePoint(t=0.0, x=np.zeros(1), tau=0.0,
                           xi=np.array([1.0]), sigma=1.0)
        with pytest.raises(ValueError):
            total_symbol(point, spec, identity_field(1), hmap)


class TestWeightedSymbol:
    def test_hand_value(self):
        point = PhasePoint(t=0.0, x=np.zeros(1), tau=0.0,
                           xi=np.array([1.0]), sigma=1.0)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        val = weighted_principal_symbol(point, spec, identity_field(1),
                                        CarlemanWeightParams(X=0.1), c=1.0)
        assert abs(val.value - (1.96 - 0.4j)) < 1e-15

    def test_sigma_zero_matches_driftless_total(self):
        rng = np.random.default_rng(11)
        for n in (1, 2, 3):
            spec = MultiTermSpec(orders=(1.2, 0.4), weights=(1.0, 0.5))
            field = random_spd_field(n, rng)
            hmap = HolmgrenMap(y_hat=np.zeros(n), c=1.5, X=0.05, T=1.0)
            point = random_point(n, rng, sigma=0.0)
            a = total_symbol(point, spec, field, hmap, drift=None).value
            b = weighted_principal_symbol(point, spec, field,
                                          CarlemanWeightParams(X=0.05),
                                          c=1.5).value
            assert abs(a - b) < 1e-12 * max(1.0, abs(a))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_split_consistency(self, n):
        rng = np.random.default_rng(n)
        spec = MultiTermSpec(orders=(1.5, 0.5), weights=(1.0, 0.3))
        field = diagonal_variable_field(n) if n > 1 else identity_field(1)
        weight = CarlemanWeightParams(X=0.05)
        for _ in range(100):
            point = random_point(n, rng)
            full = weighted_principal_symbol(point, spec, field, weight, 1.0)
            lead = weighted_principal_symbol(point, spec, field, weight, 1.0,
                                             part="leading")
            rest = weighted_principal_symbol(point, spec, field, weight, 1.0,
                                             part="corrections")
            scale = max(1.0, abs(full.value))
            assert abs(lead.value + rest.value - full.value) < 5e-15 * scale


class TestGradients:
    def test_leading_normal_derivatives_constant_coeffs(self):
        rng = np.random.default_rng(9)
        n = 3
        field = random_spd_field(n, rng)
        a = field.a(0.0, np.zeros(n))
        weight = CarlemanWeightParams(X=0.05)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        point = random_point(n, rng)
        g = symbol_gradients(point, spec, field, weight, 1.0, part="leading")
        mu = abs(point.sigma) * (point.x[-1] - 2.0 * weight.X)
        assert abs(g.d_xi[-1].real - 2.0 * a[-1] @ point.xi) < 1e-13
        assert abs(g.d_xi[-1].imag - 2.0 * a[-1, -1] * mu) < 1e-13

    def test_tau_derivative_at_origin(self):
        spec = MultiTermSpec(orders=(0.7,), weights=(1.0,))
        point = PhasePoint(t=0.1, x=np.zeros(1), tau=0.0,
                           xi=np.array([1.0]), sigma=0.5)
        g = symbol_gradients(point, spec, identity_field(1),
                             CarlemanWeightParams(X=0.1), 1.0)
        assert abs(g.d_tau - 0.7j) < 1e-14

    def test_sigma_zero_kills_leading_imaginary_normal_slope(self):
        rng = np.random.default_rng(2)
        field = random_spd_field(2, rng)
        point = random_point(2, rng, sigma=0.0)
        g = symbol_gradients(point, MultiTermSpec(orders=(0.5,), weights=(1.0,)),
                             field, CarlemanWeightParams(X=0.1), 1.0,
                             part="leading")
        assert abs(g.d_x[-1].imag) < 1e-14

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_finite_difference_consistency(self, n):
        rng = np.random.default_rng(100 + n)
        spec = MultiTermSpec(orders=(1.3, 0.6), weights=(1.0, 0.4))
        field = (rotating_anisotropic_field(n) if n >= 2
                 else diagonal_variable_field(1))
        weight = CarlemanWeightParams(X=0.05)
        for _ in range(40):
            point = random_point(n, rng)
            _assert_gradients_match(point, spec, field, weight, 1.0,
                                    rtol=1e-6)


def _assert_gradients_match(point, spec, field, weight, c, rtol):
    g = symbol_gradients(point, spec, field, weight, c)

    def value(t, x, tau, xi):
        return _weighted_batch(np.asarray([t]), x[None, :], np.asarray([tau]),
                               xi[None, :], np.asarray([point.sigma]),
                               spec, field, c, weight.X)["value"][0]

    floor = 1e-4 * (1.0 + abs(g.value))

    def check(analytic, plus, minus, h):
        fd = (plus - minus) / (2.0 * h)
        denom = max(abs(analytic), floor)
        assert abs(fd - analytic) / denom < rtol

    h = 1e-5
    for r in range(len(point.xi)):
        e = np.zeros(len(point.xi))
        e[r] = h * max(1.0, abs(point.xi[r]))
        check(g.d_xi[r], value(point.t, point.x, point.tau, point.xi + e),
              value(point.t, point.x, point.tau, point.xi - e), e[r])
        e[r] = h * max(1.0, abs(point.x[r]))
        check(g.d_x[r], value(point.t, point.x + e, point.tau, point.xi),
              value(point.t, point.x - e, point.tau, point.xi), e[r])
    ht = h * max(1.0, abs(point.tau))
    check(g.d_tau, value(point.t, point.x, point.tau + ht, point.xi),
          value(point.t, point.x, point.tau - ht, point.xi), ht)
    check(g.d_t, value(point.t + h, point.x, point.tau, point.xi),
          value(point.t - h, point.x, point.tau, point.xi), h)


class TestBracket:
    def test_line_case_hand_value(self):
        # 4*1*1 + 4*1*1*(0.2)^2 = 4.16 at xi_n = sigma = 1, x_n = 0, X = 0.1
        point = PhasePoint(t=0.0, x=np.zeros(1), tau=0.0,
                           xi=np.array([1.0]), sigma=1.0)
        rep = poisson_bracket(point, MultiTermSpec(orders=(0.5,), weights=(1.0,)),
                              identity_field(1), CarlemanWeightParams(X=0.1),
                              c=1.0, mode="principal")
        assert abs(rep.principal - 4.16) < 1e-14

    def test_antisymmetry_and_self_bracket(self):
        rng = np.random.default_rng(4)
        point = random_point(2, rng)
        spec = MultiTermSpec(orders=(0.8,), weights=(1.0,))
        g = symbol_gradients(point, spec, diagonal_variable_field(2),
                             CarlemanWeightParams(X=0.05), 1.0)
        re = {"d_xi": g.d_xi.real, "d_x": g.d_x.real,
              "d_tau": g.d_tau.real, "d_t": g.d_t.real}
        im = {"d_xi": g.d_xi.imag, "d_x": g.d_x.imag,
              "d_tau": g.d_tau.imag, "d_t": g.d_t.imag}
        assert poisson_bracket_generic(re, re) == 0.0
        ab = poisson_bracket_generic(re, im)
        ba = poisson_bracket_generic(im, re)
        assert abs(ab + ba) < 1e-12 * max(1.0, abs(ab))

    def test_bilinearity_on_random_polynomial_symbols(self):
        rng = np.random.default_rng(13)
        def bundle():
            return {"d_xi": rng.normal(size=3), "d_x": rng.normal(size=3),
                    "d_tau": rng.normal(), "d_t": rng.normal()}
        f, g, h = bundle(), bundle(), bundle()
        a, b = 2.3, -0.7
        fg = {k: a * np.asarray(f[k]) + b * np.asarray(g[k]) for k in f}
        lhs = poisson_bracket_generic(fg, h)
        rhs = (a * poisson_bracket_generic(f, h)
               + b * poisson_bracket_generic(g, h))
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_closed_form_constant_coefficients(self, n):
        # with the convexification off the principal bracket collapses to
        # 4|s|(sum a_jn xi_j)^2 + 4 a_nn^2 |s|^3 (x_n - 2X)^2 exactly
        rng = np.random.default_rng(40 + n)
        field = random_spd_field(n, rng)
        a = field.a(0.0, np.zeros(n))
        weight = CarlemanWeightParams(X=0.1)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        for _ in range(200):
            point = random_point(n, rng)
            rep = poisson_bracket(point, spec, field, weight, c=0.0,
                                  mode="principal")
            mu = abs(point.sigma) * (point.x[-1] - 2.0 * weight.X)
            closed = (4.0 * abs(point.sigma) * (a[:, -1] @ point.xi) ** 2
                      + 4.0 * a[-1, -1] ** 2 * abs(point.sigma) * mu**2)
            assert abs(rep.principal - closed) <= 1e-12 * abs(closed)

    def test_closed_form_line_case_any_tilt(self):
        rng = np.random.default_rng(77)
        field = constant_field(np.array([[1.7]]))
        weight = CarlemanWeightParams(X=0.1)
        spec = MultiTermSpec(orders=(1.5,), weights=(1.0,))
        for _ in range(100):
            point = random_point(1, rng)
            rep = poisson_bracket(point, spec, field, weight, c=3.0,
                                  mode="principal")
            mu = abs(point.sigma) * (point.x[-1] - 2.0 * weight.X)
            closed = (4.0 * abs(point.sigma) * (1.7 * point.xi[0]) ** 2
                      + 4.0 * 1.7**2 * abs(point.sigma) * mu**2)
            assert abs(rep.principal - closed) <= 1e-12 * abs(closed)

    def test_full_equals_principal_for_static_coefficients(self):
        rng = np.random.default_rng(6)
        point = random_point(2, rng)
        spec = MultiTermSpec(orders=(0.9,), weights=(1.0,))
        rep = poisson_bracket(point, spec, random_spd_field(2, rng),
                              CarlemanWeightParams(X=0.05), 1.0, mode="full")
        assert rep.bracket == rep.principal

    def test_full_differs_for_time_dependent_coefficients(self):
        rng = np.random.default_rng(8)
        point = random_point(2, rng)
        spec = MultiTermSpec(orders=(0.9,), weights=(1.0,))
        rep = poisson_bracket(point, spec, rotating_anisotropic_field(2),
                              CarlemanWeightParams(X=0.05), 1.0, mode="full")
        assert rep.bracket != rep.principal

    def test_sympy_oracle_variable_coefficients(self):
        sympy = pytest.importorskip("sympy")
        t_s, x_s, tau_s, xi_s, sig_s = sympy.symbols(
            "t x tau xi sigma", real=True)
        X = 0.1
        amp = 0.3
        a_s = 1.0 + amp * sympy.sin(x_s) * sympy.cos(t_s)
        mu_s = sig_s * (x_s - 2 * X)        # sigma kept positive below
        alpha = sympy.Rational(1, 2)
        p_s = (1 + sympy.I * tau_s) ** alpha + a_s * (xi_s + sympy.I * mu_s) ** 2
        re, im = sympy.re(p_s.rewrite(sympy.exp)), sympy.im(p_s.rewrite(sympy.exp))
        bracket_s = (sympy.diff(re, xi_s) * sympy.diff(im, x_s)
                     - sympy.diff(re, x_s) * sympy.diff(im, xi_s)
                     + sympy.diff(re, tau_s) * sympy.diff(im, t_s)
                     - sympy.diff(re, t_s) * sympy.diff(im, tau_s))
        fn = sympy.lambdify((t_s, x_s, tau_s, xi_s, sig_s), bracket_s, "numpy")

        field = diagonal_variable_field(1, amplitude=amp)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        weight = CarlemanWeightParams(X=X)
        rng = np.random.default_rng(21)
        for _ in range(25):
            point = random_point(1, rng)
            rep = poisson_bracket(point, spec, field, weight, 1.0, mode="full")
            ref = float(fn(point.t, point.x[0], point.tau, point.xi[0],
                           point.sigma))
            assert abs(rep.bracket - ref) < 1e-9 * max(1.0, abs(ref))

    def test_exact_anisotropic_homogeneity(self):
        rng = np.random.default_rng(30)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        field = diagonal_variable_field(2)
        weight = CarlemanWeightParams(X=0.05)
        base = random_point(2, rng)
        rep0 = poisson_bracket(base, spec, field, weight, 1.0, mode="principal")
        for rho in (10.0, 100.0, 1000.0):
            scaled = PhasePoint(t=base.t, x=base.x,
                                tau=base.tau * rho ** (2.0 / spec.alpha),
                                xi=base.xi * rho, sigma=base.sigma * rho)
            rep = poisson_bracket(scaled, spec, field, weight, 1.0,
                                  mode="principal")
            assert abs(rep.principal / rho**3 - rep0.principal) \
                < 1e-10 * abs(rep0.principal)


class TestCharacteristicSampling:
    def setup_method(self):
        self.spec = MultiTermSpec(orders=(0.5, 0.25), weights=(1.0, 0.5))
        self.field = random_spd_field(2, np.random.default_rng(1))
        self.weight = CarlemanWeightParams(X=0.05)
        self.region = region_for(self.weight)

    def test_certificate_holds_by_construction(self):
        sample = char_set_sample(self.region, self.spec, self.field,
                                 self.weight, 1.0, 500, tol=1e-8,
                                 rng=np.random.default_rng(3))
        assert sample.found == 500
        assert sample.residual.max() <= 1e-8
        assert np.isfinite(sample.kappa)

    def test_small_sigma_returns_partial(self):
        sample = char_set_sample(self.region, self.spec, self.field,
                                 self.weight, 1.0, 50, tol=1e-8,
                                 rng=np.random.default_rng(3),
                                 sigma_range=(0.05, 0.1))
        assert sample.found == 0
        assert sample.requested == 50

    def test_lemma21_positive(self):
        sample = char_set_sample(self.region, self.spec, self.field,
                                 self.weight, 1.0, 2000, tol=1e-8,
                                 rng=np.random.default_rng(5))
        report = lemma21_check(sample, self.spec, self.field, self.weight, 1.0)
        assert report.passed
        assert report.min_ratio > 0.0
        assert report.extras["kappa"] < 50.0

    def test_lemma21_empty_errors(self):
        sample = char_set_sample(self.region, self.spec, self.field,
                                 self.weight, 1.0, 10, tol=1e-8,
                                 rng=np.random.default_rng(3),
                                 sigma_range=(0.05, 0.1))
        with pytest.raises(ValueError):
            lemma21_check(sample, self.spec, self.field, self.weight, 1.0)

    def test_ratio_scaling_invariance(self):
        sample = char_set_sample(self.region, self.spec, self.field,
                                 self.weight, 1.0, 200, tol=1e-8,
                                 rng=np.random.default_rng(7))
        pts = (sample.t, sample.x, sample.tau, sample.xi, sample.sigma)
        _, _, _, ratio = bracket_report_batch(pts, self.spec, self.field,
                                              self.weight, 1.0)
        rho = 100.0
        scaled = (sample.t, sample.x,
                  sample.tau * rho ** (2.0 / self.spec.alpha),
                  sample.xi * rho, sample.sigma * rho)
        _, _, _, ratio2 = bracket_report_batch(scaled, self.spec, self.field,
                                               self.weight, 1.0)
        assert np.max(np.abs(ratio2 - ratio) / np.abs(ratio)) < 1e-9


class TestGarding:
    def setup_method(self):
        self.spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        self.field = random_spd_field(2, np.random.default_rng(2))
        self.weight = CarlemanWeightParams(X=0.05)
        self.region = region_for(self.weight)
        self.points = full_region_sample(self.region, self.spec, 2, 20000,
                                         np.random.default_rng(10))

    def test_reduces_to_bracket_on_characteristic_points(self):
        sample = char_set_sample(self.region, self.spec, self.field,
                                 self.weight, 1.0, 300, tol=1e-10,
                                 rng=np.random.default_rng(11))
        pts = (sample.t, sample.x, sample.tau, sample.xi, sample.sigma)
        with_term = garding_precondition_check(pts, self.spec, self.field,
                                               self.weight, 1.0, varpi=1e3)
        report = lemma21_check(sample, self.spec, self.field, self.weight, 1.0)
        assert abs(with_term.min_ratio - 2.0 * report.min_ratio) \
            < 1e-4 * abs(report.min_ratio) + 1e-12

    def test_monotone_in_varpi(self):
        r1 = garding_precondition_check(self.points, self.spec, self.field,
                                        self.weight, 1.0, varpi=1.0)
        r2 = garding_precondition_check(self.points, self.spec, self.field,
                                        self.weight, 1.0, varpi=2.0)
        assert r2.min_ratio >= r1.min_ratio

    def test_bisection_matches_closed_form(self):
        from fraclab.symbols import _garding_terms
        varpi, report = find_min_varpi(self.points, self.spec, self.field,
                                       self.weight, 1.0)
        assert report.min_ratio > 0.0
        elliptic, negative = _garding_terms(self.points, self.spec, self.field,
                                            self.weight, 1.0)
        mask = negative < 0.0
        exact = np.max(-negative[mask] / elliptic[mask]) if mask.any() else 0.0
        assert varpi >= exact
        assert varpi <= max(2.0 * exact, 1e-12) + 1e-9


class TestStageCertificate:
    def test_reduces_to_flat_ratio_on_axis(self):
        # points with vanishing stretched coordinates: weights collapse to 1
        base = identity_field(2)
        tilde = global_coefficients(base)
        hmap = HolmgrenMap(y_hat=np.zeros(2), c=1.0, X=0.05, T=1.0, stage=1)
        weight = CarlemanWeightParams(X=0.05)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        frame = pushforward_operator(tilde, hmap)
        region = region_for(weight)
        sample = char_set_sample(region, spec, frame.field, weight, hmap.c,
                                 300, tol=1e-8, rng=np.random.default_rng(3))
        report = lemma61_check(sample, spec, tilde, hmap, weight)
        assert report.passed
        assert report.extras["ellipticity_margin"] >= -1e-12

    def test_stage_weight_factor_formula(self):
        from fraclab import stretch_weights
        X = 0.05
        yn = 4.0 * X
        assert abs(stretch_weights(np.array([yn]))[0]
                   - (1.0 + yn**2) ** 1.5) < 1e-15

    def test_stage5_positive(self):
        base = diagonal_variable_field(2)
        tilde = global_coefficients(base)
        hmap = HolmgrenMap(y_hat=np.zeros(2), c=1.0, X=0.05, T=1.0, stage=5)
        weight = CarlemanWeightParams(X=0.05)
        spec = MultiTermSpec(orders=(0.5,), weights=(1.0,))
        frame = pushforward_operator(tilde, hmap)
        region = region_for(weight)
        sample = char_set_sample(region, spec, frame.field, weight, hmap.c,
                                 500, tol=1e-8, rng=np.random.default_rng(9))
        report = lemma61_check(sample, spec, tilde, hmap, weight)
        assert report.passed
        assert report.extras["ellipticity_margin"] > 0.0


class TestScaleHelpers:
    def test_anisotropic_scale(self):
        val = anisotropic_scale(np.array([3.0, 4.0]), 2.0, -8.0, 0.5)
        assert abs(val - (25.0 + 4.0 + 8.0**0.5)) < 1e-13

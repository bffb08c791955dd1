"""Special functions, splines, log-domain sums and quadrature against independent oracles."""

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbspade.errors import DomainError, InputError
from rbspade.numerics import (Grid1D, adaptive_log_integrate, erf, erf_inv, fit_cubic_spline,
                              integrate, log_integrate, log_normal_interval, log_sum_exp)


# -- erf / erf_inv -----------------------------------------------------------

def test_erf_reference_value():
    assert erf(1.0) == pytest.approx(0.8427007929497149, abs=1e-15)


@pytest.mark.parametrize("x", [-6.0, -2.5, -1e-8, 0.0, 0.3, 1.7, 3.2, 5.9])
def test_erf_matches_mpmath(x):
    assert erf(x) == pytest.approx(float(mp.erf(x)), rel=1e-14, abs=1e-300)


def test_erf_vectorised_shape():
    x = np.linspace(-3, 3, 12).reshape(3, 4)
    assert erf(x).shape == (3, 4)
    assert isinstance(erf(0.5), float)


def _bisect_erf_inv(y, lo=-10.0, hi=10.0):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(mp.erf(mid)) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("y", [-0.999, -0.5, 0.0, 0.1, 0.9, 0.998, 1 - 2e-3])
def test_erf_inv_matches_bisection(y):
    assert erf_inv(y) == pytest.approx(_bisect_erf_inv(y), abs=1e-12)


def test_erf_inv_reference_value():
    assert erf_inv(0.998) == pytest.approx(2.1851, abs=1e-4)


@pytest.mark.parametrize("y", [1.0, -1.0, 1.5, float("nan"), float("inf")])
def test_erf_inv_domain(y):
    with pytest.raises(DomainError):
        erf_inv(y)


@given(st.floats(-5.0, 5.0))
def test_erf_inv_round_trip(x):
    assert erf_inv(erf(x)) == pytest.approx(x, abs=1e-9 * math.exp(x * x))


@given(st.floats(-30.0, 30.0))
def test_erf_is_odd_and_bounded(x):
    assert erf(-x) == -erf(x)
    assert -1.0 <= erf(x) <= 1.0


# -- splines -----------------------------------------------------------------

def test_spline_interpolates_knots():
    x = np.linspace(0, 10, 23)
    y = np.sin(x)
    s = fit_cubic_spline(x, y)
    np.testing.assert_allclose(s(x), y, atol=1e-14)


def test_spline_reproduces_cubic_exactly():
    # not-a-knot end conditions reproduce any cubic
    x = np.array([0.0, 0.4, 1.1, 2.0, 2.2, 3.5, 5.0])
    f = lambda t: 2 - t + 0.5 * t**2 - 0.3 * t**3
    s = fit_cubic_spline(x, f(x))
    t = np.linspace(0, 5, 101)
    np.testing.assert_allclose(s(t), f(t), atol=1e-12)
    np.testing.assert_allclose(s(t, 2), 1.0 - 1.8 * t, atol=1e-10)


def test_spline_second_derivative_continuous_at_knots():
    x = np.linspace(-3, 3, 31)
    s = fit_cubic_spline(x, np.exp(-x**2))
    eps = 1e-9
    inner = x[1:-1]
    for nu in (0, 1, 2):
        np.testing.assert_allclose(s(inner - eps, nu), s(inner + eps, nu), atol=1e-6)
    # the third derivative does jump in general
    assert np.max(np.abs(s(inner - eps, 3) - s(inner + eps, 3))) > 1e-3


def test_spline_derivative_matches_finite_difference():
    x = np.linspace(0, 2 * np.pi, 200)
    s = fit_cubic_spline(x, np.sin(x))
    t, h = 1.234, 1e-5
    assert s.derivative(t) == pytest.approx((s(t + h) - s(t - h)) / (2 * h), abs=1e-8)
    assert s.derivative(t) == pytest.approx(math.cos(t), abs=1e-6)


def test_vector_spline_components():
    x = np.linspace(0, 1, 11)
    y = np.stack([x**2, np.cos(x)], axis=1)
    s = fit_cubic_spline(x, y)
    assert s.n_outputs == 2
    assert s([0.5, 0.7]).shape == (2, 2)
    assert s.component(1)(0.35) == pytest.approx(s(0.35)[1], abs=1e-15)


def test_spline_refuses_extrapolation():
    s = fit_cubic_spline(np.arange(5.0), np.arange(5.0) ** 2)
    with pytest.raises(DomainError):
        s(4.0001)
    with pytest.raises(DomainError):
        s([0.0, -1.0])
    assert s(4.0) == pytest.approx(16.0)


@pytest.mark.parametrize("x, y", [
    ([0, 1, 2], [0, 1, 2]),
    ([0, 1, 1, 2], [0, 1, 2, 3]),
    ([0, 2, 1, 3], [0, 1, 2, 3]),
    ([0, 1, 2, 3], [0, 1, np.nan, 3]),
    ([0, 1, 2, 3], [0, 1, 2]),
])
def test_spline_input_validation(x, y):
    with pytest.raises(InputError):
        fit_cubic_spline(x, y)


def test_spline_coefficients_layout():
    x = np.linspace(0, 1, 6)
    s = fit_cubic_spline(x, x**3)
    c = s.coefficients
    assert c.shape == (4, 5)
    t = 0.5 * (x[2] + x[3])
    dx = t - x[2]
    assert sum(c[m, 2] * dx ** (3 - m) for m in range(4)) == pytest.approx(s(t))


# -- log_sum_exp -------------------------------------------------------------

def test_log_sum_exp_matches_mpmath_for_huge_terms():
    terms = [1000.0, 999.0, -5.0, 1000.5]
    ref = mp.log(sum(mp.e ** mp.mpf(t) for t in terms))
    assert log_sum_exp(terms) == pytest.approx(float(ref), abs=1e-12)


def test_log_sum_exp_edge_cases():
    assert log_sum_exp([-np.inf, -np.inf]) == -np.inf
    assert log_sum_exp([-np.inf, 0.0]) == 0.0
    with pytest.raises(InputError):
        log_sum_exp([])


def test_log_sum_exp_axis():
    a = np.log(np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_allclose(log_sum_exp(a, axis=1), np.log([3.0, 7.0]))


@given(st.lists(st.floats(-700, 700), min_size=1, max_size=20), st.floats(-1e4, 1e4))
def test_log_sum_exp_shift_invariance(xs, c):
    x = np.array(xs)
    assert log_sum_exp(x + c) == pytest.approx(log_sum_exp(x) + c, abs=1e-9 * (1 + abs(c)))
    assert log_sum_exp(x) >= x.max() - 1e-12


# -- grids and fixed quadrature ---------------------------------------------

def test_trapezoid_exact_for_linear():
    g = Grid1D.trapezoid(-1.0, 3.0, 7)
    assert integrate(2 * g.points + 1, g) == pytest.approx(12.0, abs=1e-13)


def test_trapezoid_gaussian_integral():
    g = Grid1D.trapezoid(-10.0, 10.0, 2001)
    assert integrate(np.exp(-g.points**2), g) == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_trapezoid_open_ends_keep_node_count():
    g = Grid1D.trapezoid(0.0, 1.0, 5, include_lo=False)
    assert len(g) == 5 and g.points[0] > 0.0 and g.points[-1] == 1.0
    g = Grid1D.trapezoid(0.0, 1.0, 5, include_lo=False, include_hi=False)
    assert len(g) == 5 and 0 < g.points[0] and g.points[-1] < 1


def test_log_integrate_agrees_with_integrate():
    g = Grid1D.trapezoid(0.0, 2.0, 51)
    f = np.exp(-3 * g.points) + 0.1
    assert log_integrate(np.log(f), g) == pytest.approx(math.log(integrate(f, g)), abs=1e-13)


@pytest.mark.parametrize("args", [(1.0, 1.0, 3), (0.0, 1.0, 0), (2.0, 1.0, 5)])
def test_trapezoid_validation(args):
    with pytest.raises(InputError):
        Grid1D.trapezoid(*args)


def test_grid_validation():
    with pytest.raises(InputError):
        Grid1D(np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(InputError):
        Grid1D(np.array([0.0, 1.0]), np.array([1.0, -1.0]))
    assert len(Grid1D.point(3.0)) == 1


# -- normal intervals --------------------------------------------------------

@pytest.mark.parametrize("a, b", [(-1.0, 1.0), (10.0, 11.0), (-41.0, -40.0),
                                  (-np.inf, 0.0), (3.0, np.inf), (-0.5, 60.0)])
def test_log_normal_interval_matches_mpmath(a, b):
    mp.mp.dps = 60
    phi = lambda t: mp.ncdf(t) if np.isfinite(t) else (1 if t > 0 else 0)
    ref = float(mp.log(phi(b) - phi(a)))
    mp.mp.dps = 15
    assert log_normal_interval(a, b) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_log_normal_interval_empty():
    assert log_normal_interval(1.0, 1.0) == -np.inf


# -- adaptive quadrature -----------------------------------------------------

def _gauss_log(center, cov):
    inv = np.linalg.inv(cov)

    def logf(pts):
        r = pts - np.asarray(center)[:, None]
        return -0.5 * np.einsum("im,ij,jm->m", r, inv, r)
    return logf


def test_adaptive_narrow_gaussian_1d():
    s = 1e-5
    logf = _gauss_log([0.123], np.array([[s * s]]))
    val = adaptive_log_integrate(logf, [(-50.0, 50.0, True, True)])
    assert val == pytest.approx(math.log(math.sqrt(2 * math.pi) * s), abs=1e-6)


def test_adaptive_tilted_ridge_2d():
    # strongly correlated, far narrower than the initial grid spacing
    s1, s2, rho = 0.02, 0.5, 0.9995
    cov = np.array([[s1 * s1, rho * s1 * s2], [rho * s1 * s2, s2 * s2]])
    logf = _gauss_log([3.1, -7.0], cov)
    exact = math.log(2 * math.pi * math.sqrt(np.linalg.det(cov)))
    val = adaptive_log_integrate(logf, [(-100, 100, True, True), (-100, 100, True, True)])
    assert val == pytest.approx(exact, abs=1e-4)


def test_adaptive_two_separated_modes():
    # each peak must show up on the initial 101-node grid (spacing 2)
    s = 0.7
    l1 = _gauss_log([-20.3, 5.1], np.eye(2) * s * s)
    l2 = _gauss_log([30.9, -8.4], np.eye(2) * (2 * s) ** 2)

    def logf(pts):
        return np.logaddexp(l1(pts), l2(pts) + math.log(0.5))
    exact = math.log(2 * math.pi * s * s * (1 + 0.5 * 4))
    val = adaptive_log_integrate(logf, [(-100, 100, True, True)] * 2)
    assert val == pytest.approx(exact, abs=1e-4)


def test_adaptive_mode_on_boundary():
    # half of a narrow Gaussian sits inside the support
    s = 1e-4
    logf = _gauss_log([0.0, 2.0], np.diag([s * s, 0.3**2]))
    exact = math.log(0.5 * 2 * math.pi * s * 0.3)
    val = adaptive_log_integrate(logf, [(0.0, 10.0, True, True), (-10.0, 10.0, True, True)])
    assert val == pytest.approx(exact, abs=1e-4)


def test_adaptive_matches_brute_force_for_smooth_integrand():
    def logf(pts):
        x, y = pts
        return -((x - 0.3) ** 2 + 3 * (y + 0.2) ** 2 + x * y) * 40 + np.sin(3 * x)
    gx = Grid1D.trapezoid(-2, 2, 1601)
    gy = Grid1D.trapezoid(-1, 1, 801)
    X, Y = np.meshgrid(gx.points, gy.points, indexing="ij")
    lv = logf(np.stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    brute = log_sum_exp(lv + np.log(gx.weights)[:, None] + np.log(gy.weights)[None, :])
    val = adaptive_log_integrate(logf, [(-2, 2, True, True), (-1, 1, True, True)])
    assert val == pytest.approx(brute, abs=1e-4)


def test_adaptive_zero_dimensional_and_empty():
    assert adaptive_log_integrate(lambda p: np.array([1.5]), []) == 1.5
    with pytest.raises(InputError):
        adaptive_log_integrate(lambda p: p[0], [(1.0, 1.0, True, True)])
    assert adaptive_log_integrate(lambda p: np.full(p.shape[1], -np.inf),
                                  [(0.0, 1.0, True, True)]) == -np.inf

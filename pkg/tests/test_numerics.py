import math

import numpy as np
import pytest

from firewater.model import BASE, DomainError
from firewater.numerics import (ConvergenceError, FlatSlopeError, QuadFit, RootConfig, bisection,
                                fit_quadratic_surface, integrate_trapezoid, lambert_w0,
                                secant_solve)
from firewater.shooting import WATER
from firewater.steady_state import evolution_function

# principal branch values from mpmath at 30 digits
W_REFERENCE = [
    (-0.3678794401714423, -0.99992626875483636706),
    (-0.3, -0.48940222718021492154),
    (-0.1, -0.11183255915896296584),
    (1e-08, 9.9999999000000018317e-9),
    (0.5, 0.35173371124919583508),
    (2.0, 0.8526055020137255358),
    (10.0, 1.7455280027406994137),
    (1000.0, 5.2496028524015958538),
    (1e6, 11.383358086140052734),
]


@pytest.mark.parametrize("z,w", W_REFERENCE)
def test_lambert_matches_reference(z, w):
    assert lambert_w0(z) == pytest.approx(w, rel=1e-12, abs=1e-15)


def test_lambert_trivial_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, rel=1e-15)
    assert lambert_w0(-math.exp(-1.0)) == -1.0


def test_lambert_domain():
    with pytest.raises(DomainError):
        lambert_w0(-0.4)
    with pytest.raises(DomainError):
        lambert_w0(math.nan)


def test_lambert_identity_and_monotone_on_1e5_points():
    zs = np.concatenate([
        -math.exp(-1.0) + np.geomspace(1e-9, math.exp(-1.0), 50_000)[::-1],
        np.geomspace(1e-12, 1e6, 50_000),
    ])
    zs.sort()
    ws = np.array([lambert_w0(z) for z in zs])
    resid = np.abs(ws * np.exp(ws) - zs)
    assert np.all(resid <= 1e-12 * (1 + np.abs(zs)))
    assert np.all(np.diff(ws) >= 0)
    assert ws.min() >= -1.0


def test_secant_quadratic_and_linear():
    root, _ = secant_solve(lambda x: x * x - 4, RootConfig(tol=1e-12, seeds=(1.0, 3.0)))
    assert root == pytest.approx(2.0, abs=1e-10)
    root, it = secant_solve(lambda x: x, RootConfig(tol=1e-12, seeds=(1.0, 2.0)))
    assert abs(root) <= 1e-12
    assert it == 1


def test_secant_reports_flat_slope_and_cap():
    with pytest.raises(FlatSlopeError):
        secant_solve(lambda x: 1.0, RootConfig(seeds=(0.0, 1.0)))
    with pytest.raises(ConvergenceError):
        secant_solve(lambda x: math.atan(x) + 2, RootConfig(max_iter=3, seeds=(0.0, 1.0)))


def test_secant_keeps_bracket():
    # plain secant overshoots on this one; the bracket keeps it in [0, 3]
    f = lambda x: math.tanh(5 * (x - 1))  # noqa: E731
    root, _ = secant_solve(f, RootConfig(tol=1e-10, seeds=(0.0, 3.0)))
    assert root == pytest.approx(1.0, abs=1e-9)


def test_root_config_validation():
    with pytest.raises(ValueError):
        RootConfig(seeds=(1.0, 1.0))
    with pytest.raises(ValueError):
        RootConfig(tol=0.0)
    with pytest.raises(ValueError):
        RootConfig(max_iter=0)


def test_bisection_cube_and_bad_bracket():
    assert abs(bisection(lambda x: x**3, -1.0, 2.0, 1e-12)) <= 1e-12
    with pytest.raises(ValueError):
        bisection(lambda x: x * x + 1, -1.0, 1.0, 1e-9)


@pytest.mark.parametrize("a,b,root,tol", [(1e-8, 1e-3, 7.94549e-7, 1e-9),
                                          (1e-3, 0.0625, 0.0206096, 1e-6)])
def test_bisection_on_evolution_function(a, b, root, tol):
    L = lambda x: evolution_function(BASE, x, WATER, 0.0).L  # noqa: E731
    # the coarse bracket contains both roots' neighbourhoods; tighten it first
    xs = np.geomspace(a, b, 200)
    Ls = [L(x) for x in xs]
    i = next(i for i in range(199) if Ls[i] * Ls[i + 1] < 0)
    x = bisection(L, xs[i], xs[i + 1], 1e-14)
    assert x == pytest.approx(root, abs=tol)


def test_trapezoid():
    t = np.linspace(0, 1, 7)
    assert integrate_trapezoid(t, np.ones_like(t)) == pytest.approx(1.0)
    t = np.linspace(0, 2, 9)
    assert integrate_trapezoid(t, t) == 2.0
    t = np.linspace(0, 100, 251)
    assert integrate_trapezoid(t, np.exp(-0.05 * t)) == pytest.approx((1 - math.exp(-5)) / 0.05, abs=1e-2)
    with pytest.raises(ValueError):
        integrate_trapezoid([0.0], [1.0])
    with pytest.raises(ValueError):
        integrate_trapezoid([0.0, 0.0], [1.0, 1.0])


def test_fit_recovers_own_model_class():
    g, b = np.meshgrid(np.linspace(0.1, 0.2, 6), np.linspace(0.01, 0.02, 6))
    y = 1 - 2 * g + 3 * g * g
    fit = fit_quadratic_surface(g, b, y)
    assert np.allclose(fit.coef, [1, -2, 3, 0, 0], atol=1e-8)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_normal_equations_are_solved():
    rng = np.random.default_rng(3)
    g = rng.uniform(0.1, 0.2, 50)
    b = rng.uniform(0.01, 0.02, 50)
    y = np.sin(10 * g) + 30 * b * g + rng.normal(0, 0.01, 50)
    fit = fit_quadratic_surface(g, b, y)
    X = np.column_stack([np.ones_like(g), g, g * g, b, b * b])
    grad = X.T @ (X @ fit.coef - y)
    assert np.linalg.norm(grad) <= 1e-8 * (1 + np.abs(y).max())
    assert 0 <= fit.r2 <= 1


def test_fit_rejects_degenerate_input():
    g = np.full(10, 0.1)
    with pytest.raises(np.linalg.LinAlgError):
        fit_quadratic_surface(g, np.linspace(0, 1, 10), np.ones(10))
    with pytest.raises(ValueError):
        fit_quadratic_surface([1, 2], [1, 2], [1, 2])


def test_quadfit_is_callable():
    f = QuadFit(1, 2, 3, 4, 5, 1.0)
    assert f(1.0, 1.0) == 15.0

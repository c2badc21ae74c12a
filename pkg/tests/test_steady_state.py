import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firewater.model import BASE, QUADRATIC, DomainError, Grid, drift
from firewater.shooting import FIRE, WATER
from firewater.steady_state import (STABLE, UNSTABLE, SteadyStateError, evolution_function,
                                    feedback_fire, feedback_water, find_steady_states,
                                    steady_ccd)


@settings(max_examples=100, derandomize=True)
@given(st.floats(1e-3, 1.0), st.floats(0.0, 1.0))
def test_water_feedback_zeroes_drift(x, v):
    fb = feedback_water(BASE, x, v)
    if not fb.clamped:
        assert abs(drift(BASE, x, fb.value, v)) <= 1e-10


@settings(max_examples=100, derandomize=True)
@given(st.floats(0.1, 1.0), st.floats(0.0, 0.5))
def test_fire_feedback_zeroes_drift(x, u):
    try:
        fb = feedback_fire(BASE, x, u)
    except DomainError:
        return  # no fire level balances the flow here
    if not fb.clamped:
        assert abs(drift(BASE, x, u, fb.value)) <= 1e-9


def test_feedback_examples():
    assert feedback_water(BASE, 0.61773, 0.14605).value == pytest.approx(0.06834, abs=1e-3)
    assert feedback_fire(BASE, 0.61773, 0.06834).value == pytest.approx(0.14605, abs=1e-3)
    # at x = 1 with tau removed the uncontrolled flow balances: R1 = 0
    assert feedback_water(BASE.with_(tau=0.0), 1.0, 0.0).raw == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        feedback_fire(BASE.with_(rho=0.0), 0.5, 0.0)
    with pytest.raises(DomainError):
        feedback_water(BASE, 0.0, 0.0)


def test_feedback_overflow_guard():
    with pytest.raises(DomainError, match="overflow"):
        feedback_water(BASE.with_(beta=1e-9), 1e-3, 0.0)


def test_evolution_sign_changes_and_slopes():
    L = lambda x: evolution_function(BASE, x, WATER, 0.0).L  # noqa: E731
    assert L(1e-8) * L(1e-3) < 0
    assert L(1e-3) * L(0.0625) < 0
    roots = find_steady_states(BASE, WATER, 0.0, 1e-8, 0.0625)
    s1, s2 = roots
    assert L(s1.x_s * 0.99) < 0 < L(s1.x_s * 1.01)
    assert L(s2.x_s * 0.99) > 0 > L(s2.x_s * 1.01)


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.02, 0.3])
def test_evolution_r_scaling(x):
    # doubling r doubles only the r G_w / f_w part
    a = evolution_function(BASE, x, WATER, 0.0)
    b = evolution_function(BASE.with_(r=2 * BASE.r), x, WATER, 0.0)
    u = a.R
    Gw_fw = 2 * u / (-BASE.beta * x**BASE.theta / (1 + u))
    assert b.L - a.L == pytest.approx(BASE.r * Gw_fw, rel=1e-9, abs=1e-12)


def test_evolution_rejects_clamped_region():
    # beyond the uncontrolled steady state no water level holds the stock
    with pytest.raises(DomainError):
        evolution_function(BASE, 1.5, WATER, 0.0)
    with pytest.raises(ValueError):
        evolution_function(BASE, 0.5, "smoke", 0.0)


def test_low_roots():
    roots = find_steady_states(BASE, WATER, 0.0, 1e-8, 0.0625)
    assert [s.stability for s in roots] == [STABLE, UNSTABLE]
    assert roots[0].x_s == pytest.approx(7.94549e-7, rel=1e-5)
    assert roots[1].x_s == pytest.approx(0.0206096, rel=1e-5)
    assert roots[0].u_s == pytest.approx(0.0046106, rel=1e-3)
    assert roots[1].u_s == pytest.approx(0.284695, rel=1e-4)
    for s in roots:
        assert s.branch == "low"
        assert s.drift_residual <= 1e-8 and s.L_residual <= 1e-8


def test_no_roots_is_empty():
    assert find_steady_states(BASE, WATER, 0.0, 0.1, 0.5) == []
    with pytest.raises(ValueError):
        find_steady_states(BASE, WATER, 0.0, 0.5, 0.1)


def test_tau_raises_low_root():
    lo = find_steady_states(BASE, WATER, 0.0, 1e-8, 1e-3)[0].x_s
    hi = find_steady_states(BASE.with_(tau=1e-4), WATER, 0.0, 1e-8, 1e-3)[0].x_s
    assert hi > lo


def test_unique_root_above_switch(base_high):
    for which, other in ((WATER, base_high.v_s), (FIRE, base_high.u_s)):
        roots = find_steady_states(BASE, which, other, 0.0625, 10.0)
        assert len(roots) == 1
        assert roots[0].x_s == pytest.approx(base_high.x_s, abs=1e-8)


@pytest.fixture(scope="module")
def base_high():
    return steady_ccd(BASE)


def test_high_steady_state(base_high):
    s = base_high
    assert (s.x_s, s.u_s, s.v_s) == pytest.approx((0.61773, 0.06834, 0.14605), abs=1e-3)
    assert s.stability == STABLE and s.branch == "high"
    assert s.drift_residual <= 1e-8 and s.L_residual <= 1e-8


def test_high_state_is_a_fixed_point_of_both_stages(base_high):
    s = base_high
    w = find_steady_states(BASE, WATER, s.v_s, 0.5, 0.7)[0]
    f = find_steady_states(BASE, FIRE, s.u_s, 0.5, 0.7)[0]
    assert abs(w.x_s - s.x_s) < 1e-8
    assert abs(f.x_s - s.x_s) < 1e-8


@pytest.mark.parametrize("p,expect", [
    (QUADRATIC, (0.605, 0.081, 0.163)),
    (BASE.with_(gamma=0.141, beta=0.010), (0.399, 0.0638, 0.1710)),
    (BASE.with_(gamma=0.125, beta=0.020), (0.392, 0.1280, 0.1427)),
])
def test_other_steady_states(p, expect):
    s = steady_ccd(p)
    assert (s.x_s, s.u_s, s.v_s) == pytest.approx(expect, abs=1e-2)


def test_steady_ccd_without_roots_fails():
    with pytest.raises(SteadyStateError):
        steady_ccd(BASE, window=(1.5, 3.0))


def test_dynamic_solution_settles_on_steady_state(base_high):
    from firewater.ccd import solve_multicontrol
    res = solve_multicontrol(BASE, Grid(100.0, 250), 0.95)
    assert abs(res.trajectory.x[-1] - base_high.x_s) <= 1e-2


def test_optimal_paths_leave_unstable_low_state():
    from firewater.ccd import solve_low_branch, solve_multicontrol
    g = Grid(100.0, 250)
    x2 = 0.0206096
    below = solve_low_branch(BASE, g, 0.9 * x2).trajectory
    above = solve_multicontrol(BASE, g, 1.1 * x2).trajectory
    assert below.x.min() < 1e-6
    assert above.at(50.0)["x"] > 0.1


def test_optimal_path_settles_on_stable_low_state():
    from firewater.ccd import solve_low_branch
    x1 = 7.94549e-7
    # the forward march shadows the saddle path only for a while; on the
    # plateau (knots 12..22) it sits within the Euler bias of x_s^1
    for x0 in (2 * x1, 10 * x1):
        tr = solve_low_branch(BASE, Grid(100.0, 250), x0).trajectory
        plateau = tr.x[12:23] / x1
        assert np.ptp(plateau) < 1e-3
        assert abs(plateau.mean() - 1) < 0.02

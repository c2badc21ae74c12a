"""Steady states without solving the dynamic problem.

Along ``xdot = 0`` the active control becomes a feedback ``R_i(x)`` (the
other control held at a constant). An optimal steady state of the
discounted problem must then be a root of the evolution function

    L_i(x) = r * G_w / f_w + d/dx G(x, R_i(x)),

with ``G = c x^p + u^2 + v^2`` the undiscounted integrand. A positive slope
of ``L_i`` at the root marks a stable steady state, a negative one an
unstable state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import DomainError, ModelParams, drift, stage_cost, switching_point, uncontrolled_steady_state
from .numerics import bisection, lambert_w0
from .shooting import FIRE, WATER

EXP_LIMIT = 700.0

STABLE = "stable"
UNSTABLE = "unstable"


class ClampedFeedbackError(DomainError):
    """The feedback rule asks for a negative control; ``L`` is undefined there."""


class SteadyStateError(RuntimeError):
    pass


class Feedback(NamedTuple):
    value: float
    raw: float

    @property
    def clamped(self) -> bool:
        return self.raw < 0


@dataclass(frozen=True)
class EvolutionSample:
    x: float
    L: float
    R: float


@dataclass(frozen=True)
class SteadyState:
    x_s: float
    u_s: float
    v_s: float
    stability: str
    drift_residual: float
    L_residual: float
    branch: str

    def cost_rate(self, p: ModelParams) -> float:
        return stage_cost(p, self.x_s, self.u_s, self.v_s)


def feedback_water(p: ModelParams, x: float, v: float) -> Feedback:
    """Water level holding the stock still at ``x`` with fire fixed at ``v``."""
    if not x > 0:
        raise DomainError("feedback_water needs x > 0")
    num = p.tau + (1 + p.rho * v) * p.k * x**p.alpha - p.mu * x - p.gamma * math.log1p(v) * x
    expo = num * x ** (-p.theta) / p.beta
    if expo > EXP_LIMIT:
        raise DomainError(f"feedback_water: exponent {expo:.1f} overflows at x={x!r}")
    raw = math.expm1(expo)
    return Feedback(max(raw, 0.0), raw)


def feedback_fire(p: ModelParams, x: float, u: float) -> Feedback:
    """Fire level holding the stock still at ``x`` with water fixed at ``u``.

    With ``s = 1 + v`` the balance ``C + a s - b ln s = 0`` (``a = rho k x^alpha``,
    ``b = gamma x``) has the principal-branch solution
    ``s = -(b/a) W(-(a/b) exp(C/b))``.
    """
    if not x > 0:
        raise DomainError("feedback_fire needs x > 0")
    if not p.rho > 0:
        raise DomainError("feedback_fire needs rho > 0")
    a = p.rho * p.k * x**p.alpha
    b = p.gamma * x
    C = p.tau + (1 - p.rho) * p.k * x**p.alpha - p.mu * x - p.beta * math.log1p(u) * x**p.theta
    if C / b > EXP_LIMIT:
        raise DomainError(f"feedback_fire: exponent {C / b:.1f} overflows at x={x!r}")
    z = -(a / b) * math.exp(C / b)
    if z < -math.exp(-1.0):
        raise DomainError(f"feedback_fire: Lambert argument {z!r} below -1/e at x={x!r}")
    raw = -1.0 - (b / a) * lambert_w0(z)
    return Feedback(max(raw, 0.0), raw)


def _controls(which, w, other):
    return (w, other) if which == WATER else (other, w)


def _rule(p, which, x, other) -> Feedback:
    return feedback_water(p, x, other) if which == WATER else feedback_fire(p, x, other)


def _G_along(p, which, x, other):
    fb = _rule(p, which, x, other)
    if fb.clamped:
        raise ClampedFeedbackError(f"feedback control negative ({fb.raw:.3g}) at x={x!r}")
    u, v = _controls(which, fb.value, other)
    return stage_cost(p, x, u, v), fb.value


def evolution_function(p: ModelParams, x: float, which: str, other: float) -> EvolutionSample:
    """``L_i`` at ``x`` for the active control ``which`` and fixed ``other``.

    The derivative of ``G`` along the feedback rule is a central difference
    with a relative step, since the low roots sit far below 1.
    """
    if which not in (WATER, FIRE):
        raise ValueError(f"which must be {WATER!r} or {FIRE!r}")
    if not x > 0:
        raise DomainError("evolution_function needs x > 0")
    _, w = _G_along(p, which, x, other)
    h = 1e-6 * x
    Gp, _ = _G_along(p, which, x + h, other)
    Gm, _ = _G_along(p, which, x - h, other)
    dG = (Gp - Gm) / (2 * h)
    u, v = _controls(which, w, other)
    if which == WATER:
        f_w = -p.beta * x**p.theta / (1 + u)
        G_w = 2 * u
    else:
        f_w = p.rho * p.k * x**p.alpha - p.gamma * x / (1 + v)
        G_w = 2 * v
    if abs(f_w) < 1e-14:
        raise DomainError(f"|f_w| vanishes at x={x!r}")
    return EvolutionSample(x=x, L=p.r * G_w / f_w + dG, R=w)


def _L_or_nan(p, which, other, x):
    try:
        return evolution_function(p, x, which, other).L
    except (DomainError, OverflowError):
        return math.nan


def find_steady_states(p: ModelParams, which: str, other: float, x_lo: float, x_hi: float,
                       n: int = 400, rtol: float = 1e-15) -> list[SteadyState]:
    """Roots of ``L_i`` on ``[x_lo, x_hi]`` from a log-spaced scan.

    Sign changes across a pole of ``L`` are rejected by checking ``|L|`` at
    the bisected point.
    """
    if not 0 < x_lo < x_hi:
        raise ValueError("need 0 < x_lo < x_hi")
    xs = np.geomspace(x_lo, x_hi, n)
    Ls = [_L_or_nan(p, which, other, float(x)) for x in xs]
    L_fn = lambda x: _L_or_nan(p, which, other, x)  # noqa: E731
    x_switch = switching_point(p) if p.alpha < 1 else math.inf
    out = []
    for i in range(n - 1):
        La, Lb = Ls[i], Ls[i + 1]
        if not (math.isfinite(La) and math.isfinite(Lb)) or La * Lb > 0:
            continue
        a, b = float(xs[i]), float(xs[i + 1])
        root = bisection(L_fn, a, b, tol=rtol * a)
        ev = evolution_function(p, root, which, other)
        if abs(ev.L) > 1e-6 * (1 + abs(La) + abs(Lb)):
            continue
        u, v = _controls(which, ev.R, other)
        out.append(SteadyState(
            x_s=root, u_s=u, v_s=v,
            stability=STABLE if Lb > La else UNSTABLE,
            drift_residual=abs(drift(p, root, u, v)),
            L_residual=abs(ev.L),
            branch="low" if root < x_switch else "high",
        ))
    return out


def default_window(p: ModelParams) -> tuple[float, float]:
    return switching_point(p), 10 * uncontrolled_steady_state(p)


def _stage_root(p, which, other, window, near):
    lo, hi = window
    if near is not None:
        narrow = (max(lo, near / 1.5), min(hi, near * 1.5))
        found = find_steady_states(p, which, other, *narrow, n=60)
        if len(found) == 1:
            return found[0]
    found = find_steady_states(p, which, other, lo, hi)
    if not found:
        raise SteadyStateError(f"{which} stage: no root of L in {window}")
    stable = [s for s in found if s.stability == STABLE]
    return (stable or found)[0]


def steady_ccd(p: ModelParams, window: tuple[float, float] | None = None,
               tol: float = 1e-8, max_cycles: int = 100) -> SteadyState:
    """Alternate water and fire steady-state stages from ``u = v = 0``."""
    window = window or default_window(p)
    u = v = 0.0
    x_prev = None
    history = []
    for _ in range(max_cycles):
        s = _stage_root(p, WATER, v, window, x_prev)
        u = s.u_s
        s = _stage_root(p, FIRE, u, window, s.x_s)
        v = s.v_s
        history.append(s.x_s)
        if x_prev is not None and abs(s.x_s - x_prev) < tol:
            return s
        x_prev = s.x_s
    raise SteadyStateError(
        f"steady CCD did not settle in {max_cycles} cycles; last iterates {history[-2:]}")

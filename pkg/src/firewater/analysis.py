"""Experiments built on the solvers: sweeps, surface fits, DNS point, Arrow check."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ccd import CcdResult, StageError, solve_low_branch, solve_multicontrol, total_cost
from .model import (DomainError, Grid, ModelParams, hamiltonian, running_cost, stage_cost,
                    switching_point, u0_v0_quadratic)
from .numerics import ConvergenceError, QuadFit, fit_quadratic_surface, integrate_trapezoid
from .shooting import WATER
from .steady_state import STABLE, SteadyStateError, find_steady_states, steady_ccd

log = logging.getLogger(__name__)

__all__ = [
    "ArrowReport", "DnsResult", "OracleResult", "SweepPoint", "arrow_check", "contour_solve",
    "find_dns", "fit_sweep", "grid_values", "oracle_direct_solve", "sweep_gamma_beta",
    "tail_bound", "total_cost", "verify_contour",
]


def tail_bound(p: ModelParams, traj) -> float:
    """Bound on the state-cost tail beyond the horizon, ``c x_max^p e^{-rT} / r``."""
    T = traj.t[-1]
    return p.c * float(np.max(traj.x)) ** p.cost_exponent * math.exp(-p.r * T) / p.r


# sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    gamma: float
    beta: float
    x_s: float = math.nan
    u_s: float = math.nan
    v_s: float = math.nan
    cost_rate: float = math.nan
    stability: str = ""
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def grid_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid, robust to the float drift of ``arange``."""
    if not step > 0:
        raise ValueError("step must be positive")
    if hi < lo:
        raise ValueError("range must be increasing")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def _steady_point(args) -> SweepPoint:
    p, gamma, beta = args
    q = p.with_(gamma=float(gamma), beta=float(beta))
    try:
        s = steady_ccd(q)
    except (SteadyStateError, DomainError, ConvergenceError) as err:
        return SweepPoint(float(gamma), float(beta), error=str(err))
    return SweepPoint(float(gamma), float(beta), s.x_s, s.u_s, s.v_s,
                      stage_cost(q, s.x_s, s.u_s, s.v_s), s.stability)


def _run_pool(fn, items, jobs):
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(items) < 2:
        return [fn(it) for it in items]
    # map keeps input order whatever the completion order
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def sweep_gamma_beta(p: ModelParams, gamma_range=(0.1, 0.2), gamma_step=0.01,
                     beta_range=(0.01, 0.02), beta_step=0.001,
                     jobs: int | None = None) -> list[SweepPoint]:
    """High-branch steady state on every (gamma, beta) grid pair, gamma-major."""
    gammas = grid_values(*gamma_range, gamma_step)
    betas = grid_values(*beta_range, beta_step)
    items = [(p, g, b) for g in gammas for b in betas]
    return _run_pool(_steady_point, items, jobs)


def fit_sweep(points) -> QuadFit:
    good = [pt for pt in points if pt.ok]
    return fit_quadratic_surface([pt.gamma for pt in good], [pt.beta for pt in good],
                                 [pt.x_s for pt in good])


def contour_solve(fit: QuadFit, target: float, beta_grid, gamma_range=(0.1, 0.2)):
    """Pairs ``(gamma, beta)`` on the level set ``fit = target``.

    Returns ``(pairs, skipped)`` where ``skipped`` lists the betas with no
    real root inside ``gamma_range``.
    """
    pairs, skipped = [], []
    g_lo, g_hi = gamma_range
    for beta in beta_grid:
        c0 = fit.a0 + fit.a3 * beta + fit.a4 * beta * beta - target
        roots = np.roots([fit.a2, fit.a1, c0]) if fit.a2 != 0 else np.array([-c0 / fit.a1])
        real = sorted(float(r.real) for r in np.atleast_1d(roots)
                      if abs(r.imag) < 1e-12 and g_lo - 1e-12 <= r.real <= g_hi + 1e-12)
        if real:
            pairs.append((real[0], float(beta)))
        else:
            skipped.append(float(beta))
    return pairs, skipped


def verify_contour(p: ModelParams, pairs, jobs: int | None = None) -> list[SweepPoint]:
    return _run_pool(_steady_point, [(p, g, b) for g, b in pairs], jobs)


# DNS point ------------------------------------------------------------------

@dataclass
class DnsResult:
    x_D: float
    J_low: float
    J_high: float
    width: float
    evaluations: list[tuple] = field(default_factory=list)


def low_branch_cost(p: ModelParams, result: CcdResult, x_low: float, u_low: float) -> float:
    """Cost of the low branch, closed off by the steady state it approaches.

    The forward march can only shadow the saddle path for a while before
    rounding pushes it off, so the integral stops at the knot closest to
    ``x_low`` and the remainder is the steady-state cost rate discounted
    from there.
    """
    tr = result.trajectory
    i = int(np.argmin(np.abs(np.log(tr.x) - math.log(x_low))))
    i = max(i, 1)
    vals = [running_cost(p, t, x, u, v)
            for t, x, u, v in zip(tr.t[:i + 1], tr.x[:i + 1], tr.u[:i + 1], tr.v[:i + 1])]
    tail = stage_cost(p, x_low, u_low, 0.0) * math.exp(-p.r * tr.t[i]) / p.r
    return integrate_trapezoid(tr.t[:i + 1], vals) + tail


class _HighBranch:
    """High-branch CCD solves reused as warm starts for nearby ``x0``."""

    def __init__(self, p, grid):
        self.p, self.grid = p, grid
        self.solved: dict[float, CcdResult] = {}

    def __call__(self, x0):
        warm = None
        if self.solved:
            near = min(self.solved, key=lambda s: abs(s - x0))
            warm = self.solved[near]
        try:
            res = solve_multicontrol(self.p, self.grid, x0, warm=warm)
        except StageError:
            if warm is None:
                raise
            res = solve_multicontrol(self.p, self.grid, x0)
        self.solved[x0] = res
        return res


def find_dns(p: ModelParams, bracket=(0.011, 0.015), grid: Grid | None = None,
             tol: float = 1e-7) -> DnsResult:
    """Bisection on ``x0`` of ``J_high - J_low``.

    ``J_high`` is the full two-control CCD cost on ``grid``; ``J_low`` the
    water-only extremal toward the tiny stable steady state, closed off by
    :func:`low_branch_cost`. The default grid is long (300 years) so that
    both costs approximate the infinite-horizon values.
    """
    grid = grid or Grid(300.0, 750)
    x_lo, x_hi = map(float, bracket)
    if not 0 < x_lo < x_hi:
        raise ValueError("need 0 < x_lo < x_hi")
    lows = [s for s in find_steady_states(p, WATER, 0.0, 1e-10, switching_point(p))
            if s.stability == STABLE]
    if not lows:
        raise ConvergenceError("no stable low steady state for the water-only problem")
    low = lows[0]
    high = _HighBranch(p, grid)
    evals = []

    def delta(x0):
        jh = high(x0).cost
        jl = low_branch_cost(p, solve_low_branch(p, grid, x0), low.x_s, low.u_s)
        evals.append((x0, jl, jh))
        return jh - jl

    # start at the top: the high branch ceases to exist a little below x_D
    d_hi = delta(x_hi)
    d_lo = delta(x_lo)
    if d_lo * d_hi > 0:
        raise ConvergenceError(
            f"J_high - J_low keeps its sign on [{x_lo}, {x_hi}] ({d_lo:.3g}, {d_hi:.3g})")
    a, b, da = x_lo, x_hi, d_lo
    while b - a > tol:
        m = 0.5 * (a + b)
        dm = delta(m)
        if dm == 0:
            a = b = m
            break
        if (dm < 0) == (da < 0):
            a, da = m, dm
        else:
            b = m
    x_D = 0.5 * (a + b)
    delta(x_D)
    _, jl, jh = evals[-1]
    return DnsResult(x_D=x_D, J_low=jl, J_high=jh, width=b - a, evaluations=evals)


# Arrow sufficiency ----------------------------------------------------------

LOCALLY_CONVEX = "locally_convex"
INDETERMINATE = "indeterminate"
NONCONVEX = "nonconvex"


@dataclass
class ArrowReport:
    samples: np.ndarray  # columns t, H0_xx
    min_H0_xx: float
    verdict: str
    noise_floor: float
    side_condition: float  # lambda(T) x(T)
    side_ok: bool


def derived_hamiltonian(p: ModelParams, t: float, x: float, lam: float) -> float:
    u0, v0 = u0_v0_quadratic(p, x, lam, t)
    return hamiltonian(p, t, x, u0, v0, lam)


def arrow_check(p: ModelParams, result: CcdResult, side_tol: float = 1e-6) -> ArrowReport:
    """Second x-derivative of the derived Hamiltonian along a solved path.

    ``H0(x) = H(x, u0(x), v0(x), lambda*(t), t)`` is differenced with step
    ``1e-4 max(1, x)``, halved to ``x / 2`` on stocks too small for it. The
    noise floor is ``1e-6`` times the largest ``|H0_xx|`` on the path.
    """
    tr = result.trajectory
    if tr.lam is None:
        raise ValueError("trajectory carries no costate")
    rows = []
    for i, (t, x, lam) in enumerate(zip(tr.t, tr.x, tr.lam)):
        h = 1e-4 * max(1.0, x)
        if x - h <= 0:
            h = 0.5 * x
        lam = max(float(lam), 0.0)
        try:
            hp = derived_hamiltonian(p, t, x + h, lam)
            h0 = derived_hamiltonian(p, t, x, lam)
            hm = derived_hamiltonian(p, t, x - h, lam)
        except DomainError as err:
            raise DomainError(f"knot {i}: {err}") from err
        rows.append((t, (hp - 2 * h0 + hm) / (h * h)))
    samples = np.array(rows)
    curv = samples[:, 1]
    floor = 1e-6 * max(float(np.max(np.abs(curv))), 1e-300)
    mn = float(curv.min())
    # convex at every knot certifies; concave at every knot rules Arrow out;
    # anything else (mixed signs, values inside the noise) decides nothing
    if mn > floor:
        verdict = LOCALLY_CONVEX
    elif float(curv.max()) < -floor:
        verdict = NONCONVEX
    else:
        verdict = INDETERMINATE
    side = float(tr.lam[-1] * tr.x[-1])
    return ArrowReport(samples, mn, verdict, floor, side, side >= -side_tol)


# direct-transcription oracle ------------------------------------------------

@dataclass
class OracleResult:
    cost: float
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    passes: int
    hit_pass_limit: bool


def _oracle_cost(p, t, x0, u, v):
    """Euler state on the knots; per-interval controls; trapezoid cost."""
    dt = t[1] - t[0]
    disc = np.exp(-p.r * t)
    x = x0
    J = 0.0
    xs = [x0]
    for i in range(u.size):
        ui, vi = u[i], v[i]
        xn = x + dt * (p.tau + (1 + p.rho * vi) * p.k * x**p.alpha - p.mu * x
                       - p.beta * math.log1p(ui) * x**p.theta - p.gamma * math.log1p(vi) * x)
        xn = max(xn, 1e-12)
        ctl = ui * ui + vi * vi
        J += 0.5 * dt * ((p.c * x**p.cost_exponent + ctl) * disc[i]
                         + (p.c * xn**p.cost_exponent + ctl) * disc[i + 1])
        x = xn
        xs.append(x)
    return J, np.array(xs)


def _golden(fn, a, b, tol=1e-9):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = fn(d)
    return (a + b) / 2


def oracle_direct_solve(p: ModelParams, T: float = 50.0, N: int = 50, x0: float = 0.95,
                        w_max: float = 2.0, controls=("water", "fire"),
                        max_passes: int = 500, tol: float = 1e-8) -> OracleResult:
    """Minimize the discretized cost over piecewise-constant controls directly.

    Projected cyclic coordinate descent: each of the ``2N`` control values
    in turn gets a golden-section search on ``[0, w_max]``; full passes
    repeat until the cost improves by less than ``tol``. Shares no code with
    the costate machinery and serves as an independent check on it.
    """
    if N > 100:
        raise ValueError("the oracle is meant to stay coarse (N <= 100)")
    t = np.linspace(0.0, T, N + 1)
    u = np.zeros(N)
    v = np.zeros(N)
    arrays = [a for name, a in (("water", u), ("fire", v)) if name in controls]
    J, _ = _oracle_cost(p, t, x0, u, v)
    passes = 0
    for passes in range(1, max_passes + 1):
        J_start = J
        for arr in arrays:
            for i in range(N):
                def f(w, arr=arr, i=i):
                    arr[i] = w
                    return _oracle_cost(p, t, x0, u, v)[0]
                old = arr[i]
                best = _golden(f, 0.0, w_max)
                cand = min((best, f(best)), (0.0, f(0.0)), (old, f(old)), key=lambda z: z[1])
                arr[i] = cand[0]
                J = cand[1]
        if J_start - J < tol:
            break
    J, x = _oracle_cost(p, t, x0, u, v)
    return OracleResult(J, t, x, u.copy(), v.copy(), passes, passes >= max_passes and J_start - J >= tol)

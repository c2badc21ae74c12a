"""Single-control extremals and shooting on the initial costate.

For one active control ``w`` (the other held fixed) the necessary condition
reads, on arcs where ``w > 0``,

    Y(t) = -F_w / f_w * exp(A(t)) + B(t) = K,
    A(t) = int_0^t f_x ds,   B(t) = int_0^t F_x exp(A(s)) ds,

and ``Y(t) >= K`` where ``w = 0``. ``K`` equals ``lambda(0)`` and the costate
is recovered as ``lambda(t) = (K - B(t)) exp(-A(t))``. Shooting adjusts ``K``
until ``lambda(T) = 0``.

Discretization: the state, ``A`` and ``B`` all advance by explicit Euler, so
``A_i`` and ``B_i`` only involve knots ``0..i-1`` and the knot equation
``Y = K`` is explicit in ``w_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import DomainError, Grid, ModelParams, Trajectory, switching_point
from .numerics import ConvergenceError, RootConfig, secant_solve

WATER = "water"
FIRE = "fire"

X_FLOOR = 1e-12
W_MAX = 1e3


class ExtremalError(RuntimeError):
    """The per-knot solve of ``Y = K`` failed."""

    def __init__(self, msg, knot=None, K=None):
        super().__init__(msg)
        self.knot = knot
        self.K = K


@dataclass
class ControlSelector:
    """Which control is optimized, and the values of the one held fixed."""

    which: str
    fixed_other: np.ndarray

    def __post_init__(self):
        if self.which not in (WATER, FIRE):
            raise ValueError(f"which must be {WATER!r} or {FIRE!r}")
        self.fixed_other = np.asarray(self.fixed_other, dtype=float)
        if np.any(self.fixed_other < 0):
            raise ValueError("fixed control must be non-negative")

    @classmethod
    def water(cls, v) -> "ControlSelector":
        return cls(WATER, v)

    @classmethod
    def fire(cls, u) -> "ControlSelector":
        return cls(FIRE, u)


@dataclass
class ExtremalAccumulators:
    A: np.ndarray
    B: np.ndarray
    Y: np.ndarray


@dataclass
class ShootingResult:
    K: float
    trajectory: Trajectory
    residual: float
    secant_iterations: int
    accumulators: ExtremalAccumulators | None = None


class _Kernel:
    """Scalar model pieces specialised for fast marching (plain floats)."""

    def __init__(self, p: ModelParams):
        self.p = p
        self.xs = switching_point(p) if p.alpha < 1 else math.inf

    def f(self, x, u, v):
        p = self.p
        return (p.tau + (1 + p.rho * v) * p.k * x**p.alpha - p.mu * x
                - p.beta * math.log1p(u) * x**p.theta - p.gamma * math.log1p(v) * x)

    def f_x(self, x, u, v):
        p = self.p
        return (p.alpha * (1 + p.rho * v) * p.k * x ** (p.alpha - 1) - p.mu
                - p.theta * p.beta * math.log1p(u) * x ** (p.theta - 1) - p.gamma * math.log1p(v))

    def F_x(self, t, x):
        p = self.p
        return p.cost_exponent * p.c * x ** (p.cost_exponent - 1) * math.exp(-p.r * t)

    def f_w(self, which, x, u, v):
        p = self.p
        if which == WATER:
            return -p.beta * x**p.theta / (1 + u)
        return p.rho * p.k * x**p.alpha - p.gamma * x / (1 + v)

    def Y(self, which, t, x, w, other, A, B):
        u, v = (w, other) if which == WATER else (other, w)
        fw = self.f_w(which, x, u, v)
        if abs(fw) < 1e-14:
            raise ExtremalError(f"|f_w| = {abs(fw):.2e} too small at t={t}")
        return -2 * w * math.exp(-self.p.r * t) / fw * math.exp(A) + B

    def clamped(self, which, x):
        return which == FIRE and x < self.xs

    def candidate(self, which, t, x, lam, other):
        """Root of ``F_w + lam f_w = 0`` in closed form (the minimizer of H)."""
        p = self.p
        cur = lam * math.exp(p.r * t)
        if which == WATER:
            q = 2 * p.beta * cur * x**p.theta
            return 0.5 * q / (math.sqrt(1 + q) + 1)
        # 2 v^2 + (2 + a) v + cur (rk x^a - g x) = 0 after multiplying by (1+v)
        recruit = p.rho * p.k * x**p.alpha
        if recruit >= p.gamma * x:
            return 0.0
        a = recruit * cur
        rad = (2 + a) ** 2 - 8 * cur * (recruit - p.gamma * x)
        return (-(2 + a) + math.sqrt(rad)) / 4

    def solve_knot(self, which, t, x, other, K, A, B, knot):
        """Control at one knot: ``Y(w) = K`` if solvable with w > 0, else 0."""
        if self.clamped(which, x) or B >= K:
            return 0.0
        lam = (K - B) * math.exp(-A)
        w = min(self.candidate(which, t, x, lam, other), W_MAX)
        if w <= 0:
            return 0.0
        tol = 1e-9 * (1 + abs(K))
        try:
            ok = abs(self.Y(which, t, x, w, other, A, B) - K) <= tol
        except ExtremalError:
            ok = False
        if ok:
            return w
        # Y increases from B < K on [0, w_hi); bracket and polish
        w_hi = W_MAX
        if which == FIRE:
            p = self.p
            w_hi = min(W_MAX, p.gamma * x / (p.rho * p.k * x**p.alpha) - 1) * (1 - 1e-12)
        g = lambda w_: self.Y(which, t, x, w_, other, A, B) - K  # noqa: E731
        try:
            if g(w_hi) < 0:
                return w_hi
            return brentq(g, 0.0, w_hi, xtol=1e-14, rtol=1e-14, maxiter=200)
        except (ValueError, ExtremalError, RuntimeError) as err:
            raise ExtremalError(f"knot {knot}: Y = K solve failed ({err})", knot=knot, K=K) from err


def _accumulate(kern, which, t0, dt, x0, w0, other0, A, B):
    """One explicit (left-endpoint) step of ``A`` and ``B`` from knot i to i+1."""
    u0, v0 = (w0, other0) if which == WATER else (other0, w0)
    return A + dt * kern.f_x(x0, u0, v0), B + dt * kern.F_x(t0, x0) * math.exp(A)


def _march(p: ModelParams, grid: Grid, x0: float, K: float, sel: ControlSelector,
           partial: bool = False):
    # partial=True turns a knot failure into a floor hit on the remaining
    # knots instead of raising, for callers that only need the path's fate
    if not x0 > 0:
        raise DomainError("x0 must be positive")
    if not math.isfinite(K):
        raise ExtremalError("K must be finite", K=K)
    other = sel.fixed_other
    if other.shape != (grid.steps + 1,):
        raise ValueError("fixed control length must match the grid")
    kern = _Kernel(p)
    which = sel.which
    t = grid.t
    dt = grid.dt
    n = grid.steps + 1
    x = np.empty(n)
    w = np.empty(n)
    A = np.empty(n)
    B = np.empty(n)
    A[0] = B[0] = 0.0
    x[0] = x0
    floor_hits = 0
    oth = other.tolist()
    tt = t.tolist()
    xi, Ai, Bi = float(x0), 0.0, 0.0
    for i in range(n):
        try:
            wi = kern.solve_knot(which, tt[i], xi, oth[i], K, Ai, Bi, i)
        except (ExtremalError, OverflowError) as err:
            if not partial:
                if isinstance(err, ExtremalError):
                    raise
                raise ExtremalError(f"knot {i}: costate overflow", knot=i, K=K) from err
            x[i:] = X_FLOOR
            w[i:] = 0.0
            A[i:], B[i:] = Ai, Bi
            floor_hits += 1
            break
        w[i] = wi
        if i == n - 1:
            break
        u, v = (wi, oth[i]) if which == WATER else (oth[i], wi)
        xn = xi + dt * kern.f(xi, u, v)
        if not xn > X_FLOOR:
            xn = X_FLOOR
            floor_hits += 1
        Ai, Bi = _accumulate(kern, which, tt[i], dt, xi, wi, oth[i], Ai, Bi)
        xi = xn
        x[i + 1], A[i + 1], B[i + 1] = xn, Ai, Bi
    if which == WATER:
        u_arr, v_arr = w, other.copy()
    else:
        u_arr, v_arr = other.copy(), w
    return Trajectory(grid, x, u_arr, v_arr), A, B, floor_hits


def build_extremal(p: ModelParams, grid: Grid, x0: float, K: float,
                   sel: ControlSelector) -> Trajectory:
    """March the knots, choosing the active control from ``Y = K`` (or 0)."""
    traj, _, _, _ = _march(p, grid, x0, K, sel)
    return traj


def accumulators(p: ModelParams, traj: Trajectory, K: float, sel: ControlSelector) -> ExtremalAccumulators:
    """Recompute ``A``, ``B`` and ``Y`` on a filled trajectory with the marching rule."""
    kern = _Kernel(p)
    which = sel.which
    t = traj.grid.t
    w = traj.u if which == WATER else traj.v
    oth = traj.v if which == WATER else traj.u
    n = t.size
    A = np.zeros(n)
    B = np.zeros(n)
    for i in range(n - 1):
        A[i + 1], B[i + 1] = _accumulate(kern, which, t[i], t[i + 1] - t[i], traj.x[i],
                                         w[i], oth[i], A[i], B[i])
    Y = np.empty(n)
    for i in range(n):
        if w[i] == 0.0:
            Y[i] = B[i]
        else:
            Y[i] = kern.Y(which, t[i], traj.x[i], w[i], oth[i], A[i], B[i])
    return ExtremalAccumulators(A, B, Y)


def costate_from_K(p: ModelParams, traj: Trajectory, K: float, sel: ControlSelector) -> np.ndarray:
    """``lambda_i = (K - B_i) exp(-A_i)``."""
    acc = accumulators(p, traj, K, sel)
    with np.errstate(over="raise"):
        try:
            return (K - acc.B) * np.exp(-acc.A)
        except FloatingPointError as err:
            raise ExtremalError("costate overflow", K=K) from err


def terminal_costate(p, grid, x0, K, sel) -> float:
    traj, A, B, _ = _march(p, grid, x0, K, sel)
    return (K - B[-1]) * math.exp(-A[-1])


def _repair_seeds(residual, lo, hi, tries=60):
    """Move seeds out of the region where the march blows up.

    Too large a ``K`` drives the state to the floor and the costate to
    overflow, so a bad lower seed steps down and a bad upper seed is pulled
    back toward the lower one.
    """
    step = abs(hi - lo) or 1.0
    for _ in range(tries):
        if math.isfinite(residual(lo)):
            break
        lo -= step
        step *= 2
    else:
        raise ConvergenceError(f"no finite residual below K={lo!r}")
    for _ in range(tries):
        if math.isfinite(residual(hi)):
            return lo, hi
        mid = lo + 0.5 * (hi - lo)
        if mid in (lo, hi):
            break
        hi = mid
    raise ConvergenceError(f"no finite residual between K={lo!r} and K={hi!r}")


def shoot(p: ModelParams, grid: Grid, x0: float, K_min: float, K_max: float,
          sel: ControlSelector, tol: float = 1e-5, max_iter: int = 100) -> ShootingResult:
    """Secant search on ``K`` for the extremal with ``lambda(T) = 0``."""
    residual = _residual_fn(p, grid, x0, sel)
    K_min, K_max = _repair_seeds(residual, K_min, K_max)
    return _finish(p, grid, x0, sel, residual, K_min, K_max, tol, max_iter)


def _residual_fn(p, grid, x0, sel):
    def residual(K):
        try:
            return terminal_costate(p, grid, x0, K, sel)
        except (ExtremalError, OverflowError):
            return math.nan
    return residual


def first_root_bracket(residual, K_start: float, step: float, max_evals: int = 400):
    """Walk ``K`` upward from ``K_start`` to the first sign change of the residual.

    A non-finite residual means the step overshot into the blow-up region, so
    the walk restarts from the last finite point with a smaller step.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    K0, f0 = K_start, residual(K_start)
    if not math.isfinite(f0):
        raise ConvergenceError(f"residual not finite at K={K_start!r}")
    for _ in range(max_evals):
        K1 = K0 + step
        f1 = residual(K1)
        if not math.isfinite(f1):
            step *= 0.25
            if step < 1e-12 * (1 + abs(K0)):
                break
            continue
        if f0 == 0 or f0 * f1 < 0:
            return K0, K1
        K0, f0 = K1, f1
    raise ConvergenceError(f"no sign change found above K={K_start!r}")


def shoot_first_root(p: ModelParams, grid: Grid, x0: float, sel: ControlSelector,
                     step: float | None = None, tol: float = 1e-5,
                     max_iter: int = 100) -> ShootingResult:
    """Shoot for the smallest ``K > 0`` with ``lambda(T) = 0``.

    Slower than :func:`shoot` but immune to landing on the wrong root when
    the residual has several (small initial stocks).
    """
    residual = _residual_fn(p, grid, x0, sel)
    step = step or max(p.c * x0 / p.r, 1e-3)
    lo, hi = first_root_bracket(residual, 0.0, step)
    return _finish(p, grid, x0, sel, residual, lo, hi, tol, max_iter)


def _finish(p, grid, x0, sel, residual, lo, hi, tol, max_iter):
    K, iters = secant_solve(residual, RootConfig(tol=tol, max_iter=max_iter, seeds=(lo, hi)))
    traj, A, B, _ = _march(p, grid, x0, K, sel)
    traj.lam = (K - B) * np.exp(-A)
    acc = accumulators(p, traj, K, sel)
    return ShootingResult(K=K, trajectory=traj, residual=abs(traj.lam[-1]),
                          secant_iterations=iters, accumulators=acc)


def shoot_boundary(p: ModelParams, grid: Grid, x0: float, sel: ControlSelector,
                   rtol: float = 1e-13, max_iter: int = 200) -> ShootingResult:
    """Separatrix multiplier between extremals that collapse and ones that recover.

    Extremals that head for an interior steady state with a tiny stock are
    unstable in forward time: just below the separatrix ``K`` they peel away
    upward, just above it they collapse to the floor. Each trial is
    classified by its first event (floor hit versus climbing back above
    ``x0``) and bisection tracks the separatrix as long as double precision
    allows. The terminal costate is reported but generally not zero on a
    finite horizon.
    """
    def crashes(K):
        try:
            traj, _, _, hits = _march(p, grid, x0, K, sel, partial=True)
        except (ExtremalError, OverflowError):
            return True
        if hits == 0:
            return False
        x = traj.x
        first_floor = int(np.argmax(x <= X_FLOOR))
        up = np.flatnonzero(x[1:] > x0)
        return up.size == 0 or first_floor < up[0] + 1

    lo = 0.0
    if crashes(lo):
        raise ConvergenceError("extremal with K=0 already hits the floor")
    hi = max(p.c * x0 / p.r, 1e-3)
    for _ in range(200):
        if crashes(hi):
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConvergenceError("no collapsing extremal found")
    iters = 0
    while hi - lo > rtol * hi and iters < max_iter:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if crashes(mid):
            hi = mid
        else:
            lo = mid
        iters += 1
    K = lo
    traj, A, B, _ = _march(p, grid, x0, K, sel)
    traj.lam = (K - B) * np.exp(-A)
    acc = accumulators(p, traj, K, sel)
    return ShootingResult(K=K, trajectory=traj, residual=abs(traj.lam[-1]),
                          secant_iterations=iters, accumulators=acc)

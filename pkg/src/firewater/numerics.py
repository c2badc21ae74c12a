"""Small numerical kernels shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import DomainError

INV_E = math.exp(-1.0)


class ConvergenceError(RuntimeError):
    """An iterative method hit its iteration cap without meeting tolerance."""


class FlatSlopeError(ConvergenceError):
    """The secant slope vanished, so the next iterate is undefined."""


@dataclass(frozen=True)
class RootConfig:
    tol: float = 1e-5
    max_iter: int = 100
    seeds: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.seeds[0] == self.seeds[1]:
            raise ValueError("secant seeds must differ")


def lambert_w0(z: float) -> float:
    """Principal branch of the Lambert W function for real ``z >= -1/e``.

    Halley iteration on ``w e^w - z``. Starts from the branch-point series
    near ``-1/e``, from ``log1p(z)`` on moderate arguments and from the
    asymptotic ``log z - log log z`` for large ones.
    """
    z = float(z)
    if math.isnan(z):
        raise DomainError("lambert_w0 of NaN")
    if z < -INV_E - 1e-12:
        raise DomainError(f"lambert_w0 needs z >= -1/e, got {z!r}")
    if z <= -INV_E:
        return -1.0
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf

    if z < -0.25:
        pp = math.sqrt(2.0 * (math.e * z + 1.0))
        w = -1.0 + pp - pp * pp / 3.0 + 11.0 / 72.0 * pp**3
    elif z < 3.0:
        w = math.log1p(z)
        if z < 0:
            w = z * (1 - z)
    else:
        lz = math.log(z)
        w = lz - math.log(lz)

    for _ in range(50):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        dw = f / denom
        w -= dw
        if abs(dw) <= 1e-15 * (1.0 + abs(w)):
            break
    return max(w, -1.0)


def secant_solve(residual: Callable[[float], float], cfg: RootConfig,
                 max_backtrack: int = 40) -> tuple[float, int]:
    """Secant iteration from ``cfg.seeds`` until ``|residual| <= cfg.tol``.

    Safeguards: once two iterates straddle a sign change the bracket is kept
    and any secant step leaving it becomes a bisection step. Without a
    bracket, a step whose residual cannot be evaluated (``ArithmeticError``
    or a non-finite value) is halved back toward the last iterate, at most
    ``max_backtrack`` times.

    Returns ``(root, iterations)`` where iterations counts updates.
    """
    x0, x1 = map(float, cfg.seeds)
    f0 = _safe(residual, x0)
    if abs(f0) <= cfg.tol:
        return x0, 0
    f1 = _safe(residual, x1)
    if not (math.isfinite(f0) and math.isfinite(f1)):
        raise FlatSlopeError(f"residual not finite at seeds ({x0!r}, {x1!r})")
    bracket = (x0, f0, x1, f1) if f0 * f1 < 0 else None
    for it in range(1, cfg.max_iter + 1):
        if abs(f1) <= cfg.tol:
            return x1, it - 1
        if x1 == x0:
            raise FlatSlopeError(f"secant iterates collapsed at x={x1!r}")
        slope = (f1 - f0) / (x1 - x0)
        if bracket is None and (abs(slope) < 1e-30 or not math.isfinite(slope)):
            raise FlatSlopeError(f"secant slope {slope!r} at x={x1!r}")
        step = -f1 / slope if slope != 0 else math.inf
        if bracket is not None:
            a, fa, b, fb = bracket
            x2 = x1 + step
            lo, hi = min(a, b), max(a, b)
            if not (lo < x2 < hi):
                x2 = 0.5 * (a + b)
            f2 = _safe(residual, x2)
            if not math.isfinite(f2):
                # treat like the side of the bracket that failed to evaluate
                x2 = 0.5 * (a + b)
                f2 = _safe(residual, x2)
                if not math.isfinite(f2):
                    raise ConvergenceError(f"residual not finite inside bracket at x={x2!r}")
            if fa * f2 < 0:
                bracket = (a, fa, x2, f2)
            else:
                bracket = (x2, f2, b, fb)
        else:
            for _ in range(max_backtrack + 1):
                x2 = x1 + step
                f2 = _safe(residual, x2)
                if math.isfinite(f2):
                    break
                step *= 0.5
            else:
                raise ConvergenceError(f"secant: residual not finite near x={x1!r}")
            if f1 * f2 < 0:
                bracket = (x1, f1, x2, f2)
        x0, f0, x1, f1 = x1, f1, x2, f2
    if abs(f1) <= cfg.tol:
        return x1, cfg.max_iter
    raise ConvergenceError(
        f"secant: |residual|={abs(f1):.3e} > tol after {cfg.max_iter} iterations (x={x1!r})")


def _safe(fn, x):
    try:
        val = fn(x)
    except ArithmeticError:
        return math.nan
    return float(val) if val == val else math.nan


def bisection(residual: Callable[[float], float], a: float, b: float, tol: float,
              max_iter: int = 400) -> float:
    """Bisect a sign change on ``[a, b]`` down to an interval of width ``tol``."""
    fa, fb = residual(a), residual(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if not fa * fb < 0:
        raise ValueError(f"invalid bracket: f({a!r})={fa!r}, f({b!r})={fb!r}")
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        m = 0.5 * (a + b)
        fm = residual(m)
        if fm == 0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def integrate_trapezoid(t, values) -> float:
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.size < 2:
        raise ValueError("need at least two matching samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("knots must be strictly increasing")
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


@dataclass(frozen=True)
class QuadFit:
    """``value ~ a0 + a1 g + a2 g^2 + a3 b + a4 b^2`` with its r^2."""

    a0: float
    a1: float
    a2: float
    a3: float
    a4: float
    r2: float

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.a3, self.a4])

    def __call__(self, g, b):
        g = np.asarray(g, dtype=float)
        b = np.asarray(b, dtype=float)
        return self.a0 + self.a1 * g + self.a2 * g * g + self.a3 * b + self.a4 * b * b


def _basis(g, b):
    return np.column_stack([np.ones_like(g), g, g * g, b, b * b])


def fit_quadratic_surface(g, b, values) -> QuadFit:
    """Least-squares fit in the basis ``{1, g, g^2, b, b^2}`` (no cross term).

    Inputs are centred and scaled before forming the 5x5 normal equations;
    the coefficients are mapped back to the raw variables.
    """
    g = np.asarray(g, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    y = np.asarray(values, dtype=float).ravel()
    if not (g.size == b.size == y.size):
        raise ValueError("g, b and values must have equal length")
    if g.size < 5:
        raise ValueError("need at least 5 points")

    gm, bm = g.mean(), b.mean()
    gs = g.std() or 1.0
    bs = b.std() or 1.0
    X = _basis((g - gm) / gs, (b - bm) / bs)
    XtX = X.T @ X
    if np.linalg.cond(XtX) > 1e12:
        raise np.linalg.LinAlgError("singular normal equations")
    c = np.linalg.solve(XtX, X.T @ y)

    # c0 + c1 G + c2 G^2 with G = (g - gm)/gs, same for b
    a1 = c[1] / gs - 2 * c[2] * gm / gs**2
    a2 = c[2] / gs**2
    a3 = c[3] / bs - 2 * c[4] * bm / bs**2
    a4 = c[4] / bs**2
    a0 = c[0] - c[1] * gm / gs + c[2] * gm**2 / gs**2 - c[3] * bm / bs + c[4] * bm**2 / bs**2

    resid = y - X @ c
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return QuadFit(float(a0), float(a1), float(a2), float(a3), float(a4), min(max(r2, 0.0), 1.0))

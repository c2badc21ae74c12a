"""Fire-and-water counter-terror model: dynamics, running cost and closed forms.

The state ``x`` is the terrorist stock, ``u`` the water control (no collateral
damage) and ``v`` the fire control (kills terrorists but boosts recruitment).

    xdot = tau + (1 + rho v) k x^alpha - mu x - beta ln(1+u) x^theta - gamma ln(1+v) x
    F    = (c x^p + u^2 + v^2) exp(-r t)

Everything here works with the present-value Hamiltonian
``H = F + lambda * f`` (the discount factor is never factored out).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np


class DomainError(ValueError):
    """Raised when a model function is evaluated outside its domain."""


@dataclass(frozen=True)
class ModelParams:
    """Model constants. Defaults are the base-case calibration."""

    r: float = 0.05
    c: float = 1.0
    tau: float = 1e-5
    rho: float = 1.0
    k: float = 0.05
    alpha: float = 0.75
    mu: float = 0.05
    beta: float = 0.01
    theta: float = 0.1
    gamma: float = 0.1
    cost_exponent: int = 1

    def __post_init__(self):
        checks = [
            (self.r > 0, "r must be positive"),
            (self.tau >= 0, "tau must be non-negative"),
            (self.rho >= 0, "rho must be non-negative"),
            (self.k > 0, "k must be positive"),
            (0 <= self.alpha <= 1, "alpha must lie in [0, 1]"),
            (self.mu > 0, "mu must be positive"),
            (self.beta > 0, "beta must be positive"),
            (self.theta <= 1, "theta must be <= 1"),
            (self.gamma > 0, "gamma must be positive"),
            (self.cost_exponent in (1, 2), "cost_exponent must be 1 or 2"),
        ]
        for ok, msg in checks:
            if not ok:
                raise DomainError(msg)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


BASE = ModelParams()
QUADRATIC = ModelParams(cost_exponent=2)

PARAM_KEYS = tuple(ModelParams.__dataclass_fields__)


def load_params(path) -> ModelParams:
    """Read a ``key=value`` parameter file (``#`` starts a comment).

    Keys missing from the file keep their base-case value; unknown keys raise.
    """
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = int(val) if key == "cost_exponent" else float(val)
    return ModelParams(**values)


def dump_params(p: ModelParams) -> str:
    return "".join(f"{key}={getattr(p, key)!r}\n" for key in PARAM_KEYS)


@dataclass(frozen=True)
class DerivedConstants:
    x_switch: float
    x_uncontrolled: float


def derived_constants(p: ModelParams) -> DerivedConstants:
    return DerivedConstants(switching_point(p), uncontrolled_steady_state(p))


@dataclass(frozen=True)
class Grid:
    """Uniform time grid with ``steps`` sub-intervals on ``[0, horizon]``."""

    horizon: float
    steps: int
    t: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError("steps must be an integer >= 2")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "t", np.linspace(0.0, self.horizon, self.steps + 1))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps


@dataclass
class Trajectory:
    grid: Grid
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    lam: np.ndarray | None = None

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def at(self, time: float) -> dict:
        """Values at the knot closest to ``time``."""
        i = int(np.argmin(np.abs(self.grid.t - time)))
        out = {"t": self.grid.t[i], "x": self.x[i], "u": self.u[i], "v": self.v[i]}
        if self.lam is not None:
            out["lambda"] = self.lam[i]
        return out


def _check_nonneg(x, u, v):
    if x < 0 or u < 0 or v < 0:
        raise DomainError(f"need x, u, v >= 0, got x={x!r}, u={u!r}, v={v!r}")


def drift(p: ModelParams, x: float, u: float, v: float) -> float:
    """State equation right-hand side ``f(x, u, v)``."""
    _check_nonneg(x, u, v)
    # tau last so that the k = mu normalization gives exactly tau at x = 1
    return ((1 + p.rho * v) * p.k * x**p.alpha - p.mu * x
            - p.beta * math.log1p(u) * x**p.theta - p.gamma * math.log1p(v) * x + p.tau)


def stage_cost(p: ModelParams, x: float, u: float, v: float) -> float:
    """Undiscounted integrand ``G = c x^p + u^2 + v^2``."""
    return p.c * x**p.cost_exponent + u * u + v * v


def running_cost(p: ModelParams, t: float, x: float, u: float, v: float) -> float:
    if t < 0 or x < 0:
        raise DomainError("need t >= 0 and x >= 0")
    return stage_cost(p, x, u, v) * math.exp(-p.r * t)


@dataclass(frozen=True)
class Partials:
    f_x: float
    f_u: float
    f_v: float
    F_x: float
    F_u: float
    F_v: float


def partials(p: ModelParams, t: float, x: float, u: float, v: float) -> Partials:
    """Analytic first partials of the drift ``f`` and the integrand ``F``."""
    if not x > 0:
        raise DomainError("partials need x > 0")
    _check_nonneg(x, u, v)
    disc = math.exp(-p.r * t)
    xa = x**p.alpha
    return Partials(
        f_x=(p.alpha * (1 + p.rho * v) * p.k * xa / x - p.mu
             - p.theta * p.beta * math.log1p(u) * x**p.theta / x - p.gamma * math.log1p(v)),
        f_u=-p.beta * x**p.theta / (1 + u),
        f_v=p.rho * p.k * xa - p.gamma * x / (1 + v),
        F_x=p.cost_exponent * p.c * x ** (p.cost_exponent - 1) * disc,
        F_u=2 * u * disc,
        F_v=2 * v * disc,
    )


def hamiltonian(p: ModelParams, t, x, u, v, lam) -> float:
    return running_cost(p, t, x, u, v) + lam * drift(p, x, u, v)


def switching_point(p: ModelParams) -> float:
    """Stock below which the unconstrained fire optimum is negative."""
    if p.alpha >= 1:
        raise DomainError("switching point undefined for alpha = 1")
    if p.rho == 0:
        return 0.0
    return (p.rho * p.k / p.gamma) ** (1 / (1 - p.alpha))


def uncontrolled_steady_state(p: ModelParams) -> float:
    """Limit of the Bernoulli flow ``xdot = k x^alpha - mu x`` (tau neglected)."""
    if p.alpha >= 1:
        raise DomainError("uncontrolled steady state undefined for alpha = 1")
    return (p.k / p.mu) ** (1 / (1 - p.alpha))


def v_star(p: ModelParams, x: float, lam: float, t: float) -> float:
    """Fire control minimizing H over v >= 0.

    Written as ``-(2 + a) + sqrt((2 + a)^2 - 8 L (a - gamma x))`` over 4, with
    ``L = lam e^{rt}`` and ``a = rho k x^alpha L``; the sign of ``a/L - gamma x``
    decides whether the interior root is negative, so no cancellation matters.
    """
    if x < 0:
        raise DomainError("need x >= 0")
    if lam == 0 or x == 0:
        return 0.0
    cur = lam * math.exp(p.r * t)
    recruit = p.rho * p.k * x**p.alpha
    if cur > 0 and recruit >= p.gamma * x:
        return 0.0
    a = recruit * cur
    rad = (2 + a) ** 2 - 8 * cur * (recruit - p.gamma * x)
    if rad < 0:
        raise DomainError(f"negative radicand {rad!r} in v*: lambda={lam!r} out of regime")
    val = (-(2 + a) + math.sqrt(rad)) / 4
    return max(0.0, val)


def u_star(p: ModelParams, x: float, lam: float, t: float) -> float:
    """Water control minimizing H over u >= 0."""
    if x < 0:
        raise DomainError("need x >= 0")
    q = 2 * p.beta * lam * math.exp(p.r * t) * x**p.theta
    if q <= 0:
        return 0.0
    # sqrt(1+q) - 1 without cancellation
    return 0.5 * q / (math.sqrt(1 + q) + 1)


def u0_v0_quadratic(p: ModelParams, x: float, lam: float, t: float) -> tuple[float, float]:
    """Closed-form minimizers ``(u0, v0)`` of the Hamiltonian, clamped at 0."""
    if lam < 0:
        raise DomainError("need lambda >= 0")
    if not x > 0:
        raise DomainError("need x > 0")
    e = math.exp(p.r * t)
    q = p.k * lam * p.rho * e * x**p.alpha
    rad = q * q - 4 * q + 8 * p.gamma * lam * x * e + 4
    if rad < 0:
        raise DomainError(f"negative radicand {rad!r} in v0")
    u0 = 0.5 * (math.sqrt(2 * p.beta * lam * e * x**p.theta + 1) - 1)
    v0 = 0.25 * (math.sqrt(rad) - q - 2)
    return max(0.0, u0), max(0.0, v0)

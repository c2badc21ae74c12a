"""Cyclic coordinate descent over the two controls of the dynamic problem."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import Grid, ModelParams, Trajectory, running_cost, switching_point
from .numerics import ConvergenceError, integrate_trapezoid
from .shooting import (FIRE, WATER, ControlSelector, ExtremalError, ShootingResult, shoot,
                       shoot_boundary, shoot_first_root)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, msg, cycle, stage):
        super().__init__(f"cycle {cycle}, {stage} stage: {msg}")
        self.cycle = cycle
        self.stage = stage


@dataclass
class CcdConfig:
    tol_K: float = 1e-3
    max_cycles: int = 20
    shoot_tol: float = 1e-5
    shoot_max_iter: int = 100
    stages: tuple[str, ...] = (WATER, FIRE)
    # first-cycle secant seeds per control; None means (0, 2 c x0 / r)
    seeds: dict = field(default_factory=dict)
    # controls to cycle over; dropping FIRE gives the water-only problem
    relative_step: float = 0.05

    def __post_init__(self):
        if not self.tol_K > 0:
            raise ValueError("tol_K must be positive")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        for s in self.stages:
            if s not in (WATER, FIRE):
                raise ValueError(f"unknown stage {s!r}")


@dataclass
class CcdResult:
    trajectory: Trajectory
    K_water: float | None
    K_fire: float | None
    cycles: int
    cost: float
    per_cycle_K: list[dict]
    per_cycle_cost: list[float]
    converged: bool
    stages: dict = field(default_factory=dict)
    stage_log: list[dict] = field(default_factory=list)

    @property
    def K(self) -> dict:
        return {WATER: self.K_water, FIRE: self.K_fire}


def total_cost(p: ModelParams, traj: Trajectory) -> float:
    """Trapezoid of the discounted running cost over the grid."""
    vals = [running_cost(p, t, x, u, v) for t, x, u, v in zip(traj.t, traj.x, traj.u, traj.v)]
    return integrate_trapezoid(traj.t, vals)


def _seeds(p, x0, K_prev, cfg, which):
    if K_prev is not None:
        return K_prev, K_prev * (1 + cfg.relative_step) if K_prev != 0 else cfg.relative_step
    if which in cfg.seeds:
        return cfg.seeds[which]
    hi = 2 * p.c * x0 / p.r
    return 0.0, hi if hi != 0 else 1.0


def solve_multicontrol(p: ModelParams, grid: Grid, x0: float,
                       cfg: CcdConfig | None = None,
                       warm: CcdResult | None = None) -> CcdResult:
    """Alternate water and fire shooting stages.

    Starts from ``u = v = 0`` unless ``warm`` (a result on the same grid,
    typically for a nearby ``x0``) supplies the controls and multipliers.
    """
    cfg = cfg or CcdConfig()
    n = grid.steps + 1
    u = np.zeros(n)
    v = np.zeros(n)
    K = {WATER: None, FIRE: None}
    if warm is not None:
        if warm.trajectory.x.shape != (n,):
            raise ValueError("warm start must live on the same grid")
        u, v = warm.trajectory.u.copy(), warm.trajectory.v.copy()
        K = {WATER: warm.K_water, FIRE: warm.K_fire}
    history, costs, stage_log = [], [], []
    best = None
    last: dict[str, ShootingResult] = {}
    converged = False
    cycle = 0
    for cycle in range(1, cfg.max_cycles + 1):
        K_old = dict(K)
        for which in cfg.stages:
            sel = ControlSelector.water(v) if which == WATER else ControlSelector.fire(u)
            k_lo, k_hi = _seeds(p, x0, K[which], cfg, which)
            try:
                res = shoot(p, grid, x0, k_lo, k_hi, sel, cfg.shoot_tol, cfg.shoot_max_iter)
            except (ConvergenceError, ExtremalError) as err:
                # warm seeds may sit past the blow-up region; fall back to a
                # scan for the smallest root
                log.debug("cycle %d %s: %s; scanning for first root", cycle, which, err)
                try:
                    res = shoot_first_root(p, grid, x0, sel, tol=cfg.shoot_tol,
                                           max_iter=cfg.shoot_max_iter)
                except (ConvergenceError, ExtremalError) as err2:
                    raise StageError(str(err2), cycle, which) from err2
            K[which] = res.K
            last[which] = res
            if which == WATER:
                u = res.trajectory.u.copy()
            else:
                v = res.trajectory.v.copy()
            stage_log.append({"cycle": cycle, "stage": which, "K": res.K,
                              "iterations": res.secant_iterations, "residual": res.residual})
            log.debug("cycle %d %s: K=%.10g iters=%d", cycle, which, res.K, res.secant_iterations)
        traj = last[cfg.stages[-1]].trajectory
        cost = total_cost(p, traj)
        history.append(dict(K))
        costs.append(cost)
        if best is None or cost < best[0]:
            best = (cost, traj, dict(K), cycle)
        if all(K_old[s] is not None and abs(K[s] - K_old[s]) < cfg.tol_K for s in cfg.stages):
            converged = True
            break

    if converged:
        cost, traj, K_final = costs[-1], last[cfg.stages[-1]].trajectory, K
    else:
        log.warning("CCD did not converge in %d cycles; returning best iterate", cfg.max_cycles)
        cost, traj, K_final, _ = best
    return CcdResult(
        trajectory=traj,
        K_water=K_final[WATER],
        K_fire=K_final[FIRE],
        cycles=cycle,
        cost=cost,
        per_cycle_K=history,
        per_cycle_cost=costs,
        converged=converged,
        stages=last,
        stage_log=stage_log,
    )


def solve_low_branch(p: ModelParams, grid: Grid, x0: float) -> CcdResult:
    """Water-only extremal heading for the tiny steady state.

    Fire is held at zero, which the switching rule enforces anyway while
    the stock stays below the switching point. The target steady state is
    a saddle, so instead of zeroing the terminal costate (the finite-horizon
    extremals with that property go elsewhere) the multiplier is pinned to
    the separatrix with :func:`shoot_boundary`. ``converged`` reports whether
    the fire clamp held on every knot; the terminal costate is left in
    ``stages[WATER].residual``.
    """
    sel = ControlSelector.water(np.zeros(grid.steps + 1))
    try:
        res = shoot_boundary(p, grid, x0, sel)
    except (ConvergenceError, ExtremalError) as err:
        raise StageError(str(err), 1, WATER) from err
    traj = res.trajectory
    clamp_ok = bool(np.all(traj.x < switching_point(p))) if p.rho > 0 else False
    cost = total_cost(p, traj)
    return CcdResult(
        trajectory=traj,
        K_water=res.K,
        K_fire=None,
        cycles=1,
        cost=cost,
        per_cycle_K=[{WATER: res.K, FIRE: None}],
        per_cycle_cost=[cost],
        converged=clamp_ok,
        stages={WATER: res},
        stage_log=[{"cycle": 1, "stage": WATER, "K": res.K,
                    "iterations": res.secant_iterations, "residual": res.residual}],
    )

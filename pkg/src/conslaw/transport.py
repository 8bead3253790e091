"""Continuous solutions of ``u_t + f(u)_x = 0`` by characteristics, and a
first-order Godunov scheme used as an independent entropy-solution oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (DomainError, EmptyOverlap, NonMonotone, OutOfRange, ShockReached,
                     StepTooSmall)
from .flux import Flux, Interval, _as_interval, _sign_change_roots
from .variation import SampledFunction

__all__ = [
    "CharacteristicFlow",
    "EvolutionResult",
    "GodunovConfig",
    "characteristic_flow",
    "shock_time",
    "invert_flow",
    "evolve_continuous",
    "evolve_periodic",
    "transported_samples",
    "godunov_solve",
    "godunov_flux",
    "l1_distance",
    "linf_distance",
]

MONOTONE_MARGIN = 1e-10
INVERSION_TOL = 1e-10
MAX_BISECTIONS = 200


@dataclass(frozen=True, eq=False)
class CharacteristicFlow:
    """``theta_t(y) = y + t a(u0(y))`` sampled on ``y_grid``.

    ``theta_fn`` evaluates the exact map off the grid when available.
    """

    y_grid: np.ndarray
    theta: np.ndarray
    time: float
    monotone: bool
    min_slope: float
    theta_fn: Callable | None = None


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    solution: SampledFunction
    time: float
    inversion_tol: float
    max_inversion_residual: float


@dataclass(frozen=True)
class GodunovConfig:
    dx: float
    cfl: float = 0.9
    domain: Interval = Interval(0.0, 1.0)
    boundary: str = "outflow"
    max_steps: int = 10_000_000

    def __post_init__(self):
        object.__setattr__(self, "domain", _as_interval(self.domain))
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.boundary not in ("outflow", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def n_cells(self):
        return max(1, int(round(self.domain.width / self.dx)))

    def centers(self):
        n = self.n_cells
        h = self.domain.width / n
        return self.domain.lo + h * (np.arange(n) + 0.5)


# ---------------------------------------------------------------------------
# characteristics


def characteristic_flow(flux: Flux, u0: Callable, t: float, y_grid,
                        margin: float = MONOTONE_MARGIN) -> CharacteristicFlow:
    if t < 0:
        raise ValueError("time must be nonnegative")
    y = np.asarray(y_grid, dtype=float)
    if len(y) < 2 or not np.all(np.diff(y) > 0):
        raise ValueError("y_grid must be strictly increasing with at least two points")
    u = np.asarray(u0(y), dtype=float) * np.ones_like(y)
    flux.check_domain(u, "initial value")
    theta = y + t * flux.wave_speed(u)
    slopes = np.diff(theta) / np.diff(y)
    min_slope = float(np.min(slopes))

    def theta_fn(yy):
        yy = np.asarray(yy, dtype=float)
        return yy + t * flux.wave_speed(np.asarray(u0(yy), dtype=float) * np.ones_like(yy))

    return CharacteristicFlow(y, theta, float(t), bool(min_slope > margin), min_slope,
                              theta_fn)


def shock_time(flux: Flux, u0: Callable, y_grid) -> float:
    """``1 / max(0, sup -d a(u0) / dy)`` from forward differences; ``inf``
    when ``a(u0)`` is nondecreasing on the grid."""
    y = np.asarray(y_grid, dtype=float)
    a = flux.wave_speed(np.asarray(u0(y), dtype=float) * np.ones_like(y))
    steep = float(np.max(-np.diff(a) / np.diff(y)))
    return math.inf if steep <= 0 else 1.0 / steep


def _invert(flow, x, tol, max_iter):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    th, y = flow.theta, flow.y_grid
    i = np.clip(np.searchsorted(th, x, side="right") - 1, 0, len(th) - 2)
    a, b = y[i].copy(), y[i + 1].copy()
    ta, tb = th[i], th[i + 1]
    if flow.theta_fn is None or flow.time == 0.0:
        w = np.where(tb > ta, (x - ta) / np.where(tb > ta, tb - ta, 1.0), 0.0)
        out = a + w * (b - a)
        if flow.time == 0.0:
            out = x.copy()
        resid = np.zeros_like(x)
    else:
        out = np.empty_like(x)
        resid = np.full_like(x, np.inf)
        active = np.ones(x.shape, dtype=bool)
        for _ in range(max_iter):
            mid = 0.5 * (a + b)
            g = flow.theta_fn(mid) - x
            done = active & (np.abs(g) <= tol)
            out[done] = mid[done]
            resid[done] = np.abs(g[done])
            active &= ~done
            if not active.any():
                break
            left = g < 0
            a = np.where(active & left, mid, a)
            b = np.where(active & ~left, mid, b)
        if active.any():
            mid = 0.5 * (a + b)
            out[active] = mid[active]
            resid[active] = np.abs(flow.theta_fn(mid) - x)[active]
    hit_a = ta == x
    hit_b = tb == x
    out = np.where(hit_a, y[i], np.where(hit_b, y[i + 1], out))
    resid = np.where(hit_a | hit_b, 0.0, resid)
    return out, resid


def invert_flow(flow: CharacteristicFlow, x, tol: float = INVERSION_TOL,
                max_iter: int = MAX_BISECTIONS):
    """The ``y`` with ``theta_t(y) = x``: the grid cell is found by binary
    search, then the exact map is bisected inside it (linear interpolation
    when no exact map is attached)."""
    if not flow.monotone:
        raise NonMonotone(f"flow at t={flow.time} is not monotone "
                          f"(min slope {flow.min_slope:.3e})")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < flow.theta[0]) or np.any(xa > flow.theta[-1]):
        raise OutOfRange(f"x outside the image [{flow.theta[0]}, {flow.theta[-1]}]")
    y, _ = _invert(flow, xa, tol, max_iter)
    return float(y[0]) if xa.ndim == 0 else y


def transported_samples(flux: Flux, u0: Callable, t: float, y_grid) -> SampledFunction:
    """The continuous solution at the matched points ``theta_t(y_i)``: its
    values are ``u0(y_i)`` exactly."""
    flow = characteristic_flow(flux, u0, t, y_grid)
    if not flow.monotone:
        raise ShockReached(f"characteristics cross before t={t}")
    values = np.asarray(u0(flow.y_grid), dtype=float) * np.ones_like(flow.y_grid)
    return SampledFunction(flow.theta, values)


def evolve_continuous(flux: Flux, u0: Callable, t: float, x_grid, *,
                      support=(0.0, 1.0), left_state=None, right_state=None,
                      y_grid=None, tol: float = INVERSION_TOL) -> EvolutionResult:
    """Continuous solution ``u(t, x) = u0(theta_t^{-1}(x))`` for initial data
    that is constant outside ``support``.

    Left of the image of the support the solution is ``left_state``, right
    of it ``right_state`` (both default to ``u0`` at the support ends).
    """
    lo, hi = support
    if y_grid is None:
        y_grid = np.linspace(lo, hi, 4001)
    flow = characteristic_flow(flux, u0, t, y_grid)
    if not flow.monotone:
        raise ShockReached(f"characteristics cross before t={t} "
                           f"(min slope {flow.min_slope:.3e})")
    left = float(u0(np.float64(lo))) if left_state is None else float(left_state)
    right = float(u0(np.float64(hi))) if right_state is None else float(right_state)
    x = np.asarray(x_grid, dtype=float)
    u = np.empty_like(x)
    u[x < flow.theta[0]] = left
    u[x > flow.theta[-1]] = right
    inside = (x >= flow.theta[0]) & (x <= flow.theta[-1])
    resid = 0.0
    if inside.any():
        y, r = _invert(flow, x[inside], tol, MAX_BISECTIONS)
        u[inside] = np.asarray(u0(y), dtype=float) * np.ones_like(y)
        resid = float(np.max(r))
    return EvolutionResult(SampledFunction(x, u), float(t), tol, resid)


def evolve_periodic(flux: Flux, u0: Callable, t: float, x, period: float = 1.0,
                    samples_per_period: int = 4096, tol: float = INVERSION_TOL):
    """Values of the continuous solution with ``period``-periodic data at
    arbitrary ``x``; raises :class:`ShockReached` past the first crossing."""
    y = np.linspace(0.0, period, samples_per_period + 1)
    flow = characteristic_flow(flux, u0, t, y)
    if not flow.monotone:
        raise ShockReached(f"periodic characteristics cross before t={t}")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        return np.asarray(u0(x), dtype=float) * np.ones_like(x)
    speeds = flow.theta - flow.y_grid
    a = x - float(np.max(speeds)) - period / samples_per_period
    b = x - float(np.min(speeds)) + period / samples_per_period
    ga = flow.theta_fn(a) - x
    gb = flow.theta_fn(b) - x
    if np.any(ga > 0) or np.any(gb < 0):
        raise ShockReached("could not bracket a characteristic foot")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (a + b)
        g = flow.theta_fn(mid) - x
        if np.max(np.abs(g)) <= tol:
            a = b = mid
            break
        left = g < 0
        a = np.where(left, mid, a)
        b = np.where(left, b, mid)
    foot = 0.5 * (a + b)
    return np.asarray(u0(foot), dtype=float) * np.ones_like(foot)


# ---------------------------------------------------------------------------
# Godunov


def _critical_points(flux, order):
    grid = flux.domain.grid(2001)
    return np.asarray(_sign_change_roots(lambda u: flux.derivative(u, order), grid))


def godunov_flux(flux: Flux, ul, ur, crit=None):
    """Exact Riemann flux: min of f over [ul, ur] if ul <= ur, else max over [ur, ul]."""
    ul = np.asarray(ul, dtype=float)
    ur = np.asarray(ur, dtype=float)
    if crit is None:
        crit = _critical_points(flux, 1)
    fl, fr = flux(ul), flux(ur)
    rising = ul <= ur
    F = np.where(rising, np.minimum(fl, fr), np.maximum(fl, fr))
    lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
    for c in crit:
        fc = float(flux(c))
        inside = (lo <= c) & (c <= hi)
        F = np.where(inside & rising, np.minimum(F, fc), F)
        F = np.where(inside & ~rising, np.maximum(F, fc), F)
    return F


def _max_speed(flux, lo, hi, infl):
    pts = np.concatenate([np.linspace(lo, hi, 65), infl[(infl >= lo) & (infl <= hi)]])
    return float(np.max(np.abs(flux.wave_speed(pts))))


def godunov_solve(flux: Flux, u0: SampledFunction, t_end: float, config: GodunovConfig,
                  diagnostics: list | None = None, frames: int = 0) -> SampledFunction:
    """First-order Godunov approximation of the entropy solution at ``t_end``.

    Initial cell values are ``u0`` interpolated at the cell centres of
    ``config``. Each step uses ``dt = cfl * dx / max|f'|`` over the current
    range of values. When ``diagnostics`` is a list, rows
    ``(t, min, max, mass)`` are appended at ``t = 0``, at ``frames`` evenly
    spaced times and at ``t_end``.
    """
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    x = config.centers()
    n = len(x)
    dx = config.domain.width / n
    u = u0.interpolate(x)
    if not np.all(flux.domain.contains(u, 1e-12 * flux.domain.width)):
        raise DomainError("initial data leaves the flux domain")
    crit = _critical_points(flux, 1)
    infl = _critical_points(flux, 2) if flux.max_order >= 2 else np.array([])
    periodic = config.boundary == "periodic"

    speed0 = _max_speed(flux, float(u.min()), float(u.max()), infl)
    if speed0 > 0 and t_end * speed0 / (config.cfl * dx) > config.max_steps:
        raise StepTooSmall(f"about {t_end * speed0 / (config.cfl * dx):.3g} steps needed, "
                           f"ceiling {config.max_steps}")

    def record(t):
        if diagnostics is not None:
            diagnostics.append((t, float(u.min()), float(u.max()), math.fsum((u * dx).tolist())))

    next_frame = [t_end * k / frames for k in range(1, frames)] if frames > 1 else []
    record(0.0)
    t = 0.0
    steps = 0
    while t < t_end:
        speed = _max_speed(flux, float(u.min()), float(u.max()), infl)
        dt = t_end - t if speed == 0 else min(config.cfl * dx / speed, t_end - t)
        if periodic:
            ext = np.concatenate([u[-1:], u, u[:1]])
        else:
            ext = np.concatenate([u[:1], u, u[-1:]])
        F = godunov_flux(flux, ext[:-1], ext[1:], crit)
        u = u - (dt / dx) * (F[1:] - F[:-1])
        t = t_end if t + dt >= t_end else t + dt
        steps += 1
        if steps > config.max_steps:
            raise StepTooSmall(f"exceeded {config.max_steps} steps before t={t_end}")
        while next_frame and t >= next_frame[0]:
            next_frame.pop(0)
            record(t)
    if t_end > 0:
        record(t)
    return SampledFunction(x, u)


# ---------------------------------------------------------------------------
# distances


def _common_grid(f, g):
    lo = max(f.abscissae[0], g.abscissae[0])
    hi = min(f.abscissae[-1], g.abscissae[-1])
    if not hi > lo:
        raise EmptyOverlap("sampled functions have disjoint domains")
    x = np.union1d(f.abscissae, g.abscissae)
    x = x[(x >= lo) & (x <= hi)]
    return x, f.interpolate(x), g.interpolate(x)


def l1_distance(f: SampledFunction, g: SampledFunction) -> float:
    x, a, b = _common_grid(f, g)
    d = np.abs(a - b)
    return float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(x)))


def linf_distance(f: SampledFunction, g: SampledFunction) -> float:
    _, a, b = _common_grid(f, g)
    return float(np.max(np.abs(a - b)))

"""The two optimality constructions.

* Continuous ``BV^s`` solutions: initial data ``u_bar + delta g(x)`` built on
  the oscillator ``g(x) = x**b cos(pi / x**c)`` and transported by
  characteristics while they stay ordered.
* Supercritical geometric optics: ``u_bar + eps U0(x / eps**d)`` near a
  state where the flux degeneracy ``d`` is attained, compared with the
  profile equation ``U_t + b (U**(1+d))_theta = 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, NoAdmissibleDelta, ShockReached
from .flux import Flux, degeneracy_at, smooth_degeneracy
from .transport import (EvolutionResult, GodunovConfig, characteristic_flow,
                        evolve_continuous, evolve_periodic, godunov_solve, shock_time)
from .variation import SampledFunction, gagliardo_seminorm_periodic, tv_s

__all__ = [
    "OscillatorParams",
    "ChengData",
    "WkbConfig",
    "ScalingReport",
    "oscillator",
    "oscillator_extrema",
    "oscillator_amplitudes",
    "cheng_y_grid",
    "cheng_initial_data",
    "cheng_solution",
    "select_delta",
    "build_wkb_config",
    "wkb_initial",
    "profile_evolve",
    "wkb_reconstruct",
    "wkb_residual",
    "powerlaw_oscillation",
    "sobolev_scaling_sweep",
    "fit_loglog",
]

DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)


# ---------------------------------------------------------------------------
# the oscillator g


@dataclass(frozen=True)
class OscillatorParams:
    s: float
    eta: float

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if not 0 < self.eta < 1 - self.s:
            raise ValueError("eta must lie in (0, 1 - s)")

    @property
    def b(self):
        return self.s + self.s ** 2 / self.eta

    @property
    def c(self):
        return self.s / self.eta


def oscillator(params: OscillatorParams, x):
    """``g(x) = x**b cos(pi / x**c)`` on ``[0, 1]`` with ``g(0) = 0``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise DomainError("oscillator is defined on [0, 1]")
    pos = xa > 0
    safe = np.where(pos, xa, 1.0)
    g = np.where(pos, safe ** params.b * np.cos(np.pi / safe ** params.c), 0.0)
    return float(g) if xa.ndim == 0 else g


def oscillator_extrema(params: OscillatorParams, N: int):
    """Points ``x_k = k**(-1/c)``, ``k = 1..N`` (decreasing), where
    ``cos(pi / x**c) = (-1)**k``, and ``g(x_k) = (-1)**k x_k**b``."""
    if N < 1:
        raise ValueError("N must be positive")
    k = np.arange(1, N + 1, dtype=float)
    xk = k ** (-1.0 / params.c)
    return xk, np.where(k % 2 == 0, 1.0, -1.0) * xk ** params.b


def oscillator_amplitudes(params: OscillatorParams, N: int):
    """``|g(x_{k+1}) - g(x_k)|`` for ``k = 1..N``."""
    _, gk = oscillator_extrema(params, N + 1)
    return np.abs(np.diff(gk))


def cheng_y_grid(params: OscillatorParams, n: int = 20_000, per_period: int = 20):
    """About ``n`` points of ``[0, 1]``: half uniform, half uniform in the phase
    ``pi / y**c`` so the oscillations near 0 get ``per_period`` points each."""
    half = n // 2
    uniform = np.linspace(0.0, 1.0, n - half)
    phase = np.pi + (2 * np.pi / per_period) * np.arange(1, half + 1)
    clustered = (np.pi / phase) ** (1.0 / params.c)
    return np.unique(np.concatenate([uniform, clustered]))


# ---------------------------------------------------------------------------
# continuous BV^s solutions


@dataclass(frozen=True, eq=False)
class ChengData:
    """Initial data ``u_bar + delta g`` on ``[0, 1]``, ``u_bar`` to the left and
    ``u_bar - delta`` to the right.

    ``orientation`` is 0 for an interior base state. At a boundary state
    the one-sided variant ``u_bar + orientation * delta * |g|`` is used
    (``orientation = +1`` at the lower end, ``-1`` at the upper end).
    """

    flux: Flux
    base_state: float
    delta: float
    params: OscillatorParams
    target_T: float
    certified_T_delta: float
    monotonicity_margin: float
    orientation: int = 0

    @property
    def left_state(self):
        return self.base_state

    @property
    def right_state(self):
        if self.orientation:
            return self.base_state + self.orientation * self.delta
        return self.base_state - self.delta

    def u0(self, x):
        return cheng_initial_data(self, x)


def cheng_initial_data(data: ChengData, x):
    xa = np.asarray(x, dtype=float)
    inner = np.clip(xa, 0.0, 1.0)
    g = oscillator(data.params, inner)
    if data.orientation:
        bump = data.orientation * data.delta * np.abs(g)
    else:
        bump = data.delta * g
    u = np.where(xa < 0, data.base_state,
                 np.where(xa > 1, data.right_state, data.base_state + bump))
    return float(u) if xa.ndim == 0 else u


def select_delta(flux: Flux, base_state: float, params: OscillatorParams, T: float,
                 margin: float = 1e-6, n_times: int = 32, y_grid=None,
                 max_halvings: int = 1100) -> ChengData:
    """Largest ``delta`` of the form ``delta_max / 2**k`` for which every flow
    ``theta_t``, ``t`` in a ``n_times``-point grid of ``[0, T]``, has minimum
    forward slope above ``margin`` on ``y_grid``.

    ``certified_T_delta`` is the time at which the grid slope would reach
    ``margin``: slopes are affine in ``t``, so it is exact for the grid.

    The certificate is only as good as ``y_grid``. Oscillations of ``g``
    below the finest resolved scale are not seen. When ``d b < 1 + c``
    (for instance Burgers with ``s = 1/2``) the true slope is unbounded
    below near 0 and no ``delta > 0`` makes the exact flow monotone.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    flux.check_domain(base_state, "base state")
    lo, hi = flux.domain.lo, flux.domain.hi
    if y_grid is None:
        y_grid = cheng_y_grid(params)
    y = np.asarray(y_grid, dtype=float)
    g = oscillator(params, y)
    if lo < base_state < hi:
        orientation = 0
        delta = min((hi - base_state) / max(g.max(), 1e-300),
                    (base_state - lo) / max(-g.min(), 1e-300))
    else:
        orientation = 1 if base_state <= lo else -1
        room = hi - base_state if orientation > 0 else base_state - lo
        delta = room / np.abs(g).max()
    times = np.linspace(0.0, T, n_times) if T > 0 else np.array([0.0])

    for _ in range(max_halvings):
        data = ChengData(flux, base_state, delta, params, T, math.inf, margin, orientation)
        ok = True
        for t in times:
            flow = characteristic_flow(flux, data.u0, float(t), y, margin=margin)
            if flow.min_slope <= margin:
                ok = False
                break
        if ok:
            a = flux.wave_speed(data.u0(y))
            steep = float(np.max(-np.diff(a) / np.diff(y)))
            t_delta = math.inf if steep <= 0 else (1.0 - margin) / steep
            return ChengData(flux, base_state, delta, params, T, t_delta, margin,
                             orientation)
        delta *= 0.5
        if delta == 0.0:
            break
    raise NoAdmissibleDelta(f"no delta certifies monotone characteristics up to T={T}")


def cheng_solution(data: ChengData, t: float, x_grid, y_grid=None) -> EvolutionResult:
    """``u(t, .)`` on ``x_grid`` by characteristics."""
    if y_grid is None:
        y_grid = cheng_y_grid(data.params)
    return evolve_continuous(data.flux, data.u0, t, x_grid, support=(0.0, 1.0),
                             left_state=data.left_state, right_state=data.right_state,
                             y_grid=y_grid)


# ---------------------------------------------------------------------------
# supercritical geometric optics


def _sine_profile(amplitude):
    def U0(theta):
        return amplitude * np.sin(2 * np.pi * np.asarray(theta, dtype=float))
    return U0


@dataclass(frozen=True, eq=False)
class WkbConfig:
    flux: Flux
    base_state: float
    d: int
    lam: float
    b_coeff: float
    profile_u0: Callable
    epsilons: tuple
    T: float
    profile_shock_time: float
    profile_flux: Flux = field(repr=False, default=None)

    def check_eps(self, eps):
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if not any(math.isclose(eps, e, rel_tol=1e-12) for e in self.epsilons):
            raise ValueError(f"eps={eps} is not one of the configured {self.epsilons}")


def build_wkb_config(flux: Flux, base_state=None, profile=None, amplitude=None,
                     epsilons=DEFAULT_EPSILONS, T=None, T_fraction: float = 0.8,
                     samples: int = 20_000) -> WkbConfig:
    """Assemble a :class:`WkbConfig`.

    Without ``base_state`` the maximiser of the smooth degeneracy is used.
    The default profile is ``A sin(2 pi theta)`` with ``A`` the largest
    amplitude keeping ``u_bar + eps U0`` inside the flux domain for
    ``eps <= 1``. ``T`` defaults to ``T_fraction`` times the profile shock
    time.
    """
    if base_state is None:
        d, base_state = smooth_degeneracy(flux)
    else:
        d = degeneracy_at(flux, base_state)
    if not math.isfinite(d):
        raise ValueError("flux is linear at the base state (infinite degeneracy)")
    lam = float(flux.derivative(base_state, 1))
    b = float(flux.derivative(base_state, 1 + d)) / math.factorial(1 + d)
    if b == 0.0:
        raise ValueError("leading Taylor coefficient vanishes")
    if profile is None:
        if amplitude is None:
            amplitude = min(flux.domain.hi - base_state, base_state - flux.domain.lo)
        profile = _sine_profile(amplitude)
    theta = np.linspace(0.0, 1.0, samples + 1)
    U = np.asarray(profile(theta), dtype=float) * np.ones_like(theta)
    for eps in epsilons:
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        flux.check_domain(base_state + eps * U, f"u_bar + {eps} U0")
    span = max(float(np.max(np.abs(U))), 1e-12)
    pflux = Flux.polynomial([0.0] * (1 + d) + [b], (-1.01 * span, 1.01 * span))
    t_star = shock_time(pflux, profile, theta)
    if T is None:
        T = T_fraction * t_star if math.isfinite(t_star) else 1.0
    if not T < t_star:
        raise ValueError(f"T={T} is not below the profile shock time {t_star}")
    return WkbConfig(flux, float(base_state), int(d), lam, b, profile,
                     tuple(float(e) for e in epsilons), float(T), t_star, pflux)


def wkb_initial(config: WkbConfig, eps: float, x):
    config.check_eps(eps)
    xa = np.asarray(x, dtype=float)
    u = config.base_state + eps * np.asarray(config.profile_u0(xa / eps ** config.d),
                                             dtype=float) * np.ones_like(xa)
    config.flux.check_domain(u, "wkb initial value")
    return float(u) if xa.ndim == 0 else u


def _profile_values(config, t, theta):
    if t >= config.profile_shock_time:
        raise ShockReached(f"t={t} is past the profile shock time "
                           f"{config.profile_shock_time}")
    return evolve_periodic(config.profile_flux, config.profile_u0, t, theta)


def profile_evolve(config: WkbConfig, t: float, theta_grid) -> SampledFunction:
    """``U(t, .)`` for the profile equation, by periodic characteristics."""
    theta = np.asarray(theta_grid, dtype=float)
    return SampledFunction(theta, _profile_values(config, t, theta))


def wkb_reconstruct(config: WkbConfig, eps: float, t: float, x_grid) -> SampledFunction:
    """``u_bar + eps U(t, (x - lambda t) / eps**d)``."""
    config.check_eps(eps)
    x = np.asarray(x_grid, dtype=float)
    if t == 0.0:
        return SampledFunction(x, wkb_initial(config, eps, x))
    phase = (x - config.lam * t) / eps ** config.d
    U = _profile_values(config, t, phase)
    return SampledFunction(x, config.base_state + eps * U)


def wkb_residual(config: WkbConfig, eps: float, t: float, godunov: GodunovConfig):
    """Distance between the Godunov solution of the full equation started
    from :func:`wkb_initial` and :func:`wkb_reconstruct`.

    ``godunov.domain`` and ``godunov.dx`` are read in phase units: the
    physical window is ``eps**d`` times ``godunov.domain`` (whole periods,
    periodic boundary), so the resolution per period does not change with
    ``eps``. Returns ``(l1, linf, l1 / (eps * window length))`` with the
    cellwise L1 norm.
    """
    config.check_eps(eps)
    if t > config.T:
        raise ValueError(f"t={t} exceeds the configured T={config.T}")
    P = eps ** config.d
    phys = GodunovConfig(dx=godunov.dx * P, cfl=godunov.cfl,
                         domain=(godunov.domain.lo * P, godunov.domain.hi * P),
                         boundary="periodic", max_steps=godunov.max_steps)
    x = phys.centers()
    start = SampledFunction(x, wkb_initial(config, eps, x))
    num = godunov_solve(config.flux, start, t, phys)
    ref = wkb_reconstruct(config, eps, t, x)
    h = phys.domain.width / len(x)
    diff = np.abs(num.values - ref.values)
    l1 = float(np.sum(diff) * h)
    return l1, float(np.max(diff)), l1 / (eps * phys.domain.width)


def powerlaw_oscillation(p: float, eps: float, profile_u0: Callable, t: float, x_grid,
                         cells: int = 2048, cfl: float = 0.9) -> SampledFunction:
    """``eps U(t, x / eps**p)`` with ``U`` the Godunov entropy solution of
    ``U_t + (|U|**(1+p))_theta = 0`` on one periodic cell ``[0, 1]``."""
    if not p >= 1:
        raise ValueError("p must be at least 1")
    x = np.asarray(x_grid, dtype=float)
    theta = x / eps ** p
    if t == 0.0:
        return SampledFunction(x, eps * np.asarray(profile_u0(theta), dtype=float))
    cfg = GodunovConfig(dx=1.0 / cells, cfl=cfl, domain=(0.0, 1.0), boundary="periodic")
    centers = cfg.centers()
    U0 = np.asarray(profile_u0(centers), dtype=float) * np.ones_like(centers)
    span = max(float(np.max(np.abs(U0))), 1e-12)
    flux = Flux.power_law(1.0 + p, (-span, span))
    U = godunov_solve(flux, SampledFunction(centers, U0), t, cfg)
    return SampledFunction(x, eps * np.interp(theta, U.abscissae, U.values, period=1.0))


# ---------------------------------------------------------------------------
# scaling sweep


def fit_loglog(xs, ys):
    """Slope, intercept and R**2 of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - float(resid @ resid) / sst)
    return float(slope), float(icpt), r2


@dataclass
class ScalingReport:
    rows: list            # (epsilon, s_prime, gagliardo, tvs), sorted by epsilon then s_prime
    slopes: dict          # s_prime -> {"gagliardo": (slope, r2), "tvs": (slope, r2)}
    t: float

    def slope(self, s_prime, what="gagliardo"):
        return self.slopes[s_prime][what][0]

    def fit_quality(self, s_prime, what="gagliardo"):
        return self.slopes[s_prime][what][1]


def _sweep_point(config, eps, s_primes, t, per_period):
    P = eps ** config.d
    dx = P / per_period
    n_total = int(round(1.0 / dx)) + 1
    phase = np.arange(per_period) / per_period - config.lam * t / P
    if t == 0.0:
        U = np.asarray(config.profile_u0(phase), dtype=float) * np.ones_like(phase)
    else:
        U = _profile_values(config, t, phase)
    F = config.base_state + eps * U
    values = F[np.arange(n_total) % per_period]
    out = []
    for sp in s_primes:
        if np.all(U == 0):
            out.append((eps, sp, 0.0, 0.0))
            continue
        gag = gagliardo_seminorm_periodic(F, n_total, dx, sp, 1.0)
        out.append((eps, sp, gag, tv_s(values, sp).value))
    return out


def sobolev_scaling_sweep(config: WkbConfig, s_primes, t: float, per_period: int = 256,
                          threads: int = 1) -> ScalingReport:
    """Gagliardo ``W^{s',1}`` seminorm and ``TV^{s'}`` of ``u^eps(t, .)`` on the
    window ``[0, 1]`` for every configured ``eps``, with log-log slopes in
    ``eps``.

    ``u^eps`` is sampled with ``per_period`` points per period ``eps**d``;
    the seminorm uses the periodic fast path of the product trapezoid rule.
    """
    s_primes = sorted(float(s) for s in s_primes)
    for sp in s_primes:
        if not 0 < sp < 1:
            raise ValueError("every s' must lie in (0, 1)")
    if t > config.T:
        raise ValueError(f"t={t} exceeds the configured T={config.T}")
    eps_list = sorted(config.epsilons)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda e: _sweep_point(config, e, s_primes, t, per_period),
                                  eps_list))
    else:
        parts = [_sweep_point(config, e, s_primes, t, per_period) for e in eps_list]
    rows = sorted((r for part in parts for r in part), key=lambda r: (r[0], r[1]))
    slopes = {}
    for sp in s_primes:
        sel = [r for r in rows if r[1] == sp]
        eps = [r[0] for r in sel]
        entry = {}
        for what, col in (("gagliardo", 2), ("tvs", 3)):
            vals = [r[col] for r in sel]
            if len(sel) >= 2 and all(v > 0 for v in vals):
                slope, _, r2 = fit_loglog(eps, vals)
                entry[what] = (slope, r2)
            else:
                entry[what] = (math.nan, math.nan)
        slopes[sp] = entry
    return ScalingReport(rows, slopes, float(t))

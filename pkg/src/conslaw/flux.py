"""Fluxes with exact derivative rules, and three ways of measuring how
nonlinear a flux is on a compact interval.

The three measures are

* the smooth degeneracy ``d``: the largest order of the first non-vanishing
  derivative ``f^(1+k)`` over the interval,
* the sublevel exponent ``alpha``: the power law ``C * delta**alpha`` that
  bounds the measure of ``{v : |tau + xi f'(v)| < delta}`` uniformly in the
  direction ``(tau, xi)``,
* the Hoelder degeneracy ``p``: the smallest ``p`` with
  ``inf |a(u) - a(v)| / |u - v|**p > 0`` where ``a = f'``.

For smooth fluxes ``alpha = 1/d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, FitDegenerate, OrderUnsupported, ValidationError

__all__ = [
    "Interval",
    "Flux",
    "LptProbe",
    "DegeneracyReport",
    "eval_flux",
    "flux_derivative",
    "derivative_rule_error",
    "smooth_degeneracy",
    "degeneracy_at",
    "lpt_measure",
    "lpt_alpha",
    "holder_degeneracy",
    "degeneracy_report",
    "parse_flux_spec",
]

MIN_WIDTH = 1e-12
DEFAULT_KMAX = 8
HOLDER_FLAT = 1e-14
HOLDER_P_MAX = 16.0


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if not self.hi - self.lo >= MIN_WIDTH:
            raise ValueError(f"degenerate interval [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    def contains(self, u, slack=0.0):
        u = np.asarray(u, dtype=float)
        return (u >= self.lo - slack) & (u <= self.hi + slack)

    def grid(self, n):
        """``n`` equispaced points; symmetric intervals contain 0 exactly
        when ``n`` is odd."""
        i = np.arange(n, dtype=float)
        return self.lo + self.width * i / (n - 1)


def _falling_factorial(e, k):
    out = 1.0
    for i in range(k):
        out *= e - i
    return out


@dataclass(frozen=True)
class Flux:
    """A flux ``f`` on ``domain`` together with its derivative rules.

    Use the constructors :meth:`power_law`, :meth:`polynomial` and
    :meth:`from_rules` rather than instantiating directly.
    """

    family: str
    domain: Interval
    exponent: float | None = None
    coeffs: tuple = ()
    rules: tuple = field(default=(), compare=False)
    name: str = ""

    # -- constructors ------------------------------------------------------

    @classmethod
    def power_law(cls, exponent, domain=(-1.0, 1.0)):
        """``f(u) = |u|**exponent``, i.e. ``|u|**(1 + p)`` with ``p = exponent - 1``."""
        exponent = float(exponent)
        if not exponent > 1.0:
            raise ValueError("power-law exponent must exceed 1")
        return cls("powerlaw", _as_interval(domain), exponent=exponent,
                   name=f"powerlaw({exponent:g})")

    @classmethod
    def polynomial(cls, coeffs, domain=(-1.0, 1.0)):
        """Polynomial with ascending coefficients, ``[0, 0, 0.5]`` is ``u**2/2``."""
        coeffs = tuple(float(c) for c in coeffs)
        if not coeffs:
            raise ValueError("polynomial needs at least one coefficient")
        label = ",".join(f"{c:g}" for c in coeffs)
        return cls("poly", _as_interval(domain), coeffs=coeffs, name=f"poly({label})")

    @classmethod
    def from_rules(cls, rules: Sequence[Callable], domain=(-1.0, 1.0), name="user",
                   validate=True):
        """User flux; ``rules[k]`` evaluates the k-th derivative (``rules[0] = f``).

        With ``validate`` every supplied rule is compared against a central
        difference of the rule below it.
        """
        if len(rules) < 2:
            raise ValueError("user flux needs f and at least f'")
        flux = cls("user", _as_interval(domain), rules=tuple(rules), name=name)
        if validate:
            for k in range(1, len(rules)):
                err = derivative_rule_error(flux, k)
                if err > 1e-5:
                    raise ValueError(
                        f"derivative rule of order {k} disagrees with finite "
                        f"differences (relative error {err:.2e})")
        return flux

    # -- evaluation --------------------------------------------------------

    @property
    def max_order(self):
        if self.family == "user":
            return len(self.rules) - 1
        return math.inf

    @property
    def label(self):
        return self.name or self.family

    def __call__(self, u):
        return self.derivative(u, 0)

    def derivative(self, u, k):
        """k-th derivative, vectorised, without domain checks."""
        if k > self.max_order:
            raise OrderUnsupported(
                f"{self.label} provides derivatives up to order {self.max_order}, "
                f"order {k} requested")
        u = np.asarray(u, dtype=float)
        if self.family == "poly":
            return Polynomial(self.coeffs).deriv(k)(u) if k else Polynomial(self.coeffs)(u)
        if self.family == "powerlaw":
            return self._power_derivative(u, k)
        return np.asarray(self.rules[k](u), dtype=float) * np.ones_like(u)

    def _power_derivative(self, u, k):
        e = self.exponent
        coef = _falling_factorial(e, k)
        if coef == 0.0:
            return np.zeros_like(u)
        r = e - k
        au = np.abs(u)
        sign = np.where(u < 0, -1.0, 1.0) ** k
        with np.errstate(divide="ignore", invalid="ignore"):
            body = np.where(au > 0, au ** r, 0.0 if r > 0 else (1.0 if r == 0 else np.inf))
        return coef * sign * body

    def wave_speed(self, u):
        return self.derivative(u, 1)

    def check_domain(self, u, what="state"):
        u = np.asarray(u, dtype=float)
        slack = 1e-12 * self.domain.width
        if not np.all(self.domain.contains(u, slack)):
            bad = u[~self.domain.contains(u, slack)].ravel()[0]
            raise DomainError(
                f"{what} {bad!r} outside flux domain [{self.domain.lo}, {self.domain.hi}]")

    def with_domain(self, domain):
        return Flux(self.family, _as_interval(domain), self.exponent, self.coeffs,
                    self.rules, self.name)

    def add_linear(self, slope, offset=0.0):
        """Flux ``f(u) + slope*u + offset``; degeneracy ``d`` is unchanged by this."""
        if self.family == "poly":
            c = list(self.coeffs) + [0.0] * max(0, 2 - len(self.coeffs))
            c[0] += offset
            c[1] += slope
            return Flux.polynomial(c, (self.domain.lo, self.domain.hi))
        base = self

        def rule(k):
            if k == 0:
                return lambda u: base.derivative(u, 0) + slope * np.asarray(u) + offset
            if k == 1:
                return lambda u: base.derivative(u, 1) + slope
            return lambda u: base.derivative(u, k)

        order = DEFAULT_KMAX + 2 if base.max_order == math.inf else base.max_order
        return Flux.from_rules([rule(k) for k in range(order + 1)],
                               (self.domain.lo, self.domain.hi),
                               name=f"{self.label}+linear", validate=False)


def _as_interval(domain):
    if isinstance(domain, Interval):
        return domain
    lo, hi = domain
    return Interval(float(lo), float(hi))


@dataclass(frozen=True)
class LptProbe:
    """Direction ``(tau, xi)`` (normalised to the unit circle) and band ``delta``."""

    tau: float
    xi: float
    delta: float

    def __post_init__(self):
        norm = math.hypot(self.tau, self.xi)
        if norm == 0.0:
            raise ValueError("direction (tau, xi) must be nonzero")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        object.__setattr__(self, "tau", self.tau / norm)
        object.__setattr__(self, "xi", self.xi / norm)


@dataclass(frozen=True)
class DegeneracyReport:
    d: float
    base_state: float
    alpha_fit: float
    alpha_intercept: float
    p_holder: float
    consistent: bool | None = None

    def as_row(self, flux_id):
        return {"flux_id": flux_id, "d": self.d, "base_state": self.base_state,
                "alpha": self.alpha_fit, "C": self.alpha_intercept,
                "p_holder": self.p_holder}


# ---------------------------------------------------------------------------
# plain evaluation


def eval_flux(flux: Flux, u: float) -> float:
    flux.check_domain(u)
    return float(flux(u))


def flux_derivative(flux: Flux, u: float, k: int) -> float:
    if k < 1:
        raise ValueError("derivative order must be positive")
    flux.check_domain(u)
    return float(flux.derivative(u, k))


def derivative_rule_error(flux: Flux, k: int, grid=None, h=1e-4) -> float:
    """Largest relative mismatch between the order-``k`` rule and a central
    difference of the order ``k-1`` rule on an interior grid.

    The power law is sampled away from 0 where it is not smooth.
    """
    if grid is None:
        lo, hi = flux.domain.lo, flux.domain.hi
        pad = max(4 * h, 1e-3 * flux.domain.width)
        grid = np.linspace(lo + pad, hi - pad, 101)
        if flux.family == "powerlaw":
            grid = grid[np.abs(grid) > max(0.05 * flux.domain.width, 10 * h)]
    grid = np.asarray(grid, dtype=float)
    exact = flux.derivative(grid, k)
    fd = (flux.derivative(grid + h, k - 1) - flux.derivative(grid - h, k - 1)) / (2 * h)
    scale = max(np.max(np.abs(exact)), np.finfo(float).tiny)
    return float(np.max(np.abs(exact - fd)) / scale)


# ---------------------------------------------------------------------------
# sign changes and monotone pieces


def _bisect_root(fn, a, b, fa, iters=200):
    for _ in range(iters):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        fm = float(fn(m))
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _sign_change_roots(fn, grid):
    """Roots of ``fn`` bracketed by strict sign changes between grid nodes,
    plus nodes where ``fn`` vanishes exactly between opposite signs."""
    vals = np.asarray(fn(grid), dtype=float)
    sgn = np.sign(vals)
    roots = []
    for i in range(len(grid) - 1):
        if sgn[i] * sgn[i + 1] < 0:
            roots.append(_bisect_root(fn, grid[i], grid[i + 1], vals[i]))
    # exact zeros at nodes separating opposite signs
    nz = np.flatnonzero(sgn != 0)
    for j0, j1 in zip(nz[:-1], nz[1:]):
        if j1 > j0 + 1 and sgn[j0] != sgn[j1]:
            roots.append(float(grid[(j0 + j1) // 2]))
    return sorted(roots)


# ---------------------------------------------------------------------------
# smooth degeneracy d


def _first_nonvanishing_order(flux, points, kmax, zero_tol):
    m = np.full(points.shape, np.inf)
    residual = np.zeros(points.shape)
    for k in range(1, kmax + 1):
        dk = np.asarray(flux.derivative(points, 1 + k), dtype=float)
        finite = np.isfinite(dk)
        scale = np.max(np.abs(dk[finite])) if finite.any() else 0.0
        nonzero = ~finite | (np.abs(dk) > zero_tol * scale) if scale > 0 else ~finite
        newly = nonzero & np.isinf(m)
        m[newly] = k
        still = np.isinf(m)
        if scale > 0:
            residual[still] += np.abs(dk[still]) / scale
    return m, residual


def smooth_degeneracy(flux: Flux, kmax: int = DEFAULT_KMAX, grid_size: int = 201,
                      zero_tol: float = 1e-10):
    """Return ``(d, base_state)``.

    ``d = max_u min{k >= 1 : f^(1+k)(u) != 0}`` over a grid of the domain
    refined with the sign changes of ``f''``; a derivative counts as zero
    when it is below ``zero_tol`` times its largest magnitude on the grid.
    ``d`` is ``math.inf`` when some point has all orders up to ``kmax``
    vanishing. Among maximisers the most degenerate point wins.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    if flux.max_order < 1 + kmax:
        raise OrderUnsupported(
            f"smooth degeneracy up to kmax={kmax} needs {1 + kmax} derivatives, "
            f"{flux.label} provides {flux.max_order}")
    grid = flux.domain.grid(grid_size)
    roots = _sign_change_roots(lambda u: flux.derivative(u, 2), grid)
    points = np.unique(np.concatenate([grid, np.asarray(roots, dtype=float)]))
    m, residual = _first_nonvanishing_order(flux, points, kmax, zero_tol)
    d = np.max(m)
    cand = np.flatnonzero(m == d)
    best = cand[np.argmin(residual[cand])]
    d = math.inf if not np.isfinite(d) else int(d)
    return d, float(points[best])


def degeneracy_at(flux: Flux, u: float, kmax: int = DEFAULT_KMAX, grid_size: int = 201,
                  zero_tol: float = 1e-10):
    """``min{k >= 1 : f^(1+k)(u) != 0}`` at one state, with the same relative
    zero test as :func:`smooth_degeneracy`; ``math.inf`` if none up to ``kmax``."""
    flux.check_domain(u)
    points = np.concatenate([flux.domain.grid(grid_size), [float(u)]])
    m, _ = _first_nonvanishing_order(flux, points, kmax, zero_tol)
    return math.inf if not np.isfinite(m[-1]) else int(m[-1])


# ---------------------------------------------------------------------------
# Lions-Perthame-Tadmor sublevel measure and alpha


def _monotone_pieces(flux, resolution):
    grid = flux.domain.grid(resolution)
    roots = _sign_change_roots(lambda u: flux.derivative(u, 2), grid)
    cuts = [flux.domain.lo] + [r for r in roots if flux.domain.lo < r < flux.domain.hi]
    cuts.append(flux.domain.hi)
    return list(zip(cuts[:-1], cuts[1:]))


def _bisect_boundary(h, a, b, pred, iters=100):
    """Vectorised bisection: ``pred(h(a)) False``, ``pred(h(b)) True``; returns
    the right end of the final bracket."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    for _ in range(iters):
        m = 0.5 * (a + b)
        ok = pred(h(m))
        b = np.where(ok, m, b)
        a = np.where(ok, a, m)
    return b, a


def _band_lengths(flux, tau, xi, deltas, pieces):
    deltas = np.asarray(deltas, dtype=float)
    total = np.zeros_like(deltas)
    for a, b in pieces:
        ha = tau + xi * float(flux.derivative(a, 1))
        hb = tau + xi * float(flux.derivative(b, 1))
        sign = 1.0 if hb >= ha else -1.0

        def h(v, sign=sign):
            return sign * (tau + xi * flux.derivative(v, 1))

        ha, hb = sign * ha, sign * hb
        empty = (hb <= -deltas) | (ha >= deltas)
        lo_inside = ha > -deltas
        hi_inside = hb < deltas
        v_lo = np.full_like(deltas, a)
        v_hi = np.full_like(deltas, b)
        need = ~empty & ~lo_inside
        if need.any():
            dl = deltas[need]
            right, _ = _bisect_boundary(h, np.full(dl.shape, a), np.full(dl.shape, b),
                                        lambda hv, dl=dl: hv > -dl)
            v_lo[need] = right
        need = ~empty & ~hi_inside
        if need.any():
            dh = deltas[need]
            _, left = _bisect_boundary(h, np.full(dh.shape, a), np.full(dh.shape, b),
                                       lambda hv, dh=dh: hv >= dh)
            v_hi[need] = left
        total += np.where(empty, 0.0, np.maximum(v_hi - v_lo, 0.0))
    return total


def lpt_measure(flux: Flux, probe: LptProbe, resolution: int = 2000) -> float:
    """Lebesgue measure of ``{v in K : |tau + xi f'(v)| < delta}``.

    ``v -> tau + xi f'(v)`` is split into monotone pieces at the sign
    changes of ``f''``; on each piece the band is one interval whose ends
    are found by bisection.
    """
    if resolution < 1000:
        raise ValueError("resolution must be at least 1000")
    pieces = _monotone_pieces(flux, resolution)
    return float(_band_lengths(flux, probe.tau, probe.xi, [probe.delta], pieces)[0])


def _directions(n):
    ang = 2 * np.pi * np.arange(n) / n
    dirs = [(math.cos(t), math.sin(t)) for t in ang]
    dirs += [(1.0, 0.0), (0.0, 1.0)]
    return dirs


def lpt_alpha(flux: Flux, deltas=None, directions: int = 64, resolution: int = 2000):
    """Fit ``log m(delta) = alpha log delta + log C`` where ``m`` is the worst
    sublevel measure over sampled directions. Returns ``(alpha, C)``."""
    if deltas is None:
        deltas = np.logspace(-4, -2, 5)
    deltas = np.sort(np.asarray(deltas, dtype=float))
    if len(deltas) < 4 or deltas[-1] / deltas[0] < 100 * (1 - 1e-12):
        raise ValueError("need at least 4 deltas spanning 2 decades")
    pieces = _monotone_pieces(flux, resolution)
    worst = np.zeros_like(deltas)
    for tau, xi in _directions(directions):
        worst = np.maximum(worst, _band_lengths(flux, tau, xi, deltas, pieces))
    full = flux.domain.width
    usable = (worst > 0) & (worst < full * (1 - 1e-12))
    if usable.sum() < 2:
        raise FitDegenerate(
            f"sublevel measures of {flux.label} are all zero or saturated: {worst.tolist()}")
    slope, intercept = np.polyfit(np.log(deltas[usable]), np.log(worst[usable]), 1)
    return float(slope), float(math.exp(intercept))


# ---------------------------------------------------------------------------
# Hoelder degeneracy p


def holder_degeneracy(flux: Flux, grid_size: int = 2001, p_tol: float = 1e-3) -> float:
    """Smallest ``p`` with ``inf |a(u)-a(v)| / |u-v|**p > 0``, or ``math.inf``.

    On a grid every strictly monotone ``a`` gives a positive pairwise
    minimum for every ``p``, so the criterion used is scale-resolved: with
    ``q_j(p) = min_i |a(u_{i+j}) - a(u_i)| / (j h)**p``, ``p`` is admissible
    when the minimum of ``q_j`` over a band of fine separations does not
    drop below its minimum over a band ten times coarser (the pairwise
    minimum stays bounded away from zero as the scale shrinks). The
    smallest admissible ``p`` in ``[1, 16]`` is located by bisection.

    A non-monotone ``a`` on the grid, or one whose consecutive differences
    are at rounding level, gives ``math.inf``.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    u = flux.domain.grid(grid_size)
    a = np.asarray(flux.derivative(u, 1), dtype=float)
    da = np.diff(a)
    spread = float(np.max(a) - np.min(a))
    if spread == 0.0 or not (np.all(da > 0) or np.all(da < 0)):
        return math.inf
    if np.min(np.abs(da)) <= HOLDER_FLAT * spread:
        return math.inf

    h = flux.domain.width / (grid_size - 1)
    j1 = max(1, grid_size // 250)
    fine = np.arange(j1, 2 * j1 + 1)
    coarse = np.arange(10 * j1, 20 * j1 + 1)
    coarse = coarse[coarse < grid_size]

    def log_min_diff(js):
        return np.array([math.log(np.min(np.abs(a[j:] - a[:-j]))) for j in js])

    lm_f, lm_c = log_min_diff(fine), log_min_diff(coarse)
    lr_f, lr_c = np.log(fine * h), np.log(coarse * h)

    def admissible(p):
        return np.min(lm_f - p * lr_f) >= np.min(lm_c - p * lr_c) - 1e-9

    if admissible(1.0):
        return 1.0
    if not admissible(HOLDER_P_MAX):
        return math.inf
    lo, hi = 1.0, HOLDER_P_MAX
    while hi - lo > p_tol:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------


def degeneracy_report(flux: Flux, kmax: int = DEFAULT_KMAX) -> DegeneracyReport:
    """Run all three analysers with default resolutions."""
    d, base = smooth_degeneracy(flux, kmax=kmax)
    try:
        alpha, c = lpt_alpha(flux)
    except FitDegenerate:
        alpha, c = math.nan, math.nan
    p = holder_degeneracy(flux)
    consistent = None
    if math.isfinite(d) and math.isfinite(alpha):
        consistent = abs(alpha * d - 1.0) <= 0.1
    return DegeneracyReport(d=d, base_state=base, alpha_fit=alpha, alpha_intercept=c,
                            p_holder=p, consistent=consistent)


# ---------------------------------------------------------------------------
# text specs: "family=powerlaw exponent=3.0 domain=-1,1"


def _floats(text):
    return [float(t) for t in str(text).replace(" ", "").split(",") if t != ""]


def parse_flux_spec(spec) -> Flux:
    """Build a flux from ``key=value`` tokens (a string) or a mapping.

    Raises :class:`ValidationError` naming every bad or missing field.
    """
    if isinstance(spec, str):
        params = {}
        for tok in spec.split():
            if "=" not in tok:
                raise ValidationError([f"flux token {tok!r} is not key=value"])
            k, v = tok.split("=", 1)
            params[k.strip()] = v.strip()
    else:
        params = {k: str(v) for k, v in dict(spec).items()}

    problems = []
    family = params.get("family")
    domain = (-1.0, 1.0)
    if "domain" in params:
        try:
            vals = _floats(params["domain"])
            if len(vals) != 2 or not vals[1] - vals[0] >= MIN_WIDTH:
                raise ValueError
            domain = (vals[0], vals[1])
        except ValueError:
            problems.append(f"flux.domain: expected 'lo,hi' with lo < hi, got {params['domain']!r}")
    if family is None:
        problems.append("flux.family: missing (powerlaw or poly)")
    elif family == "powerlaw":
        if "exponent" not in params:
            problems.append("flux.exponent: missing for powerlaw family")
        else:
            try:
                e = float(params["exponent"])
                if not e > 1:
                    problems.append(f"flux.exponent: must exceed 1, got {e}")
            except ValueError:
                problems.append(f"flux.exponent: not a number: {params['exponent']!r}")
    elif family == "poly":
        if "coeffs" not in params:
            problems.append("flux.coeffs: missing for poly family")
        else:
            try:
                if not _floats(params["coeffs"]):
                    problems.append("flux.coeffs: empty")
            except ValueError:
                problems.append(f"flux.coeffs: not a number list: {params['coeffs']!r}")
    else:
        problems.append(f"flux.family: unknown family {family!r}")
    if problems:
        raise ValidationError(problems)
    if family == "powerlaw":
        return Flux.power_law(float(params["exponent"]), domain)
    return Flux.polynomial(_floats(params["coeffs"]), domain)

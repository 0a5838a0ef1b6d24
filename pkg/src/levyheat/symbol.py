"""Characteristic exponent, its monotone majorant and the scale functions.

For a radial jump density ``nu(y) = f(|y|)`` the exponent

    Phi(u) = int (1 - cos<u, y>) nu(y) dy

depends on ``|u|`` only. It is computed as a one-dimensional cosine integral
against the marginal ``m(s) = int nu(s, w) dw`` of ``nu`` along one axis
(``m = f`` when ``d = 1``). The table built from it provides the running
maximum ``Psi``, its rightmost inverse ``Psi_-``, and the space scales
``h(t) = 1/Psi_-(1/t)`` and ``H(t) = g^{-1}(1/t)`` with ``g(s) = s^d f(s)``.
"""

from __future__ import annotations

import csv
import functools
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import _integrands
from .errors import NumericalError, RangeError
from .fitting import FittedConstant, extremum, fit_constant, log_grid
from .profiles import LevyProfile, sphere_area

_EPSREL = 1e-11
# multiplier decay exp(-TRUNCATION_DECAY) required at the dual truncation radius
TRUNCATION_DECAY = 40.0


# Marginal density -----------------------------------------------------------------


def _marginal_value(profile: LevyProfile, s: float) -> float:
    f = lambda r: float(profile.f(r))  # noqa: E731
    d = profile.dim
    if d == 2:
        # rho = s sinh(w) turns the planar fibre integral into a smooth one
        g = lambda w: f(s * math.cosh(w)) * s * math.cosh(w)  # noqa: E731
        w_star = math.acosh(1.0 / s) if s < 1.0 else None
        w_max = 40.0
    else:
        # d = 3: the fibre integral collapses to int_s^inf f(r) r dr; r = s e^w
        g = lambda w: f(s * math.exp(w)) * (s * math.exp(w)) ** 2  # noqa: E731
        w_star = -math.log(s) if s < 1.0 else None
        w_max = 80.0
    if w_star is not None and w_star < w_max:
        val = integrate.quad(g, 0.0, w_star, epsrel=1e-12, limit=200)[0] + integrate.quad(g, w_star, w_max, epsrel=1e-12, limit=200)[0]
    else:
        val = integrate.quad(g, 0.0, w_max, epsrel=1e-12, limit=200)[0]
    return 2.0 * val if d == 2 else 2.0 * math.pi * val


@functools.lru_cache(maxsize=32)
def _density_buffer(profile: LevyProfile) -> tuple[np.ndarray, float]:
    """Compiled-integrand buffer for the axis marginal and its negligibility radius."""
    if profile.dim == 1 and profile.family != "custom":
        buf = profile.buffer()
        far = _far_radius(profile)
        return buf, far
    lo = 1e-8
    hi = 1e2
    if profile.dim == 1:
        values = lambda s: profile.f(s)  # noqa: E731
    else:
        values = lambda s: np.array([_marginal_value(profile, v) for v in s])  # noqa: E731
    # extend the upper end until the marginal is negligible; power tails never
    # become negligible and are continued by the end power law instead
    far = math.inf
    while hi < 1e8:
        v = values(np.array([hi]))[0]
        if not np.isfinite(v) or v * hi < 1e-30:
            far = hi
            break
        hi *= 10.0
    s = log_grid(lo, hi, 32)
    m = values(s)
    positive = m > 1e-300
    if not positive.all():
        last = int(np.argmin(positive))
        s, m = s[: max(last, 8)], m[: max(last, 8)]
        far = float(s[-1])
    return _integrands.pack_loglog_spline(s, m), far


def _far_radius(profile: LevyProfile) -> float:
    """Radius beyond which the tempered tail is below double precision (inf for power tails)."""
    if profile.m <= 0:
        return math.inf
    r = max(2.0, (60.0 / profile.m) ** (1.0 / profile.beta))
    while profile.m * (r**profile.beta - 1.0) + (profile.dim + profile.eta) * math.log(r) < 80.0:
        r *= 1.5
    return r


def _quad(fn, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, **kw)


def _panels(a: float, b: float) -> np.ndarray:
    """Edges splitting ``[a, b]`` into pieces spanning at most one decade.

    Extrapolating adaptive quadrature is unreliable on intervals covering
    many decades with an integrable singularity just outside the left end.
    """
    if a <= 0.0 or b / a <= 10.0:
        return np.array([a, b])
    return np.geomspace(a, b, int(math.ceil(math.log10(b / a))) + 1)


def _panel_quad(fn, a: float, b: float, args: tuple, **kw) -> float:
    edges = _panels(a, b)
    return sum(_quad(fn, lo, hi, args=args, epsabs=0.0, epsrel=_EPSREL, limit=400, **kw)[0] for lo, hi in zip(edges[:-1], edges[1:]))


def _cos_tail(fn, a: float, b: float, u: float) -> float:
    """``int_a^b m(s) ds - int_a^b m(s) cos(u s) ds`` with ``b`` possibly infinite."""
    if not math.isinf(b):
        return _panel_quad(fn, a, b, (1.0, u)) - _panel_quad(fn, a, b, (1.0, u), weight="cos", wvar=u)
    # masses in the variable w = log(s/a), one decade per panel, so power tails decay exponentially
    step = math.log(10.0)
    masses = np.array([_quad(fn, k * step, (k + 1) * step, args=(2.0, a), epsabs=0.0, epsrel=_EPSREL, limit=400)[0] for k in range(90)])
    mass = float(masses.sum())
    if u * a < 1e6:
        osc = _quad(fn, a, np.inf, args=(1.0, u), weight="cos", wvar=u, epsabs=max(1e-13 * mass, 1e-300), limlst=200, limit=400)[0]
        return mass - osc
    # QAWF breaks down at very high frequency: sum decade panels until the
    # remaining mass (an upper bound for the neglected cosine part) is negligible
    remaining = mass - np.cumsum(masses)
    n_panels = int(np.argmax(remaining <= 1e-15 * mass)) + 1
    edges = a * np.power(10.0, np.arange(n_panels + 1))
    osc = sum(_quad(fn, lo, hi, args=(1.0, u), weight="cos", wvar=u, epsabs=0.0, epsrel=_EPSREL, limit=400)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    return mass - osc


def compute_symbol(profile: LevyProfile, u: float) -> float:
    """Characteristic exponent ``Phi(u)`` by direct quadrature.

    The integral ``2 int_0^inf (1 - cos(u s)) m(s) ds`` is split at half a
    period ``pi/u``: below it ``1 - cos = 2 sin^2(u s/2)`` is integrated
    directly (no cancellation near 0); above it the smooth mass and the
    oscillatory cosine part are integrated separately.
    """
    u = abs(float(u))
    if u == 0.0:
        return 0.0
    buf, far = _density_buffer(profile)
    fn = _integrands.low_level(_integrands.symbol_integrand, buf)
    half = math.pi / u
    total = 0.0
    if half > 1.0:
        total += _quad(fn, 0.0, 1.0, args=(0.0, u), epsabs=0.0, epsrel=_EPSREL, limit=400)[0]
        total += _panel_quad(fn, 1.0, min(half, far), (0.0, u))
        if half < far:
            total += _cos_tail(fn, half, far, u)
    else:
        total += _quad(fn, 0.0, half, args=(0.0, u), epsabs=0.0, epsrel=_EPSREL, limit=400)[0]
        total += _cos_tail(fn, half, 1.0, u)
        total += _cos_tail(fn, 1.0, far, u)
    val = 2.0 * total
    if not np.isfinite(val) or val < 0:
        raise NumericalError(f"symbol quadrature failed at u={u}")
    return val


def stable_constant(alpha: float, dim: int) -> float:
    """``C`` with ``int (1 - cos<u,y>) |y|^(-d-alpha) dy = C |u|^alpha``."""
    return math.pi ** (dim / 2) * math.gamma(1 - alpha / 2) / (alpha * 2 ** (alpha - 1) * math.gamma((dim + alpha) / 2))


# Table ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymbolTable:
    """Tabulated ``Phi`` and derived scale functions for one profile.

    Build with :func:`build_symbol_table`. ``Phi`` is interpolated by a cubic
    spline in log-log coordinates (power-law extrapolation outside the
    nodes); ``Psi`` is the running maximum of the samples, interpolated
    monotonically.
    """

    profile: LevyProfile
    u: np.ndarray
    phi_values: np.ndarray
    psi_values: np.ndarray
    phi_buffer: np.ndarray
    t_min: float
    t_max: float
    t0: float
    per_decade: int
    _psi_interp: PchipInterpolator = field(repr=False)
    _phi_interp: CubicSpline = field(repr=False)

    # Phi ----------------------------------------------------------------------
    def phi(self, u) -> np.ndarray:
        """Interpolated ``Phi(|u|)`` (vectorized, power-law extrapolation)."""
        u = np.abs(np.asarray(u, dtype=float))
        out = np.zeros_like(u)
        pos = u > 0
        lu = np.log(u[pos])
        lo, hi = math.log(self.u[0]), math.log(self.u[-1])
        slope_lo, slope_hi = self.phi_buffer[4], self.phi_buffer[5]
        val = np.where(
            lu < lo,
            math.log(self.phi_values[0]) + slope_lo * (lu - lo),
            np.where(lu > hi, math.log(self.phi_values[-1]) + slope_hi * (lu - hi), self._phi_interp(np.clip(lu, lo, hi))),
        )
        out[pos] = np.exp(val)
        return out

    # Psi ----------------------------------------------------------------------
    def psi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r < self.u[0] * (1 - 1e-12)) or np.any(r > self.u[-1] * (1 + 1e-12)):
            raise RangeError("psi argument outside the tabulated range; widen the table")
        lr = np.clip(np.log(r), math.log(self.u[0]), math.log(self.u[-1]))
        return np.exp(self._psi_interp(lr))

    def psi_inverse(self, s) -> np.ndarray:
        """Rightmost preimage ``sup{r : Psi(r) = s}`` by bisection."""
        s = np.asarray(s, dtype=float)
        if np.any(s < self.psi_values[0] * (1 - 1e-12)) or np.any(s > self.psi_values[-1] * (1 + 1e-12)):
            raise RangeError("psi_inverse argument outside the tabulated range; widen the table")
        ls = np.log(np.clip(s, self.psi_values[0], self.psi_values[-1]))
        logpsi = np.log(self.psi_values)
        lu = np.log(self.u)
        idx = np.clip(np.searchsorted(logpsi, ls, side="right") - 1, 0, self.u.size - 2)
        lo = lu[idx]
        hi = lu[idx + 1]
        # on a flat run ending at idx the answer is the run end itself
        exact = logpsi[idx] == ls
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self._psi_interp(mid) <= ls
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = np.where(exact & (self._psi_interp(lu[idx] + 1e-12) > ls), lu[idx], lo)
        return np.exp(out)

    # scales -------------------------------------------------------------------
    def h(self, t) -> np.ndarray:
        """``h(t) = 1/Psi_-(1/t)``."""
        t = np.asarray(t, dtype=float)
        return 1.0 / self.psi_inverse(1.0 / t)

    def g(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.exp(self.profile.dim * np.log(s) + self.profile.log_f(s))

    @functools.cached_property
    def _H_switch(self) -> tuple[float, float]:
        t_c = 1.0 / float(self.g(2.0))
        eps = 1e-6
        slope = (2.0 - float(self._g_inverse(np.array([1.0 / (t_c * (1 - eps))]))[0])) / (t_c * eps)
        return t_c, slope

    def _g_inverse(self, v: np.ndarray) -> np.ndarray:
        lv = np.log(v)
        lo = np.full(v.shape, math.log(1e-300))
        hi = np.full(v.shape, math.log(2.0))
        d = self.profile.dim
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = d * mid + self.profile.log_f(np.exp(mid))
            above = gm > lv
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
            if np.all(hi - lo < 1e-15):
                break
        return np.exp(0.5 * (lo + hi))

    def g_inverse(self, v) -> np.ndarray:
        """Inverse of the decreasing ``g(s) = s^d f(s)`` on (0, 2]."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return self._g_inverse(v)

    def H(self, t) -> np.ndarray:
        """``H(t) = g^{-1}(1/t)`` for ``t <= 1/g(2)``, extended linearly beyond."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        t_c, slope = self._H_switch
        out = np.empty_like(t)
        small = t <= t_c
        out[small] = self._g_inverse(1.0 / t[small]) if small.any() else out[small]
        out[~small] = 2.0 + slope * (t[~small] - t_c)
        return out[0] if scalar else out

    def truncation_radius(self, t: float, decay: float = TRUNCATION_DECAY, extrapolate: bool = False) -> float:
        """Frequency ``U`` with ``t Phi(U) >= decay`` (multiplier below ``e^-decay``).

        With ``extrapolate`` the symbol is continued beyond the table by its
        end power law (the small-jump regime); otherwise a table that does not
        reach the decay raises :class:`NumericalError`.
        """
        s = decay / t
        if s <= self.psi_values[-1]:
            return float(self.psi_inverse(max(s, self.psi_values[0])))
        if s <= self.psi_values[-1] * (1 + 1e-12):
            return float(self.u[-1])
        if not extrapolate:
            raise NumericalError(
                f"exp(-t Phi) has not decayed to exp(-{decay:g}) within the symbol table at t={t:g}; "
                "rebuild the table with a larger u_max or smaller t_min"
            )
        return float(self.u[-1] * (s / self.psi_values[-1]) ** (1.0 / self.high_slope))

    @property
    def high_slope(self) -> float:
        """Log-log slope of ``Phi`` at the upper end of the table (the small-scale stability index)."""
        return float(self.phi_buffer[5])

    def psi_extended(self, r) -> np.ndarray:
        """``Psi`` continued by the end power laws outside the tabulated range."""
        r = np.asarray(r, dtype=float)
        lo, hi = self.u[0], self.u[-1]
        inner = self.psi(np.clip(r, lo, hi))
        above = self.psi_values[-1] * (np.maximum(r, hi) / hi) ** self.high_slope
        below = self.psi_values[0] * (np.minimum(r, lo) / lo) ** float(self.phi_buffer[4])
        return np.where(r > hi, above, np.where(r < lo, below, inner))

    def t_grid(self, per_decade: int | None = None) -> np.ndarray:
        return log_grid(self.t_min, self.t_max, per_decade or self.per_decade)

    # export -------------------------------------------------------------------
    def dump_rows(self) -> list[tuple[str, float, float]]:
        rows: list[tuple[str, float, float]] = []
        rows += [("phi", float(a), float(b)) for a, b in zip(self.u, self.phi_values)]
        rows += [("psi", float(a), float(b)) for a, b in zip(self.u, self.psi_values)]
        svals = np.unique(self.psi_values)
        rows += [("psi_inv", float(a), float(b)) for a, b in zip(svals, self.psi_inverse(svals))]
        tg = self.t_grid()
        h_ok = (1.0 / tg >= self.psi_values[0]) & (1.0 / tg <= self.psi_values[-1])
        rows += [("h", float(a), float(b)) for a, b in zip(tg[h_ok], self.h(tg[h_ok]))]
        rows += [("H", float(a), float(b)) for a, b in zip(tg, self.H(tg))]
        sg = log_grid(1e-4, 2.0, self.per_decade)
        rows += [("g", float(a), float(b)) for a, b in zip(sg, self.g(sg))]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["quantity", "argument", "value"])
        for q, a, v in self.dump_rows():
            w.writerow([q, repr(a), repr(v)])
        return buf.getvalue()


def _phi_samples(profile: LevyProfile, u: np.ndarray) -> np.ndarray:
    return np.array([compute_symbol(profile, v) for v in u])


@functools.lru_cache(maxsize=32)
def build_symbol_table(
    profile: LevyProfile,
    per_decade: int = 128,
    u_min: float = 1e-4,
    u_max: float = 1e4,
    t_min: float = 1e-4,
    t_max: float = 10.0,
    t0: float = 1.0,
) -> SymbolTable:
    """Tabulate ``Phi`` on a log grid and derive the envelope and scales.

    The frequency range is widened by whole decades until ``h`` is defined on
    ``[t_min, t_max]`` and the multiplier ``exp(-t Phi)`` has decayed below
    ``exp(-TRUNCATION_DECAY)`` inside the table for every ``t >= t_min``, i.e.
    ``Psi(u_min) <= 1/t_max`` and ``Psi(u_max) >= TRUNCATION_DECAY/t_min``.
    """
    lo_exp, hi_exp = math.log10(u_min), math.log10(u_max)
    phi_lo = compute_symbol(profile, 10.0**lo_exp)
    while phi_lo > 0.5 / t_max and lo_exp > -12:
        lo_exp -= 1
        phi_lo = compute_symbol(profile, 10.0**lo_exp)
    phi_hi = compute_symbol(profile, 10.0**hi_exp)
    while phi_hi < 1.05 * TRUNCATION_DECAY / t_min and hi_exp < 18:
        hi_exp += 1
        phi_hi = compute_symbol(profile, 10.0**hi_exp)
    u = np.logspace(lo_exp, hi_exp, int(round((hi_exp - lo_exp) * per_decade)) + 1)
    phi = _phi_samples(profile, u)
    psi = np.maximum.accumulate(phi)
    lu = np.log(u)
    buf = _integrands.pack_loglog_spline(u, phi)
    return SymbolTable(
        profile=profile,
        u=u,
        phi_values=phi,
        psi_values=psi,
        phi_buffer=buf,
        t_min=t_min,
        t_max=t_max,
        t0=t0,
        per_decade=per_decade,
        _psi_interp=PchipInterpolator(lu, np.log(psi), extrapolate=True),
        _phi_interp=CubicSpline(lu, np.log(phi)),
    )


# Module-level operations -------------------------------------------------------------


def psi_sup(table: SymbolTable, r: float) -> float:
    return float(table.psi(r))


def psi_inverse(table: SymbolTable, s: float) -> float:
    return float(table.psi_inverse(s))


def scale_h(table: SymbolTable, t: float) -> float:
    return float(table.h(t))


def scale_H(table: SymbolTable, t: float) -> float:
    return float(table.H(t))


# Property checks ------------------------------------------------------------------


def _two_sided(name: str, ratio_fn, grids: tuple[np.ndarray, np.ndarray], coord: str, tol: float = 0.1):
    r0, r1 = ratio_fn(grids[0]), ratio_fn(grids[1])
    lo0, wl, ex = extremum(r0, "lower", {coord: grids[0]})
    hi0, wh, _ = extremum(r0, "upper", {coord: grids[0]})
    lo1, _, _ = extremum(r1, "lower")
    hi1, _, _ = extremum(r1, "upper")
    return (
        FittedConstant(name + "_lower", "lower", lo0, lo1, wl, tol, ex),
        FittedConstant(name + "_upper", "upper", hi0, hi1, wh, tol, ex),
    )


def _refined_grid(lo: float, hi: float, per_decade: int) -> tuple[np.ndarray, np.ndarray]:
    return log_grid(lo, hi, per_decade), log_grid(lo, hi, 2 * per_decade)


def check_asymptotic_psi(table: SymbolTable, per_decade: int = 16) -> tuple[FittedConstant, FittedConstant]:
    """``Psi(r) ~ r^-d f(1/r)`` on ``[1/2, r_max]``."""
    d = table.profile.dim
    grids = _refined_grid(0.5, table.u[-1], per_decade)
    return _two_sided("asymptotic_psi", lambda r: table.psi(r) / (r ** (-d) * table.profile.f(1.0 / r)), grids, "r")


def _h_range(table: SymbolTable, T: float | None = None) -> tuple[float, float]:
    lo = max(table.t_min, 1.0 / table.psi_values[-1])
    hi = min(T or table.t0, table.t_max, 1.0 / table.psi_values[0])
    return lo, hi


def check_h_vs_H(table: SymbolTable, T: float | None = None, per_decade: int = 16):
    """``h(t) ~ H(t)`` on ``(t_min, T)``."""
    lo, hi = _h_range(table, T)
    return _two_sided("h_over_H", lambda t: table.h(t) / table.H(t), _refined_grid(lo, hi, per_decade), "t")


def check_doubling_h(table: SymbolTable, T: float | None = None, per_decade: int = 8):
    """Two-sided power bounds on ``h(R)/h(r)`` for ``r <= R <= T``."""
    p = table.profile
    lo, hi = _h_range(table, T)

    def scan(expo):
        def run(level):
            t = log_grid(lo, hi, per_decade * (1 + level))
            hv = table.h(t)
            ii, jj = np.triu_indices(t.size)
            return (hv[jj] / hv[ii]) * (t[ii] / t[jj]) ** expo, {"r": t[ii], "R": t[jj]}

        return run

    lower = fit_constant("doubling_h_lower", "lower", scan(1.0 / p.alpha2))
    upper = fit_constant("doubling_h_upper", "upper", scan(1.0 / p.alpha1))
    return lower, upper


def check_f_of_h(table: SymbolTable, per_decade: int = 16):
    """``f(h(t)) ~ t^-1 h(t)^-d`` on ``(t_min, 1/Psi(1/2))``."""
    d = table.profile.dim
    lo, _ = _h_range(table)
    hi = min(1.0 / float(table.psi(0.5)), table.t_max)
    return _two_sided("f_of_h", lambda t: table.profile.f(table.h(t)) * t * table.h(t) ** d, _refined_grid(lo, hi, per_decade), "t")


def truncated_second_moment(profile: LevyProfile, r: float) -> float:
    """``int (1 ^ |r y|^2) nu(y) dy``."""
    d = profile.dim
    f = lambda s: float(profile.f(s)) * s ** (d - 1)  # noqa: E731
    inner = _quad(lambda s: (r * s) ** 2 * f(s), 0.0, 1.0 / r, epsrel=1e-10, limit=400, points=[1.0] if r > 1 else None)[0]
    outer = _quad(f, 1.0 / r, np.inf, epsrel=1e-10, limit=400)[0]
    return sphere_area(d) * (inner + outer)


def check_psi_moment(table: SymbolTable, per_decade: int = 8):
    """``Psi(r) ~ int (1 ^ |r u|^2) nu(u) du`` over the tabulated range."""
    ratio = lambda r: table.psi(r) / np.array([truncated_second_moment(table.profile, v) for v in r])  # noqa: E731
    return _two_sided("psi_moment", ratio, _refined_grid(max(table.u[0], 1e-3), min(table.u[-1], 1e3), per_decade), "r")


def check_lower_phi(table: SymbolTable, per_decade: int = 16) -> FittedConstant:
    """``Psi(r) >= (1 - cos 1) c r^alpha1`` for ``r >= 1``; returns the fitted ``c``."""
    a1 = table.profile.alpha1
    ratio = lambda r: table.psi(r) / ((1 - math.cos(1.0)) * r**a1)  # noqa: E731
    return _two_sided("lower_phi", ratio, _refined_grid(1.0, table.u[-1], per_decade), "r")[0]


def _h_power_integral(table: SymbolTable, a: float, b: float, lo: float, hi: float, n: int = 400) -> float:
    """``int_lo^hi s^a h(s)^-b ds`` on a log grid (``lo`` may sit below the table)."""
    t_lo = max(lo, table.t_min)
    s = np.geomspace(t_lo, hi, n)
    vals = s ** (a + 1) * table.h(s) ** (-b)
    total = float(integrate.trapezoid(vals, np.log(s)))
    if lo < t_lo:
        # below the table h follows the local power law at t_min
        k = math.log(float(table.h(2 * t_lo) / table.h(t_lo))) / math.log(2.0)
        expo = a + 1 - b * k
        if expo <= 0:
            return math.inf
        total += vals[0] / expo * (1 - (lo / t_lo) ** expo)
    return total


def check_h_integrals(table: SymbolTable, T: float | None = None, per_decade: int = 8) -> dict[str, FittedConstant]:
    """Fitted constants for the integral bounds on ``int s^a h(s)^-b ds``.

    Parameter pairs ``(a, b)`` in ``{(1, 0), (0, d), (1, d)}``; the lower-end
    bounds are tested when ``a - b/alpha1 + 1 > 0``, the upper-end bounds when
    ``a - b/alpha2 + 1 < 0``.
    """
    p = table.profile
    d = p.dim
    lo_t, hi_t = _h_range(table, T)
    T_val = hi_t
    out: dict[str, FittedConstant] = {}
    for a, b in ((1.0, 0.0), (0.0, float(d)), (1.0, float(d))):
        tag = f"a{a:g}_b{b:g}"
        lower_ok = a - b / p.alpha1 + 1 > 0
        upper_ok = a - b / p.alpha2 + 1 < 0
        r_lo = min(lo_t * 100, T_val / 10)

        def ratio_IL1(r):
            return np.array([_h_power_integral(table, a, b, 0.0, v) / (v ** (a + 1) * table.h(v) ** (-b)) for v in r])

        def ratio_IU1(r):
            return np.array([_h_power_integral(table, a, b, v, T_val) / (v ** (a + 1) * table.h(v) ** (-b)) for v in r])

        grids = _refined_grid(r_lo, T_val, per_decade)
        if lower_ok:
            out["IL1_" + tag] = _two_sided("IL1_" + tag, ratio_IL1, grids, "r")[1]
        if upper_ok:
            out["IU1_" + tag] = _two_sided("IU1_" + tag, ratio_IU1, grids, "r")[1]
        # second pair: r = 1/Psi(1/s), s in (0, h(T))
        s_hi = float(table.h(T_val))
        s_lo = max(1.0 / table.u[-1], float(table.h(r_lo)))
        sgrids = _refined_grid(s_lo, s_hi * (1 - 1e-9), per_decade)

        def crossover(s):
            return 1.0 / table.psi(1.0 / s)

        def ratio_IL2(s):
            rr = crossover(s)
            return np.array([_h_power_integral(table, a, b, 0.0, v) for v in rr]) / (table.psi(1.0 / s) ** (-a - 1) * s ** (-b))

        def ratio_IU2(s):
            rr = crossover(s)
            return np.array([_h_power_integral(table, a, b, v, T_val) for v in rr]) / (table.psi(1.0 / s) ** (-a - 1) * s ** (-b))

        if lower_ok:
            out["IL2_" + tag] = _two_sided("IL2_" + tag, ratio_IL2, sgrids, "s")[1]
        if upper_ok:
            out["IU2_" + tag] = _two_sided("IU2_" + tag, ratio_IU2, sgrids, "s")[1]
    return out

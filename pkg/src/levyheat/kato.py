"""Potentials, the potential kernel ``V_t^a`` and Kato-class membership.

``V_t^a(x) = (int_0^t p(s, x)^a ds)^(1/a)`` is tabulated once per symbol
table, exponent ``a`` and time sequence (:class:`PotentialKernel`). Below the
smallest tabulated radius it is continued by its small-distance form
``B + A rho^kappa`` (``B + C log(1/rho)`` when ``kappa = 0``) with
``kappa = alpha - a d`` read off the high-frequency end of the symbol, so
local integrability of ``V |q|`` at a power singularity is decided
analytically instead of by a finite scan.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, DomainError, InconsistencyError, ScopeWarning
from .fitting import FittedConstant, extremum, log_grid, loglog_slope
from .free_kernel import NOISE_FLOOR, radial_density, refine_table
from .profiles import sphere_area
from .symbol import SymbolTable

FORMS = ("constant", "power_well", "indicator_well", "grid_sampled", "custom")


# Potentials ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Potential:
    """A real potential ``q`` on ``R^d``.

    Parameters
    ----------
    form
        One of ``constant``, ``power_well`` (``value |x|^-gamma 1{|x| <= radius}``),
        ``indicator_well`` (``value 1{|x| <= radius}``), ``grid_sampled``
        (piecewise-linear samples on ``[-radius, radius]``, ``d = 1``) or
        ``custom`` (a callable of the radius ``|x|`` with support radius
        ``radius``).
    value
        Constant, well depth or power-well coefficient; may be negative.
    """

    form: str
    dim: int = 1
    value: float = 1.0
    gamma: float = 0.0
    radius: float = math.inf
    samples: np.ndarray | None = field(default=None, repr=False)
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = ""

    def __post_init__(self) -> None:
        if self.form not in FORMS:
            raise ConfigurationError(f"unknown potential form {self.form!r}; expected one of {FORMS}")
        if self.dim not in (1, 2, 3):
            raise ConfigurationError("potential dimension must be 1, 2 or 3")
        if self.form == "power_well" and not self.gamma >= 0:
            raise ConfigurationError(f"power well exponent must be nonnegative, got {self.gamma}")
        if self.form in ("power_well", "indicator_well", "grid_sampled", "custom") and not (self.radius > 0 and math.isfinite(self.radius)):
            raise ConfigurationError(f"{self.form} potentials need a finite positive support radius")
        if self.form == "grid_sampled":
            if self.samples is None or self.dim != 1 or np.asarray(self.samples).ndim != 1 or np.asarray(self.samples).size < 2:
                raise ConfigurationError("grid_sampled potentials take a 1-d array of at least two samples (d = 1)")
        if self.form == "custom" and self.func is None:
            raise ConfigurationError("custom potentials need a callable")

    # values -----------------------------------------------------------------
    def radial(self, r) -> np.ndarray:
        """``q`` at points with ``|x| = r`` (radial forms only)."""
        r = np.abs(np.asarray(r, dtype=float))
        if self.form == "constant":
            return np.full(r.shape, float(self.value))
        inside = r <= self.radius
        if self.form == "power_well":
            with np.errstate(divide="ignore"):
                return np.where(inside, self.value * r ** (-self.gamma), 0.0)
        if self.form == "indicator_well":
            return np.where(inside, float(self.value), 0.0)
        if self.form == "custom":
            return np.where(inside, np.asarray(self.func(np.where(inside, r, 0.0)), dtype=float), 0.0)
        raise ConfigurationError("grid_sampled potentials are not radial")

    def __call__(self, x) -> np.ndarray:
        """``q(x)``; in ``d = 1`` ``x`` is an array of coordinates, otherwise points stack on the last axis."""
        x = np.asarray(x, dtype=float)
        if self.form == "grid_sampled":
            s = np.asarray(self.samples, dtype=float)
            nodes = np.linspace(-self.radius, self.radius, s.size)
            return np.interp(x, nodes, s, left=0.0, right=0.0)
        r = np.abs(x) if self.dim == 1 else np.linalg.norm(x, axis=-1)
        return self.radial(r)

    @property
    def locally_integrable(self) -> bool:
        return not (self.form == "power_well" and self.gamma >= self.dim and self.value != 0)

    @property
    def support_radius(self) -> float:
        return math.inf if self.form == "constant" else float(self.radius)

    @property
    def is_zero(self) -> bool:
        if self.form == "grid_sampled":
            return not np.any(np.asarray(self.samples))
        return self.value == 0.0 and self.form != "custom"

    def sup_abs(self) -> float:
        """``sup |q|`` (infinite for singular wells)."""
        if self.form == "power_well":
            return math.inf if self.gamma > 0 and self.value != 0 else abs(self.value)
        if self.form == "grid_sampled":
            return float(np.max(np.abs(self.samples)))
        if self.form == "custom":
            r = np.linspace(0.0, self.radius, 2001)
            return float(np.max(np.abs(self.radial(r))))
        return abs(float(self.value))

    def local_exponent(self, center) -> float:
        """Exponent ``gamma`` of a power singularity at ``center`` (0 if ``q`` is bounded there)."""
        if self.form == "power_well" and float(np.linalg.norm(np.atleast_1d(center))) == 0.0:
            return self.gamma
        return 0.0

    def singular_points(self) -> list[float]:
        """Radii of singular or discontinuity sets (spheres centred at 0)."""
        if self.form == "constant":
            return []
        pts = [float(self.radius)]
        if self.form == "power_well":
            pts.append(0.0)
        return pts

    def dilate(self, kappa: float) -> "Potential":
        """``q(kappa x)``."""
        if not kappa > 0:
            raise DomainError("dilation factor must be positive")
        if self.form == "constant":
            return self
        if self.form == "power_well":
            return replace(self, value=self.value * kappa ** (-self.gamma), radius=self.radius / kappa, name=f"{self.name}@{kappa:g}")
        if self.form == "indicator_well":
            return replace(self, radius=self.radius / kappa, name=f"{self.name}@{kappa:g}")
        if self.form == "grid_sampled":
            return replace(self, radius=self.radius / kappa, name=f"{self.name}@{kappa:g}")
        base = self.func
        return replace(self, func=lambda r: base(kappa * np.asarray(r)), radius=self.radius / kappa, name=f"{self.name}@{kappa:g}")

    def cell_averages(self, axis: np.ndarray) -> np.ndarray:
        """Averages of ``q`` over the cells ``[x - dx/2, x + dx/2]^d`` of a uniform grid.

        Power singularities are averaged exactly (``d = 1``) so the origin
        cell holds a finite value.
        """
        axis = np.asarray(axis, dtype=float)
        dx = float(axis[1] - axis[0])
        if self.dim == 1:
            lo, hi = axis - dx / 2, axis + dx / 2
            if self.form == "constant":
                return np.full(axis.shape, float(self.value))
            if self.form in ("power_well", "indicator_well"):
                return (self._antiderivative(hi) - self._antiderivative(lo)) / dx
            nodes, weights = np.polynomial.legendre.leggauss(8)
            pts = axis[:, None] + 0.5 * dx * nodes[None, :]
            return (self(pts) * weights[None, :]).sum(axis=1) / 2.0
        nodes, weights = np.polynomial.legendre.leggauss(4)
        offs = 0.5 * dx * nodes
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        total = np.zeros(mesh[0].shape)
        for idx in np.ndindex(*([4] * self.dim)):
            pt = np.stack([m + offs[i] for m, i in zip(mesh, idx)], axis=-1)
            w = np.prod([weights[i] for i in idx])
            with np.errstate(divide="ignore"):
                val = self(pt)
            total += w * np.where(np.isfinite(val), val, 0.0)
        return total / 2.0**self.dim

    def _antiderivative(self, x: np.ndarray) -> np.ndarray:
        """``int_0^x q`` in ``d = 1`` for the radial well forms."""
        R = self.radius
        c = np.clip(x, -R, R)
        if self.form == "indicator_well":
            return self.value * c
        e = 1.0 - self.gamma
        if e <= 0:
            return self.value * np.sign(c) * np.inf
        return self.value * np.sign(c) * np.abs(c) ** e / e

    def describe(self) -> dict[str, Any]:
        out: dict[str, Any] = {"form": self.form, "dim": self.dim, "value": self.value, "name": self.name}
        if self.form == "power_well":
            out["gamma"] = self.gamma
        if self.form != "constant":
            out["radius"] = self.radius
        return out


def constant(c: float = 1.0, dim: int = 1) -> Potential:
    return Potential("constant", dim=dim, value=c, name=f"constant-{c:g}")


def power_well(gamma: float, radius: float = 1.0, dim: int = 1, value: float = 1.0) -> Potential:
    return Potential("power_well", dim=dim, value=value, gamma=gamma, radius=radius, name=f"power-{gamma:g}")


def indicator_well(depth: float, radius: float = 1.0, dim: int = 1) -> Potential:
    return Potential("indicator_well", dim=dim, value=depth, radius=radius, name=f"well-{depth:g}-{radius:g}")


def grid_sampled(samples: np.ndarray, radius: float) -> Potential:
    return Potential("grid_sampled", dim=1, samples=np.asarray(samples, dtype=float), radius=radius, name="sampled")


def shipped_potentials(dim: int = 1) -> dict[str, Potential]:
    """Potentials exercised by the default Kato suite."""
    qs = [constant(1.0, dim), indicator_well(2.0, 1.0, dim), power_well(0.5, 1.0, dim), power_well(0.25, 1.0, dim)]
    return {q.name: q for q in qs}


# Potential kernel ------------------------------------------------------------------


def _h_extended(table: SymbolTable, t: float) -> float:
    """``h(t)`` with the symbol continued by its end power laws."""
    s = 1.0 / t
    if table.psi_values[0] <= s <= table.psi_values[-1]:
        return float(table.h(t))
    if s > table.psi_values[-1]:
        return 1.0 / (table.u[-1] * (s / table.psi_values[-1]) ** (1.0 / table.high_slope))
    return 1.0 / (table.u[0] * (s / table.psi_values[0]) ** (1.0 / float(table.phi_buffer[4])))


def _crossover(table: SymbolTable, rho: float) -> float:
    """``1/Psi(1/rho)``: the time at which the kernel at distance ``rho`` leaves its jump regime."""
    return 1.0 / float(table.psi_extended(1.0 / rho))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _kernel_powers(table: SymbolTable, a: float, rho: float, times: np.ndarray, per_decade: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """``int_0^t p(s, rho)^a ds`` for every ``t`` in ``times``, with a trust flag.

    Below ``s_lo ~ 0.001/Psi(1/rho)`` the kernel is replaced by its jump
    asymptotics ``s f(rho)``; above it Gauss-Legendre panels whose edges lie
    on a fixed log grid (plus the requested times), so that the cached time
    cutoffs and moments are shared between radii. Kernel values under the
    inversion noise floor are clipped to it; an entry is untrusted when such
    values carry more than 1% of it.
    """
    d_times = np.asarray(times, dtype=float)
    f_rho = float(table.profile.f(rho))
    t_top = float(d_times.max())
    s_lo = 10.0 ** (math.floor(per_decade * math.log10(1e-3 * _crossover(table, rho))) / per_decade)
    out = f_rho**a * np.minimum(d_times, s_lo) ** (a + 1) / (a + 1)
    if s_lo >= t_top:
        return out, np.ones(d_times.size, dtype=bool)
    grid = 10.0 ** (np.arange(math.ceil(per_decade * math.log10(s_lo)), math.floor(per_decade * math.log10(t_top)) + 1) / per_decade)
    edges = np.unique(np.concatenate([grid[(grid > s_lo) & (grid < t_top)], d_times[d_times > s_lo], [s_lo, t_top]]))
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mids[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.array([radial_density(table, float(s), rho, extrapolate=True) for s in nodes.reshape(-1)]).reshape(nodes.shape)
    floor = NOISE_FLOOR * np.array([radial_density(table, float(s), 0.0, extrapolate=True) for s in nodes.reshape(-1)]).reshape(nodes.shape)
    low = vals < floor
    vals = np.where(low, np.minimum(np.maximum(vals, 0.0), floor), vals)
    panel = (vals**a * _GL_WEIGHTS[None, :]).sum(axis=1) * half
    noisy = (np.where(low, vals, 0.0) ** a * _GL_WEIGHTS[None, :]).sum(axis=1) * half
    cumulative = np.concatenate([[0.0], np.cumsum(panel)])
    cumulative_noise = np.concatenate([[0.0], np.cumsum(noisy)])
    trusted = np.ones(d_times.size, dtype=bool)
    for k, t in enumerate(d_times):
        if t > s_lo:
            j = int(np.searchsorted(edges, t * (1 + 1e-12), side="right") - 1)
            out[k] += cumulative[j]
            trusted[k] = cumulative_noise[j] <= 1e-2 * out[k]
    return out, trusted


@dataclass(frozen=True, eq=False)
class PotentialKernel:
    """Tabulated ``V_t^a(rho)^a`` on a log grid of radii for a decreasing time sequence."""

    table: SymbolTable
    a: float
    times: np.ndarray
    rho: np.ndarray
    powers: np.ndarray
    trusted: np.ndarray
    small_exponent: float
    small_models: tuple[tuple[str, float, float], ...]
    _splines: tuple[CubicSpline, ...] = field(repr=False)

    def index(self, t: float) -> int:
        k = np.flatnonzero(np.isclose(self.times, t, rtol=1e-12))
        if k.size == 0:
            raise DomainError(f"t={t} is not in the potential-kernel time sequence")
        return int(k[0])

    def power(self, k: int, rho) -> np.ndarray:
        """``V_{t_k}^a(rho)^a`` (vectorized, ``rho > 0``)."""
        rho = np.asarray(rho, dtype=float)
        lo, hi = self.rho[0], self.rho[-1]
        out = np.empty(rho.shape)
        mid = (rho >= lo) & (rho <= hi)
        out[mid] = np.exp(self._splines[k](np.log(rho[mid])))
        small = rho < lo
        if small.any():
            kind, b, c = self.small_models[k]
            r = rho[small]
            out[small] = b + c * (np.log(1.0 / r) if kind == "log" else r**self.small_exponent)
        large = rho > hi
        if large.any():
            t = self.times[k]
            out[large] = self.table.profile.f(rho[large]) ** self.a * t ** (self.a + 1) / (self.a + 1)
        return out

    def trusted_at(self, k: int, rho) -> np.ndarray:
        """Whether the tabulated value at ``rho`` is above the inversion noise (both neighbouring nodes)."""
        rho = np.asarray(rho, dtype=float)
        j = np.clip(np.searchsorted(self.rho, rho), 1, self.rho.size - 1)
        inside = self.trusted[k][j - 1] & self.trusted[k][j]
        return np.where((rho < self.rho[0]) | (rho > self.rho[-1]), True, inside)

    def value(self, k: int, rho) -> np.ndarray:
        """``V_{t_k}^a(rho)``."""
        rho = np.asarray(rho, dtype=float)
        out = np.maximum(self.power(k, rho), 0.0) ** (1.0 / self.a)
        large = rho > self.rho[-1]
        if large.any():
            out[large] = self.tail_factor(k) * self.table.profile.f(rho[large])
        return out

    def tail_factor(self, k: int) -> float:
        """``V_t^a(rho) / f(rho)`` for ``rho`` beyond the table."""
        t = self.times[k]
        return (t ** (self.a + 1) / (self.a + 1)) ** (1.0 / self.a)


def _warn_scope(table: SymbolTable, a: float) -> None:
    d = table.profile.dim
    if table.profile.alpha2 >= d:
        warnings.warn(f"alpha2 = {table.profile.alpha2:g} >= d = {d}: the potential-kernel comparisons assume alpha2 < d", ScopeWarning, stacklevel=3)
    if a > 2:
        warnings.warn(f"a = {a:g} > 2 lies outside the range of the Duhamel-term estimate", ScopeWarning, stacklevel=3)


def default_time_sequence(table: SymbolTable, levels: int = 16) -> np.ndarray:
    return table.t0 * 0.5 ** np.arange(levels + 1)


@functools.lru_cache(maxsize=32)
def potential_kernel(table: SymbolTable, a: float, times: tuple[float, ...] | None = None, per_decade: int = 6) -> PotentialKernel:
    """Build the ``V_t^a`` table for ``a >= 1`` and the given times (default ``t0 2^-k``, 16 levels)."""
    if not a >= 1:
        raise DomainError(f"Kato exponent a must be >= 1, got {a}")
    ts = np.array(times if times is not None else default_time_sequence(table), dtype=float)
    if np.any(ts <= 0) or np.any(ts > table.t0 * (1 + 1e-12)):
        raise DomainError("potential-kernel times must lie in (0, t0]")
    d = table.profile.dim
    rho_lo = min(1e-8, 1e-3 * _h_extended(table, float(ts.min())))
    rho = log_grid(rho_lo, 1e3, per_decade)
    columns = [_kernel_powers(table, a, float(r), ts) for r in rho]
    powers = np.array([c[0] for c in columns]).T
    trusted = np.array([c[1] for c in columns]).T
    # tempered tails underflow at large radii; keep the representable prefix
    ok = np.all(powers > 1e-290, axis=0)
    stop = int(np.argmin(ok)) if not ok.all() else rho.size
    rho, powers, trusted = rho[:stop], powers[:, :stop], trusted[:, :stop]
    kappa = table.high_slope - a * d
    models = []
    r0, r1 = rho[0], rho[per_decade]
    for k in range(ts.size):
        m0, m1 = powers[k, 0], powers[k, per_decade]
        if abs(kappa) < 1e-3:
            c = (m0 - m1) / math.log(r1 / r0)
            models.append(("log", m0 - c * math.log(1.0 / r0), c))
        else:
            c = (m0 - m1) / (r0**kappa - r1**kappa)
            models.append(("power", m0 - c * r0**kappa, c))
    splines = tuple(CubicSpline(np.log(rho), np.log(powers[k])) for k in range(ts.size))
    return PotentialKernel(table, float(a), ts, rho, powers, trusted, kappa, tuple(models), splines)


def potential_kernel_V(table: SymbolTable, a: float, t: float, x) -> float:
    """``V_t^a(x) = (int_0^t p(s, x)^a ds)^(1/a)`` by direct time quadrature.

    Raises
    ------
    DomainError
        At ``x = 0`` (where ``V`` may diverge) or for ``a < 1``.
    """
    if not a >= 1:
        raise DomainError(f"Kato exponent a must be >= 1, got {a}")
    rho = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    if rho == 0.0:
        raise DomainError("the potential kernel is not evaluated at the origin")
    if not 0 < t <= table.t0 * (1 + 1e-12):
        raise DomainError(f"t must lie in (0, t0], got {t}")
    return float(_kernel_powers(table, a, rho, np.array([t]))[0][0] ** (1.0 / a))


# Ball integrals ----------------------------------------------------------------------


def _sphere_sum(q: Potential, center: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``int_{S^{d-1}} |q(center + rho theta)| d sigma(theta)``."""
    d = q.dim
    rho = np.asarray(rho, dtype=float)
    if float(np.linalg.norm(center)) == 0.0 and q.form != "grid_sampled":
        return sphere_area(d) * np.abs(q.radial(rho))
    if d == 1:
        c = float(center[0])
        return np.abs(q(c + rho)) + np.abs(q(c - rho))
    if d == 2:
        th = np.linspace(0.0, 2 * math.pi, 128, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(th.size, 2 * math.pi / th.size)
    else:
        ct, wt = np.polynomial.legendre.leggauss(24)
        ph = np.linspace(0.0, 2 * math.pi, 48, endpoint=False)
        C, P = np.meshgrid(ct, ph, indexing="ij")
        S = np.sqrt(1 - C**2)
        dirs = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
        w = (wt[:, None] * np.full(ph.size, 2 * math.pi / ph.size)[None, :]).reshape(-1)
    pts = center[None, None, :] + rho.reshape(-1)[:, None, None] * dirs[None, :, :]
    with np.errstate(divide="ignore"):
        vals = np.abs(q(pts))
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return (vals * w[None, :]).sum(axis=1).reshape(rho.shape)


def _quad(fn, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, **kw)[0]


def _small_tail(pk: PotentialKernel, k: int, q: Potential, center: np.ndarray, b: float, scale: float) -> float:
    """``int_0^b V(scale rho) S(rho) rho^(d-1) d rho`` from the small-distance models of ``V`` and ``q``.

    Returns ``inf`` when ``V |q|`` is not integrable at the center.
    """
    d = q.dim
    gamma = q.local_exponent(center)
    kind, base, coef = pk.small_models[k]
    kappa = pk.small_exponent
    decay = d - gamma + (kappa / pk.a if (kind == "power" and kappa < 0) else 0.0)
    if decay <= 1e-12:
        return math.inf
    s_b = float(_sphere_sum(q, center, np.array([b]))[0])
    if s_b == 0.0:
        return 0.0

    def integrand(w):
        r = b * math.exp(-w)
        rs = scale * r
        if rs < 1e-250:
            return 0.0
        if kind == "log":
            v = max(base + coef * math.log(1.0 / rs), 0.0) ** (1.0 / pk.a)
        elif kappa < 0:
            # factor out rs^kappa, which overflows for steep kernels
            v = rs ** (kappa / pk.a) * max(coef + base * rs ** (-kappa), 0.0) ** (1.0 / pk.a)
        else:
            v = max(base + coef * rs**kappa, 0.0) ** (1.0 / pk.a)
        return v * s_b * math.exp(gamma * w) * r**d

    return _quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=400)


@functools.lru_cache(maxsize=4)
def _tanh_sinh(step: float = 1.0 / 12, reach: float = 4.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Double-exponential rule on ``[0, 1]``: distances from the left end, from the right end, weights."""
    t = np.arange(-reach, reach + step / 2, step)
    u = 0.5 * math.pi * np.sinh(t)
    left = 1.0 / (1.0 + np.exp(-2.0 * u))
    right = 1.0 / (1.0 + np.exp(2.0 * u))
    w = step * 0.5 * math.pi * np.cosh(t) / (2.0 * np.cosh(u) ** 2)
    keep = (left > 1e-300) & (right > 1e-300)
    return left[keep], right[keep], w[keep]


def _panel_nodes(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tanh-sinh nodes and weights on consecutive panels ``[edges[i], edges[i+1]]``.

    Nodes near either panel end are placed by their distance to that end, so
    integrable endpoint singularities are never sampled exactly.
    """
    left, right, w = _tanh_sinh()
    lo, hi = edges[:-1, None], edges[1:, None]
    length = hi - lo
    nodes = np.where(left[None, :] <= 0.5, lo + length * left[None, :], hi - length * right[None, :])
    return nodes.reshape(-1), (length * w[None, :]).reshape(-1)


def _radial_edges(lo: float, hi: float, breaks: Sequence[float]) -> np.ndarray:
    """Decade panels on ``[lo, hi]`` refined at the given break radii."""
    inner = [v for v in breaks if lo < v < hi]
    edges = np.unique(np.concatenate([[lo, hi], inner]))
    out = [edges[0]]
    for a_, b_ in zip(edges[:-1], edges[1:]):
        if a_ > 0 and b_ / a_ > 10:
            out.extend(np.geomspace(a_, b_, int(math.ceil(math.log10(b_ / a_))) + 1)[1:])
        else:
            out.append(b_)
    return np.array(out)


def _ball_integral(pk: PotentialKernel, k: int, q: Potential, center, r: float, scale: float = 1.0) -> float:
    """``int_{|y - x| < r} V_{t_k}^a(scale (y - x)) |q(y)| dy`` (``r`` may be infinite)."""
    d = q.dim
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if q.is_zero:
        return 0.0
    c_norm = float(np.linalg.norm(center))
    reach = q.support_radius + c_norm
    upper = min(r, reach)
    b = min(upper, pk.rho[0] / scale)
    total = _small_tail(pk, k, q, center, b, scale)
    if not math.isfinite(total):
        return math.inf
    top = min(upper, pk.rho[-1] / scale)
    breaks = [c_norm, *(abs(c_norm - v) for v in q.singular_points()), *(c_norm + v for v in q.singular_points())]
    if top > b:
        rho, w = _panel_nodes(_radial_edges(b, top, breaks))
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = pk.value(k, scale * rho) * _sphere_sum(q, center, rho) * rho ** (d - 1)
        total += float(np.sum(np.where(np.isfinite(vals), vals, 0.0) * w))
    if upper > pk.rho[-1] / scale:
        # far field: V is its jump asymptote there
        lo = pk.rho[-1] / scale
        if math.isinf(upper):
            if q.form != "constant":
                raise ConfigurationError("unbounded ball integrals need a constant or compactly supported potential")
            total += abs(q.value) * pk.tail_factor(k) * scale ** (-d) * pk.table.profile.tail_mass(scale * lo)
        else:
            rho, w = _panel_nodes(_radial_edges(lo, upper, breaks))
            vals = pk.tail_factor(k) * pk.table.profile.f(scale * rho) * _sphere_sum(q, center, rho) * rho ** (d - 1)
            total += float(np.sum(vals * w))
    return total


def scan_centers(q: Potential, seed: int = 42, n_random: int = 32) -> np.ndarray:
    """``{0}``, the support boundary along each axis and random points in the support box."""
    d = q.dim
    if q.form == "constant":
        return np.zeros((1, d))
    R = q.support_radius
    pts = [np.zeros(d)]
    for i in range(d):
        for s in (-1.0, 1.0):
            e = np.zeros(d)
            e[i] = s * R
            pts.append(e)
    rng = np.random.default_rng(seed)
    pts.extend(rng.uniform(-R, R, size=(n_random, d)))
    return np.array(pts)


def _sup_over_centers(fn, centers: np.ndarray) -> tuple[float, np.ndarray]:
    vals = np.array([fn(c) for c in centers])
    i = int(np.argmax(np.where(np.isnan(vals), -np.inf, vals)))
    return float(vals[i]), centers[i]


def kato_modulus(table: SymbolTable, q: Potential, a: float, r: float, seed: int = 42) -> tuple[float, np.ndarray]:
    """``I_r^a(q)`` and the center attaining the sup (``inf`` flags a non-integrable singularity there)."""
    if not 0 < r <= float(table.h(table.t0)) * (1 + 1e-12):
        raise DomainError(f"radius must lie in (0, h(t0)], got {r}")
    if q.dim != table.profile.dim:
        raise ConfigurationError("potential and profile dimensions differ")
    pk = potential_kernel(table, float(a))
    return _sup_over_centers(lambda c: _ball_integral(pk, 0, q, c, r), scan_centers(q, seed))


def kato_modulus_I(table: SymbolTable, q: Potential, a: float, r: float, seed: int = 42) -> float:
    """``I_r^a(q) = sup_x int_{|y - x| < r} V_{t0}^a(y - x) |q(y)| dy`` over the center scan."""
    return kato_modulus(table, q, a, r, seed)[0]


def local_integral_sup(q: Potential, r: float, seed: int = 42) -> float:
    """``sup_x int_{|x - y| < r} |q(y)| dy`` over the center scan."""
    if not r > 0:
        raise DomainError("radius must be positive")
    d = q.dim
    if not q.locally_integrable:
        return math.inf

    def ball(c):
        c = np.atleast_1d(c)
        if q.form == "constant":
            return abs(q.value) * math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d
        if d == 1 and q.form in ("power_well", "indicator_well"):
            x = float(c[0])
            lo, hi = x - r, x + r
            anti = lambda v: q._antiderivative(np.array(v))  # noqa: E731
            # |q| integral: the radial forms keep a constant sign
            return abs(float(anti(hi) - anti(lo)))
        c_norm = float(np.linalg.norm(c))
        breaks = [c_norm, *(abs(c_norm - v) for v in q.singular_points()), *(c_norm + v for v in q.singular_points())]
        rho, w = _panel_nodes(_radial_edges(0.0, r, breaks))
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = _sphere_sum(q, c, rho) * rho ** (d - 1)
        return float(np.sum(np.where(np.isfinite(vals), vals, 0.0) * w))

    return _sup_over_centers(ball, scan_centers(q, seed))[0]


# Membership ----------------------------------------------------------------------------


@dataclass
class MembershipReport:
    a: float
    r_sequence: list[float]
    I_values: list[float]
    t_sequence: list[float]
    time_form_values: list[float]
    verdict: bool
    time_verdict: bool
    fitted_slope: float
    time_slope: float
    argmax_center: list[float]
    divergent: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        fl = lambda v: float(v) if math.isfinite(v) else ("inf" if v > 0 else "nan")  # noqa: E731
        return {
            "a": self.a,
            "r_sequence": [fl(v) for v in self.r_sequence],
            "I_values": [fl(v) for v in self.I_values],
            "t_sequence": [fl(v) for v in self.t_sequence],
            "time_form_values": [fl(v) for v in self.time_form_values],
            "verdict": "member" if self.verdict else "non-member",
            "time_verdict": "member" if self.time_verdict else "non-member",
            "fitted_slope": fl(self.fitted_slope),
            "time_slope": fl(self.time_slope),
            "argmax_center": self.argmax_center,
            "divergent": self.divergent,
            "notes": self.notes,
        }


def _decay_verdict(x: np.ndarray, y: np.ndarray, threshold: float, min_slope: float) -> tuple[bool, float]:
    y = np.asarray(y, dtype=float)
    if np.all(y == 0):
        return True, math.inf
    if not np.all(np.isfinite(y)):
        return False, math.nan
    slope = loglog_slope(x, y)
    return bool(y[-1] < threshold * y[0] and slope >= min_slope), slope


def kato_membership(
    table: SymbolTable,
    q: Potential,
    a: float,
    levels: int = 16,
    threshold: float = 0.1,
    min_slope: float = 0.1,
    seed: int = 42,
    check_agreement: bool = True,
) -> MembershipReport:
    """Membership of ``q`` in ``K_a`` from the decay of ``I_r^a`` and of the time form.

    Radii ``r_k = h(t0) 2^-k`` (``levels + 1`` values); the time form
    ``sup_x int |q(y)| V_t^a(x - y) dy`` is evaluated at ``t_k = 1/Psi(1/r_k)``
    so both curves are read against the same abscissa ``r_k``. ``member``
    requires the last value below ``threshold`` times the first and a fitted
    log-log slope of at least ``min_slope``.

    Raises
    ------
    InconsistencyError
        If the two characterizations disagree and ``check_agreement`` is set.
    """
    _warn_scope(table, a)
    if q.dim != table.profile.dim:
        raise ConfigurationError("potential and profile dimensions differ")
    r0 = float(table.h(table.t0))
    rs = r0 * 0.5 ** np.arange(levels + 1)
    ts = np.array([min(table.t0, _crossover(table, r)) for r in rs])
    ts[0] = table.t0
    pk = potential_kernel(table, float(a), tuple(float(t) for t in np.unique(ts)[::-1]))
    centers = scan_centers(q, seed)
    I_vals, arg = [], centers[0]
    for r in rs:
        v, c = _sup_over_centers(lambda cc: _ball_integral(pk, 0, q, cc, r), centers)
        if not I_vals:
            arg = c
        I_vals.append(v)
    T_vals = [_sup_over_centers(lambda cc: _ball_integral(pk, pk.index(t), q, cc, math.inf), centers)[0] for t in ts]
    divergent = not all(math.isfinite(v) for v in I_vals)
    verdict, slope = _decay_verdict(rs, np.array(I_vals), threshold, min_slope)
    t_verdict, t_slope = _decay_verdict(rs, np.array(T_vals), threshold, min_slope)
    notes = ["finite-scan proxy: membership means the curve falls below the threshold with the required slope"]
    if a > 2:
        notes.append("a > 2 is outside the range of the Duhamel-term estimate")
    if divergent:
        notes.append("V |q| is not locally integrable at the witness center")
    report = MembershipReport(
        float(a), [float(v) for v in rs], I_vals, [float(v) for v in ts], T_vals, verdict, t_verdict, slope, t_slope, [float(v) for v in arg], divergent, notes
    )
    if check_agreement and verdict != t_verdict:
        raise InconsistencyError(f"I_r and time-form verdicts disagree for {q.name} with a={a}: {report.to_dict()}")
    return report


# Inequality scans ------------------------------------------------------------------------


def check_potential_kernel(table: SymbolTable, a: float = 1.0, per_decade: int = 4, tolerance: float = 0.1) -> dict[str, FittedConstant]:
    """Two-sided fits of ``V_t^a`` against ``|x|^-d(1+1/a) f^-1/a`` (``|x| <= h``) and ``t^(1+1/a) f`` (``|x| >= h``).

    The near-field comparison needs ``alpha_2 < a d``; at ``alpha_2 = a d``
    the kernel grows logarithmically and the small-distance constants are
    reported unstable.
    """
    d = table.profile.dim
    out: dict[str, FittedConstant] = {}
    ratios: dict[str, list[np.ndarray]] = {"small": [], "large": []}
    coords: dict[str, dict[str, np.ndarray]] = {}
    for level, tb in enumerate((table, refine_table(table))):
        pk = potential_kernel(tb, float(a), (tb.t0, tb.t0 / 4, tb.t0 / 16))
        for region in ("small", "large"):
            rs, cs_t, cs_r = [], [], []
            for k, t in enumerate(pk.times):
                h = float(tb.h(t))
                # the refinement is denser and one decade wider, so unbounded ratios show up as instability
                rho = h * (log_grid(10.0 ** (-3 - level), 1.0, per_decade * 2**level) if region == "small" else log_grid(1.0, 10.0 ** (2 + level), per_decade * 2**level))
                v = pk.value(k, rho)
                f = tb.profile.f(rho)
                ref = 1.0 / (rho ** (d * (1 + 1 / a)) * f ** (1 / a)) if region == "small" else t ** (1 + 1 / a) * f
                with np.errstate(divide="ignore", invalid="ignore"):
                    rs.append(np.where((ref > 1e-280) & pk.trusted_at(k, rho), v / ref, np.nan))
                cs_t.append(np.full(rho.size, t))
                cs_r.append(rho)
            ratios[region].append(np.concatenate(rs))
            if level == 0:
                coords[region] = {"t": np.concatenate(cs_t), "r": np.concatenate(cs_r)}
    for region in ("small", "large"):
        for kind in ("lower", "upper"):
            v0, wit, ex = extremum(ratios[region][0], kind, coords[region])
            v1, _, _ = extremum(ratios[region][1], kind)
            name = f"potential_kernel_{region}_{kind}"
            out[name] = FittedConstant(name, kind, v0, v1, wit, tolerance, ex)
    return out


def check_spacetime_convolution(
    table: SymbolTable,
    q: Potential,
    a: float = 1.0,
    kappas: Sequence[float] = (0.5, 1.0),
    levels: int = 6,
    seed: int = 42,
    tolerance: float = 0.1,
) -> FittedConstant:
    """Fitted ``C`` in ``sup_x int |q(z)| V_t^a(kappa (z - x)) dz <= C (1 + (t Psi(1/r))^(1/a)) I_r^a(q)``.

    Scan: ``t = t0 2^-k`` and ``r = h(t0) 2^-j`` for ``k, j < levels`` (doubled
    for the refinement), ``kappa`` as given.
    """
    centers = scan_centers(q, seed)
    vals = []
    coords: dict[str, list] = {"t": [], "r": [], "kappa": []}
    for level in (0, 1):
        n = levels * (1 + level)
        ts = tuple(float(v) for v in table.t0 * 0.5 ** (np.arange(n) / (1 + level)))
        pk = potential_kernel(table, float(a), ts)
        pk0 = potential_kernel(table, float(a))
        rs = float(table.h(table.t0)) * 0.5 ** (np.arange(n) / (1 + level))
        I = np.array([_sup_over_centers(lambda c: _ball_integral(pk0, 0, q, c, r), centers)[0] for r in rs])
        ratio = []
        for kappa in kappas:
            lhs = np.array([_sup_over_centers(lambda c: _ball_integral(pk, k, q, c, math.inf, kappa), centers)[0] for k in range(len(ts))])
            for k, t in enumerate(ts):
                for j, r in enumerate(rs):
                    rhs = (1.0 + (t * float(table.psi_extended(1.0 / r))) ** (1.0 / a)) * I[j]
                    ratio.append(lhs[k] / rhs if rhs > 0 else math.nan)
                    if level == 0:
                        coords["t"].append(t)
                        coords["r"].append(r)
                        coords["kappa"].append(kappa)
        vals.append(np.array(ratio))
    v0, wit, ex = extremum(vals[0], "upper", {k: np.array(v) for k, v in coords.items()})
    v1, _, _ = extremum(vals[1], "upper")
    return FittedConstant(f"spacetime_convolution_{q.name}", "upper", v0, v1, wit, tolerance, ex)


def check_convolution_bound(
    table: SymbolTable,
    q: Potential,
    r: float = 1.0,
    per_decade: int = 4,
    seed: int = 42,
    tolerance: float = 0.1,
) -> FittedConstant:
    """Fitted ``C`` in ``int_{|z-x|>=r, |z-y|>=r} f(|z-x|) |q(z)| f(|y-z|) dz <= C M_q f(|y-x|)`` for ``|y - x| >= 6 r``.

    ``M_q = sup_x int_{|z - x| <= 3r} |q|``; one-dimensional scan with
    ``x`` over the center scan and ``y - x`` on a signed log grid in ``[6r, 1e3 r]``.
    """
    if q.dim != 1:
        raise ConfigurationError("the convolution-bound scan is one-dimensional")
    f = table.profile.f
    M = local_integral_sup(q, 3 * r, seed)
    centers = scan_centers(q, seed)[:, 0]
    vals, coords = [], {"x": [], "y": []}
    for level in (0, 1):
        dist = r * log_grid(6.0, 1e3, per_decade * 2**level)
        out = []
        for x in centers:
            for y in np.concatenate([x - dist, x + dist]):
                lo, hi = min(x, y), max(x, y)
                pieces = [(-math.inf, lo - r), (lo + r, hi - r), (hi + r, math.inf)]
                total = 0.0
                for u, v in pieces:
                    if q.form != "constant":
                        u, v = max(u, -q.support_radius), min(v, q.support_radius)
                    if v <= u:
                        continue
                    bps = [p for p in (0.0, -q.support_radius, q.support_radius) if u < p < v] if q.form != "constant" else None
                    g = lambda z: float(f(abs(z - x))) * abs(float(q(np.array([z]))[0])) * float(f(abs(y - z)))  # noqa: E731
                    if math.isinf(u) or math.isinf(v):
                        total += _quad(g, u, v, limit=400)
                    else:
                        total += _quad(g, u, v, limit=400, points=bps or None)
                out.append(total / (M * float(f(abs(y - x)))))
                if level == 0:
                    coords["x"].append(x)
                    coords["y"].append(y)
        vals.append(np.array(out))
    v0, wit, ex = extremum(vals[0], "upper", {k: np.array(v) for k, v in coords.items()})
    v1, _, _ = extremum(vals[1], "upper")
    return FittedConstant(f"convolution_bound_{q.name}", "upper", v0, v1, wit, tolerance, ex)

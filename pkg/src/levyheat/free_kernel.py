"""Free transition density, its gradient and the envelope functions.

The density of the unperturbed semigroup is the inverse Fourier transform of
the radial multiplier ``exp(-t Phi(|u|))``. Pointwise values use radial
oscillatory quadrature on ``[0, U]`` where ``t Phi(U) = 40``; whole grids use a
single FFT on the dual lattice. The ``check_*`` functions turn each two-sided
kernel estimate into a pair of fitted constants (see :mod:`levyheat.fitting`).
"""

from __future__ import annotations

import csv
import functools
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from . import _integrands
from .errors import ConfigurationError, DomainError, NumericalError, RangeError
from .fitting import FittedConstant, extremum, log_grid
from .symbol import TRUNCATION_DECAY, SymbolTable, build_symbol_table

_EPSREL = 1e-12
# quadrature noise relative to p(t, 0); ratios below it are not trusted
NOISE_FLOOR = 1e-10


# Pointwise inversion -------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _callable(table: SymbolTable):
    return _integrands.low_level(_integrands.kernel_integrand, table.phi_buffer)


def _quad(fn, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, **kw)[0]


@functools.lru_cache(maxsize=8192)
def _cutoff(table: SymbolTable, t: float, extrapolate: bool = False) -> float:
    if t > table.t_max * (1 + 1e-12):
        raise RangeError(f"t={t:g} exceeds the table horizon t_max={table.t_max:g}")
    return table.truncation_radius(t, TRUNCATION_DECAY, extrapolate)


@functools.lru_cache(maxsize=8192)
def _moment(table: SymbolTable, t: float, mode: int, extrapolate: bool = False) -> float:
    """``int_0^U u^mode exp(-t Phi(u)) du``, the scale of the inversion integrals."""
    U = _cutoff(table, t, extrapolate)
    edges = np.concatenate([[0.0], np.geomspace(U * 1e-12, U, 13)])
    return sum(_quad(_callable(table), a, b, args=(float(mode), t), epsabs=0.0, epsrel=_EPSREL, limit=400) for a, b in zip(edges[:-1], edges[1:]))


def _transform(table: SymbolTable, t: float, mode: int, weight: str, omega: float, extrapolate: bool = False) -> float:
    """``int_0^U u^mode exp(-t Phi(u)) w(omega u) du`` with ``w`` = cos or sin."""
    U = _cutoff(table, t, extrapolate)
    scale = _moment(table, t, mode, extrapolate)
    if omega == 0.0:
        return scale if weight == "cos" else 0.0
    # decade panels above the non-oscillatory core u < 1e-3/omega keep the
    # adaptive scheme from stalling on the cusp of exp(-t Phi) at u = 0
    start = min(U, max(U * 1e-12, 1e-3 / omega))
    edges = np.concatenate([[0.0], np.geomspace(start, U, max(2, int(math.ceil(math.log10(U / start))) + 1))]) if start < U else np.array([0.0, U])
    fn = _callable(table)
    return sum(
        _quad(fn, a, b, args=(float(mode), t), weight=weight, wvar=omega, epsabs=1e-15 * scale, epsrel=_EPSREL, limit=1000)
        for a, b in zip(edges[:-1], edges[1:])
    )


def _planar(table: SymbolTable, t: float, mode: int, r: float, bessel_order: int, extrapolate: bool = False) -> float:
    """``int_0^U u^mode exp(-t Phi) J_k(u r) du`` through the angular representation of ``J_0`` and ``J_1``."""
    if bessel_order == 0:
        inner = lambda th: _transform(table, t, mode, "cos", r * math.cos(th), extrapolate)  # noqa: E731
    else:
        inner = lambda th: _transform(table, t, mode, "sin", r * math.cos(th), extrapolate) * math.cos(th)  # noqa: E731
    scale = _moment(table, t, mode, extrapolate)
    return 2.0 / math.pi * _quad(inner, 0.0, 0.5 * math.pi, epsabs=1e-14 * scale, epsrel=1e-10, limit=200)


def _check_time(t: float) -> float:
    t = float(t)
    if not t > 0 or not math.isfinite(t):
        raise DomainError(f"time must be positive and finite, got {t}")
    return t


def _radius(x) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))


def radial_density(table: SymbolTable, t: float, r: float, extrapolate: bool = False) -> float:
    """``p(t, x)`` at ``|x| = r``.

    ``extrapolate`` continues the symbol beyond the table by its end power
    law, which makes times below ``t_min`` available.
    """
    t = _check_time(t)
    d = table.profile.dim
    ex = extrapolate
    if d == 1:
        val = _transform(table, t, 0, "cos", r, ex) / math.pi
    elif d == 2:
        val = (_moment(table, t, 1, ex) if r == 0 else _planar(table, t, 1, r, 0, ex)) / (2.0 * math.pi)
    else:
        if r == 0:
            val = _moment(table, t, 2, ex) / (2.0 * math.pi**2)
        else:
            val = _transform(table, t, 1, "sin", r, ex) / (2.0 * math.pi**2 * r)
    if not math.isfinite(val):
        raise NumericalError(f"kernel quadrature failed at t={t:g}, r={r:g}")
    return val


def radial_derivative(table: SymbolTable, t: float, r: float) -> float:
    """``d/dr p(t, r)`` of the radial profile."""
    t = _check_time(t)
    d = table.profile.dim
    if r == 0:
        return 0.0
    if d == 1:
        return -_transform(table, t, 1, "sin", r) / math.pi
    if d == 2:
        return -_planar(table, t, 2, r, 1) / (2.0 * math.pi)
    sin_part = _transform(table, t, 1, "sin", r)
    cos_part = _transform(table, t, 2, "cos", r)
    return (cos_part / r - sin_part / r**2) / (2.0 * math.pi**2)


def free_density(table: SymbolTable, t: float, x) -> float:
    """Free transition density ``p(t, x)`` by radial Fourier inversion.

    Parameters
    ----------
    table
        Symbol table of the profile; must reach ``t Phi(u) >= 40``.
    t
        Time in ``(0, t_max]``.
    x
        Point of dimension ``table.profile.dim`` (a scalar in ``d = 1``).

    Raises
    ------
    NumericalError
        If the multiplier has not decayed inside the table.
    """
    return radial_density(table, t, _radius(x))


def free_gradient(table: SymbolTable, t: float, x, axis: int = 0) -> float:
    """``dp/dx_axis (t, x)``; the inversion of ``-u_axis exp(-t Phi)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.linalg.norm(x))
    if r == 0.0:
        _check_time(t)
        return 0.0
    return radial_derivative(table, t, r) * x[axis] / r


class _Evaluator:
    """Memoized radial evaluations ``p(t, r)`` shared by the scans."""

    def __init__(self, table: SymbolTable):
        self.table = table
        self._cache: dict[tuple[float, float], float] = {}

    def __call__(self, t: float, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        flat = r.reshape(-1)
        out = np.empty_like(flat)
        for i, v in enumerate(flat):
            key = (float(t), float(v))
            val = self._cache.get(key)
            if val is None:
                val = radial_density(self.table, t, float(v))
                self._cache[key] = val
            out[i] = val
        return out.reshape(r.shape)

    def floor(self, t: float) -> float:
        return NOISE_FLOOR * float(self(t, 0.0))


# FFT grids -----------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid ``x_j = -x_max + j dx`` with ``n`` points per axis."""

    dim: int
    n: int
    x_max: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if self.n < 4 or self.n % 2:
            raise ConfigurationError(f"grid size must be even and >= 4, got {self.n}")
        if not self.x_max > 0:
            raise ConfigurationError(f"grid half-width must be positive, got {self.x_max}")

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / self.n

    @property
    def nyquist(self) -> float:
        return math.pi / self.dx

    def axis(self) -> np.ndarray:
        return -self.x_max + self.dx * np.arange(self.n)

    def frequencies(self) -> np.ndarray:
        return 2.0 * math.pi * sfft.fftfreq(self.n, self.dx)

    def radii(self) -> np.ndarray:
        ax = self.axis()
        if self.dim == 1:
            return np.abs(ax)
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.sqrt(sum(m**2 for m in mesh))


def default_grid(table: SymbolTable) -> GridSpec:
    """Default FFT grid sized from ``h(t_max)``."""
    d = table.profile.dim
    h = float(table.h(table.t_max))
    n, width = {1: (2**16, 200.0), 2: (1024, 50.0), 3: (256, 50.0)}[d]
    return GridSpec(d, n, width * h)


def resolving_grid(table: SymbolTable, t: float, n: int | None = None, margin: float = 1.05) -> GridSpec:
    """Grid with ``pi/dx = margin U(t)`` (``U`` the dual truncation radius), valid for every time ``>= t``."""
    d = table.profile.dim
    n = n or {1: 2**16, 2: 1024, 3: 256}[d]
    dx = math.pi / (margin * table.truncation_radius(t))
    return GridSpec(d, n, 0.5 * n * dx)


def _reflect(a: np.ndarray) -> np.ndarray:
    """``a(-x)`` on the grid ``-x_max + j dx`` (index ``j -> n - j`` mod n)."""
    for ax in range(a.ndim):
        a = np.roll(np.flip(a, axis=ax), 1, axis=ax)
    return a


@dataclass(frozen=True, eq=False)
class KernelGrid:
    """Free kernel slices on a periodic grid.

    ``values[k]`` holds ``p(times[k], x)`` in ``ij`` layout with the origin at
    index ``n/2``. ``aliasing_bound[k]`` bounds the mass folded back by the
    periodization, ``t nu(|y| > x_max)``.
    """

    dim: int
    times: tuple[float, ...]
    spec: GridSpec
    values: tuple[np.ndarray, ...]
    gradients: tuple[tuple[np.ndarray, ...], ...] | None
    mass_defect: tuple[float, ...]
    aliasing_bound: tuple[float, ...]
    point_alias: tuple[float, ...] = field(default=())

    @property
    def dx(self) -> float:
        return self.spec.dx

    @property
    def x_max(self) -> float:
        return self.spec.x_max

    def axis(self) -> np.ndarray:
        return self.spec.axis()

    def index(self, t: float) -> int:
        for k, s in enumerate(self.times):
            if math.isclose(s, t, rel_tol=1e-12):
                return k
        raise KeyError(f"no slice at t={t}")

    def slice(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def trusted(self, k: int) -> np.ndarray:
        """Mask of values above ten times the pointwise aliasing bound and rounding noise."""
        v = self.values[k]
        floor = max(10.0 * self.point_alias[k], 1e-13 * float(v.max()))
        return v > floor

    def to_csv(self, stride: int = 1) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        coords = [f"x{i + 1}" for i in range(self.dim)]
        grads = [f"grad{i + 1}" for i in range(self.dim)] if self.gradients is not None else []
        w.writerow(["t", *coords, "p", *grads])
        ax = self.axis()[::stride]
        mesh = [m.reshape(-1) for m in np.meshgrid(*([ax] * self.dim), indexing="ij")]
        sl = tuple(slice(None, None, stride) for _ in range(self.dim))
        for k, t in enumerate(self.times):
            vals = self.values[k][sl].reshape(-1)
            cols = [g[sl].reshape(-1) for g in self.gradients[k]] if self.gradients is not None else []
            for j in range(vals.size):
                w.writerow([repr(t), *(repr(float(m[j])) for m in mesh), repr(float(vals[j])), *(repr(float(c[j])) for c in cols)])
        return buf.getvalue()


def _fft_slice(table: SymbolTable, t: float, spec: GridSpec, gradient: bool, workers: int):
    U = table.truncation_radius(t)
    if U > spec.nyquist:
        raise ConfigurationError(
            f"grid spacing {spec.dx:g} violates the Nyquist relation at t={t:g}: "
            f"truncation radius {U:g} exceeds pi/dx = {spec.nyquist:g}"
        )
    k = spec.frequencies()
    mesh = np.meshgrid(*([k] * spec.dim), indexing="ij", sparse=True)
    modulus = np.sqrt(sum(m**2 for m in mesh))
    mult = np.exp(-t * table.phi(modulus))
    shift = lambda a: sfft.fftshift(a)  # noqa: E731
    vol = spec.dx**spec.dim
    p = shift(sfft.ifftn(mult, workers=workers).real) / vol
    p = 0.5 * (p + _reflect(p))
    grads = None
    if gradient:
        grads = []
        for i in range(spec.dim):
            ki = np.array(mesh[i], copy=True)
            # the Nyquist mode has no well-defined sign
            ki[np.isclose(np.abs(ki), spec.nyquist)] = 0.0
            gi = shift(sfft.ifftn(1j * ki * mult, workers=workers).real) / vol
            grads.append(0.5 * (gi - _reflect(gi)))
        grads = tuple(grads)
    mass_defect = abs(1.0 - float(p.sum()) * vol)
    tail = t * table.profile.tail_mass(spec.x_max)
    # periodic images sit at distance >= x_max; f decreasing and summable images
    point = 4.0 * 3.0 ** (spec.dim - 1) * t * float(table.profile.f(spec.x_max))
    return p, grads, mass_defect, tail, point


def free_density_grid(
    table: SymbolTable,
    times: float | Sequence[float],
    spec: GridSpec | None = None,
    gradient: bool = False,
    threads: int = 1,
) -> KernelGrid:
    """Free kernel slices on a periodic grid, one FFT per time.

    Raises
    ------
    ConfigurationError
        If ``pi/dx`` is below the dual truncation radius for some time.
    """
    ts = (float(times),) if np.isscalar(times) else tuple(float(t) for t in times)
    for t in ts:
        _check_time(t)
        if t > table.t_max * (1 + 1e-12):
            raise RangeError(f"t={t:g} exceeds the table horizon")
    spec = spec or default_grid(table)
    if spec.dim != table.profile.dim:
        raise ConfigurationError("grid and profile dimensions differ")
    if threads > 1 and len(ts) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda t: _fft_slice(table, t, spec, gradient, 1), ts))
    else:
        parts = [_fft_slice(table, t, spec, gradient, max(threads, 1)) for t in ts]
    return KernelGrid(
        dim=spec.dim,
        times=ts,
        spec=spec,
        values=tuple(p[0] for p in parts),
        gradients=tuple(p[1] for p in parts) if gradient else None,
        mass_defect=tuple(p[2] for p in parts),
        aliasing_bound=tuple(p[3] for p in parts),
        point_alias=tuple(p[4] for p in parts),
    )


# Envelope ------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Envelope:
    """``G_n(t, x) = min{H^-d, t f(|x|/4)} + H^-d (1 + |x|/H)^-n`` with ``H = H(t)``."""

    n: float
    table: SymbolTable

    def __post_init__(self) -> None:
        if not self.n > 0:
            raise ConfigurationError(f"envelope order must be positive, got {self.n}")

    def radial(self, t: float, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        d = self.table.profile.dim
        Hd = float(self.table.H(t)) ** (-d)
        with np.errstate(divide="ignore"):
            jump = np.where(r > 0, t * self.table.profile.f(np.where(r > 0, r / 4.0, 1.0)), np.inf)
        return np.minimum(Hd, jump) + Hd * (1.0 + r / float(self.table.H(t))) ** (-self.n)


def envelope_Gn(env: Envelope, t: float, x) -> float:
    return float(env.radial(_check_time(t), _radius(x)))


# Comparability ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RadialScan:
    """Pointwise kernel values on per-time radial grids (radii scale with ``h(t)``)."""

    times: tuple[float, ...]
    radii: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]
    floors: tuple[float, ...]


def radial_scan(table: SymbolTable, times: Sequence[float], lo: float = 1e-3, hi: float = 1e3, per_decade: int = 16) -> RadialScan:
    """Evaluate ``p(t, r)`` at ``r = 0`` and ``r/h(t)`` on a log grid ``[lo, hi]``."""
    ev = _Evaluator(table)
    radii, values, floors = [], [], []
    for t in times:
        r = np.concatenate([[0.0], float(table.h(t)) * log_grid(lo, hi, per_decade)])
        radii.append(r)
        values.append(ev(t, r))
        floors.append(ev.floor(t))
    return RadialScan(tuple(float(t) for t in times), tuple(radii), tuple(values), tuple(floors))


def _slices(kernel: KernelGrid | RadialScan) -> Iterator[tuple[float, np.ndarray, np.ndarray, np.ndarray]]:
    if isinstance(kernel, RadialScan):
        for t, r, v, fl in zip(kernel.times, kernel.radii, kernel.values, kernel.floors):
            yield t, r, v, v > fl
    else:
        r = kernel.spec.radii()
        for k, t in enumerate(kernel.times):
            yield t, r, kernel.values[k], kernel.trusted(k)


def _comparability_ratios(kernel, table: SymbolTable, region: str = "all"):
    d = table.profile.dim
    ratios, ts, rs = [], [], []
    for t, r, v, ok in _slices(kernel):
        h = float(table.h(t))
        with np.errstate(divide="ignore"):
            jump = np.where(r > 0, t * table.profile.f(np.where(r > 0, r, 1.0)), np.inf)
        if region == "all":
            ref = np.minimum(h ** (-d), jump)
            sel = np.ones(r.shape, bool)
        elif region == "small":
            ref, sel = np.full(r.shape, h ** (-d)), r <= h
        else:
            ref, sel = jump, r >= h
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ok & (ref > 0), v / ref, np.nan)[sel]
        ratios.append(ratio.reshape(-1))
        ts.append(np.full(ratio.size, t))
        rs.append(r[sel].reshape(-1))
    return np.concatenate(ratios), {"t": np.concatenate(ts), "r": np.concatenate(rs)}


def estimate_comparability(
    kernel: KernelGrid | RadialScan,
    table: SymbolTable,
    refined: KernelGrid | RadialScan | None = None,
    refined_table: SymbolTable | None = None,
    region: str = "all",
    tolerance: float = 0.1,
) -> tuple[FittedConstant, FittedConstant]:
    """Fitted ``(c_lower, c_upper)`` for ``p(t, x) / min{h(t)^-d, t f(|x|)}``.

    ``region`` selects the full scan, ``"small"`` (``|x| <= h``, reference
    ``h^-d``) or ``"large"`` (``|x| >= h``, reference ``t f(|x|)``). Values
    below the noise floor are excluded and counted. Without ``refined`` the
    refined extrema repeat the base ones.
    """
    if region not in ("all", "small", "large"):
        raise ValueError(f"unknown region {region!r}")
    ratio, coords = _comparability_ratios(kernel, table, region)
    lo, wlo, ex = extremum(ratio, "lower", coords)
    hi, whi, _ = extremum(ratio, "upper", coords)
    if refined is not None:
        ratio1, _ = _comparability_ratios(refined, refined_table or table, region)
        lo1, _, _ = extremum(ratio1, "lower")
        hi1, _, _ = extremum(ratio1, "upper")
    else:
        lo1, hi1 = lo, hi
    tag = "comparability" if region == "all" else f"comparability_{region}"
    return (
        FittedConstant(tag + "_lower", "lower", lo, lo1, wlo, tolerance, ex),
        FittedConstant(tag + "_upper", "upper", hi, hi1, whi, tolerance, ex),
    )


def refine_table(table: SymbolTable) -> SymbolTable:
    """The same table with twice the nodes per decade."""
    return build_symbol_table(
        table.profile,
        per_decade=2 * table.per_decade,
        u_min=float(table.u[0]),
        u_max=float(table.u[-1]),
        t_min=table.t_min,
        t_max=table.t_max,
        t0=table.t0,
    )


def _scan_times(table: SymbolTable, fractions: Sequence[float]) -> list[float]:
    return [f * table.t0 for f in fractions]


def check_two_sided(
    table: SymbolTable,
    fractions: Sequence[float] = (0.05, 0.2, 1.0),
    per_decade: int = 16,
    tolerance: float = 0.1,
) -> dict[str, FittedConstant]:
    """Two-sided kernel estimate and its small/large-distance split.

    The refinement doubles the radial scan density and the table nodes.
    """
    times = _scan_times(table, fractions)
    fine = refine_table(table)
    base = radial_scan(table, times, per_decade=per_decade)
    ref = radial_scan(fine, times, per_decade=2 * per_decade)
    out: dict[str, FittedConstant] = {}
    for region in ("all", "small", "large"):
        lo, hi = estimate_comparability(base, table, ref, fine, region, tolerance)
        out[lo.name], out[hi.name] = lo, hi
    return out


# Inequality scans ------------------------------------------------------------------------


def _fit(name: str, kind: str, ratios: tuple[np.ndarray, np.ndarray], coords: dict[str, np.ndarray], tolerance: float) -> FittedConstant:
    v0, wit, exc = extremum(ratios[0], kind, coords)
    v1, _, _ = extremum(ratios[1], kind)
    return FittedConstant(name, kind, v0, v1, wit, tolerance, exc)


def check_translation(
    table: SymbolTable,
    fractions: Sequence[float] = (0.05, 0.1, 0.5, 1.0),
    per_decade: int = 8,
    shifts: int = 9,
    tolerance: float = 0.1,
) -> FittedConstant:
    """``sup p(t, x + y) / p(t, x)`` over ``|y| <= h(t)/2`` (one-dimensional scan along an axis)."""
    tables = (table, refine_table(table))
    ratios, coords = [], {}
    for level, tb in enumerate(tables):
        ev = _Evaluator(tb)
        rs, ts, xs, ys = [], [], [], []
        for t in _scan_times(tb, fractions):
            h = float(tb.h(t))
            x = np.concatenate([[0.0], h * log_grid(1e-2, 1e2, per_decade * 2**level)])
            y = 0.5 * h * np.linspace(-1.0, 1.0, (shifts - 1) * 2**level + 1)
            X, Y = np.meshgrid(x, y, indexing="ij")
            base = ev(t, X)
            shifted = ev(t, X + Y)
            floor = ev.floor(t)
            rs.append(np.where((base > floor) & (shifted > floor), shifted / base, np.nan).reshape(-1))
            ts.append(np.full(X.size, t))
            xs.append(X.reshape(-1))
            ys.append(Y.reshape(-1))
        ratios.append(np.concatenate(rs))
        if level == 0:
            coords = {"t": np.concatenate(ts), "x": np.concatenate(xs), "y": np.concatenate(ys)}
    return _fit("translation", "upper", (ratios[0], ratios[1]), coords, tolerance)


def _time_pairs(table: SymbolTable, lo: float, hi: float, per_decade: int) -> tuple[np.ndarray, np.ndarray]:
    grid = table.t0 * log_grid(lo, hi, per_decade)
    T, S = np.meshgrid(grid, grid, indexing="ij")
    keep = T + S <= table.t0 * (1 + 1e-12)
    return T[keep], S[keep]


def check_3g(
    table: SymbolTable,
    R: float = 1.0,
    per_decade: int = 4,
    points: int = 10,
    tolerance: float = 0.1,
) -> FittedConstant:
    """Restricted 3G: ``sup [p(t,x) ^ p(s,y)] / p(t+s, x+y)`` over ``x, y`` in ``[-R, R]`` and ``t + s <= t0``.

    Points lie on the lattice ``R i / points``, so every ``x + y`` is a
    lattice point as well.
    """
    tables = (table, refine_table(table))
    ratios, coords = [], {}
    for level, tb in enumerate(tables):
        ev = _Evaluator(tb)
        k = points * 2**level
        idx = np.arange(-k, k + 1)
        I, J = np.meshgrid(idx, idx, indexing="ij")
        lattice = R * np.arange(2 * k + 1) / k
        rs, cs = [], {"t": [], "s": [], "x": [], "y": []}
        for t, s in zip(*_time_pairs(tb, 1e-3, 1.0, per_decade * 2**level)):
            pt, ps, pts = ev(t, lattice), ev(s, lattice), ev(t + s, lattice)
            num = np.minimum(pt[np.abs(I)], ps[np.abs(J)])
            den = pts[np.abs(I + J)]
            rs.append(np.where(den > ev.floor(t + s), num / den, np.nan).reshape(-1))
            if level == 0:
                cs["t"].append(np.full(I.size, t))
                cs["s"].append(np.full(I.size, s))
                cs["x"].append((R * I / k).reshape(-1))
                cs["y"].append((R * J / k).reshape(-1))
        ratios.append(np.concatenate(rs))
        if level == 0:
            coords = {key: np.concatenate(v) for key, v in cs.items()}
    return _fit(f"3g_R{R:g}", "upper", (ratios[0], ratios[1]), coords, tolerance)


def check_4g(
    table: SymbolTable,
    a: float = 1.0,
    b: float = 2.0,
    scales: Sequence[float] = (0.01, 0.1, 1.0, 10.0),
    per_decade: int = 2,
    points: int = 8,
    tolerance: float = 0.1,
) -> FittedConstant:
    """4G inequality with ``g_c(t, x) = c^d p(t, c x)``.

    Fits ``sup g_b(t,x) g_a(s,y) / ([g_{b-a}(t,x) v g_a(s,y)] g_a(t+s,x+y))``
    over ``t, s`` in ``[0.01, 0.5] t0`` and ``x, y`` on lattices
    ``scale * i / points``, ``|i| <= points``, at several scales. ``a`` and
    ``b - a`` must be positive integers so the dilated points stay on the
    lattice.
    """
    if not (float(a).is_integer() and float(b - a).is_integer() and 0 < a < b):
        raise ConfigurationError("4G scan requires integer dilations 0 < a < b")
    a_i, b_i = int(a), int(b)
    d = table.profile.dim
    tables = (table, refine_table(table))
    ratios, coords = [], {}
    for level, tb in enumerate(tables):
        ev = _Evaluator(tb)
        k = points * 2**level
        idx = np.arange(-k, k + 1)
        I, J = np.meshgrid(idx, idx, indexing="ij")
        n_lat = max(b_i, a_i, b_i - a_i) * k + a_i * 2 * k + 1
        rs, cs = [], {"t": [], "s": [], "x": [], "y": [], "scale": []}
        for scale in scales:
            lattice = scale * np.arange(n_lat) / k
            for t, s in zip(*_time_pairs(tb, 0.01, 0.5, per_decade * 2**level)):
                pt, ps, pts = ev(t, lattice), ev(s, lattice), ev(t + s, lattice)
                gb_t = b**d * pt[np.abs(b_i * I)]
                ga_s = a**d * ps[np.abs(a_i * J)]
                gba_t = (b - a) ** d * pt[np.abs((b_i - a_i) * I)]
                ga_ts = a**d * pts[np.abs(a_i * (I + J))]
                ok = (pts[np.abs(a_i * (I + J))] > ev.floor(t + s)) & (pt[np.abs(b_i * I)] > ev.floor(t))
                rs.append(np.where(ok, gb_t * ga_s / (np.maximum(gba_t, ga_s) * ga_ts), np.nan).reshape(-1))
                if level == 0:
                    cs["t"].append(np.full(I.size, t))
                    cs["s"].append(np.full(I.size, s))
                    cs["x"].append((scale * I / k).reshape(-1))
                    cs["y"].append((scale * J / k).reshape(-1))
                    cs["scale"].append(np.full(I.size, scale))
        ratios.append(np.concatenate(rs))
        if level == 0:
            coords = {key: np.concatenate(v) for key, v in cs.items()}
    return _fit(f"4g_a{a:g}_b{b:g}", "upper", (ratios[0], ratios[1]), coords, tolerance)


def default_order(table: SymbolTable) -> float:
    """Smallest admissible envelope order ``n = d + alpha2``."""
    return table.profile.dim + table.profile.alpha2


def check_envelope_comparability(
    table: SymbolTable,
    fractions: Sequence[float] = (0.05, 0.1, 0.5, 1.0),
    per_decade: int = 16,
    n: float | None = None,
    tolerance: float = 0.1,
) -> tuple[FittedConstant, FittedConstant]:
    """``c p(t,x) <= G_n(t,x) <= C p(t,x)`` on ``|x| < 2``."""
    n = n or default_order(table)
    tables = (table, refine_table(table))
    ratios, coords = [], {}
    for level, tb in enumerate(tables):
        ev = _Evaluator(tb)
        env = Envelope(n, tb)
        rs, ts, xs = [], [], []
        for t in _scan_times(tb, fractions):
            r = np.concatenate([[0.0], log_grid(1e-5, 1.999, per_decade * 2**level)])
            p = ev(t, r)
            rs.append(np.where(p > ev.floor(t), env.radial(t, r) / p, np.nan))
            ts.append(np.full(r.size, t))
            xs.append(r)
        ratios.append(np.concatenate(rs))
        if level == 0:
            coords = {"t": np.concatenate(ts), "r": np.concatenate(xs)}
    return (
        _fit("envelope_over_p_lower", "lower", (ratios[0], ratios[1]), coords, tolerance),
        _fit("envelope_over_p_upper", "upper", (ratios[0], ratios[1]), coords, tolerance),
    )


def check_envelope_split(
    table: SymbolTable,
    per_decade: int = 2,
    points: int = 8,
    scales: Sequence[float] = (0.01, 0.1, 1.0),
    n: float | None = None,
    tolerance: float = 0.1,
) -> FittedConstant:
    """Lower constant in ``G_n(t, y-x) >= C min{h(t-s)^-d (1 + |w-x|/h(t-s))^-n, p(s, y-w)}``.

    With ``x = 0``; ``y, w`` on lattices and ``0 < s < t <= t0``.
    """
    n = n or default_order(table)
    d = table.profile.dim
    tables = (table, refine_table(table))
    ratios, coords = [], {}
    for level, tb in enumerate(tables):
        ev = _Evaluator(tb)
        env = Envelope(n, tb)
        k = points * 2**level
        idx = np.arange(-k, k + 1)
        Y, W = np.meshgrid(idx, idx, indexing="ij")
        grid = tb.t0 * log_grid(1e-3, 1.0, per_decade * 2**level)
        rs, cs = [], {"t": [], "s": [], "y": [], "w": []}
        for scale in scales:
            lattice = scale * np.arange(2 * k + 1) / k
            for t in grid:
                for s in grid[grid < t * (1 - 1e-12)]:
                    hts = float(tb.h(t - s))
                    left = hts ** (-d) * (1.0 + scale * np.abs(W) / k / hts) ** (-n)
                    right = ev(s, lattice)[np.abs(Y - W)]
                    ok = right > ev.floor(s)
                    gn = env.radial(t, scale * Y / k)
                    rs.append(np.where(ok | (left < right), gn / np.minimum(left, right), np.nan).reshape(-1))
                    if level == 0:
                        cs["t"].append(np.full(Y.size, t))
                        cs["s"].append(np.full(Y.size, s))
                        cs["y"].append((scale * Y / k).reshape(-1))
                        cs["w"].append((scale * W / k).reshape(-1))
        ratios.append(np.concatenate(rs))
        if level == 0:
            coords = {key: np.concatenate(v) for key, v in cs.items()}
    return _fit("envelope_split_lower", "lower", (ratios[0], ratios[1]), coords, tolerance)


def check_difference(
    table: SymbolTable,
    fractions: Sequence[float] = (0.05, 0.1, 0.5, 1.0),
    per_decade: int = 4,
    n: float | None = None,
    tolerance: float = 0.1,
) -> FittedConstant:
    """``|p(t,x) - p(t,y)| <= C (|y-x|/h ^ 1)(G_n(t,x) + G_n(t,y))`` on a signed log scan."""
    n = n or default_order(table)
    tables = (table, refine_table(table))
    ratios, coords = [], {}
    for level, tb in enumerate(tables):
        ev = _Evaluator(tb)
        env = Envelope(n, tb)
        rs, cs = [], {"t": [], "x": [], "y": []}
        for t in _scan_times(tb, fractions):
            h = float(tb.h(t))
            side = h * log_grid(1e-3, 1e3, per_decade * 2**level)
            pts = np.concatenate([-side[::-1], [0.0], side])
            X, Y = np.meshgrid(pts, pts, indexing="ij")
            px, py = ev(t, X), ev(t, Y)
            dist = np.minimum(np.abs(Y - X) / h, 1.0)
            bound = dist * (env.radial(t, X) + env.radial(t, Y))
            ok = (X != Y) & (np.maximum(px, py) > ev.floor(t)) & (bound > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                rs.append(np.where(ok, np.abs(px - py) / bound, np.nan).reshape(-1))
            if level == 0:
                cs["t"].append(np.full(X.size, t))
                cs["x"].append(X.reshape(-1))
                cs["y"].append(Y.reshape(-1))
        ratios.append(np.concatenate(rs))
        if level == 0:
            coords = {key: np.concatenate(v) for key, v in cs.items()}
    return _fit("difference", "upper", (ratios[0], ratios[1]), coords, tolerance)


def check_derivative(
    table: SymbolTable,
    fractions: Sequence[float] = (0.05, 0.1, 0.5, 1.0),
    per_decade: int = 8,
    n: float | None = None,
    tolerance: float = 0.1,
) -> dict[str, FittedConstant]:
    """Gradient bounds: against ``h^-1 min{h^-d, t f(|x|/2) + h^-d (1 + |x|/h)^-n}`` and against ``h^-1 G_n(t, 2x)``."""
    n = n or default_order(table)
    d = table.profile.dim
    tables = (table, refine_table(table))
    r_direct, r_env, coords = [], [], {}
    for level, tb in enumerate(tables):
        env = Envelope(n, tb)
        rd, re_, ts, xs = [], [], [], []
        for t in _scan_times(tb, fractions):
            h = float(tb.h(t))
            r = h * log_grid(1e-3, 1e3, per_decade * 2**level)
            grad = np.abs([radial_derivative(tb, t, v) for v in r])
            floor = NOISE_FLOOR * radial_density(tb, t, 0.0) / h
            direct = np.minimum(h ** (-d), t * tb.profile.f(r / 2.0) + h ** (-d) * (1.0 + r / h) ** (-n)) / h
            rd.append(np.where(grad > floor, grad / direct, np.nan))
            re_.append(np.where(grad > floor, grad / (env.radial(t, 2.0 * r) / h), np.nan))
            ts.append(np.full(r.size, t))
            xs.append(r)
        r_direct.append(np.concatenate(rd))
        r_env.append(np.concatenate(re_))
        if level == 0:
            coords = {"t": np.concatenate(ts), "r": np.concatenate(xs)}
    return {
        "derivative": _fit("derivative", "upper", (r_direct[0], r_direct[1]), coords, tolerance),
        "derivative_envelope": _fit("derivative_envelope", "upper", (r_env[0], r_env[1]), coords, tolerance),
    }


def richardson_derivative(fn, x: float, step: float) -> float:
    """Central difference with one Richardson step (fourth order in ``step``)."""
    d1 = (fn(x + step) - fn(x - step)) / (2 * step)
    d2 = (fn(x + 2 * step) - fn(x - 2 * step)) / (4 * step)
    return (4 * d1 - d2) / 3


def gradient_fd_discrepancy(table: SymbolTable, t: float, points: np.ndarray, step: float, threshold: float = 1e-12) -> tuple[float, int]:
    """Largest relative gap between :func:`free_gradient` and extrapolated central differences.

    Returns the maximum over points with ``|gradient| > threshold`` and the number of such points.
    """
    worst, used = 0.0, 0
    for x in np.atleast_1d(points):
        g = free_gradient(table, t, x)
        if abs(g) <= threshold:
            continue
        fd = richardson_derivative(lambda v: radial_density(table, t, abs(v)), float(x), step)
        worst = max(worst, abs(fd - g) / abs(g))
        used += 1
    return worst, used


def chapman_kolmogorov_residual(kernel: KernelGrid, s: float, t: float) -> float:
    """``max |p(s) * p(t) - p(s+t)| / p(s+t)`` over trusted grid points (periodic convolution)."""
    a, b, c = kernel.index(s), kernel.index(t), kernel.index(s + t)
    vol = kernel.dx**kernel.dim
    fa = sfft.fftn(sfft.ifftshift(kernel.values[a]))
    fb = sfft.fftn(sfft.ifftshift(kernel.values[b]))
    conv = sfft.fftshift(sfft.ifftn(fa * fb).real) * vol
    ok = kernel.trusted(c)
    target = kernel.values[c]
    return float(np.max(np.abs(conv[ok] - target[ok]) / target[ok]))

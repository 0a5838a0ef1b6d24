"""Perturbed heat kernel ``p~`` of ``L + q`` by the Duhamel series.

All kernels live on a periodic grid (:class:`Torus`) and are handled through
their band-limited Fourier coefficients, with the Nyquist modes removed so
that the discrete operator ``L + q`` stays symmetric. A point source at an
arbitrary ``y`` is the coefficient vector ``exp(-i k (y + X)) / dx^d``; the
free semigroup is the multiplier ``exp(-t Phi(|k|))``.

The terms ``p_n(t, ., y) = int_0^t P_{t-u} [q p_{n-1}(u, ., y)] du`` are
computed on a time grid graded toward ``u = 0`` by exponential time
differencing: the factor ``exp(-(t - u) Phi)`` is integrated exactly against
a piecewise-linear interpolant of the Fourier coefficients of
``q p_{n-1}(u)``. Because each term is produced at every grid time, the
partial sums give ``p~`` on the whole time grid at once.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import integrate, optimize

from .errors import ConfigurationError, DomainError, HorizonError, NumericalError, ScopeWarning
from .fitting import FittedConstant, extremum, loglog_slope
from .free_kernel import NOISE_FLOOR, Envelope, GridSpec, default_order, radial_density
from .kato import Potential
from .profiles import LevyProfile
from .symbol import SymbolTable

THREADS = 1


# Periodic spectral grid ---------------------------------------------------------------


class Torus:
    """Band-limited spectral calculus on the periodic grid ``spec``."""

    def __init__(self, table: SymbolTable, spec: GridSpec):
        if spec.dim != table.profile.dim:
            raise ConfigurationError("grid and profile dimensions differ")
        self.table = table
        self.spec = spec
        d, n, dx = spec.dim, spec.n, spec.dx
        full = 2.0 * math.pi * sfft.fftfreq(n, dx)
        half = 2.0 * math.pi * sfft.rfftfreq(n, dx)
        axes_k = [full] * (d - 1) + [half]
        self.k = np.meshgrid(*axes_k, indexing="ij")
        self.axes = tuple(range(-d, 0))
        self.shape = (n,) * d
        norm = np.sqrt(sum(kk**2 for kk in self.k))
        nyq = math.pi / dx
        mask = np.ones(norm.shape, dtype=bool)
        for kk in self.k:
            mask &= ~np.isclose(np.abs(kk), nyq)
        self.mask = mask
        self.symbol = np.where(mask, table.phi(norm), 0.0)
        # rfft halves the last axis: interior columns stand for two modes
        weight = np.full(half.size, 2.0)
        weight[0] = 1.0
        weight[-1] = 1.0
        self.weight = np.broadcast_to(weight, norm.shape)
        self._etd: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def cell(self) -> float:
        return self.spec.dx**self.spec.dim

    def grid(self) -> np.ndarray:
        """Grid points, shape ``(*shape, d)``."""
        ax = self.spec.axis()
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)

    def forward(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, axes=self.axes, workers=THREADS) * self.mask

    def inverse(self, c: np.ndarray) -> np.ndarray:
        return sfft.irfftn(c, s=self.shape, axes=self.axes, workers=THREADS)

    def point_sources(self, points) -> np.ndarray:
        """Coefficients of band-limited unit masses at ``points`` (shape ``(m, d)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, self.dim)
        phase = sum(self.k[i][None] * (pts[:, i] + self.spec.x_max).reshape((-1,) + (1,) * self.dim) for i in range(self.dim))
        return np.exp(-1j * phase) * self.mask / self.cell

    def evaluate(self, c: np.ndarray, points) -> np.ndarray:
        """Trigonometric interpolation of coefficient arrays ``c`` (``(..., *kshape)``) at ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).reshape(-1, self.dim)
        out = []
        flat = (c * self.weight).reshape(c.shape[: c.ndim - self.dim] + (-1,))
        kflat = [kk.reshape(-1) for kk in self.k]
        for p in pts:
            phase = sum(kflat[i] * (p[i] + self.spec.x_max) for i in range(self.dim))
            out.append((flat * np.exp(1j * phase)).real.sum(axis=-1))
        return np.moveaxis(np.array(out), 0, -1) / self.spec.n**self.dim

    def propagate(self, c: np.ndarray, t: float) -> np.ndarray:
        return c * np.exp(-t * self.symbol)

    def derivative(self, c: np.ndarray, axis: int = 0) -> np.ndarray:
        return c * (1j * self.k[axis])

    def inner(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        return np.sum(f * g, axis=self.axes) * self.cell

    def ringing(self, c: np.ndarray) -> np.ndarray:
        """Per-probe amplitude of the top fifth of the spectrum.

        Multiplying by a discontinuous potential leaves grid-scale Gibbs
        oscillations of roughly this size everywhere on the grid; ratios are
        only meaningful where the reference kernel stands well above it.
        """
        norm = np.sqrt(sum(kk**2 for kk in self.k))
        high = norm > 0.8 * math.pi / self.spec.dx
        band = self.inverse(c * high)
        return np.abs(band).reshape(band.shape[0], -1).max(axis=1)

    def etd(self, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``exp(-h Phi)`` and the weights of the left and right values of a linear interpolant."""
        key = float(h)
        if key not in self._etd:
            z = h * self.symbol
            small = z < 0.1
            zs = np.where(small, z, 0.1)
            zl = np.where(small, 1.0, z)
            series_left = sum((-zs) ** j / (math.factorial(j) * (j + 2)) for j in range(8))
            series_phi = sum((-zs) ** j / math.factorial(j + 1) for j in range(8))
            em = np.exp(-zl)
            left = np.where(small, series_left, (1.0 - (1.0 + zl) * em) / zl**2)
            phi1 = np.where(small, series_phi, -np.expm1(-zl) / zl)
            if len(self._etd) > 4096:
                self._etd.clear()
            self._etd[key] = (np.exp(-z), h * left, h * (phi1 - left))
        return self._etd[key]


def default_torus(table: SymbolTable, n: int | None = None, x_max: float | None = None) -> Torus:
    """``d = 1``: 1024 points on ``[-20, 20)``; ``d = 2``: 128^2 on ``[-10, 10)^2``; ``d = 3``: 48^3 on ``[-6, 6)^3``."""
    d = table.profile.dim
    sizes = {1: (1024, 20.0), 2: (128, 10.0), 3: (48, 6.0)}
    n0, x0 = sizes[d]
    return Torus(table, GridSpec(d, n or n0, x_max or x0))


@functools.lru_cache(maxsize=64)
def _cached_potential_grid(torus: Torus, q: Potential) -> np.ndarray:
    return q.cell_averages(torus.spec.axis())


def potential_on_grid(torus: Torus, q: Potential) -> np.ndarray:
    """Cell averages of ``q``; raises if its support leaves the grid."""
    if q.dim != torus.dim:
        raise ConfigurationError("potential and grid dimensions differ")
    if q.form != "constant" and q.support_radius * (math.sqrt(q.dim) if q.form == "grid_sampled" else 1.0) >= torus.spec.x_max:
        raise ConfigurationError(f"potential support radius {q.support_radius} exceeds the grid half-width {torus.spec.x_max}")
    if not q.locally_integrable:
        raise ConfigurationError("potential is not locally integrable")
    return _cached_potential_grid(torus, q)


# Time grids ------------------------------------------------------------------------------


def time_nodes(torus: Torus, t_end: float, uniform: int = 128, per_octave: int = 4, extra: Sequence[float] = ()) -> np.ndarray:
    """``0``, a uniform grid of ``uniform`` steps on ``(0, t_end]`` and a geometric grading toward 0.

    The grading runs down to ``0.01 / Phi(k_max)``, below which every
    resolved mode is constant in time, with ``per_octave`` nodes per halving.
    """
    if not t_end > 0:
        raise DomainError("time horizon must be positive")
    phi_max = float(np.max(torus.symbol))
    lo = min(0.01 / phi_max, t_end / uniform / 2)
    hi = t_end / uniform
    graded = hi * 2.0 ** (-np.arange(1, int(math.ceil(per_octave * math.log2(hi / lo))) + 1) / per_octave)
    nodes = np.concatenate([[0.0], graded, np.linspace(0.0, t_end, uniform + 1)[1:], [v for v in extra if 0 < v <= t_end]])
    nodes = np.unique(nodes)
    # merge near-duplicates introduced by the extra times
    keep = np.concatenate([[True], np.diff(nodes) > 1e-12 * t_end])
    return nodes[keep]


# Duhamel terms -------------------------------------------------------------------------------


def duhamel_term(torus: Torus, q_grid: np.ndarray, prev: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Next Duhamel term from the previous one.

    Parameters
    ----------
    prev
        Coefficients of ``p_{n-1}(u_j, ., y)`` at every node, shape ``(M + 1, m, *kshape)``.
    nodes
        The time grid ``u_0 = 0 < ... < u_M``.

    Returns
    -------
    Coefficients of ``p_n(u_j, ., y) = int_0^{u_j} P_{u_j - u} [q p_{n-1}(u)] du``.
    """
    out = np.empty_like(prev)
    out[0] = 0.0
    source = torus.forward(q_grid * torus.inverse(prev[0]))
    for j in range(nodes.size - 1):
        nxt = torus.forward(q_grid * torus.inverse(prev[j + 1]))
        decay, left, right = torus.etd(nodes[j + 1] - nodes[j])
        out[j + 1] = decay * out[j] + left * source + right * nxt
        source = nxt
    return out


def _free_evolution(torus: Torus, initial: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    return np.exp(-nodes.reshape((-1,) + (1,) * initial.ndim) * torus.symbol) * initial[None]


# Relative Kato bound -----------------------------------------------------------------------


def resolved_time(torus: Torus, cells: float = 4.0) -> float:
    """Smallest ``t`` with ``h(t) >= cells * dx``; below it the band-limited kernel oscillates."""
    table = torus.table
    target = cells * torus.spec.dx
    lo, hi = math.log(table.t_min), math.log(table.t_max)
    if float(table.h(table.t_min)) >= target:
        return table.t_min
    if float(table.h(table.t_max)) < target:
        raise ConfigurationError("grid too coarse for every tabulated time")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if float(table.h(math.exp(mid))) < target else (lo, mid)
    return math.exp(hi)


def default_horizons(torus: Torus, t: float | None = None) -> np.ndarray:
    """``t 2^-k`` (``t = t0`` by default) down to the resolved time, at most 8 levels."""
    top = torus.table.t0 if t is None else t
    floor = resolved_time(torus)
    hs = top * 0.5 ** np.arange(8)
    hs = hs[hs >= floor]
    if hs.size < 3:
        raise ConfigurationError(f"fewer than three horizons in [{floor:.3g}, {top:.3g}] are resolved by the grid")
    return hs[::-1]


def default_probes(torus: Torus, t: float) -> np.ndarray:
    """Origin and ``+-{1/4, ..., 32} h(t)`` along the first axis, clipped to the central 60% of the grid."""
    h = float(torus.table.h(min(t, torus.table.t_max)))
    offsets = h * 2.0 ** np.arange(-2, 6)
    offsets = offsets[offsets <= 0.6 * torus.spec.x_max]
    vals = np.concatenate([[0.0], offsets, -offsets])
    pts = np.zeros((vals.size, torus.dim))
    pts[:, 0] = vals
    return pts


def _free_values(torus: Torus, probes: np.ndarray, t: float) -> np.ndarray:
    return torus.inverse(torus.propagate(torus.point_sources(probes), t))


@dataclass
class RelativeKato:
    """``kappa(t) = sup p_1^{|q|}(t, x, y) / p(t, y - x)`` and its envelope ``kappa <= eta_fit + beta t``.

    ``eta`` is the level used for the two-sided bounds of the perturbed
    kernel and ``h_eta = (eta - eta_fit) / beta`` the horizon on which
    ``kappa <= eta`` holds by the envelope.
    """

    horizons: np.ndarray
    kappa: np.ndarray
    eta_fit: float
    beta: float
    eta: float
    h_eta: float
    witnesses: list[dict[str, float]] = field(default_factory=list)

    def envelope(self, t) -> np.ndarray:
        return self.eta_fit + self.beta * np.asarray(t, dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {
            "horizons": self.horizons.tolist(),
            "kappa": self.kappa.tolist(),
            "eta_fit": self.eta_fit,
            "beta": self.beta,
            "eta": self.eta,
            "h_eta": self.h_eta if math.isfinite(self.h_eta) else "inf",
            "witnesses": self.witnesses,
        }


def fit_envelope(horizons: np.ndarray, kappa: np.ndarray) -> tuple[float, float]:
    """Least-squares line ``eta + beta t`` lying above every ``kappa``, with ``eta, beta >= 0``."""
    t = np.asarray(horizons, dtype=float)
    k = np.asarray(kappa, dtype=float)
    if np.all(k == 0):
        return 0.0, 0.0
    cons = [{"type": "ineq", "fun": lambda p, i=i: p[0] + p[1] * t[i] - k[i]} for i in range(t.size)]
    x0 = np.array([float(k.max()), 0.0])
    res = optimize.minimize(lambda p: float(np.sum((p[0] + p[1] * t - k) ** 2)), x0, method="SLSQP", bounds=[(0, None), (0, None)], constraints=cons, options={"ftol": 1e-15, "maxiter": 500})
    eta, beta = (res.x if res.success else x0).tolist()
    # restore feasibility lost to solver tolerance
    eta += max(0.0, float(np.max(k - eta - beta * t)))
    return max(eta, 0.0), max(beta, 0.0)


def relative_kato_estimate(
    torus: Torus,
    q: Potential,
    horizons: Sequence[float],
    probes: np.ndarray | None = None,
    level: float = 0.5,
    uniform: int = 128,
) -> RelativeKato:
    """Relative-Kato curve over ``horizons`` with its fitted envelope.

    Raises
    ------
    NumericalError
        If ``kappa`` is not finite at some probe pair.
    """
    hs = np.sort(np.asarray(horizons, dtype=float))
    if np.any(hs <= 0) or hs[-1] > torus.table.t0 * (1 + 1e-12):
        raise DomainError("horizons must lie in (0, t0]")
    if hs[0] < resolved_time(torus) * (1 - 1e-9):
        raise ConfigurationError(f"horizon {hs[0]:.3g} is below the grid-resolved time {resolved_time(torus):.3g}")
    absq = potential_on_grid(torus, q)
    absq = np.abs(absq)
    pts = default_probes(torus, hs[-1]) if probes is None else np.atleast_2d(probes)
    nodes = time_nodes(torus, hs[-1], uniform=uniform, extra=hs)
    free = _free_evolution(torus, torus.point_sources(pts), nodes)
    first = duhamel_term(torus, absq, free, nodes)
    kappa, wit = [], []
    for t in hs:
        j = int(np.argmin(np.abs(nodes - t)))
        num = torus.inverse(first[j])
        den = torus.inverse(free[j])
        ok = _trusted(torus, den, first[j])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ok, num / den, 0.0)
        if not np.all(np.isfinite(ratio)):
            raise NumericalError(f"relative-Kato ratio is not finite at t={t}")
        idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        kappa.append(float(ratio[idx]))
        x = torus.grid()[idx[1:]]
        wit.append({"t": float(t), "y": pts[idx[0]].tolist(), "x": np.atleast_1d(x).tolist()})
    kappa = np.array(kappa)
    eta_fit, beta = fit_envelope(hs, kappa)
    level = max(level, eta_fit + 1e-12)
    h_eta = (level - eta_fit) / beta if beta > 0 else math.inf
    return RelativeKato(hs, kappa, eta_fit, beta, level, h_eta, wit)


def term_bound(n: int, eta: float, beta_t: float) -> float:
    """``sum_k C(n, k) (beta t)^k / k! eta^(n - k)``, the bound on ``|p_n| / p``."""
    return float(sum(math.comb(n, k) * beta_t**k / math.factorial(k) * eta ** (n - k) for k in range(n + 1)))


def _tail(start: int, eta: float, beta_t: float, horizon: int = 400) -> float:
    total, n = 0.0, start
    while n < start + horizon:
        b = term_bound(n, eta, beta_t)
        total += b
        if n > start + 5 and b < 1e-18 * max(total, 1e-300):
            break
        n += 1
    return total


# Perturbed kernel -------------------------------------------------------------------------------


@dataclass(eq=False)
class PerturbedKernel:
    """Translation-resolved ``p~(t, ., y)`` for probe sources ``y``.

    ``values`` holds the coefficients of ``p~(u_j, ., y)`` at every node of
    ``nodes``; ``terms`` the coefficients of each ``p_n(t, ., y)`` at the
    final time ``t``.
    """

    torus: Torus
    q: Potential
    t: float
    probes: np.ndarray
    nodes: np.ndarray
    values: np.ndarray = field(repr=False)
    terms: list[np.ndarray] = field(repr=False)
    N: int
    term_norms: list[float]
    tail_bound: float
    eta: float
    h_eta: float
    beta: float
    eta_fit: float
    stages: int = 1
    fixed_point_change: float = 0.0

    @property
    def base(self) -> Torus:
        return self.torus

    def index(self, t: float) -> int:
        j = int(np.argmin(np.abs(self.nodes - t)))
        if not math.isclose(self.nodes[j], t, rel_tol=1e-9, abs_tol=1e-15):
            raise DomainError(f"t={t} is not a node of the time grid")
        return j

    def coefficients(self, t: float | None = None) -> np.ndarray:
        return self.values[self.index(self.t if t is None else t)]

    def grid_values(self, t: float | None = None) -> np.ndarray:
        """``p~(t, x, y)`` on the grid, shape ``(m, *grid)`` (first argument ``x`` on the grid)."""
        return self.torus.inverse(self.coefficients(t))

    def free_values(self, t: float | None = None) -> np.ndarray:
        return _free_values(self.torus, self.probes, self.t if t is None else t)

    def at(self, points, t: float | None = None) -> np.ndarray:
        """``p~(t, x, y)`` at arbitrary ``x``; shape ``(m, P)``."""
        return self.torus.evaluate(self.coefficients(t), points)

    def gradient(self, t: float | None = None, axis: int = 0) -> np.ndarray:
        return self.torus.inverse(self.torus.derivative(self.coefficients(t), axis))

    def to_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "N": self.N,
            "eta": self.eta,
            "h_eta": self.h_eta if math.isfinite(self.h_eta) else "inf",
            "beta": self.beta,
            "eta_fit": self.eta_fit,
            "term_norms": self.term_norms,
            "tail_bound": self.tail_bound,
            "stages": self.stages,
            "fixed_point_change": self.fixed_point_change,
            "probes": self.probes.tolist(),
        }


def _series(torus: Torus, q_grid: np.ndarray, initial: np.ndarray, nodes: np.ndarray, n_terms: int, free_scale: np.ndarray | None = None):
    """Partial sums of the series on every node plus the final-time terms and one extra term."""
    term = _free_evolution(torus, initial, nodes)
    total = term.copy()
    finals = [term[-1].copy()]
    for _ in range(n_terms):
        term = duhamel_term(torus, q_grid, term, nodes)
        total += term
        finals.append(term[-1].copy())
    extra = duhamel_term(torus, q_grid, term, nodes)[-1]
    return total, finals, extra


RINGING_MARGIN = 100.0


def _trusted(torus: Torus, ref: np.ndarray, *coeffs: np.ndarray) -> np.ndarray:
    """Entries of ``ref`` above the noise floor and ``RINGING_MARGIN`` times the ringing of ``coeffs``."""
    axes = tuple(range(1, ref.ndim))
    ok = ref > NOISE_FLOOR * ref.max(axis=axes, keepdims=True)
    for c in coeffs:
        ok &= ref > RINGING_MARGIN * torus.ringing(c).reshape((-1,) + (1,) * len(axes))
    return ok


def _sup_ratio(torus: Torus, c: np.ndarray, ref: np.ndarray) -> float:
    num = np.abs(torus.inverse(c))
    ok = _trusted(torus, ref, c)
    return float(np.max(np.where(ok, num / np.where(ok, ref, 1.0), 0.0)))


def choose_order(eta: float, beta_t: float, tol: float, cap: int = 40) -> tuple[int, float]:
    """Smallest ``N`` whose bound on the dropped tail is below ``tol`` (capped)."""
    for n in range(cap + 1):
        tail = _tail(n + 1, eta, beta_t)
        if tail < tol:
            return n, tail
    return cap, _tail(cap + 1, eta, beta_t)


def perturbed_kernel(
    torus: Torus,
    q: Potential,
    t: float,
    tol: float = 1e-6,
    rk: RelativeKato | None = None,
    probes: np.ndarray | None = None,
    uniform: int = 128,
    extra_times: Sequence[float] = (),
    max_terms: int = 40,
    split_level: float = 0.5,
) -> PerturbedKernel:
    """Sum the Duhamel series for ``p~(t, ., y)`` at the probe sources.

    The number of terms is the smallest ``N`` with the bound
    ``sum_{n > N} sum_k C(n,k) (beta t)^k / k! eta^(n-k)`` below ``tol``.
    Horizons where the envelope ``eta_fit + beta t`` exceeds ``split_level``
    are reached by composing ``m`` equal sub-steps (``p~(t) = P~_{t/m}^m``),
    each of which re-runs the series on the output of the previous one.

    Raises
    ------
    HorizonError
        If ``eta_fit >= split_level``: no time subdivision brings the
        envelope below one.
    """
    if not 0 < t <= torus.table.t0 * (1 + 1e-12):
        raise DomainError(f"t must lie in (0, t0], got {t}")
    q_grid = potential_on_grid(torus, q)
    if rk is None:
        rk = relative_kato_estimate(torus, q, default_horizons(torus), uniform=uniform)
    if rk.eta_fit >= split_level:
        raise HorizonError(f"fitted eta={rk.eta_fit:.3g} is not below {split_level}; the relative-Kato envelope does not allow the series at any horizon")
    stages = 1
    if rk.eta_fit + rk.beta * t > split_level:
        stages = int(math.ceil(rk.beta * t / (split_level - rk.eta_fit)))
    step = t / stages
    order, tail = choose_order(rk.eta_fit, rk.beta * step, tol, max_terms)
    pts = default_probes(torus, t) if probes is None else np.atleast_2d(np.asarray(probes, dtype=float))
    coeffs = torus.point_sources(pts)
    all_nodes, all_values = [], []
    finals: list[np.ndarray] = []
    extra_change = 0.0
    for s in range(stages):
        local_extra = [v - s * step for v in extra_times if s * step < v <= (s + 1) * step]
        nodes = time_nodes(torus, step, uniform=uniform, extra=local_extra)
        total, finals, extra = _series(torus, q_grid, coeffs, nodes, order)
        coeffs = total[-1]
        all_nodes.append(nodes[1:] + s * step if s else nodes + s * step)
        all_values.append(total[1:] if s else total)
        ref = torus.inverse(torus.propagate(torus.point_sources(pts), (s + 1) * step))
        extra_change = max(extra_change, _sup_ratio(torus, extra, ref))
    nodes = np.concatenate(all_nodes)
    values = np.concatenate(all_values)
    ref = _free_values(torus, pts, t)
    norms = [_sup_ratio(torus, c, ref) for c in finals]
    if stages > 1:
        warnings.warn(f"horizon t={t} assembled from {stages} sub-steps; the stored terms belong to the last sub-step", ScopeWarning, stacklevel=2)
    return PerturbedKernel(
        torus, q, float(t), pts, nodes, values, finals, order, norms, stages * tail, rk.eta, rk.h_eta, rk.beta, rk.eta_fit, stages, extra_change
    )


# Semigroup, generator and weak solutions ------------------------------------------------------------


def apply_semigroup(pk: PerturbedKernel, phi: np.ndarray, t: float | None = None, uniform: int = 128) -> np.ndarray:
    """``P~_t phi`` on the grid for grid samples ``phi``, by the series with initial datum ``phi``."""
    torus = pk.torus
    t = pk.t if t is None else t
    phi = np.asarray(phi, dtype=float)
    if phi.shape != torus.shape:
        raise ConfigurationError(f"phi must be sampled on the grid, shape {torus.shape}")
    q_grid = potential_on_grid(torus, pk.q)
    stages = max(1, int(math.ceil(pk.beta * t / max(0.5 - pk.eta_fit, 1e-12))) if pk.beta > 0 else 1)
    step = t / stages
    order, _ = choose_order(pk.eta_fit, pk.beta * step, 1e-8, 40)
    c = torus.forward(phi)[None]
    for _ in range(stages):
        nodes = time_nodes(torus, step, uniform=uniform)
        total, _, _ = _series(torus, q_grid, c, nodes, order)
        c = total[-1]
    return torus.inverse(c[0])




def _call(phi, pts: np.ndarray, d: int) -> np.ndarray:
    """Evaluate a test function on points stacked on the last axis (plain coordinates in ``d = 1``)."""
    return np.asarray(phi(pts[..., 0] if d == 1 else pts), dtype=float)


def _sphere_rule(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions on the unit sphere with weights summing to its area."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if d == 2:
        th = np.linspace(0.0, 2 * math.pi, 128, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(th.size, 2 * math.pi / th.size)
    ct, wt = np.polynomial.legendre.leggauss(32)
    ph = np.linspace(0.0, 2 * math.pi, 64, endpoint=False)
    C, P = np.meshgrid(ct, ph, indexing="ij")
    S = np.sqrt(1 - C**2)
    dirs = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
    return dirs, np.repeat(wt, ph.size) * 2 * math.pi / ph.size


def _laplacian(phi, x: np.ndarray) -> float:
    """Finite-difference Laplacian, checked for consistency under step halving."""
    d = x.size

    def lap(h):
        total = 0.0
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            v = _call(phi, np.stack([x + e, x - e, x]), d)
            total += (v[0] + v[1] - 2 * v[2]) / h**2
        return total

    coarse, mid, fine = lap(4e-3), lap(2e-3), lap(1e-3)
    # a C^2 function gives differences shrinking by ~4 per halving
    if abs(coarse - mid) > 1e-6 * max(1.0, abs(mid)) and abs(mid - fine) > 0.5 * abs(coarse - mid):
        raise DomainError("test function fails the finite-difference second-derivative check at the evaluation point")
    return (4.0 * fine - mid) / 3.0


def generator_apply(profile: LevyProfile, phi: Callable[[np.ndarray], np.ndarray], x, reach: float = 1e8) -> float:
    """``L phi(x) = int (phi(x + y) - phi(x) - grad phi(x) . y 1{|y| < 1}) f(|y|) dy``.

    ``phi`` takes plain coordinates in ``d = 1`` and points stacked on the
    last axis otherwise. The jump measure is symmetric, so the compensator
    integrates to zero over each sphere and the symmetrized second difference
    ``(phi(x + r theta) + phi(x - r theta) - 2 phi(x)) / 2`` is integrated
    instead. Below ``r = 1e-4`` the second difference is replaced by its
    Taylor term ``r^2 Laplacian / (2 d)`` on the sphere; beyond ``reach`` only
    ``-phi(x) nu(|y| > reach)`` is kept.
    """
    d = profile.dim
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if x.size != d:
        raise DomainError(f"point must have {d} coordinates")
    dirs, w = _sphere_rule(d)
    centre = float(_call(phi, x[None], d)[0])
    lap = _laplacian(phi, x)
    eps = 1e-4
    area = float(w.sum())
    moment = integrate.quad(lambda s: math.exp((d + 2) * s) * float(profile.f(math.exp(s))), math.log(eps) - 60, math.log(eps), limit=200)[0]
    total = lap * area / (2.0 * d) * moment

    gl, gw = np.polynomial.legendre.leggauss(24)
    # unit panels near x resolve the test function; decade panels beyond
    edges = np.unique(np.concatenate([np.geomspace(eps, 1.0, 17), np.arange(1.0, 64.0 + 1), np.geomspace(64.0, reach, 8 * int(math.log10(reach / 64.0)) + 1)]))
    a, b = edges[:-1], edges[1:]
    r = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * gl[None]).reshape(-1)
    wr = (0.5 * (b - a)[:, None] * gw[None]).reshape(-1)
    plus = _call(phi, x[None, None] + r[:, None, None] * dirs[None], d)
    minus = _call(phi, x[None, None] - r[:, None, None] * dirs[None], d)
    second = ((plus + minus - 2.0 * centre) / 2.0 * w[None]).sum(axis=1)
    total += float(np.sum(wr * second * profile.f(r) * r ** (d - 1)))
    return total - centre * profile.tail_mass(reach)


def spectral_generator(torus: Torus, values: np.ndarray) -> np.ndarray:
    """``L`` applied to grid samples through the multiplier ``-Phi``."""
    return torus.inverse(-torus.symbol * torus.forward(values))


def _time_derivative(phi, t: float, pts: np.ndarray, d: int, step: float) -> np.ndarray:
    f = lambda s: _call(lambda y: phi(s, y), pts, d)
    return (8.0 * (f(t + step) - f(t - step)) - (f(t + 2 * step) - f(t - 2 * step))) / (12.0 * step)


def weak_solution_residual(
    pk: PerturbedKernel,
    q: Potential,
    phi: Callable[[float, np.ndarray], np.ndarray],
    s: float,
    x,
    support: tuple[float, float] | None = None,
) -> float:
    """``int_0^inf int p~(t, x, y) [d_t + L + q] phi(s + t, y) dy dt + phi(s, x)``.

    ``phi(t, y)`` is a space-time test function (plain coordinates in
    ``d = 1``). ``support = (t_lo, t_hi)`` bounds its time support (default:
    it is assumed to vanish beyond ``s + pk.t``). ``L`` acts through the same
    spectral multiplier as the kernel, so the residual measures the time
    discretization and the truncation of the series.

    Raises
    ------
    ConfigurationError
        If ``phi`` does not vanish on the grid boundary, ``q`` differs from the
        kernel's potential, or the kernel horizon does not cover the support.
    """
    if q is not pk.q:
        raise ConfigurationError("weak-solution residual needs the kernel of the same potential")
    torus = pk.torus
    d = torus.dim
    hi = support[1] if support else s + pk.t
    if hi - s > pk.t * (1 + 1e-12):
        raise ConfigurationError(f"kernel horizon {pk.t} does not cover the time support up to {hi}")
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    match = np.flatnonzero(np.all(np.isclose(pk.probes, x[None]), axis=1))
    if match.size == 0:
        raise ConfigurationError("x must be one of the kernel's probe points")
    col = int(match[0])
    pts = torus.grid()
    edge = np.zeros(torus.shape, dtype=bool)
    for i in range(d):
        sl = [slice(None)] * d
        sl[i] = 0
        edge[tuple(sl)] = True
    q_grid = potential_on_grid(torus, q)
    step = 1e-4 * max(pk.t, 1e-3)
    integrand = np.empty(pk.nodes.size)
    for j, t in enumerate(pk.nodes):
        vals = _call(lambda y: phi(s + t, y), pts, d)
        if np.any(np.abs(vals[edge]) > 1e-12 * max(1.0, np.abs(vals).max())):
            raise ConfigurationError("test function support leaves the grid")
        action = _time_derivative(phi, s + t, pts, d, step) + spectral_generator(torus, vals) + q_grid * vals
        integrand[j] = float(torus.inner(torus.inverse(pk.values[j, col]), action))
    total = float(integrate.simpson(integrand, x=pk.nodes))
    start = float(torus.evaluate(torus.forward(_call(lambda y: phi(s, y), pts, d))[None], x[None])[0, 0])
    return total + start


# Verification of the kernel estimates ------------------------------------------------------------


def comparability_bounds(pk: PerturbedKernel, eta: float | None = None, h_eta: float | None = None) -> tuple[float, float, int]:
    """``(1 - eta)^m`` and ``(1 - eta)^-1 exp(eta t / (h_eta (1 - eta)))`` with ``m`` the least integer with ``t < m h_eta``."""
    eta = pk.eta if eta is None else eta
    h_eta = pk.h_eta if h_eta is None else h_eta
    if not 0 <= eta < 1:
        raise DomainError("eta must lie in [0, 1)")
    m = 1 if not math.isfinite(h_eta) else int(math.floor(pk.t / h_eta)) + 1
    upper = 1.0 / (1.0 - eta) * (math.exp(eta * pk.t / (h_eta * (1.0 - eta))) if math.isfinite(h_eta) else 1.0)
    return (1.0 - eta) ** m, upper, m


def check_perturbed_bounds(pk: PerturbedKernel, rk: RelativeKato | None = None, slack: float = 0.05) -> dict[str, Any]:
    """Two-sided ratio bounds, symmetry, positivity, term bounds and the fixed-point change."""
    p = pk.free_values()
    pt = pk.grid_values()
    ok = _trusted(pk.torus, p, pk.coefficients())
    ratio = np.where(ok, pt / np.where(ok, p, 1.0), np.nan)
    lo, hi, m = comparability_bounds(pk)
    rmin, rmax = float(np.nanmin(ratio)), float(np.nanmax(ratio))
    cross = pk.at(pk.probes)
    scale = np.abs(cross).max()
    sym = float(np.max(np.abs(cross - cross.T)) / scale)
    pos = float(np.min(pt[ok]))
    # the terms of a composed kernel belong to its last sub-step; redo a single step when it converges
    norms = pk.term_norms
    if pk.stages > 1 and pk.eta_fit + pk.beta * pk.t < 1:
        norms = series_term_norms(pk.torus, pk.q, pk.probes, pk.t, pk.N)
    bounds = [term_bound(n, pk.eta_fit, pk.beta * pk.t) for n in range(len(norms))]
    term_ok = (pk.stages == 1 or norms is not pk.term_norms) and all(v <= b * (1 + slack) + 1e-9 for v, b in zip(norms, bounds))
    out = {
        "t": pk.t,
        "eta": pk.eta,
        "h_eta": pk.h_eta if math.isfinite(pk.h_eta) else "inf",
        "m": m,
        "ratio_min": rmin,
        "ratio_max": rmax,
        "lower_bound": lo,
        "upper_bound": hi,
        "ratio_bounds_ok": bool(rmin >= lo * (1 - slack) and rmax <= hi * (1 + slack)),
        "symmetry_residual": sym,
        "positive": bool(pos > 0),
        "term_norms": norms,
        "term_bounds": bounds,
        "term_bounds_hold": bool(term_ok),
        "fixed_point_change": pk.fixed_point_change,
        "tail_bound": pk.tail_bound,
    }
    if rk is not None:
        shape = rk.eta * (1 + rk.horizons / rk.h_eta) if math.isfinite(rk.h_eta) else np.full(rk.horizons.size, rk.eta)
        out["relative_kato_shape_holds"] = bool(np.all(rk.kappa <= shape * (1 + 1e-9)))
    return out


def series_term_norms(torus: Torus, q: Potential, probes: np.ndarray, t: float, n_terms: int, uniform: int = 128) -> list[float]:
    """``sup |p_n(t, ., y)| / p(t, y - .)`` for ``n <= n_terms`` from a single series step."""
    nodes = time_nodes(torus, t, uniform=uniform)
    _, finals, _ = _series(torus, potential_on_grid(torus, q), torus.point_sources(probes), nodes, n_terms)
    ref = _free_values(torus, probes, t)
    return [_sup_ratio(torus, c, ref) for c in finals]


def chapman_kolmogorov(pk: PerturbedKernel, s: float, t: float) -> float:
    """``max |int p~(s, x, z) p~(t, z, y) dz - p~(s + t, x, y)| / max p~(s + t)`` over probe pairs.

    ``s``, ``t`` and ``s + t`` must be nodes of the kernel's time grid; the
    symmetry of ``p~`` turns the probe columns into both factors.
    """
    torus = pk.torus
    a = torus.inverse(pk.values[pk.index(s)])
    b = torus.inverse(pk.values[pk.index(t)])
    lhs = a.reshape(a.shape[0], -1) @ b.reshape(b.shape[0], -1).T * torus.cell
    rhs = pk.at(pk.probes, s + t)
    return float(np.max(np.abs(lhs - rhs)) / np.abs(rhs).max())


def regularity_report(
    pk: PerturbedKernel,
    t: float | None = None,
    a: float = 2.0,
    order: float | None = None,
    decades: float = 3.0,
    refined: PerturbedKernel | None = None,
) -> dict[str, Any]:
    """Hölder exponent in the first variable and the gradient constant of ``p~(t)``.

    Hölder: ``D(delta) = sup |p~(t, x + delta, y) - p~(t, x, y)| / (G(y - x - delta) + G(y - x))``
    for ``delta`` over ``decades`` decades below ``h(t)``; ``theta`` is the
    log-log slope of ``D`` and the prediction is ``alpha1 (1 - 1/a)``.
    Gradient: ``C = sup |grad p~| H(t) / G(y - x)`` over the grid, compared
    with the same constant on ``refined`` (a kernel on a finer grid).

    Raises
    ------
    ConfigurationError
        If the grid spacing exceeds ``h(t) / 4`` (probe resolution too coarse).
    """
    t = pk.t if t is None else t
    torus = pk.torus
    table = torus.table
    prof = table.profile
    h = float(table.h(t))
    H = float(table.H(t))
    if torus.spec.dx > h / 4:
        raise ConfigurationError(f"grid spacing {torus.spec.dx:.3g} too coarse for h(t)={h:.3g}")
    n = default_order(table) if order is None else order
    env = Envelope(n, table)
    deltas = h * np.logspace(-decades, 0, int(4 * decades) + 1)
    span = min(4.0 * h, 0.5 * torus.spec.x_max)
    base = np.zeros((65, torus.dim))
    base[:, 0] = np.linspace(-span, span, 65)
    c = pk.coefficients(t)
    px = torus.evaluate(c, base)
    dist = lambda pts: np.linalg.norm(pk.probes[:, None, :] - pts[None], axis=-1)
    gx = env.radial(t, dist(base))
    D = []
    for dl in deltas:
        shifted = base.copy()
        shifted[:, 0] += dl
        pz = torus.evaluate(c, shifted)
        D.append(float(np.max(np.abs(pz - px) / (gx + env.radial(t, dist(shifted))))))
    D = np.array(D)
    theta = loglog_slope(deltas / h, D)
    predicted = prof.alpha1 * (1.0 - 1.0 / a)

    def gradient_constant(k: PerturbedKernel) -> tuple[float, dict[str, float]]:
        grad = k.gradient(t)
        pts = k.torus.grid()
        dist_grid = np.linalg.norm(k.probes.reshape((-1,) + (1,) * k.torus.dim + (k.torus.dim,)) - pts[None], axis=-1)
        ratio = np.abs(grad) * H / env.radial(t, dist_grid)
        idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        return float(ratio[idx]), {"y": float(k.probes[idx[0], 0]), "x": float(pts[idx[1:]].reshape(-1)[0])}

    C, wit = gradient_constant(pk)
    C_ref = gradient_constant(refined)[0] if refined is not None else float("nan")
    applicable = prof.alpha1 > 1 and a > prof.alpha1 / (prof.alpha1 - 1)
    return {
        "t": t,
        "a": a,
        "order": n,
        "holder_deltas": deltas.tolist(),
        "holder_sup": D.tolist(),
        "holder_exponent": theta,
        "holder_predicted": predicted,
        "holder_holds": bool(theta >= predicted - 0.1),
        "gradient": FittedConstant("gradient_constant", "upper", C, C_ref, wit).to_dict(),
        "gradient_applicable": bool(applicable),
    }


# Time-integral inequality ------------------------------------------------------------------------


def check_time_integrals(
    table: SymbolTable,
    a: float,
    fractions: Sequence[float] = (0.05, 0.2, 1.0),
    per_decade: int = 4,
    tolerance: float = 0.1,
) -> list[FittedConstant]:
    """Constants in ``int_0^t (r / h(t - s) ^ 1) p(s, y) ds <= C Psi(1/r)^(1/a - 1) (int_0^t p(s, y)^a ds)^(1/a)``.

    Two constants: the weight ``r / h(t - s)`` paired with ``p(s, y)`` and
    with ``p(t - s, y)``. Samples ``y`` in ``h(t) [1/4, 4]`` and ``r`` in
    ``h(t) [1/16, 1]`` with ratio 2; the refinement doubles the time panels
    and takes ratio ``sqrt 2`` over the same ranges. Below a thousandth of the
    crossover time ``1/Psi(1/|y|)`` the kernel is in its jump regime
    ``p(s, y) ~ s f(|y|)`` and that piece is integrated in closed form.
    """
    from .kato import _crossover, potential_kernel

    if not 1 < a <= 2:
        raise DomainError("the time-integral inequality is stated for a in (1, 2]")
    times = tuple(float(table.t0 * f) for f in fractions)
    vk = potential_kernel(table, a, times)
    gl, gw = np.polynomial.legendre.leggauss(6)

    def panels(edges):
        lo, hi = edges[:-1], edges[1:]
        nodes = (0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * gl[None]).reshape(-1)
        return nodes, (0.5 * (hi - lo)[:, None] * gw[None]).reshape(-1)

    def scan(level: int):
        per_octave = 1 << level
        ys = 2.0 ** (np.arange(-2 * per_octave, 2 * per_octave + 1) / per_octave)
        rs = 2.0 ** (np.arange(-4 * per_octave, 1) / per_octave)
        dens = per_decade << level
        fwd, bwd, coords = [], [], {"t": [], "y": [], "r": []}
        for k, t in enumerate(times):
            ht = float(_h_any(table, t))
            for y in ys * ht:
                s_lo = min(1e-3 * _crossover(table, float(y)), 1e-3 * t)
                grade = lambda lo, hi: np.geomspace(lo, hi, max(2, int(math.ceil(dens * math.log10(hi / lo))) + 1))
                edges = np.unique(np.concatenate([grade(s_lo, 0.5 * t), t - grade(1e-9 * t, 0.5 * t)]))
                s, w = panels(edges)
                ps = np.maximum([radial_density(table, float(v), float(y), extrapolate=True) for v in s], 0.0)
                # jump regime on (0, s_lo): p(s, y) = s p(s_lo, y) / s_lo
                p_lo = radial_density(table, s_lo, float(y), extrapolate=True)
                rhs_base = float(vk.power(k, y)) ** (1.0 / a)
                h_back, h_fwd = _h_any(table, t - s), _h_any(table, s)
                h_t, h_lo = float(_h_any(table, t)), float(_h_any(table, 0.5 * s_lo))
                for r in rs * ht:
                    psi = float(table.psi(1.0 / r)) if 1.0 / r <= table.u[-1] else float(table.phi(1.0 / r))
                    rhs = psi ** (1.0 / a - 1.0) * rhs_base
                    w_fwd = np.minimum(r / h_back, 1.0)
                    w_bwd = np.minimum(r / h_fwd, 1.0)
                    head = 0.5 * s_lo * p_lo
                    fwd.append((float(np.sum(w * w_fwd * ps)) + head * min(r / h_t, 1.0)) / rhs)
                    bwd.append((float(np.sum(w * w_bwd * ps)) + head * min(r / h_lo, 1.0)) / rhs)
                    coords["t"].append(t)
                    coords["y"].append(y)
                    coords["r"].append(r)
        return np.array(fwd), np.array(bwd), {key: np.array(v) for key, v in coords.items()}

    f0, b0, c0 = scan(0)
    f1, b1, _ = scan(1)
    out = []
    for name, r0, r1 in (("time_integral_forward", f0, f1), ("time_integral_backward", b0, b1)):
        v0, wit, exc = extremum(r0, "upper", c0)
        v1, _, _ = extremum(r1, "upper")
        out.append(FittedConstant(name, "upper", v0, v1, wit, tolerance, exc))
    return out


def _h_any(table: SymbolTable, t) -> np.ndarray:
    """``h(t)`` with the power-law continuation below the table."""
    from .kato import _h_extended

    t = np.asarray(t, dtype=float)
    return np.vectorize(lambda v: _h_extended(table, float(v)) if v > 0 else 0.0)(t)

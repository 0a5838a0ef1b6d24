"""Radial Lévy profiles and the structural conditions on them.

The jump density is ``nu(x) = f(|x|)`` where ``f`` is either the two-clause
family

    f(r) = r^(-alpha-d)                          for r <= 1,
    f(r) = e^m exp(-m r^beta) r^(-d-eta)         for r > 1,

or a user supplied positive decreasing callable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.special import gamma

from . import _integrands
from .errors import ConfigurationError, DomainError
from .fitting import log_grid

FAMILIES = ("fractional", "tempered", "custom")


@dataclass(frozen=True)
class LevyProfile:
    """Radial profile ``f`` of a symmetric Lévy jump density.

    Parameters
    ----------
    family
        ``"fractional"`` (``m = 0``), ``"tempered"`` (``m > 0``) or ``"custom"``.
    alpha
        Short-range exponent in (0, 2). For custom profiles it is the exponent
        of the small-r power behaviour and is used as a hint only.
    m, beta, eta
        Tempering rate, stretch exponent in (0, 1] and tail correction.
        ``eta`` defaults to ``alpha``.
    dim
        Space dimension, one of 1, 2, 3.
    alpha1, alpha2
        Declared lower and upper scaling exponents (default ``alpha``).
    func
        Vectorized callable ``r -> f(r)`` for custom profiles.
    name
        Label used in reports.
    log_func
        Optional vectorized ``r -> log f(r)`` for custom profiles whose values
        underflow; used by the condition scans.
    """

    family: str = "fractional"
    alpha: float = 1.0
    m: float = 0.0
    beta: float = 1.0
    eta: float | None = None
    dim: int = 1
    alpha1: float | None = None
    alpha2: float | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = ""
    log_func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown profile family {self.family!r}")
        if not 0.0 < self.alpha < 2.0:
            raise ConfigurationError("alpha must lie in (0, 2)")
        if self.dim not in (1, 2, 3):
            raise ConfigurationError("dim must be 1, 2 or 3")
        if self.eta is None:
            object.__setattr__(self, "eta", float(self.alpha))
        if self.alpha1 is None:
            object.__setattr__(self, "alpha1", float(self.alpha))
        if self.alpha2 is None:
            object.__setattr__(self, "alpha2", float(self.alpha))
        if self.alpha1 > self.alpha2:
            raise ConfigurationError("declared alpha1 exceeds alpha2")
        if not (0.0 < self.alpha1 and self.alpha2 < 2.0):
            raise ConfigurationError("scaling exponents must satisfy 0 < alpha1 <= alpha2 < 2")
        if self.dim >= 2 and self.alpha2 >= self.dim:
            raise ConfigurationError("alpha2 must be below the dimension for d >= 2")
        if self.family == "fractional" and self.m != 0.0:
            raise ConfigurationError("fractional profiles have m = 0")
        if self.family == "tempered":
            if self.m <= 0.0:
                raise ConfigurationError("tempered profiles need m > 0")
            if not 0.0 < self.beta <= 1.0:
                raise ConfigurationError("beta must lie in (0, 1]")
        if self.family == "custom" and self.func is None:
            raise ConfigurationError("custom profiles need a callable")

    # evaluation -------------------------------------------------------------

    @property
    def splice(self) -> float:
        """Factor applied to the tail clause so that ``f`` is continuous at 1."""
        if self.family == "custom":
            return 1.0
        inner = 1.0
        outer = math.exp(self.m - self.m)
        return inner / outer

    def log_f(self, r: np.ndarray | float) -> np.ndarray:
        """``log f(r)`` for ``r > 0`` (vectorized, no domain checks)."""
        r = np.asarray(r, dtype=float)
        d = self.dim
        if self.family == "custom":
            if self.log_func is not None:
                return np.asarray(self.log_func(r), dtype=float)
            with np.errstate(divide="ignore"):
                return np.log(np.asarray(self.func(r), dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            lr = np.log(r)
            short = -(self.alpha + d) * lr
            tail = math.log(self.splice) + self.m - self.m * r**self.beta - (d + self.eta) * lr
        return np.where(r <= 1.0, short, tail)

    def f(self, r: np.ndarray | float) -> np.ndarray:
        """Profile values ``f(r)``."""
        _check_radius(r)
        return np.exp(self.log_f(r))

    def density(self, x: np.ndarray) -> np.ndarray:
        """Jump density ``nu(x) = f(|x|)`` for points stacked along the last axis."""
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if self.dim == 1 and x.ndim <= 1 else np.linalg.norm(x, axis=-1)
        return self.f(r)

    def tail_mass(self, radius: float) -> float:
        """``nu(|y| > radius)``."""
        from scipy import integrate

        area = sphere_area(self.dim)
        val, _ = integrate.quad(lambda s: self.f(s) * s ** (self.dim - 1), radius, np.inf, limit=400)
        return float(area * val)

    def buffer(self) -> np.ndarray:
        """Parameter buffer for the compiled integrands (families only)."""
        if self.family == "custom":
            raise ConfigurationError("custom profiles have no compiled form")
        return _integrands.pack_family(self.alpha, self.m, self.beta, self.eta, self.dim, self.splice)

    def describe(self) -> dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k not in ("func", "log_func")}
        if self.family == "custom":
            out["func"] = getattr(self.func, "__name__", "callable")
        return out


def _check_radius(r) -> None:
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("profile radius must be finite")
    if np.any(arr <= 0):
        raise DomainError("profile radius must be positive")


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in ``R^d`` (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / gamma(d / 2)


def eval_profile(profile: LevyProfile, r: float) -> float:
    """Evaluate ``f(r)``; raises ``DomainError`` for ``r <= 0`` or non-finite ``r``."""
    _check_radius(r)
    return float(profile.f(r))


# Shipped profiles --------------------------------------------------------------


def fractional(alpha: float, dim: int = 1) -> LevyProfile:
    """Pure power law ``r^(-d-alpha)`` (isotropic stable jump density)."""
    return LevyProfile("fractional", alpha=alpha, m=0.0, beta=1.0, eta=alpha, dim=dim, name=f"fractional-{alpha:g}")


def tempered(alpha: float, beta: float, m: float = 1.0, eta: float | None = None, dim: int = 1) -> LevyProfile:
    """Tempered profile; ``eta`` defaults to ``(alpha + 1 - d)/2`` when ``beta = 1``."""
    if eta is None:
        eta = (alpha + 1 - dim) / 2 if beta == 1.0 else 0.0
    return LevyProfile("tempered", alpha=alpha, m=m, beta=beta, eta=eta, dim=dim, name=f"tempered-a{alpha:g}-b{beta:g}")


def shipped_profiles() -> dict[str, LevyProfile]:
    """Profiles exercised by the default verification suites (d = 1)."""
    profiles = [
        fractional(0.5),
        fractional(1.0),
        fractional(1.5),
        tempered(0.5, 0.5),
        tempered(1.0, 1.0),
    ]
    return {p.name: p for p in profiles}


# Condition reports ------------------------------------------------------------


@dataclass
class ConditionReport:
    """Outcome of a structural-condition scan."""

    condition: str
    passed: bool
    fitted_constants: dict[str, float]
    worst_ratio_location: dict[str, float]
    grid_spec: dict[str, Any]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "passed": bool(self.passed),
            "constants": {k: _finite_or_str(v) for k, v in self.fitted_constants.items()},
            "worst_point": {k: _finite_or_str(v) for k, v in self.worst_ratio_location.items()},
            "grid": self.grid_spec,
            "notes": self.notes,
        }


def _finite_or_str(v):
    if isinstance(v, (bool, str)):
        return v
    v = float(v)
    return v if np.isfinite(v) else str(v)


def _rel_change(a: float, b: float) -> float:
    if not (np.isfinite(a) and np.isfinite(b)) or a <= 0 or b <= 0:
        return float("inf")
    return abs(b / a - 1.0)


# Truncated self-convolution -------------------------------------------------------

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _graded_nodes(a: float, b: float, h0: float, order: int, both: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on ``[a, b]`` with panels doubling away from the ends."""
    if b <= a:
        return np.empty(0), np.empty(0)
    if both:
        mid = 0.5 * (a + b)
        left = _graded_edges(a, mid, h0)
        right = b - _graded_edges(0.0, b - mid, h0)[::-1]
        edges = np.concatenate([left, right[1:]])
    else:
        edges = _graded_edges(a, b, h0)
    x, w = _gauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return nodes.ravel(), weights.ravel()


def _graded_edges(a: float, b: float, h0: float) -> np.ndarray:
    length = b - a
    if length <= h0:
        return np.array([a, b])
    k = int(np.ceil(np.log2(length / h0 + 1.0)))
    edges = a + h0 * (2.0 ** np.arange(k + 1) - 1.0)
    edges = edges[edges < b]
    return np.append(edges, b)


def _logsumexp(logv: np.ndarray, w: np.ndarray) -> float:
    ok = np.isfinite(logv) & (w > 0)
    if not ok.any():
        return -np.inf
    c = logv[ok].max()
    return float(c + np.log(np.sum(w[ok] * np.exp(logv[ok] - c))))


def truncated_convolution_log(profile: LevyProfile, x: float, cutoff: float = 1.0, level: int = 0) -> float:
    """``log`` of ``int nu_c(x - y) nu_c(y) dy`` with ``nu_c = nu 1_{|y| > cutoff}``.

    Evaluated by graded Gauss-Legendre panels in the log domain, so that
    rapidly decaying profiles neither underflow nor overflow. ``level`` refines
    the panels and the quadrature order.
    """
    c = cutoff
    order = 20 + 12 * level
    h0 = c / 8.0 / 2**level
    far = c * 1e8 * max(x / c, 1.0)
    lf = profile.log_f
    d = profile.dim
    if d == 1:
        s, ws = _graded_nodes(c, far, h0, order, both=False)
        pieces = [np.log(2.0 * ws) + lf(s) + lf(x + s)]
        if x > 2 * c:
            y, wy = _graded_nodes(c, x / 2, h0, order)
            pieces.append(np.log(2.0 * wy) + lf(y) + lf(x - y))
        logv = np.concatenate(pieces)
        return _logsumexp(logv, np.ones_like(logv))
    # radial reduction over (|y|, angle to x)
    breaks = sorted({c, max(c, x - c), x + c})
    s_parts, w_parts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        sn, sw = _graded_nodes(a, b, h0, order)
        s_parts.append(sn)
        w_parts.append(sw)
    sn, sw = _graded_nodes(breaks[-1], far, h0, order, both=False)
    s_nodes = np.concatenate(s_parts + [sn])
    s_w = np.concatenate(w_parts + [sw])
    omega = sphere_area(d - 1)
    # angle mapped to [theta_lo(s), pi] through a shared graded grid on [0, 1]
    tau, tw = _graded_nodes(0.0, 1.0, 1e-6 / 2**level, order, both=False)
    near = np.abs(x - s_nodes) < c
    cos_star = np.clip((x * x + s_nodes**2 - c * c) / (2 * x * s_nodes), -1.0, 1.0)
    theta_lo = np.where(near, np.arccos(cos_star), 0.0)
    span = np.pi - theta_lo
    th = theta_lo[:, None] + span[:, None] * tau[None, :]
    rho = np.sqrt(np.maximum(x * x + s_nodes[:, None] ** 2 - 2 * x * s_nodes[:, None] * np.cos(th), c * c))
    logv = lf(rho) + np.log(span[:, None] * tw[None, :])
    if d > 2:
        with np.errstate(divide="ignore"):
            logv = logv + (d - 2) * np.log(np.sin(th))
    logv = logv + (np.log(s_w) + lf(s_nodes) + (d - 1) * np.log(s_nodes))[:, None]
    return math.log(omega) + _logsumexp(logv.ravel(), np.ones(logv.size))


# Condition checks --------------------------------------------------------------------


def check_condition_A(
    profile: LevyProfile,
    r_max: float = 100.0,
    per_decade: int = 64,
    tolerance: float = 0.1,
) -> ConditionReport:
    """Certify the convolution condition on the radial scan ``[2, r_max]``.

    The fitted ``C3`` is the supremum of ``(f1 * f1)(x) / f(|x|)``. The check
    passes when ``C3`` is finite, changes by at most ``tolerance`` under one
    refinement of scan and quadrature, and also under halving of the scanned
    range (a finite scan can only certify the asymptotic statement up to such
    stability).
    """
    if r_max < 10:
        raise ConfigurationError("condition A scans need r_max >= 10")
    per_dec = per_decade if profile.dim == 1 else max(8, per_decade // 4)

    def scan(level: int) -> tuple[np.ndarray, np.ndarray]:
        radii = log_grid(2.0, r_max, per_dec * 2**level)
        logs = np.array([truncated_convolution_log(profile, x, 1.0, level) for x in radii])
        with np.errstate(invalid="ignore"):
            lr = logs - profile.log_f(radii)
        # an underflowing f with a positive convolution means an unbounded ratio
        return radii, np.where(np.isnan(lr), np.inf, lr)

    radii, lr0 = scan(0)
    _, lr1 = scan(1)
    with np.errstate(over="ignore"):
        c3 = float(np.exp(np.max(lr0)))
        c3_ref = float(np.exp(np.max(lr1)))
        half = radii <= r_max / 2
        c3_half = float(np.exp(np.max(lr0[half])))
    worst = float(radii[int(np.argmax(lr0))])
    passed = bool(
        np.isfinite(c3) and _rel_change(c3, c3_ref) <= tolerance and _rel_change(c3_half, c3) <= tolerance
    )
    return ConditionReport(
        "A",
        passed,
        {"C3": c3, "C3_refined": c3_ref, "C3_half_range": c3_half},
        {"r": worst},
        {"r_min": 2.0, "r_max": r_max, "per_decade": per_dec, "tolerance": tolerance},
        ["certified on the scanned range only"],
    )


def check_condition_B(
    profile: LevyProfile,
    r_min: float = 1e-4,
    per_decade: int = 64,
    tolerance: float = 0.1,
) -> ConditionReport:
    """Monotonicity of ``s^d f(s)`` on (0, 2] and the two-sided doubling bound."""
    a1, a2 = profile.alpha1, profile.alpha2
    if a1 > a2:
        raise ConfigurationError("declared alpha1 exceeds alpha2")
    d = profile.dim

    def fit(level: int):
        s = log_grid(r_min, 2.0, per_decade * 2**level)
        lf = profile.log_f(s)
        lg = d * np.log(s) + lf
        monotone = bool(np.all(np.diff(lg) <= 1e-12 * np.maximum(1.0, np.abs(lg[1:]))))
        # pairs r = s[i] <= R = s[j]
        dl = lf[:, None] - lf[None, :]
        lrat = np.log(s)[:, None] - np.log(s)[None, :]
        upper = np.triu(np.ones((s.size, s.size), dtype=bool))
        low = np.where(upper, dl + (d + a1) * lrat, np.inf)
        high = np.where(upper, dl + (d + a2) * lrat, -np.inf)
        i4 = np.unravel_index(np.argmin(low), low.shape)
        return monotone, float(np.exp(low[i4])), float(np.exp(high.max())), s, i4, lg

    mono, c4, c5, s, i4, lg = fit(0)
    mono1, c4r, c5r, *_ = fit(1)
    notes = []
    if not mono:
        k = int(np.argmax(np.diff(lg) > 0))
        notes.append(f"s^d f(s) increases near s={s[k]:.4g}")
    passed = bool(
        mono
        and mono1
        and np.isfinite(c4)
        and c4 > 0
        and np.isfinite(c5)
        and _rel_change(c4, c4r) <= tolerance
        and _rel_change(c5, c5r) <= tolerance
    )
    return ConditionReport(
        "B",
        passed,
        {"C4": c4, "C5": c5, "C4_refined": c4r, "C5_refined": c5r, "alpha1": a1, "alpha2": a2, "monotone": mono},
        {"r": float(s[i4[0]]), "R": float(s[i4[1]])},
        {"r_min": r_min, "r_max": 2.0, "per_decade": per_decade, "tolerance": tolerance},
        notes,
    )


def _ratio_sup_C(profile: LevyProfile, r: np.ndarray, kappa: np.ndarray) -> tuple[float, tuple[float, float, float]]:
    lf = profile.log_f(r)
    with np.errstate(invalid="ignore"):
        T = profile.log_f(r[:, None] + kappa[None, :]) - lf[:, None]
    # entries where f underflows are excluded from the scan
    T = np.where(np.isfinite(T), T, np.nan)
    # max over i < j of T[i,k] - T[j,k]
    prefix = np.fmax.accumulate(T, axis=0)
    cand = prefix[:-1] - T[1:]
    if np.all(np.isnan(cand)):
        return float("nan"), (float("nan"),) * 3
    idx = np.unravel_index(np.nanargmax(cand), cand.shape)
    j = idx[0] + 1
    i = int(np.nanargmax(T[:j, idx[1]]))
    return float(cand[idx]), (float(r[i]), float(r[j]), float(kappa[idx[1]]))


def check_condition_C(
    profile: LevyProfile,
    r_min: float = 1e-4,
    r_max: float = 100.0,
    per_decade: int = 64,
    tolerance: float = 0.1,
) -> ConditionReport:
    """Fit ``C6 = sup f(r + k) f(s) / (f(r) f(s + k))`` over ``s > r``, ``k > 0``."""
    lc0, (r0, s0, k0) = _ratio_sup_C(profile, log_grid(r_min, r_max, per_decade), log_grid(r_min, r_max, per_decade))
    g1 = log_grid(r_min, r_max, 2 * per_decade)
    lc1, _ = _ratio_sup_C(profile, g1, g1)
    with np.errstate(over="ignore"):
        c6, c6r = float(np.exp(max(lc0, 0.0))), float(np.exp(max(lc1, 0.0)))
    passed = bool(np.isfinite(c6) and _rel_change(c6, c6r) <= tolerance)
    return ConditionReport(
        "C",
        passed,
        {"C6": c6, "C6_refined": c6r},
        {"r": r0, "s": s0, "kappa": k0},
        {"r_min": r_min, "r_max": r_max, "per_decade": per_decade, "tolerance": tolerance},
    )


def local_ratio_constant(profile: LevyProfile, R: float, level: int = 0, r_min: float = 1e-4, r_max: float = 1e3) -> tuple[float, dict[str, float]]:
    """``sup f(r)/f(r+s)`` over ``r > 0`` and ``0 < s <= min(R, r/2)``."""
    r = log_grid(r_min, r_max, 32 * 2**level)
    frac = np.linspace(0.0, 1.0, 17 * 2**level)[1:]
    s = np.minimum(R, r / 2)[:, None] * frac[None, :]
    lr = profile.log_f(r)[:, None] - profile.log_f(r[:, None] + s)
    i = np.unravel_index(np.argmax(lr), lr.shape)
    return float(np.exp(lr[i])), {"r": float(r[i[0]]), "s": float(s[i])}


def convolution_domination_constant(
    profile: LevyProfile, cutoff: float, level: int = 0, r_max: float = 50.0, per_decade: int = 16
) -> tuple[float, dict[str, float]]:
    """``sup (nu_r * nu_r)(x) / nu(x)`` over ``|x| >= r`` for the truncation radius ``r``."""
    radii = log_grid(cutoff, r_max, per_decade * 2**level)
    lr = np.array([truncated_convolution_log(profile, x, cutoff, level) for x in radii]) - profile.log_f(radii)
    i = int(np.argmax(lr))
    return float(np.exp(lr[i])), {"x": float(radii[i])}

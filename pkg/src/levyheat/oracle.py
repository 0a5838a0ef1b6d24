"""Dense matrix-exponential reference kernel on a small periodic grid.

The generator is assembled from jump rates: the rate from cell ``i`` to
cell ``j`` is the jump-measure mass of the cell ``j`` translated by ``-x_i``,
summed over periodic images. Jumps shorter than the cell half-width cannot
leave the cell; their second moment is given back as a discrete Laplacian.
The matrix is symmetric with zero row sums, so ``exp(t (A + Q))`` is computed
from one symmetric eigendecomposition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import integrate, linalg

from .errors import ConfigurationError, DomainError, NumericalError
from .free_kernel import GridSpec
from .kato import Potential
from .profiles import LevyProfile

MAX_POINTS = {1: 512, 2: 64}


@dataclass(frozen=True, eq=False)
class Generator:
    """Discrete generator on ``spec`` with the rates split into jumps and the Laplacian correction."""

    profile: LevyProfile
    spec: GridSpec
    matrix: np.ndarray = field(repr=False)
    jump_rate: float
    diffusion_rate: float
    images: int

    @property
    def cell(self) -> float:
        return self.spec.dx**self.spec.dim


def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * x, 0.5 * w


def _cell_masses(profile: LevyProfile, spec: GridSpec, images: int, order: int = 8) -> np.ndarray:
    """``nu``-mass of every displaced cell ``[delta - dx/2, delta + dx/2]^d`` summed over images.

    Returned with shape ``(n,) * d`` indexed by the displacement in grid
    steps (wrapped); the self cell is set to 0.
    """
    d, n, dx = spec.dim, spec.n, spec.dx
    period = 2.0 * spec.x_max
    steps = np.arange(n)
    disp = np.where(steps < n // 2 + 1, steps, steps - n) * dx
    gx, gw = _gauss(order)
    out = np.zeros((n,) * d)
    for shift in itertools.product(range(-images, images + 1), repeat=d):
        axes = [disp + period * s for s in shift]
        # quadrature points per axis: (n, order)
        pts = [ax[:, None] + dx * gx[None] for ax in axes]
        if d == 1:
            r = np.abs(pts[0])
            vals = profile.f(np.where(r > 0, r, 1.0)) * (r > 0)
            mass = (vals * gw[None]).sum(axis=1) * dx
        else:
            r = np.sqrt(pts[0][:, None, :, None] ** 2 + pts[1][None, :, None, :] ** 2)
            vals = profile.f(np.where(r > 0, r, 1.0)) * (r > 0)
            mass = np.einsum("ijkl,k,l->ij", vals, gw, gw) * dx**2
        out += mass
    out[(0,) * d] = 0.0
    return out


def _block_moment(profile: LevyProfile, d: int, a: float) -> float:
    """``int_{|y|_inf < a} |y|^2 nu(dy)``."""
    radial = lambda r: r ** (d + 1) * float(profile.f(r))
    core = integrate.quad(lambda s: math.exp(s) * radial(math.exp(s)), math.log(a) - 80, math.log(a), limit=200)[0]
    if d == 1:
        return 2.0 * core
    corner = lambda th: integrate.quad(radial, a, a / math.cos(th), limit=100)[0]
    return 2 * math.pi * core + 8.0 * integrate.quad(corner, 0.0, math.pi / 4, limit=100)[0]


def _moment_deficit(profile: LevyProfile, spec: GridSpec, masses: np.ndarray, radius: float) -> float:
    """Second moment of ``nu`` over the block of cells within ``radius`` missed by the cell rates.

    Inside the block the rates place each cell's mass at the cell centre;
    the difference to the true second moment (dominated by the self cell)
    is handed to the nearest neighbours, which makes the discrete operator
    exact on quadratics over that block.
    """
    d, n, dx = spec.dim, spec.n, spec.dx
    k = max(1, min(int(round(radius / dx)), n // 4))
    steps = np.arange(-k, k + 1)
    disp = np.stack(np.meshgrid(*([steps] * d), indexing="ij"), axis=-1).reshape(-1, d)
    discrete = sum(masses[tuple(v % n)] * float(np.sum((v * dx) ** 2)) for v in disp)
    return _block_moment(profile, d, (k + 0.5) * dx) - discrete


def discretize_generator(profile: LevyProfile, spec: GridSpec, images: int | None = None, matching_radius: float = 1.0) -> Generator:
    """Symmetric rate matrix of ``L`` on the periodic grid ``spec``.

    ``matching_radius`` sets the block over which the Laplacian correction
    restores the second moment of the jump measure.

    Raises
    ------
    ConfigurationError
        For ``d > 2``, grids above the dense-size limit, or when the Laplacian
        correction carries more than half of the total rate (cells too coarse).
    """
    d, n, dx = spec.dim, spec.n, spec.dx
    if d not in MAX_POINTS:
        raise ConfigurationError("the dense reference is restricted to d in {1, 2}")
    if n > MAX_POINTS[d]:
        raise ConfigurationError(f"at most {MAX_POINTS[d]} points per axis in d={d}")
    if profile.dim != d:
        raise ConfigurationError("profile and grid dimensions differ")
    if images is None:
        images = 64 if d == 1 else 6
    masses = _cell_masses(profile, spec, images)
    second = _moment_deficit(profile, spec, masses, matching_radius)
    # jumps beyond the explicit images are spread evenly over the torus
    far = profile.tail_mass((2 * images + 1) * spec.x_max)
    masses = masses + far / n**d * (masses > 0)
    neighbour = second / (2.0 * d * dx**2)
    idx = np.indices((n,) * d).reshape(d, -1).T
    # displacement index (j - i) mod n for every pair
    rel = (idx[None, :, :] - idx[:, None, :]) % n
    A = masses[tuple(rel[..., k] for k in range(d))]
    for k in range(d):
        step = np.zeros(d, dtype=int)
        step[k] = 1
        for sgn in (1, -1):
            hit = np.all(rel == (sgn * step) % n, axis=-1)
            A[hit] += neighbour
    np.fill_diagonal(A, 0.0)
    A = 0.5 * (A + A.T)
    jump = float(masses.sum())
    diffusion = 2.0 * d * neighbour
    if diffusion > 0.5 * (jump + diffusion):
        raise ConfigurationError(f"Laplacian correction {diffusion:.3g} exceeds half of the total rate {jump + diffusion:.3g}; refine the grid")
    np.fill_diagonal(A, -A.sum(axis=1))
    return Generator(profile, spec, A, jump, diffusion, images)


@dataclass(eq=False)
class OracleKernel:
    """``exp(t (A + Q)) / dx^d`` at a list of times."""

    spec: GridSpec
    generator_matrix: np.ndarray = field(repr=False)
    potential_diag: np.ndarray
    times: list[float]
    kernels: list[np.ndarray] = field(repr=False)

    def slice(self, t: float) -> np.ndarray:
        for s, k in zip(self.times, self.kernels):
            if math.isclose(s, t, rel_tol=1e-12):
                return k
        raise DomainError(f"t={t} is not among the oracle times")

    def row(self, t: float, y) -> np.ndarray:
        """``p~(t, y, .)`` on the grid for a grid point ``y``."""
        i = grid_index(self.spec, y)
        return self.slice(t)[i]

    def axis(self) -> np.ndarray:
        return self.spec.axis()


def grid_index(spec: GridSpec, y) -> int:
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    pos = (y + spec.x_max) / spec.dx
    k = np.rint(pos).astype(int)
    if not np.allclose(pos, k, atol=1e-8) or np.any(k < 0) or np.any(k >= spec.n):
        raise DomainError(f"{y} is not a point of the oracle grid")
    return int(np.ravel_multi_index(tuple(k), (spec.n,) * spec.dim))


def oracle_kernel(gen: Generator, q: Potential | None, times: float | Sequence[float]) -> OracleKernel:
    """Kernels ``exp(t (A + diag q)) / dx^d`` by symmetric eigendecomposition."""
    ts = [float(times)] if np.isscalar(times) else [float(v) for v in times]
    if any(v < 0 for v in ts):
        raise DomainError("times must be nonnegative")
    spec = gen.spec
    diag = np.zeros(spec.n**spec.dim) if q is None else q.cell_averages(spec.axis()).reshape(-1)
    M = gen.matrix + np.diag(diag)
    try:
        w, V = linalg.eigh(M)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    kernels = [(V * np.exp(t * w)) @ V.T / gen.cell for t in ts]
    return OracleKernel(spec, gen.matrix, diag, ts, kernels)


def oracle_probes(spec: GridSpec, offsets: Sequence[float] = (0.0, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0)) -> np.ndarray:
    """Grid points of the reference grid nearest to the given offsets along the first axis."""
    ax = spec.axis()
    pts = np.zeros((len(offsets), spec.dim))
    pts[:, 0] = [ax[int(np.argmin(np.abs(ax - v)))] for v in offsets]
    return pts


def compare_with_series(oracle: OracleKernel, pk, t: float | None = None, band: float = 0.2) -> dict[str, Any]:
    """Relative error of the series kernel against the reference rows.

    Only probe sources lying on the reference grid are used; targets in the
    outer ``band`` fraction of the domain (where periodic images dominate)
    are excluded.
    """
    spec = oracle.spec
    series = pk.torus.spec
    t = pk.t if t is None else t
    if series.dim != spec.dim or not math.isclose(series.x_max, spec.x_max, rel_tol=1e-12):
        raise ConfigurationError("reference and series grids cover different domains")
    if series.n < spec.n:
        raise ConfigurationError("series grid must be at least as fine as the reference grid")
    targets = np.stack(np.meshgrid(*([spec.axis()] * spec.dim), indexing="ij"), axis=-1).reshape(-1, spec.dim)
    inner = np.all(np.abs(targets) <= (1.0 - band) * spec.x_max, axis=-1)
    errors, used = [], []
    for col, y in enumerate(pk.probes):
        try:
            row = oracle.row(t, y)
        except DomainError:
            continue
        values = pk.torus.evaluate(pk.coefficients(t)[col][None], targets[inner])[0]
        errors.append(np.abs(values / row[inner] - 1.0))
        used.append(y.tolist())
    if not errors:
        raise ConfigurationError("no series probe lies on the reference grid")
    err = np.concatenate(errors)
    return {
        "t": t,
        "probes": used,
        "max_relative_error": float(err.max()),
        "median_relative_error": float(np.median(err)),
        "excluded_band": band,
        "points": int(err.size),
    }


def cauchy_error(n: int, x_max: float = 20.0, t: float = 0.5, band: float = 0.2, images: int | None = None) -> float:
    """Max relative error of the centre row against ``t / ((pi t)^2 + x^2)`` summed over periodic images."""
    from .profiles import fractional

    spec = GridSpec(1, n, x_max)
    gen = discretize_generator(fractional(1.0), spec, images)
    row = oracle_kernel(gen, None, t).row(t, 0.0)
    x = spec.axis()
    m = np.arange(-20000, 20001)[:, None]
    exact = (t / ((math.pi * t) ** 2 + (x[None] + 2 * x_max * m) ** 2)).sum(axis=0)
    inner = np.abs(x) <= (1.0 - band) * x_max
    return float(np.max(np.abs(row[inner] / exact[inner] - 1.0)))


def refinement_study(sizes: Sequence[int] = (64, 128, 256, 512), **kw) -> dict[str, Any]:
    """Closed-form Cauchy errors along a grid-halving sequence and their successive ratios."""
    errs = [cauchy_error(n, **kw) for n in sizes]
    return {"sizes": list(sizes), "errors": errs, "ratios": [a / b for a, b in zip(errs[:-1], errs[1:])]}

"""Binary kernel snapshots with a JSON sidecar, and their comparison.

Layout (little-endian): the magic ``LVHK``, then ``uint32`` format version,
``uint32`` dim, ``uint32`` oracle flag, ``uint64`` points per axis,
``float64`` dx, ``float64`` x_max, ``float64`` t, ``uint32`` block count.
Each block is ``uint32`` ndim, ``ndim`` ``uint64`` extents and the row-major
``float64`` payload. Block 0 holds the kernel; further blocks hold the
Duhamel terms of a perturbed kernel. Metadata goes to ``<path>.json``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigurationError
from .free_kernel import GridSpec, KernelGrid

MAGIC = b"LVHK"
VERSION = 1
_HEADER = struct.Struct("<4sIIIQdddI")


@dataclass
class Snapshot:
    dim: int
    n: int
    dx: float
    x_max: float
    t: float
    oracle: bool
    blocks: list[np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.dim, self.n, self.x_max)


def write_snapshot(path: str | Path, snap: Snapshot) -> Path:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, snap.dim, int(snap.oracle), snap.n, snap.dx, snap.x_max, snap.t, len(snap.blocks)))
        for block in snap.blocks:
            arr = np.ascontiguousarray(block, dtype="<f8")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())
    sidecar = {"dim": snap.dim, "n": snap.n, "dx": snap.dx, "x_max": snap.x_max, "t": snap.t, "oracle": snap.oracle, **snap.meta}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def read_snapshot(path: str | Path) -> Snapshot:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise ConfigurationError(f"{path} is too short to be a snapshot")
    magic, version, dim, oracle, n, dx, x_max, t, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC or version != VERSION:
        raise ConfigurationError(f"{path} is not a version-{VERSION} kernel snapshot")
    pos = _HEADER.size
    blocks = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        blocks.append(np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).copy())
        pos += 8 * size
    side = Path(str(path) + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    for key in ("dim", "n", "dx", "x_max", "t", "oracle"):
        meta.pop(key, None)
    return Snapshot(dim, n, dx, x_max, t, bool(oracle), blocks, meta)


def kernel_snapshot(kernel: KernelGrid, t: float) -> Snapshot:
    spec = kernel.spec
    k = kernel.index(t)
    meta = {"kind": "free", "mass_defect": kernel.mass_defect[k], "aliasing_bound": kernel.aliasing_bound[k]}
    return Snapshot(spec.dim, spec.n, spec.dx, spec.x_max, float(t), False, [kernel.values[k]], meta)


def perturbed_snapshot(pk) -> Snapshot:
    """Probe columns of ``p~(t)`` followed by one block per stored term."""
    torus = pk.torus
    spec = torus.spec
    blocks = [pk.grid_values()] + [torus.inverse(c) for c in pk.terms]
    meta = {"kind": "perturbed", "potential": pk.q.describe(), **pk.to_dict()}
    return Snapshot(spec.dim, spec.n, spec.dx, spec.x_max, pk.t, False, blocks, meta)


def oracle_snapshot(oracle, t: float) -> Snapshot:
    spec = oracle.spec
    return Snapshot(spec.dim, spec.n, spec.dx, spec.x_max, float(t), True, [oracle.slice(t)], {"kind": "oracle"})


def _restrict(values: np.ndarray, fine: int, coarse: int, dim: int) -> np.ndarray:
    """Values at the points of a coarser grid on the same domain (both start at ``-x_max``)."""
    if fine % coarse:
        raise ConfigurationError(f"grid sizes {fine} and {coarse} are not nested")
    step = fine // coarse
    sl = (slice(None),) * (values.ndim - dim) + (slice(None, None, step),) * dim
    return values[sl]


def _relative(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> dict[str, float]:
    scale = np.abs(b)
    ok = scale > 1e-10 * scale.max()
    if mask is not None:
        ok &= mask
    if not ok.any():
        return {"max_relative_difference": 0.0, "median_relative_difference": 0.0, "points": 0}
    rel = np.abs(a[ok] - b[ok]) / scale[ok]
    return {"max_relative_difference": float(rel.max()), "median_relative_difference": float(np.median(rel)), "points": int(rel.size)}


def diff_snapshots(a: Snapshot, b: Snapshot, tol: float, band: float = 0.2) -> dict[str, Any]:
    """Relative difference of two snapshots on their common grid points.

    Nested grids on the same domain are compared on the coarser points. A
    perturbed-kernel snapshot against a reference (oracle) snapshot uses the
    reference rows at the stored probe points and skips the outer ``band``
    of the domain, as the series comparison does.
    """
    if a.dim != b.dim:
        raise ConfigurationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if not math.isclose(a.x_max, b.x_max, rel_tol=1e-12):
        raise ConfigurationError(f"domain mismatch: x_max {a.x_max} vs {b.x_max}")
    if not math.isclose(a.t, b.t, rel_tol=1e-12):
        raise ConfigurationError(f"time mismatch: {a.t} vs {b.t}")
    if a.oracle != b.oracle:
        series, ref = (b, a) if a.oracle else (a, b)
        probes = np.asarray(series.meta.get("probes", []), dtype=float).reshape(-1, series.dim)
        spec = ref.spec
        pos = (probes + spec.x_max) / spec.dx
        on_grid = np.all(np.abs(pos - np.rint(pos)) < 1e-8, axis=1)
        if not on_grid.any():
            raise ConfigurationError("no probe of the series snapshot lies on the reference grid")
        rows = np.ravel_multi_index(tuple(np.rint(pos[on_grid]).astype(int).T), (spec.n,) * spec.dim)
        ref_vals = ref.blocks[0][rows].reshape((-1,) + (spec.n,) * spec.dim)
        ser_vals = _restrict(series.blocks[0][on_grid], series.n, ref.n, series.dim)
        ax = spec.axis()
        inner = np.ones((spec.n,) * spec.dim, dtype=bool)
        for i, m in enumerate(np.meshgrid(*([ax] * spec.dim), indexing="ij")):
            inner &= np.abs(m) <= (1.0 - band) * spec.x_max
        out = _relative(ser_vals, ref_vals, np.broadcast_to(inner, ref_vals.shape))
    else:
        va, vb = a.blocks[0], b.blocks[0]
        if a.n > b.n:
            va = _restrict(va, a.n, b.n, a.dim)
        elif b.n > a.n:
            vb = _restrict(vb, b.n, a.n, a.dim)
        if va.shape != vb.shape:
            raise ConfigurationError(f"block shapes differ: {va.shape} vs {vb.shape}")
        out = _relative(va, vb)
    out["tol"] = tol
    out["within_tolerance"] = bool(out["max_relative_difference"] <= tol)
    return out

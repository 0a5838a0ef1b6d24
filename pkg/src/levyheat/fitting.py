"""Fitted comparability constants.

Two-sided estimates with non-explicit constants are tested by taking the
infimum or supremum of a ratio over a finite scan, then repeating the scan on
a refined grid. A constant is accepted when it is finite, positive and moves
by less than a relative tolerance under the refinement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


@dataclass
class FittedConstant:
    """Extremal ratio on a base scan and on its refinement.

    Parameters
    ----------
    name
        Label used in reports.
    kind
        ``"upper"`` for a supremum, ``"lower"`` for an infimum.
    value, refined
        The extremum on the base and refined scans.
    witness
        Scan point attaining ``value``.
    tolerance
        Allowed relative change under refinement.
    """

    name: str
    kind: str
    value: float
    refined: float
    witness: dict[str, Any] = field(default_factory=dict)
    tolerance: float = 0.1
    excluded: int = 0

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.value) and np.isfinite(self.refined) and self.value > 0 and self.refined > 0)

    @property
    def relative_change(self) -> float:
        if not self.finite:
            return float("inf")
        return abs(self.refined / self.value - 1.0)

    @property
    def stable(self) -> bool:
        return self.finite and self.relative_change <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "value": _json_float(self.value),
            "refined": _json_float(self.refined),
            "relative_change": _json_float(self.relative_change),
            "finite": self.finite,
            "stable": self.stable,
            "witness": {k: _json_float(v) if isinstance(v, float) else v for k, v in self.witness.items()},
            "excluded_points": self.excluded,
        }


def _json_float(v: float) -> float | str:
    v = float(v)
    if np.isfinite(v):
        return v
    return "inf" if v > 0 else ("-inf" if v < 0 else "nan")


def extremum(ratio: np.ndarray, kind: str, coords: dict[str, np.ndarray] | None = None) -> tuple[float, dict[str, Any], int]:
    """Extremum of the finite entries of ``ratio`` with its location.

    Returns the extremal value, a witness dictionary built from ``coords``
    (arrays broadcastable to ``ratio``), and the number of excluded
    non-finite entries.
    """
    ratio = np.asarray(ratio, dtype=float)
    ok = np.isfinite(ratio)
    excluded = int(ratio.size - ok.sum())
    if not ok.any():
        return float("nan"), {}, excluded
    masked = np.where(ok, ratio, -np.inf if kind == "upper" else np.inf)
    idx = int(np.argmax(masked) if kind == "upper" else np.argmin(masked))
    witness: dict[str, Any] = {}
    if coords:
        for key, arr in coords.items():
            witness[key] = float(np.broadcast_to(np.asarray(arr, dtype=float), ratio.shape).reshape(-1)[idx])
    return float(masked.reshape(-1)[idx]), witness, excluded


def fit_constant(
    name: str,
    kind: str,
    scan: Callable[[int], tuple[np.ndarray, dict[str, np.ndarray]]],
    tolerance: float = 0.1,
) -> FittedConstant:
    """Evaluate ``scan(level)`` at levels 0 and 1 and compare extrema.

    ``scan`` returns the ratio array and a dictionary of coordinate arrays;
    level 1 must be a refinement of level 0.
    """
    ratio0, coords0 = scan(0)
    ratio1, _ = scan(1)
    v0, wit, exc = extremum(ratio0, kind, coords0)
    v1, _, _ = extremum(ratio1, kind)
    return FittedConstant(name, kind, v0, v1, wit, tolerance, exc)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of ``log y`` against ``log x`` over positive entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def log_grid(lo: float, hi: float, per_decade: int) -> np.ndarray:
    """Log-spaced grid with ``per_decade`` points per decade including both ends."""
    n = max(2, int(np.ceil(per_decade * np.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)

"""Compiled quadrature integrands.

Every integrand has the QUADPACK low-level signature
``double f(int n, double *xx, void *user_data)``; ``xx[0]`` is the
integration variable and ``xx[1:]`` carries the scalar arguments passed via
``quad(..., args=...)``. ``user_data`` points at an immutable float64 buffer
(profile parameters or a packed log-log spline) owned by the caller, so the
callables are safe to share between threads.
"""

from __future__ import annotations

import ctypes

import numpy as np
from numba import carray, cfunc, njit, types
from scipy import LowLevelCallable
from scipy.interpolate import CubicSpline

_SIG = types.double(types.intc, types.CPointer(types.double), types.voidptr)

# Header layouts --------------------------------------------------------------
# family buffer: [0, alpha, m, beta, eta, dim, splice]
# spline buffer: [1, n_nodes, x0, dx, slope_lo, slope_hi, y_first, y_last,
#                 c3_0, c2_0, c1_0, c0_0, c3_1, ...]
SPLINE_HEADER = 8


def pack_loglog_spline(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pack a cubic spline of ``log y`` against ``log x`` on a uniform log grid.

    Outside the node range the spline continues linearly in log-log
    coordinates with the end slopes, i.e. as a power law.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    dx = np.diff(lx)
    if not np.allclose(dx, dx[0], rtol=1e-8, atol=1e-12):
        raise ValueError("spline nodes must be uniform in log scale")
    spl = CubicSpline(lx, ly)
    d = spl.derivative()
    header = np.array([1.0, lx.size, lx[0], dx[0], d(lx[0]), d(lx[-1]), ly[0], ly[-1]])
    coeffs = spl.c.T.reshape(-1)
    return np.ascontiguousarray(np.concatenate([header, coeffs]))


def pack_family(alpha: float, m: float, beta: float, eta: float, dim: int, splice: float) -> np.ndarray:
    return np.array([0.0, alpha, m, beta, eta, float(dim), splice])


def low_level(func, buf: np.ndarray) -> LowLevelCallable:
    """Bind a compiled integrand to a data buffer (the buffer must outlive it)."""
    ptr = ctypes.cast(buf.ctypes.data, ctypes.c_void_p)
    return LowLevelCallable(func.ctypes, ptr)


# Compiled helpers ----------------------------------------------------------


@njit(cache=True)
def _loglog_eval(buf, u):
    n = int(buf[1])
    x0 = buf[2]
    dx = buf[3]
    lu = np.log(u)
    last = x0 + (n - 1) * dx
    if lu <= x0:
        return np.exp(buf[6] + buf[4] * (lu - x0))
    if lu >= last:
        return np.exp(buf[7] + buf[5] * (lu - last))
    i = int((lu - x0) / dx)
    if i > n - 2:
        i = n - 2
    s = lu - (x0 + i * dx)
    k = SPLINE_HEADER + 4 * i
    return np.exp(((buf[k] * s + buf[k + 1]) * s + buf[k + 2]) * s + buf[k + 3])


@njit(cache=True)
def _family_eval(buf, r):
    alpha = buf[1]
    m = buf[2]
    beta = buf[3]
    eta = buf[4]
    d = buf[5]
    if r <= 1.0:
        return r ** (-alpha - d)
    return buf[6] * np.exp(m - m * r**beta) * r ** (-d - eta)


@njit(cache=True)
def _density_eval(buf, r):
    if buf[0] == 0.0:
        return _family_eval(buf, r)
    return _loglog_eval(buf, r)


@cfunc(_SIG, cache=True)
def symbol_integrand(n, xx, ud):
    """Integrand for the characteristic exponent.

    ``xx[1]`` selects the mode (0: ``2 sin^2(u s / 2) m(s)``, 1: ``m(s)``,
    2: ``m(a e^s) a e^s``, the mass in the logarithmic variable), ``xx[2]`` is
    the frequency ``u`` (the anchor ``a`` in mode 2).
    """
    s = xx[0]
    mode = xx[1]
    u = xx[2]
    if mode == 2.0:
        s = u * np.exp(s)
    head = carray(ud, 2, types.double)
    if head[0] == 0.0:
        buf = carray(ud, 7, types.double)
    else:
        total = SPLINE_HEADER + 4 * (int(head[1]) - 1)
        buf = carray(ud, total, types.double)
    if s <= 0.0:
        return 0.0
    val = _density_eval(buf, s)
    if mode == 0.0:
        sn = np.sin(0.5 * u * s)
        return 2.0 * sn * sn * val
    if mode == 2.0:
        return val * s
    return val


@cfunc(_SIG, cache=True)
def kernel_integrand(n, xx, ud):
    """Integrand of radial Fourier inversions of ``exp(-t Phi(u))``.

    ``xx[1]`` mode, ``xx[2]`` time ``t``. Modes: 0 ``g``; 1 ``u g``; 2 ``u^2 g``; 3 ``(1 - g)/Phi``;
    where ``g = exp(-t Phi(u))``.
    """
    u = xx[0]
    mode = xx[1]
    t = xx[2]
    head = carray(ud, 2, types.double)
    total = SPLINE_HEADER + 4 * (int(head[1]) - 1)
    buf = carray(ud, total, types.double)
    if u <= 0.0:
        if mode == 0.0:
            return 1.0
        if mode == 3.0:
            return t
        return 0.0
    phi = _loglog_eval(buf, u)
    g = np.exp(-t * phi)
    if mode == 0.0:
        return g
    if mode == 1.0:
        return u * g
    if mode == 2.0:
        return u * u * g
    if mode == 3.0:
        if t * phi < 1e-8:
            return t * (1.0 - 0.5 * t * phi)
        return -np.expm1(-t * phi) / phi
    return 0.0

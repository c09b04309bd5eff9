"""Orthonormal bases: tensor trigonometric, Zernike disk, Chebyshev-Fourier.

The trig family lives on [0,1]^d with Lebesgue measure.  The disk pair
(source side Zernike, image side Chebyshev-Fourier) realizes the singular
system of the 2D Radon transform: the image side is orthonormal on
Y = [0,1] x [0,2pi) under d(nu) = (2/pi) sqrt(1-u^2) du dphi.

Complex index pairs (j, k) are realified identically on both sides:
sqrt(2) Re for j > k, the function itself for j = k, sqrt(2) Im for j < k,
so the singular relation survives realification.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError
from .indexing import MultiIndex

__all__ = [
    "eval_trig_basis",
    "trig_design_matrix",
    "eval_zernike_radial",
    "eval_chebyshev_U",
    "chebyshev_U_table",
    "eval_disk_source_basis",
    "eval_radon_image_basis",
    "radon_image_design_matrix",
    "disk_source_design_matrix",
    "gauss_legendre",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def eval_trig_basis(idx: MultiIndex, x) -> float:
    """Evaluate the tensor trig basis function at a point of [0,1]^d.

    Per axis the factor is 1 for frequency 0, sqrt(2) cos(2 pi j x) for
    parity 0 and sqrt(2) sin(2 pi j x) for parity 1.
    """
    if idx.parity is None:
        raise ConfigError("trig basis requires parity bits")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != len(idx.indices):
        raise ConfigError("point dimension does not match index dimension")
    out = 1.0
    for axis, (j, k) in enumerate(zip(idx.indices, idx.parity)):
        if j == 0:
            continue
        ang = 2.0 * math.pi * j * x[..., axis]
        out = out * _SQRT2 * (np.sin(ang) if k else np.cos(ang))
    return out if np.ndim(out) else float(out)


def trig_design_matrix(indices, points: np.ndarray) -> np.ndarray:
    """Matrix of trig basis values, shape (n_points, n_indices)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    cols = np.empty((pts.shape[0], len(indices)))
    for c, idx in enumerate(indices):
        col = np.ones(pts.shape[0])
        for axis, (j, k) in enumerate(zip(idx.indices, idx.parity)):
            if j == 0:
                continue
            ang = 2.0 * math.pi * j * pts[:, axis]
            col = col * _SQRT2 * (np.sin(ang) if k else np.cos(ang))
        cols[:, c] = col
    return cols


def _jacobi_alpha0(n: int, alpha: int, x):
    """Jacobi polynomial P_n^(alpha, 0)(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p_cur = (alpha + 1) + (alpha + 2) * (x - 1.0) / 2.0
    for m in range(2, n + 1):
        c = 2 * m + alpha
        a1 = 2 * m * (m + alpha) * (c - 2)
        a2 = (c - 1) * (c * (c - 2) * x + alpha * alpha)
        a3 = 2 * (m + alpha - 1) * (m - 1) * c
        p_cur, p_prev = (a2 * p_cur - a3 * p_prev) / a1, p_cur
    return p_cur


def eval_zernike_radial(a: int, b: int, r):
    """Radial Zernike polynomial Z_a^b(r) for a >= b >= 0, a - b even.

    Computed as (-1)^((a-b)/2) r^b P_((a-b)/2)^((b,0))(1 - 2 r^2), which is
    stable far beyond degree 60 (the factorial sum is not).
    """
    if b < 0 or a < b:
        raise ConfigError(f"need a >= b >= 0, got a={a}, b={b}")
    if (a - b) % 2 != 0:
        raise ConfigError(f"Zernike radial polynomial undefined for odd a-b (a={a}, b={b})")
    r = np.asarray(r, dtype=float)
    k = (a - b) // 2
    val = (-1.0) ** k * r**b * _jacobi_alpha0(k, b, 1.0 - 2.0 * r * r)
    return val if val.ndim else float(val)


def eval_chebyshev_U(m: int, u):
    """Chebyshev polynomial of the second kind via the stable recurrence."""
    if m < 0:
        raise ConfigError("degree must be non-negative")
    u = np.asarray(u, dtype=float)
    prev = np.ones_like(u)
    if m == 0:
        return prev if prev.ndim else float(prev)
    cur = 2.0 * u
    for _ in range(2, m + 1):
        cur, prev = 2.0 * u * cur - prev, cur
    return cur if cur.ndim else float(cur)


def chebyshev_U_table(max_degree: int, u: np.ndarray) -> np.ndarray:
    """All U_m(u) for m = 0..max_degree, shape (max_degree+1, len(u))."""
    u = np.asarray(u, dtype=float)
    out = np.empty((max_degree + 1, u.size))
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = 2.0 * u
    for m in range(2, max_degree + 1):
        out[m] = 2.0 * u * out[m - 1] - out[m - 2]
    return out


def _angular_factor(j: int, k: int, angle):
    """Realified angular part of exp(i (j-k) angle), with sqrt(2) scaling."""
    m = j - k
    if m == 0:
        return np.ones_like(np.asarray(angle, dtype=float))
    if m > 0:
        return _SQRT2 * np.cos(m * np.asarray(angle, dtype=float))
    return _SQRT2 * np.sin(m * np.asarray(angle, dtype=float))


def _check_disk_index(idx: MultiIndex):
    if idx.parity is not None or len(idx.indices) != 2:
        raise ConfigError(f"index {idx} does not belong to the disk family")
    if idx.indices == (0, 0):
        raise ConfigError("(0,0) is excluded from the disk basis")


def eval_disk_source_basis(idx: MultiIndex, r, theta):
    """Realified Zernike disk basis function at polar (r, theta).

    The complex function is pi^(-1/2) (j+k+1)^(1/2) Z_{j+k}^{|j-k|}(r)
    exp(i (j-k) theta); realification as in the module docstring.
    """
    _check_disk_index(idx)
    j, k = idx.indices
    radial = eval_zernike_radial(j + k, abs(j - k), r)
    val = _INV_SQRT_PI * math.sqrt(j + k + 1.0) * radial * _angular_factor(j, k, theta)
    return val if np.ndim(val) else float(val)


def eval_radon_image_basis(idx: MultiIndex, u, phi):
    """Realified Chebyshev-Fourier image basis function at (u, phi).

    The complex function is pi^(-1/2) U_{j+k}(u) exp(i (j-k) phi) on
    Y = [0,1] x [0,2pi); orthonormal under d(nu) = (2/pi) sqrt(1-u^2) du dphi.
    """
    _check_disk_index(idx)
    j, k = idx.indices
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or np.any(u_arr > 1):
        raise ConfigError("u must lie in [0, 1]")
    val = _INV_SQRT_PI * eval_chebyshev_U(j + k, u_arr) * _angular_factor(j, k, phi)
    return val if np.ndim(val) else float(val)


def radon_image_design_matrix(indices, u: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Image-basis values at (u_i, phi_i), shape (n_points, n_indices)."""
    u = np.asarray(u, dtype=float)
    phi = np.asarray(phi, dtype=float)
    max_deg = max((i.indices[0] + i.indices[1] for i in indices), default=0)
    table = chebyshev_U_table(max_deg, u)
    cols = np.empty((u.size, len(indices)))
    for c, idx in enumerate(indices):
        j, k = idx.indices
        cols[:, c] = _INV_SQRT_PI * table[j + k] * _angular_factor(j, k, phi)
    return cols


def disk_source_design_matrix(indices, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Source-basis values at polar points, shape (n_points, n_indices)."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    cols = np.empty((r.size, len(indices)))
    for c, idx in enumerate(indices):
        j, k = idx.indices
        radial = eval_zernike_radial(j + k, abs(j - k), r)
        cols[:, c] = _INV_SQRT_PI * math.sqrt(j + k + 1.0) * radial * _angular_factor(j, k, theta)
    return cols


def gauss_legendre(n: int, a: float, b: float):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w

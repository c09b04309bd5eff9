"""Diagonal (SVD) forward operators and the adjoint-of-inverse Q.

Every operator is stored through its singular values b_j on a source basis
phi_j with image basis psi_j, so A, A^-1 and Q = (A^-1)* are all diagonal
in coefficient space:

    (A g)_j = b_j theta_j,   (A^-1 h)_j = c_j / b_j,   (Q g)_j = theta_j / b_j.

Grid space appears only in pointwise evaluation (needed by the density-model
empirical risk) and in the Radon quadrature oracle used to validate the
singular relation against the chord-average integral definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import (
    disk_source_design_matrix,
    eval_radon_image_basis,
    eval_trig_basis,
    gauss_legendre,
    radon_image_design_matrix,
    trig_design_matrix,
)
from .errors import ConfigError, IllPosedError
from .indexing import CoefficientVector, DiskSpace, MultiIndex, TrigSpace

__all__ = [
    "SvdOperator",
    "ConvolutionFilter",
    "convolution_operator",
    "radon2d_operator",
    "tomography2d_operator",
    "apply_A",
    "apply_A_inverse",
    "apply_Q",
    "eval_Q_pointwise",
    "image_design_matrix",
    "rho_Q",
    "RhoEstimate",
    "rho_K_whitenoise",
    "radon_forward_quadrature",
]

SINGULAR_VALUE_FLOOR = 1e-14
RADON_SCALE = 1.0 / math.pi


@dataclass
class ConvolutionFilter:
    """Fourier coefficients of a 1-periodic, even convolution kernel.

    ``coefficients[idx]`` overrides the power-law value at that index; the
    law b_j = scale * |j|^(-q) (b_0 at the constant) fills the rest.
    """

    q: float
    scale: float = 1.0
    b0: float = 1.0
    coefficients: dict | None = None

    def value(self, idx: MultiIndex) -> float:
        if self.coefficients and idx in self.coefficients:
            return self.coefficients[idx]
        t = idx.total
        return self.b0 if t == 0 else self.scale * t ** (-self.q)


class SvdOperator:
    """Forward operator given diagonally by singular values on a basis."""

    def __init__(self, kind, space, image_tag, b_func, q, decay_consts, floor=SINGULAR_VALUE_FLOOR):
        self.kind = kind
        self.space = space
        self.image_tag = image_tag
        self._b = b_func
        self.q = float(q)
        self.decay_consts = decay_consts  # (C_low, C_high) envelope for |j| >= 1
        self.floor = floor

    def b(self, idx: MultiIndex) -> float:
        self.space.validate(idx)
        val = self._b(idx)
        if val <= 0:
            raise IllPosedError(f"singular value at {idx} is not positive")
        return val

    def b_array(self, indices) -> np.ndarray:
        return np.array([self.b(idx) for idx in indices])

    def b_inv_array(self, indices) -> np.ndarray:
        b = self.b_array(indices)
        self._check_floor(b, indices)
        return 1.0 / b

    def _check_floor(self, b: np.ndarray, indices):
        bad = np.nonzero(b < self.floor)[0]
        if bad.size:
            idx = list(indices)[bad[0]]
            raise IllPosedError(
                f"singular value {b[bad[0]]:g} at index {idx} is below the "
                f"invertibility floor {self.floor:g}"
            )


def convolution_operator(d: int, q: float, scale: float = 1.0, b0: float = 1.0,
                         overrides: dict | None = None) -> SvdOperator:
    """Periodic convolution on [0,1]^d; trig basis is its own image basis."""
    if q < 0:
        raise ConfigError("need q >= 0")
    filt = ConvolutionFilter(q=q, scale=scale, b0=b0, coefficients=overrides)
    space = TrigSpace(d)
    return SvdOperator(
        kind="convolution",
        space=space,
        image_tag=space.tag,
        b_func=filt.value,
        q=q,
        decay_consts=(scale, scale),
    )


def _radon_b(idx: MultiIndex) -> float:
    j, k = idx.indices
    return RADON_SCALE / math.sqrt(j + k + 1.0)


def radon2d_operator() -> SvdOperator:
    """2D Radon transform on the disk: b_jk = pi^-1 (j+k+1)^(-1/2)."""
    return SvdOperator(
        kind="radon2d",
        space=DiskSpace(),
        image_tag="cheb-fourier",
        b_func=_radon_b,
        q=0.5,
        # (j+k+1)^(-1/2) against |j|^(-1/2): |j| <= j+k+1 <= 2|j| on |j| >= 1
        decay_consts=(RADON_SCALE / math.sqrt(2.0), RADON_SCALE),
    )


def tomography2d_operator() -> SvdOperator:
    """Radon operator rescaled so the image of a density is itself a density.

    With the normalized transform behind ``radon2d_operator`` (singular
    values pi^-1 (j+k+1)^(-1/2)), a probability density f on the disk has
    integral(Af d nu) = 1/pi; the law of the observed (U, Phi) w.r.t. nu is
    therefore pi * Af, stored here as rescaled singular values.
    """
    scale = math.pi
    return SvdOperator(
        kind="tomography2d",
        space=DiskSpace(),
        image_tag="cheb-fourier",
        b_func=lambda idx: scale * _radon_b(idx),
        q=0.5,
        decay_consts=(scale * RADON_SCALE / math.sqrt(2.0), scale * RADON_SCALE),
    )


def _check_compat(op: SvdOperator, g: CoefficientVector, image_side=False):
    want = op.image_tag if image_side else op.space.tag
    if g.basis_tag != want:
        raise ConfigError(
            f"coefficient vector on basis {g.basis_tag!r} does not match operator "
            f"{op.kind!r} ({'image' if image_side else 'source'} side {want!r})"
        )


def apply_A(op: SvdOperator, g: CoefficientVector) -> CoefficientVector:
    """Image-side coefficients of A g: (Ag)_j = b_j theta_j."""
    _check_compat(op, g)
    return CoefficientVector(
        {idx: op.b(idx) * v for idx, v in g.entries.items()}, op.image_tag
    )


def apply_A_inverse(op: SvdOperator, h: CoefficientVector) -> CoefficientVector:
    """Source-side coefficients of A^-1 h from image-side coefficients."""
    _check_compat(op, h, image_side=True)
    out = {}
    for idx, v in h.entries.items():
        op.space.validate(idx)
        b = op.b(idx)
        if b < op.floor:
            raise IllPosedError(f"singular value at {idx} below floor {op.floor:g}")
        out[idx] = v / b
    return CoefficientVector(out, op.space.tag)


def apply_Q(op: SvdOperator, g: CoefficientVector) -> CoefficientVector:
    """Image-side coefficients of Q g = (A^-1)* g: (Qg)_j = theta_j / b_j."""
    _check_compat(op, g)
    out = {}
    for idx, v in g.entries.items():
        b = op.b(idx)
        if b < op.floor:
            raise IllPosedError(f"singular value at {idx} below floor {op.floor:g}")
        out[idx] = v / b
    return CoefficientVector(out, op.image_tag)


def image_design_matrix(op: SvdOperator, indices, points) -> np.ndarray:
    """Image-basis values psi_j(y) at sample points, shape (n_points, n_indices)."""
    if op.kind == "convolution":
        return trig_design_matrix(indices, np.asarray(points, dtype=float))
    pts = np.asarray(points, dtype=float)
    return radon_image_design_matrix(indices, pts[:, 0], pts[:, 1])


def eval_Q_pointwise(op: SvdOperator, g: CoefficientVector, y) -> float:
    """(Q g)(y) = sum_j theta_j / b_j psi_j(y)."""
    _check_compat(op, g)
    total = 0.0
    for idx, v in g.entries.items():
        b = op.b(idx)
        if b < op.floor:
            raise IllPosedError(f"singular value at {idx} below floor {op.floor:g}")
        if op.kind == "convolution":
            psi = eval_trig_basis(idx, y)
        else:
            psi = eval_radon_image_basis(idx, y[0], y[1])
        total += v / b * psi
    return total


@dataclass
class RhoEstimate:
    """Result of an operator-norm computation over a finite point set.

    ``value`` is the exhaustive maximum when available, otherwise the
    certified upper bound; a sampled lower bound is attached for summary
    nets so both sides are reported.
    """

    value: float
    exact: bool
    upper: float
    lower_sampled: float | None = None
    n_pairs: int | None = None


def _pairwise_ratio_max(points: np.ndarray, binv_sq: np.ndarray) -> float:
    """max over pairs of ||Q(p - p')|| / ||p - p'|| for diagonal Q."""
    n = points.shape[0]
    best = 0.0
    chunk = max(1, int(4e6) // max(1, n))
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        diff = block[:, None, :] - points[None, :, :]
        num = np.einsum("abk,k->ab", diff**2, binv_sq)
        den = np.einsum("abk->ab", diff**2)
        mask = den > 0
        if mask.any():
            best = max(best, float(np.sqrt(np.max(num[mask] / den[mask]))))
    return best


def rho_Q(op: SvdOperator, net, max_exhaustive: int = 2000,
          sample_pairs: int = 100_000, rng=None) -> RhoEstimate:
    """Operator norm of Q over pairs of net points.

    Exhaustive (exact) when the net is materialized with at most
    ``max_exhaustive`` points; otherwise returns the certified diagonal
    upper bound max_j b_j^-1 over the net support together with a sampled
    lower bound over random lattice-point pairs (``sample_pairs=0`` skips
    the sampling when only the certified value is needed).
    """
    binv = op.b_inv_array(net.support)
    upper = float(binv.max())
    if net.materialized and net.count is not None and net.count <= max_exhaustive:
        if net.count < 2:
            raise ConfigError("operator norm needs at least 2 net points")
        val = _pairwise_ratio_max(net.points, binv**2)
        return RhoEstimate(value=val, exact=True, upper=upper)
    if sample_pairs <= 0:
        return RhoEstimate(value=upper, exact=False, upper=upper)
    rng = np.random.default_rng(0) if rng is None else rng
    if net.materialized:
        i = rng.integers(0, net.count, size=sample_pairs)
        j = rng.integers(0, net.count, size=sample_pairs)
        diff = net.points[i] - net.points[j]
    else:
        diff = net.sample_points(sample_pairs, rng) - net.sample_points(sample_pairs, rng)
    den = np.sum(diff**2, axis=1)
    num = diff**2 @ binv**2
    mask = den > 0
    lower = float(np.sqrt(np.max(num[mask] / den[mask]))) if mask.any() else 0.0
    return RhoEstimate(value=upper, exact=False, upper=upper,
                       lower_sampled=lower, n_pairs=sample_pairs)


def rho_K_whitenoise(op: SvdOperator, packing) -> float:
    """(1/sqrt 2) max over packing pairs of ||A(f-g)|| / ||f-g||, exhaustive."""
    if len(packing) < 2:
        raise ConfigError("operator norm needs at least 2 packing points")
    b_sq = op.b_array(packing.support) ** 2
    w = packing.omega.astype(np.float64)
    shell_b_sq = np.array(
        [b_sq[packing.support.pos[idx]] for idx in packing.shell.indices]
    )
    s_plain = w.sum(axis=1)
    s_weighted = w @ shell_b_sq
    gram_plain = w @ w.T
    gram_weighted = (w * shell_b_sq) @ w.T
    ham = s_plain[:, None] + s_plain[None, :] - 2.0 * gram_plain
    ham_w = s_weighted[:, None] + s_weighted[None, :] - gram_weighted - gram_weighted.T
    iu = np.triu_indices(len(packing), k=1)
    den = ham[iu]
    num = ham_w[iu]
    mask = den > 0
    return float(np.sqrt(np.max(num[mask] / den[mask]) / 2.0))


def radon_forward_quadrature(f: CoefficientVector, u: float, phi: float,
                             n_nodes: int = 128) -> float:
    """Normalized 2D Radon transform by Gauss-Legendre chord quadrature.

    Independent oracle for the singular relation: integrates f along the
    chord of the unit disk at distance u and normal direction phi, scaled
    by 1 / (2 pi sqrt(1-u^2)).  That normalization is the one under which
    the Zernike/Chebyshev-Fourier pair is a singular system with
    b_jk = pi^-1 (j+k+1)^(-1/2) on Y = [0,1] x [0,2pi) with measure
    d(nu) = (2/pi) sqrt(1-u^2) du dphi.  Only finite Zernike expansions are
    supported.
    """
    if not 0.0 <= u < 1.0:
        raise ConfigError("u must lie in [0, 1) for a non-degenerate chord")
    if f.basis_tag != "disk":
        raise ConfigError("quadrature oracle expects a disk-basis expansion")
    half = math.sqrt(1.0 - u * u)
    if not f.entries:
        return 0.0
    t, w = gauss_legendre(n_nodes, -half, half)
    x = u * math.cos(phi) - t * math.sin(phi)
    y = u * math.sin(phi) + t * math.cos(phi)
    r = np.hypot(x, y)
    theta = np.mod(np.arctan2(y, x), 2.0 * math.pi)
    indices = f.support()
    design = disk_source_design_matrix(indices, r, theta)
    coef = np.array([f.entries[idx] for idx in indices])
    values = design @ coef
    return float(w @ values) / (2.0 * math.pi * half)

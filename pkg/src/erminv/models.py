"""Synthetic observations: Gaussian white noise statistics and i.i.d. samples.

The continuous white-noise record is never materialized.  The sufficient
statistics z_j = integral(Q phi_j dY_n) = theta_j + n^(-1/2) b_j^-1 eps_j
(eps_j i.i.d. standard normal, by orthogonality of the Q phi_j) are the only
functionals of the record any estimator uses, so they are what gets
simulated.

Density-model samples are drawn by rejection against a uniform envelope
under the image-side measure nu, with a runtime check that no proposal ever
exceeds the envelope estimated on the inspection grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .indexing import CoefficientVector, IndexSet, MultiIndex
from .operators import SvdOperator, image_design_matrix
from .spaces import Ellipsoid

__all__ = [
    "TruthSpec",
    "WhiteNoiseObservation",
    "SampleObservation",
    "simulate_white_noise",
    "sample_density",
    "sample_tomography",
    "empirical_coefficients",
    "centered_empirical_Q",
    "sup_norm_diagnostics",
]

ENVELOPE_INFLATION = 1.05
DENSITY_GRID = 10_000


@dataclass
class TruthSpec:
    """Ground truth for simulation: coefficients plus the class they live in.

    In density mode the truth is the normalized base density (uniform on the
    observation domain) plus the stored perturbation coefficients; for the
    trig family the constant coefficient is stored explicitly (theta_0 = 1),
    while the disk family excludes the constant index, so ``uniform_base``
    marks that the uniform disk density is implied.
    """

    theta_star: CoefficientVector
    ellipsoid: Ellipsoid
    positivity_margin: float | None = None
    uniform_base: bool = False

    def __post_init__(self):
        if self.theta_star.basis_tag != self.ellipsoid.space.tag:
            raise ConfigError("truth coefficients do not live on the class's basis")
        if not self.ellipsoid.contains(self.theta_star):
            raise ConfigError("truth lies outside the ellipsoid")

    def max_level(self) -> int:
        return self.theta_star.max_level()


@dataclass
class WhiteNoiseObservation:
    """Sufficient statistics of one white-noise record over an index set."""

    index_set: IndexSet
    z: np.ndarray
    n: int
    seed: object

    def stat(self, idx: MultiIndex) -> float:
        return float(self.z[self.index_set.pos[idx]])

    def restrict(self, indices) -> np.ndarray:
        return np.array([self.z[self.index_set.pos[idx]] for idx in indices])


@dataclass
class SampleObservation:
    """n i.i.d. draws on the operator's image domain."""

    points: np.ndarray
    n: int
    seed: object
    kind: str = "density"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("need n >= 1 samples")


def _rng_from(seed):
    if hasattr(seed, "standard_normal"):
        return seed
    return np.random.default_rng(seed)


def simulate_white_noise(truth: TruthSpec, op: SvdOperator, n: int, seed,
                         level: int | None = None) -> WhiteNoiseObservation:
    """Draw z_j = theta_j + n^(-1/2) b_j^-1 eps_j over |j| <= level.

    ``level`` defaults to the truth's own support level and must cover it,
    so no signal coefficient is silently dropped from the statistics.
    """
    if n < 1:
        raise ConfigError("need n >= 1")
    if op.space.tag != truth.ellipsoid.space.tag:
        raise ConfigError("operator and truth class use different bases")
    lvl = truth.max_level() if level is None else int(level)
    if lvl < truth.max_level():
        raise ConfigError(
            f"truncation level {lvl} does not cover the truth support "
            f"(max |j| = {truth.max_level()})"
        )
    index_set = truth.ellipsoid.index_set_up_to(lvl)
    theta = truth.theta_star.to_array(index_set, strict=True)
    binv = op.b_inv_array(index_set)
    rng = _rng_from(seed)
    eps = rng.standard_normal(len(index_set))
    z = theta + binv * eps / math.sqrt(n)
    return WhiteNoiseObservation(index_set=index_set, z=z, n=n, seed=seed)


def _density_on_grid(truth: TruthSpec, op: SvdOperator, points: np.ndarray) -> np.ndarray:
    """Evaluate the observation density Af (plus implied uniform base) at points."""
    indices = truth.theta_star.support()
    base = 0.0
    if truth.uniform_base:
        if op.kind != "tomography2d":
            raise ConfigError("implied uniform base is only defined for tomography")
        base = 1.0 / math.pi  # image of the uniform disk density under the scaled operator
    if not indices:
        return np.full(points.shape[0], base)
    design = image_design_matrix(op, indices, points)
    coef = np.array([truth.theta_star.entries[idx] * op.b(idx) for idx in indices])
    return base + design @ coef


def _nu_proposal_convolution(d: int, n: int, rng) -> np.ndarray:
    return rng.random((n, d))


def _nu_proposal_disk(n: int, rng) -> np.ndarray:
    """Proposals from the normalized image measure nu/pi on [0,1] x [0,2pi)."""
    out_u = np.empty(n)
    filled = 0
    while filled < n:
        m = max(64, int(1.3 * (n - filled)))
        cand = rng.random(m)
        keep = cand[rng.random(m) <= np.sqrt(1.0 - cand**2)]
        take = min(keep.size, n - filled)
        out_u[filled : filled + take] = keep[:take]
        filled += take
    phi = rng.random(n) * 2.0 * math.pi
    return np.column_stack([out_u, phi])


def _check_grid(op: SvdOperator, n_grid: int) -> np.ndarray:
    if op.kind == "convolution":
        d = op.space.d
        per_axis = max(2, int(round(n_grid ** (1.0 / d))))
        axes = [(np.arange(per_axis) + 0.5) / per_axis for _ in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    side = max(2, int(math.sqrt(n_grid)))
    u = (np.arange(side) + 0.5) / side
    phi = (np.arange(side) + 0.5) / side * 2.0 * math.pi
    U, P = np.meshgrid(u, phi, indexing="ij")
    return np.column_stack([U.ravel(), P.ravel()])


def validate_density_truth(truth: TruthSpec, op: SvdOperator,
                           n_grid: int = DENSITY_GRID) -> float:
    """Check positivity margin and unit mass of the observation density.

    Returns the grid infimum of the density.  The unit-mass check is exact
    in coefficient space: only the constant component of Af integrates to a
    nonzero value under nu.
    """
    grid = _check_grid(op, n_grid)
    vals = _density_on_grid(truth, op, grid)
    margin = truth.positivity_margin if truth.positivity_margin is not None else 0.0
    inf_val = float(vals.min())
    if inf_val < margin:
        raise ConfigError(
            f"observation density falls to {inf_val:g}, below the required "
            f"margin {margin:g}"
        )
    if op.kind == "convolution":
        const = [idx for idx in truth.theta_star.entries if idx.total == 0]
        mass = sum(truth.theta_star.entries[i] * op.b(i) for i in const)
    elif truth.uniform_base:
        mass = 1.0  # uniform base integrates to one; basis components to zero
    else:
        raise ConfigError("tomography truth must carry the uniform base")
    if abs(mass - 1.0) > 1e-8:
        raise ConfigError(f"observation density integrates to {mass:g}, not 1")
    return inf_val


def sup_norm_diagnostics(truth: TruthSpec, op: SvdOperator,
                         n_grid: int = DENSITY_GRID) -> dict:
    """Grid suprema of |Af| and |Qf| for the truth (density-mode diagnostics).

    These are the boundedness quantities entering the density-model risk
    bound constants; reported on the inspection grid, not certified.
    """
    grid = _check_grid(op, n_grid)
    af = _density_on_grid(truth, op, grid)
    indices = truth.theta_star.support()
    if indices:
        design = image_design_matrix(op, indices, grid)
        binv = op.b_inv_array(indices)
        coef = np.array([truth.theta_star.entries[idx] for idx in indices])
        qf = design @ (binv * coef)
    else:
        qf = np.zeros(grid.shape[0])
    return {"B_inf": float(np.abs(af).max()), "B_inf_prime": float(np.abs(qf).max())}


def _rejection_sample(truth: TruthSpec, op: SvdOperator, n: int, seed,
                      kind: str) -> SampleObservation:
    if n < 1:
        raise ConfigError("need n >= 1")
    validate_density_truth(truth, op)
    grid = _check_grid(op, DENSITY_GRID)
    envelope = float(_density_on_grid(truth, op, grid).max()) * ENVELOPE_INFLATION
    rng = _rng_from(seed)
    d = op.space.d if op.kind == "convolution" else 2
    out = np.empty((n, d))
    filled = 0
    while filled < n:
        m = max(64, int(1.5 * (n - filled)))
        if op.kind == "convolution":
            props = _nu_proposal_convolution(d, m, rng)
        else:
            props = _nu_proposal_disk(m, rng)
        dens = _density_on_grid(truth, op, props)
        if np.any(dens > envelope):
            worst = float(dens.max())
            raise NumericalError(
                f"rejection envelope {envelope:g} violated by proposal density "
                f"{worst:g}; the inspection grid missed the supremum"
            )
        accept = rng.random(m) * envelope <= dens
        take = min(int(accept.sum()), n - filled)
        out[filled : filled + take] = props[accept][:take]
        filled += take
    return SampleObservation(points=out, n=n, seed=seed, kind=kind)


def sample_density(truth: TruthSpec, op: SvdOperator, n: int, seed) -> SampleObservation:
    """n i.i.d. draws from the density Af w.r.t. nu (convolution model)."""
    if op.kind != "convolution":
        raise ConfigError("sample_density expects a convolution operator")
    return _rejection_sample(truth, op, n, seed, kind="density")


def sample_tomography(truth: TruthSpec, n: int, seed, op: SvdOperator | None = None) -> SampleObservation:
    """n i.i.d. draws (u_i, phi_i) of hyperplane observations on the disk."""
    from .operators import tomography2d_operator

    op = op if op is not None else tomography2d_operator()
    if op.kind != "tomography2d":
        raise ConfigError("sample_tomography expects the tomography operator")
    return _rejection_sample(truth, op, n, seed, kind="tomography")


def empirical_coefficients(op: SvdOperator, obs: SampleObservation, indices) -> np.ndarray:
    """hat z_j = n^-1 sum_i b_j^-1 psi_j(Y_i); unbiased for theta_j.

    These play the role of the white-noise statistics in the density-model
    empirical risk: gamma_n is the same quadratic with hat z in place of z.
    """
    design = image_design_matrix(op, list(indices), obs.points)
    binv = op.b_inv_array(indices)
    return binv * design.mean(axis=0)


def centered_empirical_Q(op: SvdOperator, obs: SampleObservation,
                         g: CoefficientVector, truth: TruthSpec) -> float:
    """nu_n(Q g): empirical mean of (Qg)(Y_i) minus its model expectation.

    The expectation integral(Qg * Af d nu) collapses to sum theta_j eta_j in
    coefficient space: every non-constant image basis function is
    nu-orthogonal to the uniform base, and for the trig family the constant
    coefficient is part of theta_star itself.
    """
    indices = g.support()
    if not indices:
        return 0.0
    design = image_design_matrix(op, indices, obs.points)
    binv = op.b_inv_array(indices)
    eta = np.array([g.entries[idx] for idx in indices])
    emp = float((design @ (binv * eta)).mean())
    theta = np.array([truth.theta_star.get(idx) for idx in indices])
    return emp - float(theta @ eta)

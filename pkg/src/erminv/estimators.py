"""The three empirical-risk minimizers: delta-net, dense, and additive.

All three minimize the same L2 empirical risk

    gamma_n(g) = -2 sum_j eta_j z_j + sum_j eta_j^2,

where z is the vector of white-noise sufficient statistics or, in the
density model, the empirical coefficients n^-1 sum_i b_j^-1 psi_j(Y_i)
(the risk -2/n sum_i (Qg)(Y_i) + ||g||^2 is the same quadratic in eta).

The dense minimizer solves the quadratic over the truncated ellipsoid
exactly via the KKT system: the unconstrained solution when feasible, else
the shrinkage theta_j = z_j / (1 + lambda a_j^2) with the multiplier found
by bisection on the monotone constraint function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .indexing import CoefficientVector
from .models import SampleObservation, WhiteNoiseObservation, empirical_coefficients
from .operators import SvdOperator
from .spaces import DeltaNet, Ellipsoid

__all__ = [
    "EstimateResult",
    "AdditiveComponent",
    "AdditiveSpec",
    "delta_net_minimize",
    "dense_minimize",
    "additive_minimize",
    "observation_coefficients",
]

_CHUNK = 1 << 16


@dataclass
class EstimateResult:
    estimate: CoefficientVector
    risk_value: float
    argmin_index: object = None      # net position(s) for net modes
    lagrange_multiplier: float | None = None
    ties_broken: int = 0


def observation_coefficients(obs, op: SvdOperator, indices) -> np.ndarray:
    """Per-index statistics driving the quadratic risk, either model."""
    if isinstance(obs, WhiteNoiseObservation):
        return obs.restrict(indices)
    if isinstance(obs, SampleObservation):
        return empirical_coefficients(op, obs, indices)
    raise ConfigError(f"unsupported observation type {type(obs).__name__}")


def delta_net_minimize(net: DeltaNet, obs, op: SvdOperator) -> EstimateResult:
    """Exhaustive risk minimization over a materialized net.

    Ties on the exact float minimum are broken by the first point in
    construction (= serialization) order; the count of tied points is
    reported.
    """
    if not net.materialized:
        raise ConfigError("delta-net minimization needs a materialized net")
    if net.count == 0:
        raise ConfigError("empty net")
    z = observation_coefficients(obs, op, net.support)
    if not np.all(np.isfinite(z)):
        raise NumericalError("non-finite observation statistics")
    pts = net.points
    best_val = math.inf
    best_pos = 0
    ties = 0
    for start in range(0, pts.shape[0], _CHUNK):
        block = pts[start : start + _CHUNK]
        risks = np.einsum("ij,ij->i", block, block) - 2.0 * block @ z
        pos = int(np.argmin(risks))
        val = float(risks[pos])
        n_tied = int(np.count_nonzero(risks == val))
        if val < best_val:
            best_val = val
            best_pos = start + pos
            ties = n_tied
        elif val == best_val:
            ties += n_tied
    estimate = CoefficientVector.from_array(
        pts[best_pos], net.support, net.ellipsoid.space.tag
    )
    return EstimateResult(
        estimate=estimate, risk_value=best_val, argmin_index=best_pos, ties_broken=ties
    )


def dense_minimize(e: Ellipsoid, obs, truncation: int, epsilon: float = 1e-9,
                   op: SvdOperator | None = None, max_iter: int = 200) -> EstimateResult:
    """Minimize the empirical risk over the truncated ellipsoid.

    The truncation tail contributes at most delta_trunc^2 / 2 to the risk
    gap relative to the full class and is folded into ``epsilon``'s budget
    by the caller's choice of truncation level.
    """
    support = e.index_set_up_to(truncation)
    if isinstance(obs, WhiteNoiseObservation):
        z = obs.restrict(support)
    else:
        if op is None:
            raise ConfigError("density-model dense minimization needs the operator")
        z = observation_coefficients(obs, op, support)
    if not np.all(np.isfinite(z)):
        raise NumericalError("non-finite observation statistics")
    a_sq = e.weights_array(support) ** 2
    L_sq = e.L**2

    def constraint(lam: float) -> float:
        theta = z / (1.0 + lam * a_sq)
        return float(a_sq @ theta**2) - L_sq

    if constraint(0.0) <= 0.0:
        theta = z
        lam = 0.0
    else:
        lo = 0.0
        z_norm = math.sqrt(float(z @ z))
        hi = max(z_norm / (e.L * math.sqrt(float(a_sq.min()))), 1e-12)
        while constraint(hi) > 0.0:
            hi *= 2.0
            if hi > 1e30:
                raise NumericalError("Lagrange multiplier bracket diverged")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if constraint(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        lam = hi  # feasible side
        theta = z / (1.0 + lam * a_sq)

    risk = float(theta @ theta - 2.0 * theta @ z)
    estimate = CoefficientVector.from_array(theta, support, e.space.tag)
    return EstimateResult(estimate=estimate, risk_value=risk, lagrange_multiplier=lam)


@dataclass
class AdditiveComponent:
    """One additive coordinate: its class, operator restriction, and scale."""

    ellipsoid: Ellipsoid
    operator: SvdOperator
    delta: float


@dataclass
class AdditiveSpec:
    """Additive model: components on disjoint coordinate supports.

    ``geometry_constant`` is the constant c of the norm-splitting assumption
    ||f_1 + ... + f_p||^2 >= c * sum ||f_j||^2; it equals 1 for centered,
    Lebesgue-orthogonal components and is never inferred from data.
    """

    components: list
    geometry_constant: float = 1.0

    def __post_init__(self):
        if len(self.components) < 2:
            raise ConfigError("additive model needs at least 2 components")
        if self.geometry_constant <= 0:
            raise ConfigError("geometry constant must be positive")


def _check_disjoint(nets) -> None:
    seen = {}
    for ci, net in enumerate(nets):
        for idx in net.support.indices:
            if idx in seen:
                raise ConfigError(
                    f"component supports overlap at {idx} (components {seen[idx]} and {ci}); "
                    "risk separability would fail"
                )
            seen[idx] = ci


def additive_minimize(spec: AdditiveSpec, nets, obs) -> EstimateResult:
    """Minimizer over the product net, computed componentwise.

    The empirical risk separates across disjoint coefficient supports, so
    the concatenation of per-component argmins is exactly the joint argmin
    over the product net (verified against brute-force enumeration in the
    test suite).
    """
    if len(nets) != len(spec.components):
        raise ConfigError("one net per component required")
    _check_disjoint(nets)
    entries = {}
    risk = 0.0
    positions = []
    ties = 1
    for comp, net in zip(spec.components, nets):
        res = delta_net_minimize(net, obs, comp.operator)
        entries.update(res.estimate.entries)
        risk += res.risk_value
        positions.append(res.argmin_index)
        ties *= res.ties_broken  # tied product points multiply across factors
    tag = spec.components[0].ellipsoid.space.tag
    return EstimateResult(
        estimate=CoefficientVector(entries, tag),
        risk_value=risk,
        argmin_index=tuple(positions),
        ties_broken=ties,
    )

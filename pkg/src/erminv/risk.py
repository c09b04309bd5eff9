"""Risks, Monte Carlo MISE, oracle bound curves, and rate regressions.

MISE is always computed analytically in coefficient space (Parseval): the
squared error sums over the union of the estimate's and the truth's
supports, so truth energy beyond the estimator truncation enters exactly.
Grid quadrature exists only as a cross-check in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .estimators import observation_coefficients
from .indexing import CoefficientVector
from .models import TruthSpec
from .operators import SvdOperator
from .spaces import Ellipsoid, build_delta_net, fit_loglog_slope

__all__ = [
    "empirical_risk",
    "mise_monte_carlo",
    "RiskBoundConstants",
    "delta_net_risk_bound",
    "additive_risk_bound",
    "EntropyIntegral",
    "entropy_integral",
    "RateExperiment",
    "rate_regression",
    "matched_delta",
    "rate_target_exponent",
]


def empirical_risk(g: CoefficientVector, obs, op: SvdOperator) -> float:
    """gamma_n(g) = -2 sum eta_j z_j + ||g||^2 (white noise), or the
    sample version -2/n sum (Qg)(Y_i) + ||g||^2 (density model)."""
    indices = g.support()
    if not indices:
        return 0.0
    eta = np.array([g.entries[idx] for idx in indices])
    if not np.all(np.isfinite(eta)):
        raise NumericalError("non-finite coefficients in risk evaluation")
    z = observation_coefficients(obs, op, indices)
    if not np.all(np.isfinite(z)):
        raise NumericalError("non-finite observation statistics")
    return float(eta @ eta - 2.0 * eta @ z)


def squared_error(estimate: CoefficientVector, truth: CoefficientVector) -> float:
    """||f_hat - f||_2^2 over the union support (exact by Parseval)."""
    keys = set(estimate.entries) | set(truth.entries)
    return sum((estimate.get(k) - truth.get(k)) ** 2 for k in keys)


def mise_monte_carlo(truth: TruthSpec, op: SvdOperator, estimator_fn, n: int,
                     reps: int, master_seed: int, simulate_fn=None,
                     map_fn=None):
    """Mean and standard error of ||f_hat - f||^2 over seeded replications.

    ``estimator_fn(obs) -> CoefficientVector``; ``simulate_fn(truth, op, n,
    seed)`` defaults to the white-noise simulator.  Each replication draws
    its generator from (master_seed, replication_index), so results are
    reproducible and replication-parallel; ``map_fn`` may evaluate the
    replications in any order but results reduce in index order.
    """
    if reps < 2:
        raise ConfigError("need reps >= 2 for a standard error")
    from .models import simulate_white_noise

    sim = simulate_fn if simulate_fn is not None else simulate_white_noise

    def one_rep(rep: int) -> float:
        obs = sim(truth, op, n, [master_seed, rep])
        try:
            estimate = estimator_fn(obs)
        except Exception as err:
            raise NumericalError(f"estimator failed in replication {rep}: {err}") from err
        return squared_error(estimate, truth.theta_star)

    mapper = map_fn if map_fn is not None else map
    errors = np.fromiter(mapper(one_rep, range(reps)), dtype=float, count=reps)
    mean = float(errors.mean())
    stderr = float(errors.std(ddof=1) / math.sqrt(reps))
    return mean, stderr


@dataclass
class RiskBoundConstants:
    """Constants of the delta-net oracle bound.

    C1 = (1-2 xi)^-1 (1+2 xi) and C2 = (1-2 xi)^-1 xi C_tau, with xi
    admissible for the chosen model: sqrt(2/C_tau) <= xi < 1/2 under white
    noise, and the Bernstein-driven lower bound under the density model.
    Infeasible combinations raise instead of clamping.
    """

    xi: float = 0.26
    C_tau: float = 32.0
    mode: str = "white-noise"
    B_inf: float | None = None
    B_inf_prime: float | None = None
    C1: float = field(init=False)
    C2: float = field(init=False)

    def __post_init__(self):
        if self.C_tau <= 0:
            raise ConfigError("C_tau must be positive")
        if self.mode == "white-noise":
            xi_min = math.sqrt(2.0 / self.C_tau)
        elif self.mode == "density":
            if self.B_inf is None or self.B_inf_prime is None:
                raise ConfigError("density mode needs B_inf and B_inf_prime")
            bp = self.B_inf_prime
            xi_min = (4.0 * bp / 3.0 + math.sqrt(2.0 * (8.0 * bp**2 / 9.0 + self.C_tau * self.B_inf))) / self.C_tau
        else:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if xi_min >= 0.5:
            raise ConfigError(
                f"no admissible xi: the {self.mode} condition forces xi >= {xi_min:g} >= 1/2; "
                "increase C_tau"
            )
        if not xi_min <= self.xi < 0.5:
            raise ConfigError(
                f"xi={self.xi:g} outside the admissible interval [{xi_min:g}, 0.5)"
            )
        self.C1 = (1.0 + 2.0 * self.xi) / (1.0 - 2.0 * self.xi)
        self.C2 = self.xi * self.C_tau / (1.0 - 2.0 * self.xi)


def delta_net_risk_bound(consts: RiskBoundConstants, delta: float,
                         net_log_card: float, rho: float, n: int) -> float:
    """C1 delta^2 + C2 rho^2 (log #net + 1) / n."""
    if delta < 0 or net_log_card < 0 or rho < 0 or n < 1:
        raise ConfigError("bound arguments must be non-negative with n >= 1")
    return consts.C1 * delta**2 + consts.C2 * rho**2 * (net_log_card + 1.0) / n


def additive_risk_bound(c: float, deltas, rhos, lambdas, n: int) -> float:
    """Additive oracle bound: 3 delta^2 + 32 c^-1 n^-1 [sum rho_j^2 lambda_j
    + (sum rho_j)^2], with delta = sum of component deltas."""
    if c <= 0:
        raise ConfigError("geometry constant c must be positive")
    rhos = np.asarray(rhos, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if rhos.shape != lambdas.shape:
        raise ConfigError("need one lambda per rho")
    delta = float(np.sum(deltas))
    return 3.0 * delta**2 + 32.0 / (c * n) * (
        float(rhos**2 @ lambdas) + float(rhos.sum()) ** 2
    )


@dataclass
class EntropyIntegral:
    value: float
    diverges: bool
    a: float
    b: float


def entropy_integral(op: SvdOperator, e: Ellipsoid, delta: float,
                     grid_size: int = 64, mode: str = "net",
                     rho_law=None, entropy_law=None) -> EntropyIntegral:
    """integral_0^delta rho(Q, F_u) sqrt(log #F_u) du on a geometric grid.

    Composite trapezoid over ``grid_size`` nodes plus the closed-form
    power-law tail below the smallest node.  In ``net`` mode the integrand
    is evaluated from net summaries (certified diagonal rho bound,
    certified log-cardinality); ``analytic`` mode uses supplied or
    calibrated power laws rho(u) = c u^-a, log#(u) = C u^-b.  Divergent
    exponent combinations (a + b/2 >= 1) are flagged instead of integrated.
    """
    if grid_size < 16:
        raise ConfigError("grid_size must be at least 16")
    b2 = e.b2_bound()
    if not 0.0 < delta <= b2:
        raise ConfigError(f"delta must lie in (0, B2={b2:g}]")
    a_exp = (op.q / e.s) if rho_law is None else float(rho_law[1])
    b_exp = (e.space.entropy_dimension / e.s) if entropy_law is None else float(entropy_law[1])
    if a_exp + b_exp / 2.0 >= 1.0:
        return EntropyIntegral(math.inf, True, a_exp, b_exp)

    power = a_exp + b_exp / 2.0  # integrand ~ u^-power near zero
    analytic = mode == "analytic" or rho_law is not None or entropy_law is not None
    # depth needed for a 1e-4 relative tail, capped so net summaries at the
    # smallest node stay enumerable
    decades = 4.0 / max(1.0 - power, 1e-9)
    if not analytic:
        decades = min(decades, 4.0)
    u_min = delta * 10.0 ** (-decades)
    grid = np.geomspace(u_min, delta, grid_size)

    def integrand(u: float) -> float:
        if analytic:
            rho_c = rho_law[0] if rho_law is not None else _calibrate_rho(op, e, delta)
            ent_c = entropy_law[0] if entropy_law is not None else _calibrate_entropy(e, delta)
            return rho_c * u ** (-a_exp) * math.sqrt(max(ent_c * u ** (-b_exp), 0.0))
        net = build_delta_net(e, u, materialize=False)
        rho_up = float(op.b_inv_array(net.support).max())
        return rho_up * math.sqrt(max(net.log_count_mid(), 0.0))

    vals = np.array([integrand(float(u)) for u in grid])
    total = float(np.trapezoid(vals, grid))
    # closed-form tail of the power law below u_min; net mode extrapolates
    # the local exponent (the certified bounds add a log factor on top of
    # the pure power)
    p_loc = power
    if not analytic and vals[0] > 0 and vals[1] > 0:
        p_loc = -math.log(vals[1] / vals[0]) / math.log(grid[1] / grid[0])
    if p_loc >= 1.0:
        raise NumericalError(
            f"local integrand exponent {p_loc:.3f} >= 1 near zero; the "
            "entropy integral does not converge numerically"
        )
    tail = vals[0] * u_min / (1.0 - p_loc)
    return EntropyIntegral(total + tail, False, a_exp, b_exp)


def _calibrate_rho(op: SvdOperator, e: Ellipsoid, delta: float) -> float:
    net = build_delta_net(e, delta, materialize=False)
    rho = float(op.b_inv_array(net.support).max())
    return rho * delta ** (op.q / e.s)


def _calibrate_entropy(e: Ellipsoid, delta: float) -> float:
    net = build_delta_net(e, delta, materialize=False)
    return net.log_count_mid() * delta ** (e.space.entropy_dimension / e.s)


@dataclass
class RateExperiment:
    """A completed rate experiment: MISE against sample size."""

    ns: list
    mises: list
    stderrs: list
    reps: int
    target_exponent: float

    def __post_init__(self):
        ns = list(self.ns)
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("sample sizes must be strictly increasing")
        if self.reps < 2:
            raise ConfigError("need reps >= 2")
        if not all(math.isfinite(s) for s in self.stderrs):
            raise ConfigError("standard errors must be finite")


def rate_regression(exp: RateExperiment):
    """Weighted least squares of log MISE on log n.

    Weights follow from the delta method (sigma_log = stderr / mise).
    Returns (slope, slope_se, target_exponent).
    """
    ns = np.asarray(exp.ns, dtype=float)
    mises = np.asarray(exp.mises, dtype=float)
    stderrs = np.asarray(exp.stderrs, dtype=float)
    if len(ns) < 4 or ns.max() / ns.min() < 100.0:
        raise ConfigError("need >= 4 sample sizes spanning >= 2 decades")
    if np.any(mises <= 0):
        raise ConfigError("non-positive MISE; log regression undefined")
    sigma_log = stderrs / mises
    weights = 1.0 / np.maximum(sigma_log, 1e-12) ** 2
    slope, se, _ = fit_loglog_slope(np.log(ns), np.log(mises), weights)
    return slope, se, exp.target_exponent


def rate_target_exponent(s: float, q: float, d: int) -> float:
    """Minimax MISE exponent -2s / (2s + 2q + d) for the polynomial case."""
    return -2.0 * s / (2.0 * s + 2.0 * q + d)


def matched_delta(n: int, s: float, q: float, d: int, coef: float = 1.0) -> float:
    """delta(n) = coef * n^(-s / (2s + 2q + d)), the rate-matched net scale."""
    return coef * float(n) ** (-s / (2.0 * s + 2.0 * q + d))

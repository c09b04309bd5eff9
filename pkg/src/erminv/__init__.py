"""Empirical-risk-minimization estimators for statistical inverse problems.

Coefficient-space implementations of the delta-net, dense, and additive
L2 empirical-risk minimizers for periodic deconvolution and 2D Radon
tomography, under Gaussian white noise and density sampling, together with
the certified net/packing constructions and the Monte Carlo harness that
verifies their convergence rates.
"""

from .errors import (
    ConfigError,
    ErminvError,
    IllPosedError,
    NetTooLargeError,
    NumericalError,
    ResourceError,
)
from .indexing import (
    AxisCosSpace,
    CoefficientVector,
    DiskSpace,
    IndexSet,
    MultiIndex,
    TrigSpace,
)
from .spaces import (
    DeltaNet,
    Ellipsoid,
    PackingSet,
    build_delta_net,
    build_packing_set,
    certify_covering,
    net_cardinality_exponent,
    truncation_level,
)
from .operators import (
    ConvolutionFilter,
    SvdOperator,
    apply_A,
    apply_A_inverse,
    apply_Q,
    convolution_operator,
    eval_Q_pointwise,
    radon2d_operator,
    radon_forward_quadrature,
    rho_K_whitenoise,
    rho_Q,
    tomography2d_operator,
)
from .models import (
    SampleObservation,
    TruthSpec,
    WhiteNoiseObservation,
    sample_density,
    sample_tomography,
    simulate_white_noise,
)
from .estimators import (
    AdditiveComponent,
    AdditiveSpec,
    EstimateResult,
    additive_minimize,
    delta_net_minimize,
    dense_minimize,
)
from .risk import (
    RateExperiment,
    RiskBoundConstants,
    empirical_risk,
    entropy_integral,
    matched_delta,
    mise_monte_carlo,
    rate_regression,
    rate_target_exponent,
    delta_net_risk_bound,
    additive_risk_bound,
)

__version__ = "0.1.0"

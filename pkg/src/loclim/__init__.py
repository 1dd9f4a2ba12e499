"""loclim: a simulation lab for small-bandwidth limit theorems of
local-time derivative estimators of self-similar Gaussian processes."""

__version__ = "0.1.0"

from .conditions import Condition, ConditionReport, check_condition
from .errors import AccuracyError, CapacityError, ConfigError, DomainError
from .experiments import (
    ExperimentConfig,
    ExperimentRecord,
    geometric_grid,
    run_clt_experiment,
    run_rate_experiment,
)
from .heatkernel import (
    MultiIndex,
    TestFunction,
    frac_power,
    gaussian_kernel_function,
    heat_kernel,
    heat_kernel_deriv,
    verify_space_membership,
)
from .limits import ConstantName, LimitConstant, Regime, classify, constant, scaling
from .loctime import (
    EstimatorConfig,
    EstimateValue,
    IntegrationRule,
    estimate,
    expected_estimate,
    reference_local_time,
)
from .moments import MomentQuery, MomentResult, moment_formula, moment_simulated
from .processes import (
    Kind,
    PathSample,
    ProcessSpec,
    bi_fbm,
    brownian,
    covariance,
    fbm,
    sample_path,
    sub_fbm,
)

__all__ = [
    "__version__",
    "AccuracyError",
    "CapacityError",
    "Condition",
    "ConditionReport",
    "ConfigError",
    "ConstantName",
    "DomainError",
    "EstimateValue",
    "EstimatorConfig",
    "ExperimentConfig",
    "ExperimentRecord",
    "IntegrationRule",
    "Kind",
    "LimitConstant",
    "MomentQuery",
    "MomentResult",
    "MultiIndex",
    "PathSample",
    "ProcessSpec",
    "Regime",
    "TestFunction",
    "bi_fbm",
    "brownian",
    "check_condition",
    "classify",
    "constant",
    "covariance",
    "estimate",
    "expected_estimate",
    "fbm",
    "frac_power",
    "gaussian_kernel_function",
    "geometric_grid",
    "heat_kernel",
    "heat_kernel_deriv",
    "moment_formula",
    "moment_simulated",
    "reference_local_time",
    "run_clt_experiment",
    "run_rate_experiment",
    "sample_path",
    "scaling",
    "sub_fbm",
    "verify_space_membership",
]

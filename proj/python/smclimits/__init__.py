"""Sequential Monte Carlo resampling, filters and exact asymptotic-variance oracles."""

from ._smclimits import (
    DiscreteHMM,
    ErrorCode,
    LinearGaussianSSM,
    SmcError,
    __version__,
    command_names,
    conditional_moments,
    counterexample_run,
    cv2,
    default_config,
    ess,
    estimate,
    exact_joint_smoothing,
    forward_backward_marginals,
    kalman_filter,
    kolmogorov_survival,
    ks_test,
    max_weight_fraction,
    normal_cdf,
    resample,
    residual_counts,
    run_command,
    run_filter,
    sigma2,
    variance_table,
    w_ell_phi,
)

__all__ = [
    "DiscreteHMM",
    "ErrorCode",
    "LinearGaussianSSM",
    "SmcError",
    "__version__",
    "command_names",
    "conditional_moments",
    "counterexample_run",
    "cv2",
    "default_config",
    "ess",
    "estimate",
    "exact_joint_smoothing",
    "forward_backward_marginals",
    "kalman_filter",
    "kolmogorov_survival",
    "ks_test",
    "max_weight_fraction",
    "normal_cdf",
    "resample",
    "residual_counts",
    "run_command",
    "run_filter",
    "sigma2",
    "variance_table",
    "w_ell_phi",
]

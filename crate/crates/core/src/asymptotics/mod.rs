//! Closed-form asymptotic objects for weight collapse and the numerical checks
//! that go with them.
//!
//! All counts `n` and dimensions `d` enter these formulas as reals so the
//! predictors can be evaluated off the integer lattice (e.g. at `n = e^{σ²d/2}`).

mod cauchy;
mod extremes;
mod moments;
mod standardize;
mod window;

pub use cauchy::{
    average_rate_from_r, cauchy_average_rate, cauchy_conditional_t_quadrature, cauchy_predicted_t,
    cauchy_sigma_sq, limiting_posterior_params, AverageRate, CauchyCollapsePredictor,
    ExactCauchyPosterior, LimitingPosterior,
};
pub use extremes::{
    bucket_conditional_t, expected_t_large_separation, expected_t_normal_closed_form,
    gaussian_collapse_rate, gumbel_min_approx, simulate_t_given_min, BucketEstimate,
    GumbelMinApprox,
};
pub use moments::{
    abs_normal_moment_bound, centered_chi_sq_abs_moment, centered_chi_sq_moment_bound,
    moment_bound_check, moment_bound_constant, normal_abs_moment, power_mean_equal_case,
    sub_bound_checks, MomentBoundReport, SubBoundCheck,
};
pub use standardize::{
    coordinate_moments, kernel_moments, sigma_dprime_sq, standardize_gaussian, standardize_iid,
    ComponentPrior, GaussianStandardization, IidStandardization, KernelMoments, NormalComponent,
};
pub use window::{normal_window_check, WindowPoint, WindowReport, DEFAULT_ETA};

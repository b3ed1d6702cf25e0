//! Regularized quasi-maximum-likelihood estimation, design matrices,
//! confidence radii and approximation-gap certificates.

mod design;
mod estimator;
mod potential;
mod quasi;
mod solver;

pub use design::{DesignMatrix, REFACTOR_EVERY};
pub use estimator::{
    approximation_inflation, confidence_radius, uniform_radius_bound, ConfidenceEllipsoid,
    Estimator, EstimatorConfig,
};
pub use potential::{elliptical_potential_audit, elliptical_potential_bound, PotentialReport};
pub use quasi::{quasi_loglik, quasi_loglik_at, Observation, QuasiObjective, QUADRATURE_TOL};
pub use solver::{
    ball_quadratic_max, known_gamma_radius, maximize, qmle_fit, qmle_fit_known_gamma,
    suboptimality_gap, AscentMethod, Solution, SolverOptions,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::quasi::{Observation, QuasiObjective};
use super::solver::{known_gamma_radius, maximize, SolverOptions};
use crate::covariates::make_feature;
use crate::error::{Error, Result};
use crate::glm::LinkFunction;

/// `alpha(M) = 2 sqrt(lambda) theta_bar + (2 sigma_bar / g_lower) sqrt(2 log T + log(det M / lambda^dim))`.
pub fn confidence_radius(
    design: &DesignMatrix,
    horizon: usize,
    lambda: f64,
    theta_bar: f64,
    sigma_bar: f64,
    g_lower: f64,
) -> f64 {
    let info = 2.0 * (horizon.max(1) as f64).ln() + design.log_det_ratio();
    2.0 * lambda.sqrt() * theta_bar + 2.0 * sigma_bar / g_lower * info.sqrt()
}

/// Trajectory-free upper bound on `alpha(M_t)` when every `||z_t|| <= 1`.
pub fn uniform_radius_bound(
    dim: usize,
    horizon: usize,
    lambda: f64,
    theta_bar: f64,
    sigma_bar: f64,
    g_lower: f64,
) -> f64 {
    let n = dim as f64;
    let t = horizon.max(1) as f64;
    let info = 2.0 * t.ln() + n * ((n * lambda + t) / (n * lambda)).ln();
    2.0 * lambda.sqrt() * theta_bar + 2.0 * sigma_bar / g_lower * info.sqrt()
}

/// Radius inflation `sqrt(2 Delta / g_lower)` for an inexact solve with gap `Delta`.
pub fn approximation_inflation(gap: f64, g_lower: f64) -> f64 {
    (2.0 * gap.max(0.0) / g_lower).sqrt()
}

/// `{theta : ||theta - center||_M <= radius, ||theta|| <= theta_bar}`.
#[derive(Clone, Copy, Debug)]
pub struct ConfidenceEllipsoid<'a> {
    pub center: &'a DVector<f64>,
    pub design: &'a DesignMatrix,
    pub radius: f64,
    pub theta_bar: f64,
}

impl ConfidenceEllipsoid<'_> {
    pub fn m_distance(&self, theta: &DVector<f64>) -> f64 {
        self.design.norm_sq(&(theta - self.center)).max(0.0).sqrt()
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        self.m_distance(theta) <= self.radius && theta.norm() <= self.theta_bar
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub lambda: f64,
    pub theta_bar: f64,
    pub sigma_bar: f64,
    /// Horizon `T`, which fixes the `1/T` failure probability of the radius.
    pub horizon: usize,
    pub solver: SolverOptions,
}

#[derive(Clone, Debug)]
enum Target {
    Full,
    KnownGamma(DVector<f64>),
}

/// Online regularized quasi-MLE: design matrix, history, current estimate
/// and its suboptimality certificate.
#[derive(Clone, Debug)]
pub struct Estimator {
    target: Target,
    config: EstimatorConfig,
    objective: QuasiObjective,
    design: DesignMatrix,
    theta_hat: DVector<f64>,
    gap: f64,
}

impl Estimator {
    /// Estimates the full `theta = (beta; gamma)` in dimension `2d`.
    pub fn full(link: LinkFunction, d: usize, config: EstimatorConfig) -> Result<Self> {
        Self::build(link, 2 * d, Target::Full, config)
    }

    /// Estimates `beta` alone, `gamma` known; design and radius live in dimension `d`.
    pub fn known_gamma(link: LinkFunction, gamma: &[f64], config: EstimatorConfig) -> Result<Self> {
        let g = DVector::from_column_slice(gamma);
        Self::build(link, gamma.len(), Target::KnownGamma(g), config)
    }

    fn build(link: LinkFunction, dim: usize, target: Target, config: EstimatorConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if !(config.lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        if !(config.theta_bar > 0.0) {
            return Err(Error::invalid("theta_bar", "must be positive"));
        }
        if !(config.solver.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        Ok(Self {
            target,
            objective: QuasiObjective::new(link, dim, config.lambda),
            design: DesignMatrix::new(dim, config.lambda),
            theta_hat: DVector::zeros(dim),
            gap: 0.0,
            config,
        })
    }

    pub fn link(&self) -> &LinkFunction {
        self.objective.link()
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn set_solver(&mut self, solver: SolverOptions) {
        self.config.solver = solver;
    }

    pub fn is_known_gamma(&self) -> bool {
        matches!(self.target, Target::KnownGamma(_))
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn history_len(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &QuasiObjective {
        &self.objective
    }

    /// The estimated vector: `theta_hat`, or `beta_hat` in known-gamma mode.
    pub fn estimate(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    /// `(beta_hat; gamma)` in both modes.
    pub fn full_theta(&self) -> DVector<f64> {
        match &self.target {
            Target::Full => self.theta_hat.clone(),
            Target::KnownGamma(g) => {
                let d = g.len();
                DVector::from_fn(2 * d, |i, _| if i < d { self.theta_hat[i] } else { g[i - d] })
            }
        }
    }

    /// Certified suboptimality of the current estimate on the current history.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Radius of the feasible ball for the estimated vector.
    pub fn feasible_radius(&self) -> f64 {
        match &self.target {
            Target::Full => self.config.theta_bar,
            Target::KnownGamma(g) => known_gamma_radius(self.config.theta_bar, g.as_slice()),
        }
    }

    /// The feature the estimator sees for covariate `x` at price `p`, and its offset.
    pub fn feature(&self, x: &[f64], p: f64) -> (DVector<f64>, f64) {
        match &self.target {
            Target::Full => (make_feature(x, p).into_vector(), 0.0),
            Target::KnownGamma(g) => {
                let xg: f64 = x.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
                (DVector::from_column_slice(x), xg * p)
            }
        }
    }

    /// Records `(x, p, demand)`: updates the design and history, not the estimate.
    pub fn observe(&mut self, x: &[f64], p: f64, demand: f64) -> Result<()> {
        let expected = match &self.target {
            Target::Full => self.dim() / 2,
            Target::KnownGamma(_) => self.dim(),
        };
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        let (z, offset) = self.feature(x, p);
        self.objective.push(Observation::with_offset(z.clone(), offset, demand))?;
        self.design.update(&z);
        Ok(())
    }

    /// Re-solves the quasi-MLE, warm-started at the current estimate.
    pub fn refit(&mut self) -> Result<()> {
        let sol = maximize(
            &self.objective,
            self.feasible_radius(),
            &self.theta_hat,
            &self.config.solver,
        )?;
        self.theta_hat = sol.theta;
        self.gap = sol.gap;
        Ok(())
    }

    /// Re-certifies the (possibly stale) estimate against the current history.
    pub fn refresh_gap(&mut self) {
        let g = self.objective.gradient(&self.theta_hat).norm();
        self.gap = g * g / (2.0 * self.objective.strong_concavity());
    }

    /// `alpha(M)` for the current design.
    pub fn radius(&self) -> f64 {
        confidence_radius(
            &self.design,
            self.config.horizon,
            self.config.lambda,
            self.config.theta_bar,
            self.config.sigma_bar,
            self.link().g_lower(),
        )
    }

    pub fn radius_bound(&self) -> f64 {
        uniform_radius_bound(
            self.dim(),
            self.config.horizon,
            self.config.lambda,
            self.config.theta_bar,
            self.config.sigma_bar,
            self.link().g_lower(),
        )
    }

    pub fn ellipsoid(&self, radius: f64) -> ConfidenceEllipsoid<'_> {
        ConfidenceEllipsoid {
            center: &self.theta_hat,
            design: &self.design,
            radius,
            theta_bar: self.feasible_radius(),
        }
    }
}

//! Sampling around an estimate: uniform draws from a confidence ellipsoid
//! and the Gaussian perturbation used by Thompson sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::estimation::DesignMatrix;
use crate::linalg::inv_sqrt_spd;

/// Rejection attempts before falling back to radial projection.
pub const MAX_REJECTIONS: usize = 100;

pub fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform sampler on `{theta : ||theta - center||_M <= radius}`, restricted to
/// the ball `||theta|| <= theta_bar` by rejection.
#[derive(Clone, Debug)]
pub struct EllipsoidSampler<'a> {
    center: &'a DVector<f64>,
    transform: DMatrix<f64>,
    radius: f64,
    theta_bar: f64,
}

impl<'a> EllipsoidSampler<'a> {
    pub fn new(center: &'a DVector<f64>, design: &DesignMatrix, radius: f64, theta_bar: f64) -> Self {
        Self {
            center,
            transform: inv_sqrt_spd(design.matrix()),
            radius,
            theta_bar,
        }
    }

    /// Like [`EllipsoidSampler::new`] with a precomputed `M^{-1/2}`.
    pub fn with_inv_sqrt(center: &'a DVector<f64>, inv_sqrt: DMatrix<f64>, radius: f64, theta_bar: f64) -> Self {
        Self {
            center,
            transform: inv_sqrt,
            radius,
            theta_bar,
        }
    }

    fn draw_once<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let dim = self.center.len();
        let mut u = standard_normal(dim, rng);
        let n = u.norm();
        if n > 0.0 {
            u /= n;
        }
        let r: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
        self.center + &self.transform * (u * (r * self.radius))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        if self.radius <= 0.0 {
            return self.center.clone();
        }
        let mut last = self.center.clone();
        for _ in 0..MAX_REJECTIONS {
            last = self.draw_once(rng);
            if last.norm() <= self.theta_bar {
                return last;
            }
        }
        let n = last.norm();
        last * (self.theta_bar / n)
    }
}

/// One uniform draw from the ellipsoid intersected with the parameter ball.
pub fn sample_ellipsoid_uniform<R: Rng + ?Sized>(
    center: &DVector<f64>,
    design: &DesignMatrix,
    radius: f64,
    theta_bar: f64,
    rng: &mut R,
) -> DVector<f64> {
    EllipsoidSampler::new(center, design, radius, theta_bar).sample(rng)
}

/// `center + scale M^{-1/2} eta`.
pub fn ts_perturb(center: &DVector<f64>, inv_sqrt: &DMatrix<f64>, scale: f64, eta: &DVector<f64>) -> DVector<f64> {
    center + inv_sqrt * eta * scale
}

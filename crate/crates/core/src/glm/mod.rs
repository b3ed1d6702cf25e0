//! Generalized linear demand: parameters, revenue, and single-round price
//! optimization.

mod demand;
mod link;

pub use demand::{sample_demand, DemandModel, ShockSpec};
pub use link::{sigmoid, CustomLink, LinkFunction, LinkKind};
pub(crate) use link::softplus;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concatenated parameter `theta = (beta; gamma)` with `||theta|| <= theta_bar`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    theta: DVector<f64>,
}

impl ParamVector {
    pub fn new(beta: &[f64], gamma: &[f64], theta_bar: f64) -> Result<Self> {
        if beta.len() != gamma.len() {
            return Err(Error::DimensionMismatch {
                expected: beta.len(),
                got: gamma.len(),
            });
        }
        let theta = DVector::from_iterator(
            2 * beta.len(),
            beta.iter().chain(gamma.iter()).copied(),
        );
        Self::from_vector(theta, theta_bar)
    }

    pub fn from_vector(theta: DVector<f64>, theta_bar: f64) -> Result<Self> {
        if theta.is_empty() || theta.len() % 2 != 0 {
            return Err(Error::invalid(
                "theta",
                format!("length must be a positive even number, got {}", theta.len()),
            ));
        }
        let norm = theta.norm();
        if !norm.is_finite() || norm > theta_bar {
            return Err(Error::OutOfBounds {
                norm,
                bound: theta_bar,
            });
        }
        Ok(Self { theta })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            theta: DVector::zeros(2 * d),
        }
    }

    /// Covariate dimension `d` (half the length of theta).
    pub fn d(&self) -> usize {
        self.theta.len() / 2
    }

    pub fn beta(&self) -> &[f64] {
        &self.theta.as_slice()[..self.d()]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.theta.as_slice()[self.d()..]
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.theta
    }

    pub fn norm(&self) -> f64 {
        self.theta.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceRange {
    pub min: f64,
    pub max: f64,
}

impl PriceRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::InvalidPriceRange { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.min, self.max)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.min && p <= self.max
    }
}

/// Optimal price and the revenue it earns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriceChoice {
    pub price: f64,
    pub revenue: f64,
}

/// `(x'beta, x'gamma)` for a concatenated theta.
pub fn linear_index(theta: &DVector<f64>, x: &[f64]) -> Result<(f64, f64)> {
    let d = x.len();
    if theta.len() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: theta.len() / 2,
            got: d,
        });
    }
    let t = theta.as_slice();
    let a = x.iter().zip(&t[..d]).map(|(xi, bi)| xi * bi).sum();
    let b = x.iter().zip(&t[d..]).map(|(xi, gi)| xi * gi).sum();
    Ok((a, b))
}

/// `g(x'beta + x'gamma p)`.
pub fn mean_demand(link: &LinkFunction, theta: &DVector<f64>, x: &[f64], p: f64) -> Result<f64> {
    let (a, b) = linear_index(theta, x)?;
    Ok(link.g(a + b * p))
}

/// `p g(x'beta + x'gamma p)`.
pub fn expected_revenue(
    link: &LinkFunction,
    theta: &DVector<f64>,
    x: &[f64],
    p: f64,
) -> Result<f64> {
    Ok(p * mean_demand(link, theta, x, p)?)
}

pub fn optimal_price(
    link: &LinkFunction,
    theta: &DVector<f64>,
    x: &[f64],
    range: PriceRange,
) -> Result<PriceChoice> {
    let (a, b) = linear_index(theta, x)?;
    Ok(optimal_price_for_index(link, a, b, range))
}

const PRICE_GRID: usize = 256;
const GOLDEN_TOL: f64 = 1e-8;

/// Maximizes `p g(a + b p)` over the range, given the two linear indices.
pub fn optimal_price_for_index(link: &LinkFunction, a: f64, b: f64, range: PriceRange) -> PriceChoice {
    let revenue = |p: f64| p * link.g(a + b * p);
    let at = |p: f64| PriceChoice {
        price: p,
        revenue: revenue(p),
    };

    if link.is_identity() {
        if b < 0.0 {
            return at(range.clamp(-a / (2.0 * b)));
        }
        // Convex (or linear) in p: an endpoint wins; p_max unless strictly worse.
        let (lo, hi) = (at(range.min), at(range.max));
        return if lo.revenue > hi.revenue { lo } else { hi };
    }

    if b >= 0.0 && link.g(a + b * range.min) >= 0.0 {
        // g is increasing and nonnegative along the range, so revenue is too.
        return at(range.max);
    }

    let step = (range.max - range.min) / (PRICE_GRID - 1) as f64;
    let grid_price = |i: usize| {
        if i == PRICE_GRID - 1 {
            range.max
        } else {
            range.min + step * i as f64
        }
    };
    let mut best_i = 0;
    let mut best_r = revenue(range.min);
    for i in 1..PRICE_GRID {
        let r = revenue(grid_price(i));
        if r > best_r {
            best_r = r;
            best_i = i;
        }
    }
    let lo = grid_price(best_i.saturating_sub(1));
    let hi = grid_price((best_i + 1).min(PRICE_GRID - 1));
    let p = golden_section_max(revenue, lo, hi, GOLDEN_TOL);
    let refined = at(p);
    if refined.revenue > best_r {
        refined
    } else {
        at(grid_price(best_i))
    }
}

/// Golden-section search for the maximizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

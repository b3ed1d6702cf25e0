//! The quasi-likelihood `l(theta) = -int_{D}^{g(z'theta)} (u - D) / h(u) du`
//! and the regularized objective `-lambda g_lower ||theta||^2 + sum l`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::glm::{softplus, LinkFunction, LinkKind};
use crate::quadrature;

/// Absolute tolerance for custom-link quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// One observation: link argument is `z'theta + offset`.
///
/// `offset` carries the known-price-coefficient term `x'gamma* p`; it is zero
/// when the full parameter is estimated.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub z: DVector<f64>,
    pub offset: f64,
    pub demand: f64,
}

impl Observation {
    pub fn new(z: DVector<f64>, demand: f64) -> Self {
        Self { z, offset: 0.0, demand }
    }

    pub fn with_offset(z: DVector<f64>, offset: f64, demand: f64) -> Self {
        Self { z, offset, demand }
    }

    fn index(&self, theta: &DVector<f64>) -> f64 {
        self.z.dot(theta) + self.offset
    }
}

fn xlogx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// Closed-form (identity, logistic) or quadrature (custom) value of one
/// observation's quasi-likelihood at link argument `s`.
pub fn quasi_loglik_at(link: &LinkFunction, s: f64, demand: f64) -> Result<f64> {
    match link.kind() {
        LinkKind::Identity => {
            let r = s - demand;
            Ok(-0.5 * r * r)
        }
        LinkKind::Logistic => {
            if !(0.0..=1.0).contains(&demand) {
                return Err(Error::DemandOutsideLinkRange { demand });
            }
            // D ln mu + (1 - D) ln(1 - mu) minus its value at mu = D.
            let ll = -demand * softplus(-s) - (1.0 - demand) * softplus(s);
            Ok(ll - xlogx(demand) - xlogx(1.0 - demand))
        }
        LinkKind::Custom(_) => {
            // u = g(v) turns the integrand (u - D)/h(u) du into (g(v) - D) dv.
            let v0 = link
                .inverse(demand)
                .ok_or(Error::DemandOutsideLinkRange { demand })?;
            Ok(-quadrature::integrate(|v| link.g(v) - demand, v0, s, QUADRATURE_TOL))
        }
    }
}

/// `sum_tau l_tau(theta)` over a history.
pub fn quasi_loglik(link: &LinkFunction, theta: &DVector<f64>, history: &[Observation]) -> Result<f64> {
    history
        .iter()
        .map(|o| {
            check_dim(o, theta)?;
            quasi_loglik_at(link, o.index(theta), o.demand)
        })
        .sum()
}

fn check_dim(o: &Observation, theta: &DVector<f64>) -> Result<()> {
    if o.z.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: o.z.len(),
        });
    }
    Ok(())
}

/// History plus the regularizer; evaluates the concave objective, its
/// gradient and negated Hessian. Identity links use sufficient statistics.
#[derive(Clone, Debug)]
pub struct QuasiObjective {
    link: LinkFunction,
    dim: usize,
    /// Curvature of the penalty: `2 lambda g_lower`.
    penalty: f64,
    history: Vec<Observation>,
    gram: DMatrix<f64>,
    zy: DVector<f64>,
    yy: f64,
}

impl QuasiObjective {
    pub fn new(link: LinkFunction, dim: usize, lambda: f64) -> Self {
        let penalty = 2.0 * lambda * link.g_lower();
        Self {
            link,
            dim,
            penalty,
            history: Vec::new(),
            gram: DMatrix::zeros(dim, dim),
            zy: DVector::zeros(dim),
            yy: 0.0,
        }
    }

    pub fn from_history(link: LinkFunction, lambda: f64, history: &[Observation]) -> Result<Self> {
        let dim = history.first().map(|o| o.z.len()).unwrap_or(0);
        let mut obj = Self::new(link, dim, lambda);
        for o in history {
            obj.push(o.clone())?;
        }
        Ok(obj)
    }

    pub fn link(&self) -> &LinkFunction {
        &self.link
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    /// Strong-concavity modulus `2 lambda g_lower`.
    pub fn strong_concavity(&self) -> f64 {
        self.penalty
    }

    pub fn push(&mut self, o: Observation) -> Result<()> {
        if o.z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: o.z.len(),
            });
        }
        if self.link.has_unit_range() && !(0.0..=1.0).contains(&o.demand) {
            return Err(Error::DemandOutsideLinkRange { demand: o.demand });
        }
        if self.link.is_identity() {
            let y = o.demand - o.offset;
            self.gram.ger(1.0, &o.z, &o.z, 1.0);
            self.zy.axpy(y, &o.z, 1.0);
            self.yy += y * y;
        }
        self.history.push(o);
        Ok(())
    }

    pub fn value(&self, theta: &DVector<f64>) -> Result<f64> {
        let reg = -0.5 * self.penalty * theta.norm_squared();
        if self.link.is_identity() {
            let quad = theta.dot(&(&self.gram * theta)) - 2.0 * theta.dot(&self.zy) + self.yy;
            return Ok(reg - 0.5 * quad);
        }
        Ok(reg + quasi_loglik(&self.link, theta, &self.history)?)
    }

    pub fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut grad = theta * (-self.penalty);
        if self.link.is_identity() {
            grad += &self.zy - &self.gram * theta;
        } else {
            for o in &self.history {
                let xi = o.demand - self.link.g(o.index(theta));
                grad.axpy(xi, &o.z, 1.0);
            }
        }
        grad
    }

    /// `sum g'(z'theta) z z' + 2 lambda g_lower I`, positive definite.
    pub fn neg_hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::identity(self.dim, self.dim) * self.penalty;
        if self.link.is_identity() {
            h += &self.gram;
        } else {
            for o in &self.history {
                h.ger(self.link.g_prime(o.index(theta)), &o.z, &o.z, 1.0);
            }
        }
        h
    }
}

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use crate::error::{Error, Result};

/// Outcome of checking `sum ||z_t||^2_{M_{t-1}^{-1}} <= 2 n log((lambda n + T) / (lambda n))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub lhs: f64,
    pub bound: f64,
    pub ok: bool,
}

pub fn elliptical_potential_bound(dim: usize, horizon: usize, lambda: f64) -> f64 {
    let n = dim as f64;
    2.0 * n * ((lambda * n + horizon as f64) / (lambda * n)).ln()
}

/// Audits the elliptical potential of a feature sequence. Refuses sequences
/// outside the lemma's hypotheses (`lambda >= 1`, `||z_t|| <= 1`).
pub fn elliptical_potential_audit(zs: &[DVector<f64>], lambda: f64) -> Result<PotentialReport> {
    if lambda < 1.0 {
        return Err(Error::AuditPrecondition(format!("lambda = {lambda} < 1")));
    }
    let dim = zs.first().map(|z| z.len()).unwrap_or(1);
    let mut design = DesignMatrix::new(dim, lambda);
    let mut lhs = 0.0;
    for (t, z) in zs.iter().enumerate() {
        if z.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: z.len(),
            });
        }
        let n = z.norm();
        if n > 1.0 + 1e-12 {
            return Err(Error::AuditPrecondition(format!(
                "||z_{}|| = {n} exceeds 1",
                t + 1
            )));
        }
        lhs += design.inv_norm_sq(z);
        design.update(z);
    }
    let bound = elliptical_potential_bound(dim, zs.len(), lambda);
    Ok(PotentialReport {
        lhs,
        bound,
        ok: lhs <= bound,
    })
}

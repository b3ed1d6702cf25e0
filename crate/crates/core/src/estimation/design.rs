use nalgebra::{DMatrix, DVector};

/// Updates between full re-factorizations of the maintained inverse.
pub const REFACTOR_EVERY: usize = 512;

/// Regularized Gram matrix `M = lambda I + sum z z'` with its inverse and
/// log-determinant maintained under rank-one updates.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    lambda: f64,
    m: DMatrix<f64>,
    m_inv: DMatrix<f64>,
    log_det: f64,
    updates: usize,
}

impl DesignMatrix {
    pub fn new(dim: usize, lambda: f64) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        Self {
            lambda,
            m: DMatrix::identity(dim, dim) * lambda,
            m_inv: DMatrix::identity(dim, dim) / lambda,
            log_det: dim as f64 * lambda.ln(),
            updates: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.m_inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `log(det M / lambda^dim)`, the information gain so far.
    pub fn log_det_ratio(&self) -> f64 {
        (self.log_det - self.dim() as f64 * self.lambda.ln()).max(0.0)
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// `||v||_M^2`.
    pub fn norm_sq(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }

    /// `||v||_{M^{-1}}^2`.
    pub fn inv_norm_sq(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m_inv * v))
    }

    /// `M <- M + z z'` via Sherman-Morrison.
    pub fn update(&mut self, z: &DVector<f64>) {
        assert_eq!(z.len(), self.dim(), "feature dimension mismatch");
        if z.iter().all(|&v| v == 0.0) {
            return;
        }
        let mz = &self.m_inv * z;
        let denom = 1.0 + z.dot(&mz);
        self.m.ger(1.0, z, z, 1.0);
        self.m_inv.ger(-1.0 / denom, &mz, &mz, 1.0);
        self.log_det += denom.ln();
        self.updates += 1;
        if self.updates % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    /// Recomputes the inverse and log-determinant from `M` by Cholesky.
    pub fn refactor(&mut self) {
        let m = (&self.m + self.m.transpose()) * 0.5;
        let chol = m.clone().cholesky().expect("design matrix is positive definite");
        self.log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        self.m_inv = chol.inverse();
        self.m = m;
    }
}

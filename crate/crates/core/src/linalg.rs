use nalgebra::{DMatrix, DVector};

/// Symmetric inverse square root `M^{-1/2}` of a positive definite matrix.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scale = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt()),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&scale) * v.transpose()
}

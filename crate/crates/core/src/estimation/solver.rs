//! Ball-constrained maximization of the strongly concave quasi-likelihood
//! objective, with a certified bound on the remaining suboptimality.
//!
//! For a `mu`-strongly concave `F` and any feasible `theta`,
//! `F* - F(theta) <= ||grad F(theta)||^2 / (2 mu)`; for a projected gradient
//! step `theta+` with gradient mapping `G` the same bound holds at `theta+`
//! with `||G||` in place of the gradient. With `mu = 2 lambda g_lower` both
//! read `||.||^2 / (4 lambda g_lower)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::quasi::{Observation, QuasiObjective};
use crate::error::Result;
use crate::glm::{LinkFunction, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AscentMethod {
    /// Newton steps on the ball-constrained quadratic model, Armijo backtracking.
    ProjectedNewton,
    /// Projected gradient ascent with backtracking on the step size.
    ProjectedGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: AscentMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            method: AscentMethod::ProjectedNewton,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub theta: DVector<f64>,
    /// Certified upper bound on `F(theta_hat) - F(theta)`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `Delta = ||G||^2 / (4 lambda g_lower)` for a gradient-mapping norm `||G||`.
pub fn suboptimality_gap(link: &LinkFunction, lambda: f64, gradient_mapping_norm: f64) -> f64 {
    gradient_mapping_norm * gradient_mapping_norm / (4.0 * lambda * link.g_lower())
}

fn project(theta: &mut DVector<f64>, radius: f64) {
    let n = theta.norm();
    if n > radius {
        *theta *= radius / n;
    }
}

/// `argmax b'phi - phi' H phi / 2` subject to `||phi|| <= radius`, `H` positive definite.
pub fn ball_quadratic_max(h: &DMatrix<f64>, b: &DVector<f64>, radius: f64) -> DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        let phi = chol.solve(b);
        if phi.norm() <= radius {
            return phi;
        }
    }
    let eig = h.clone().symmetric_eigen();
    let c = eig.eigenvectors.transpose() * b;
    let norm_at = |nu: f64| {
        c.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(ci, li)| (ci / (li + nu)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (mut lo, mut hi) = (0.0, b.norm() / radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let nu = hi;
    let scaled = DVector::from_iterator(
        c.len(),
        c.iter().zip(eig.eigenvalues.iter()).map(|(ci, li)| ci / (li + nu)),
    );
    let mut phi = &eig.eigenvectors * scaled;
    project(&mut phi, radius);
    phi
}

struct GradientStep {
    next: DVector<f64>,
    mapping_norm: f64,
}

/// One projected gradient step with backtracking; `lipschitz` is the running
/// curvature estimate, doubled until the sufficient-ascent test passes.
fn projected_gradient_step(
    obj: &QuasiObjective,
    theta: &DVector<f64>,
    value: f64,
    grad: &DVector<f64>,
    radius: f64,
    lipschitz: &mut f64,
) -> Result<GradientStep> {
    loop {
        let mut next = theta + grad / *lipschitz;
        project(&mut next, radius);
        let diff = &next - theta;
        let model = value + grad.dot(&diff) - 0.5 * *lipschitz * diff.norm_squared();
        let f_next = obj.value(&next)?;
        let slack = 1e-12 * (1.0 + value.abs());
        if f_next >= model - slack || *lipschitz > 1e300 {
            let mapping_norm = *lipschitz * diff.norm();
            *lipschitz = (*lipschitz * 0.5).max(1e-12);
            return Ok(GradientStep { next, mapping_norm });
        }
        *lipschitz *= 2.0;
    }
}

/// Maximizes the objective over `||theta|| <= radius`, warm-started at `start`.
///
/// Hitting `max_iter` is not an error: the best iterate is returned with its
/// (larger) certificate and `converged = false`.
pub fn maximize(
    obj: &QuasiObjective,
    radius: f64,
    start: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<Solution> {
    let mu = obj.strong_concavity();
    let cert = |norm: f64| norm * norm / (2.0 * mu);
    let mut theta = start.clone();
    project(&mut theta, radius);
    let mut lipschitz = 1.0;
    let mut best = Solution {
        theta: theta.clone(),
        gap: f64::INFINITY,
        iterations: 0,
        converged: false,
    };

    for iter in 0..opts.max_iter {
        let value = obj.value(&theta)?;
        let grad = obj.gradient(&theta);
        let plain = cert(grad.norm());
        if plain < best.gap {
            best = Solution {
                theta: theta.clone(),
                gap: plain,
                iterations: iter,
                converged: false,
            };
        }
        if plain <= opts.tol {
            best.converged = true;
            return Ok(best);
        }

        let on_boundary = theta.norm() >= radius * (1.0 - 1e-9);
        if on_boundary || opts.method == AscentMethod::ProjectedGradient {
            let step = projected_gradient_step(obj, &theta, value, &grad, radius, &mut lipschitz)?;
            let mapped = cert(step.mapping_norm);
            if mapped < best.gap {
                best = Solution {
                    theta: step.next.clone(),
                    gap: mapped,
                    iterations: iter + 1,
                    converged: false,
                };
            }
            if mapped <= opts.tol {
                best.converged = true;
                return Ok(best);
            }
            if opts.method == AscentMethod::ProjectedGradient {
                theta = step.next;
                continue;
            }
        }

        let h = obj.neg_hessian(&theta);
        let b = &grad + &h * &theta;
        let target = ball_quadratic_max(&h, &b, radius);
        let dir = &target - &theta;
        let slope = grad.dot(&dir);
        let predicted = slope - 0.5 * dir.dot(&(&h * &dir));
        if predicted <= 1e-13 * (1.0 + value.abs()) {
            // Below the objective's resolution: take the model step as is.
            if dir.amax() <= f64::EPSILON * (1.0 + theta.amax()) {
                break;
            }
            theta = target;
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = &theta + &dir * t;
            if obj.value(&cand)? >= value + 1e-4 * t * slope {
                theta = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            let step = projected_gradient_step(obj, &theta, value, &grad, radius, &mut lipschitz)?;
            theta = step.next;
        }
    }

    let grad = obj.gradient(&theta);
    let last = cert(grad.norm());
    if last < best.gap {
        best = Solution {
            theta,
            gap: last,
            iterations: opts.max_iter,
            converged: last <= opts.tol,
        };
    }
    Ok(best)
}

/// Regularized quasi-MLE over `||theta|| <= theta_bar`, started at zero.
pub fn qmle_fit(
    link: &LinkFunction,
    history: &[Observation],
    lambda: f64,
    theta_bar: f64,
    tol: f64,
) -> Result<(ParamVector, f64)> {
    let obj = QuasiObjective::from_history(link.clone(), lambda, history)?;
    let start = DVector::zeros(obj.dim());
    let sol = maximize(&obj, theta_bar, &start, &SolverOptions::with_tol(tol))?;
    Ok((ParamVector::from_vector(sol.theta, theta_bar * (1.0 + 1e-12))?, sol.gap))
}

/// Quasi-MLE of `beta` alone with `gamma` known: observations are
/// `(x, p, demand)` and `x'gamma p` enters as a fixed offset.
pub fn qmle_fit_known_gamma(
    link: &LinkFunction,
    history: &[(Vec<f64>, f64, f64)],
    gamma: &[f64],
    lambda: f64,
    theta_bar: f64,
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    let obs: Vec<Observation> = history
        .iter()
        .map(|(x, p, d)| {
            let offset: f64 = x.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>() * p;
            Observation::with_offset(DVector::from_column_slice(x), offset, *d)
        })
        .collect();
    let mut obj = QuasiObjective::new(link.clone(), gamma.len(), lambda);
    for o in obs {
        obj.push(o)?;
    }
    let radius = known_gamma_radius(theta_bar, gamma);
    let sol = maximize(&obj, radius, &DVector::zeros(gamma.len()), &SolverOptions::with_tol(tol))?;
    Ok((sol.theta, sol.gap))
}

/// Radius of `{beta : ||(beta, gamma)|| <= theta_bar}`.
pub fn known_gamma_radius(theta_bar: f64, gamma: &[f64]) -> f64 {
    let g2: f64 = gamma.iter().map(|v| v * v).sum();
    (theta_bar * theta_bar - g2).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ridge_closed_form(history: &[Observation], lambda: f64) -> DVector<f64> {
        let dim = history[0].z.len();
        let mut a = DMatrix::identity(dim, dim) * (2.0 * lambda);
        let mut b = DVector::zeros(dim);
        for o in history {
            a += &o.z * o.z.transpose();
            b += &o.z * o.demand;
        }
        a.try_inverse().unwrap() * b
    }

    #[test]
    fn identity_fit_matches_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h: Vec<Observation> = (0..30)
            .map(|_| {
                Observation::new(
                    DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let (theta, gap) = qmle_fit(&LinkFunction::identity(), &h, 1.0, 10.0, 1e-10).unwrap();
        let expected = ridge_closed_form(&h, 1.0);
        assert!((theta.as_vector() - expected).amax() < 1e-6);
        assert!(gap <= 1e-10);
    }

    #[test]
    fn single_observation_at_link_center_gives_zero() {
        let l = LinkFunction::logistic(3.0);
        let h = vec![Observation::new(DVector::from_vec(vec![1.0, 0.0]), 0.5)];
        for lambda in [0.1, 1.0, 5.0] {
            let (theta, _) = qmle_fit(&l, &h, lambda, 3.0, 1e-12).unwrap();
            assert!(theta.norm() < 1e-9);
        }
    }

    #[test]
    fn boundary_solution_is_certified() {
        // Ridge optimum far outside a small ball.
        let h: Vec<Observation> = (0..20)
            .map(|i| Observation::new(DVector::from_vec(vec![1.0, (i % 3) as f64 * 0.2]), 5.0))
            .collect();
        let obj = QuasiObjective::from_history(LinkFunction::identity(), 1.0, &h).unwrap();
        let sol = maximize(&obj, 0.5, &DVector::zeros(2), &SolverOptions::with_tol(1e-10)).unwrap();
        assert!(sol.converged);
        assert!((sol.theta.norm() - 0.5).abs() < 1e-9);
        // brute force over the circle of radius 0.5
        let best = (0..100_000)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 100_000.0;
                obj.value(&DVector::from_vec(vec![0.5 * a.cos(), 0.5 * a.sin()])).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let got = obj.value(&sol.theta).unwrap();
        assert!(got >= best - 1e-6);
        assert!(best - got <= sol.gap + 1e-9);
    }

    #[test]
    fn projected_gradient_agrees_with_newton() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h: Vec<Observation> = (0..25)
            .map(|_| {
                let z = DVector::from_fn(3, |_, _| rng.random_range(-0.6..0.6));
                Observation::new(z, f64::from(rng.random::<bool>()))
            })
            .collect();
        let obj = QuasiObjective::from_history(LinkFunction::logistic(3.0), 1.0, &h).unwrap();
        let start = DVector::zeros(3);
        let newton = maximize(&obj, 3.0, &start, &SolverOptions::with_tol(1e-12)).unwrap();
        let pg_opts = SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            method: AscentMethod::ProjectedGradient,
        };
        let pg = maximize(&obj, 3.0, &start, &pg_opts).unwrap();
        assert!(newton.converged && pg.converged);
        assert!((obj.value(&newton.theta).unwrap() - obj.value(&pg.theta).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let h: Vec<Observation> = (0..10)
            .map(|i| Observation::new(DVector::from_vec(vec![1.0, i as f64]), i as f64))
            .collect();
        let obj = QuasiObjective::from_history(LinkFunction::identity(), 1.0, &h).unwrap();
        let opts = SolverOptions {
            tol: 1e-14,
            max_iter: 3,
            method: AscentMethod::ProjectedGradient,
        };
        let sol = maximize(&obj, 100.0, &DVector::zeros(2), &opts).unwrap();
        assert!(!sol.converged);
        assert!(sol.gap.is_finite() && sol.gap > 1e-14);
    }

    #[test]
    fn known_gamma_matches_d_dimensional_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gamma = vec![-0.3, -0.1];
        let hist: Vec<(Vec<f64>, f64, f64)> = (0..40)
            .map(|_| {
                let x = vec![1.0, rng.random_range(0.0..1.0)];
                let p = rng.random_range(0.1..5.0);
                (x, p, rng.random_range(-0.5..1.5))
            })
            .collect();
        let (beta, _) = qmle_fit_known_gamma(&LinkFunction::identity(), &hist, &gamma, 1.0, 10.0, 1e-10).unwrap();
        // ridge on residual demand D - x'gamma p
        let obs: Vec<Observation> = hist
            .iter()
            .map(|(x, p, d)| {
                let off = (x[0] * gamma[0] + x[1] * gamma[1]) * p;
                Observation::new(DVector::from_column_slice(x), d - off)
            })
            .collect();
        assert!((beta - ridge_closed_form(&obs, 1.0)).amax() < 1e-6);
    }

    #[test]
    fn known_gamma_consistent_history_gives_zero_beta() {
        let gamma = vec![-0.5];
        let l = LinkFunction::identity();
        let hist: Vec<(Vec<f64>, f64, f64)> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&p| (vec![1.0], p, l.g(-0.5 * p)))
            .collect();
        let (beta, _) = qmle_fit_known_gamma(&l, &hist, &gamma, 1.0, 3.0, 1e-12).unwrap();
        assert!(beta.amax() < 1e-10);
    }

    #[test]
    fn gap_formula() {
        let l = LinkFunction::identity();
        assert_eq!(suboptimality_gap(&l, 1.0, 0.0), 0.0);
        assert!((suboptimality_gap(&l, 2.0, 4.0) - 2.0).abs() < 1e-15);
    }
}

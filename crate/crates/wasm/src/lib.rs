//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations: a revenue curve for a single covariate draw, mean regret
//! curves of several policies, and a two-parameter confidence ellipse with the
//! candidates UCB and Thompson sampling draw from it.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use pricing_core::estimation::{Estimator, EstimatorConfig, SolverOptions};
use pricing_core::glm::{optimal_price_for_index, LinkFunction, PriceRange};
use pricing_core::harness::config::{CovariateModeName, ExperimentConfig, PolicyName, RadiusModeName};
use pricing_core::harness::run_experiment;
use pricing_core::linalg::inv_sqrt_spd;
use pricing_core::policies::{standard_normal, ts_perturb, EllipsoidSampler};

fn err_string(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn link_named(name: &str) -> Result<LinkFunction, String> {
    match name {
        "identity" => Ok(LinkFunction::identity()),
        "logistic" => Ok(LinkFunction::logistic(3.0)),
        other => Err(err_string(format!("unknown link `{other}`"))),
    }
}

#[derive(Serialize)]
struct RevenueCurve {
    prices: Vec<f64>,
    revenue: Vec<f64>,
    best_price: f64,
    best_revenue: f64,
}

/// Revenue `p g(a + b p)` on `n` prices in `[p_min, p_max]`, plus the optimum. JSON.
pub fn revenue_curve(link: &str, a: f64, b: f64, p_min: f64, p_max: f64, n: usize) -> Result<String, String> {
    let link = link_named(link)?;
    let range = PriceRange::new(p_min, p_max).map_err(err_string)?;
    let n = n.max(2);
    let prices: Vec<f64> = (0..n).map(|i| p_min + (p_max - p_min) * i as f64 / (n - 1) as f64).collect();
    let revenue = prices.iter().map(|&p| p * link.g(a + b * p)).collect();
    let best = optimal_price_for_index(&link, a, b, range);
    serde_json::to_string(&RevenueCurve {
        prices,
        revenue,
        best_price: best.price,
        best_revenue: best.revenue,
    })
    .map_err(err_string)
}

fn demo_config(experiment: &str, d: usize, horizon: usize, trials: usize, seed: u64) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::new(d, horizon, trials, seed, PolicyName::Ucb);
    match experiment {
        "a" => {}
        "b" | "c" => {
            cfg.covariates.mode = CovariateModeName::Phased;
            cfg.covariates.phases = Some(if experiment == "b" { 2 } else { 6 });
        }
        other => return Err(err_string(format!("unknown experiment `{other}`"))),
    }
    let tenth = d as f64 / 10.0;
    cfg.policy.k = 30;
    cfg.policy.kappa = Some(tenth);
    cfg.policy.radius_mode = RadiusModeName::Fixed;
    cfg.policy.radius_value = Some(tenth);
    cfg.policy.ts_scale_mode = RadiusModeName::Fixed;
    cfg.policy.ts_scale_value = Some((d as f64).sqrt() / 25.0);
    cfg.validate().map_err(err_string)?;
    Ok(cfg)
}

#[derive(Serialize)]
struct RegretCurves {
    policies: Vec<String>,
    /// `mean[k][t-1]` is policy `k`'s mean cumulative regret at period `t`.
    mean: Vec<Vec<f64>>,
    stderr: Vec<Vec<f64>>,
}

/// Mean cumulative regret of UCB, TS and CILS on experiment `a`, `b` or `c`
/// with the tuned constants. Trials share seeds across policies. JSON.
pub fn simulate_regret(experiment: &str, d: usize, horizon: usize, trials: usize, seed: u64) -> Result<String, String> {
    let base = demo_config(experiment, d, horizon, trials, seed)?;
    let kinds = [("ucb", PolicyName::Ucb), ("ts", PolicyName::Ts), ("cils", PolicyName::Cils)];
    let mut out = RegretCurves {
        policies: Vec::new(),
        mean: Vec::new(),
        stderr: Vec::new(),
    };
    for (name, kind) in kinds {
        let mut cfg = base.clone();
        cfg.policy.kind = kind;
        let agg = run_experiment(&cfg, Some(1)).map_err(err_string)?;
        out.policies.push(name.into());
        out.mean.push(agg.per_t.iter().map(|p| p.mean_cum_regret).collect());
        out.stderr.push(agg.per_t.iter().map(|p| p.stderr).collect());
    }
    serde_json::to_string(&out).map_err(err_string)
}

#[derive(Serialize)]
struct Ellipse {
    truth: [f64; 2],
    center: [f64; 2],
    radius: f64,
    boundary: Vec<[f64; 2]>,
    ucb: Vec<[f64; 2]>,
    ts: Vec<[f64; 2]>,
}

/// Covariate-free linear demand `D = beta + gamma p + noise`: fits `(beta, gamma)`
/// from `n_obs` random prices, then returns the ellipse `||theta - theta_hat||_M^2 <= radius_sq`,
/// uniform UCB candidates inside it and Thompson draws at scale `ts_scale`. JSON.
pub fn confidence_ellipse(
    seed: u64,
    n_obs: usize,
    noise: f64,
    radius_sq: f64,
    ts_scale: f64,
    n_samples: usize,
) -> Result<String, String> {
    let (beta, gamma) = (1.5, -0.4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EstimatorConfig {
        lambda: 1.0,
        theta_bar: 3.0,
        sigma_bar: noise.max(1e-6),
        horizon: n_obs.max(1),
        solver: SolverOptions::default(),
    };
    let mut est = Estimator::full(LinkFunction::identity(), 1, cfg).map_err(err_string)?;
    for _ in 0..n_obs {
        let p = rng.random_range(0.1..5.0);
        let d = beta + gamma * p + noise * standard_normal(1, &mut rng)[0];
        est.observe(&[1.0], p, d).map_err(err_string)?;
    }
    est.refit().map_err(err_string)?;
    let center = est.estimate().clone();
    let radius = radius_sq.max(0.0).sqrt();
    let inv_sqrt = inv_sqrt_spd(est.design().matrix());
    let boundary = (0..=96)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 96.0;
            let u = DVector::from_vec(vec![a.cos(), a.sin()]) * radius;
            let v = &center + &inv_sqrt * u;
            [v[0], v[1]]
        })
        .collect();
    let sampler = EllipsoidSampler::with_inv_sqrt(&center, inv_sqrt.clone(), radius, 3.0);
    let ucb = (0..n_samples)
        .map(|_| {
            let v = sampler.sample(&mut rng);
            [v[0], v[1]]
        })
        .collect();
    let ts = (0..n_samples)
        .map(|_| {
            let v = ts_perturb(&center, &inv_sqrt, ts_scale, &standard_normal(2, &mut rng));
            [v[0], v[1]]
        })
        .collect();
    serde_json::to_string(&Ellipse {
        truth: [beta, gamma],
        center: [center[0], center[1]],
        radius,
        boundary,
        ucb,
        ts,
    })
    .map_err(err_string)
}

#[wasm_bindgen(js_name = revenueCurve)]
pub fn revenue_curve_js(link: &str, a: f64, b: f64, p_min: f64, p_max: f64, n: usize) -> Result<String, JsValue> {
    revenue_curve(link, a, b, p_min, p_max, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = simulateRegret)]
pub fn simulate_regret_js(experiment: &str, d: usize, horizon: usize, trials: usize, seed: u64) -> Result<String, JsValue> {
    simulate_regret(experiment, d, horizon, trials, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = confidenceEllipse)]
pub fn confidence_ellipse_js(
    seed: u64,
    n_obs: usize,
    noise: f64,
    radius_sq: f64,
    ts_scale: f64,
    n_samples: usize,
) -> Result<String, JsValue> {
    confidence_ellipse(seed, n_obs, noise, radius_sq, ts_scale, n_samples).map_err(|e| JsValue::from_str(&e))
}

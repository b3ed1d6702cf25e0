use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PolicyName, RadiusModeName};
use super::trial::{run_trial, run_trial_audited, AuditOptions, TrialResult};
use crate::error::{Error, Result};
use crate::estimation::{elliptical_potential_audit, PotentialReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: usize,
    pub mean_cum_regret: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateResult {
    pub per_t: Vec<CurvePoint>,
    pub trials: Vec<TrialResult>,
}

impl AggregateResult {
    /// Mean cumulative regret at period `t` (1-based).
    pub fn mean_at(&self, t: usize) -> f64 {
        self.per_t[t - 1].mean_cum_regret
    }

    pub fn final_mean(&self) -> f64 {
        self.per_t.last().map_or(0.0, |p| p.mean_cum_regret)
    }

    pub fn final_stderr(&self) -> f64 {
        self.per_t.last().map_or(0.0, |p| p.stderr)
    }
}

/// Pointwise mean and standard error (`s / sqrt(n)`, zero for one curve).
pub fn aggregate_curves(curves: &[Vec<f64>]) -> Vec<CurvePoint> {
    let n = curves.len();
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let mean = curves.iter().map(|c| c[i]).sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = curves.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                t: i + 1,
                mean_cum_regret: mean,
                stderr,
            }
        })
        .collect()
}

/// Runs `f` for every trial index, in parallel when enabled, and returns the
/// results in index order. The first failing index wins.
pub fn map_trials<T, F>(n: usize, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = match jobs {
        Some(1) => (0..n).map(&f).collect(),
        _ => parallel_map(n, jobs, &f)?,
    };
    results.into_iter().collect()
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, jobs: Option<usize>, f: &F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..n).into_par_iter().map(f).collect::<Vec<_>>();
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, _jobs: Option<usize>, f: &F) -> Result<Vec<Result<T>>>
where
    F: Fn(usize) -> Result<T>,
{
    Ok((0..n).map(f).collect())
}

pub fn run_experiment(config: &ExperimentConfig, jobs: Option<usize>) -> Result<AggregateResult> {
    config.validate()?;
    let trials = map_trials(config.trials(), jobs, |i| run_trial(config, i))?;
    let curves: Vec<Vec<f64>> = trials.iter().map(TrialResult::curve).collect();
    Ok(AggregateResult {
        per_t: aggregate_curves(&curves),
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub fraction: f64,
    pub covered: Vec<bool>,
    pub radius_multiplier: f64,
}

/// Fraction of trials whose confidence set `||theta - theta_hat_t||_{M_t} <= c alpha(M_t)`
/// holds `theta*` at every period `t = 0..T`.
pub fn coverage_audit(config: &ExperimentConfig, radius_multiplier: f64, jobs: Option<usize>) -> Result<CoverageReport> {
    config.validate()?;
    if config.policy.kind == PolicyName::Oracle {
        return Err(Error::AuditPrecondition("the oracle policy keeps no estimator".into()));
    }
    if config.policy.radius_mode != RadiusModeName::Corollary1 {
        return Err(Error::AuditPrecondition("coverage needs radius_mode = \"corollary1\"".into()));
    }
    let opts = AuditOptions {
        radius_multiplier,
        features: false,
    };
    let covered = map_trials(config.trials(), jobs, |i| {
        run_trial_audited(config, i, opts).map(|(_, trace)| trace.covered())
    })?;
    let fraction = covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64;
    Ok(CoverageReport {
        fraction,
        covered,
        radius_multiplier,
    })
}

/// Elliptical potential of one trial's feature sequence.
pub fn potential_audit_trial(config: &ExperimentConfig, trial: usize) -> Result<PotentialReport> {
    if !config.covariates.normalize {
        return Err(Error::AuditPrecondition(
            "feature normalization is off, so ||z|| <= 1 is not guaranteed".into(),
        ));
    }
    if config.policy.kind == PolicyName::Oracle {
        return Err(Error::AuditPrecondition("the oracle policy keeps no estimator".into()));
    }
    if config.policy.lambda < 1.0 {
        return Err(Error::AuditPrecondition(format!("lambda = {} < 1", config.policy.lambda)));
    }
    let opts = AuditOptions {
        radius_multiplier: 1.0,
        features: true,
    };
    let (_, trace) = run_trial_audited(config, trial, opts)?;
    elliptical_potential_audit(&trace.features, config.policy.lambda)
}

pub fn potential_audit(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<PotentialReport>> {
    config.validate()?;
    map_trials(config.trials(), jobs, |i| potential_audit_trial(config, i))
}

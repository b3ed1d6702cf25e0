//! Pricing policies behind a uniform choose-price / observe-demand interface.

mod sampling;

pub use sampling::{
    sample_ellipsoid_uniform, standard_normal, ts_perturb, EllipsoidSampler, MAX_REJECTIONS,
};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{approximation_inflation, Estimator, EstimatorConfig, SolverOptions};
use crate::glm::{optimal_price, LinkFunction, PriceChoice, PriceRange};
use crate::linalg::inv_sqrt_spd;

/// Confidence-set radius used by the UCB policies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum RadiusMode {
    /// `alpha(M_{t-1})` from the high-probability confidence bound.
    Corollary1,
    /// Tuned set `||theta - theta_hat||_M^2 <= c`, i.e. radius `sqrt(c)`.
    Fixed(f64),
}

/// Perturbation scale used by the Thompson-sampling policies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ScaleMode {
    Corollary1,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicyKind {
    /// Monte-Carlo UCB with `k` candidates, the estimate itself being one of them.
    Ucb { k: usize },
    /// UCB with the radius inflated by `sqrt(2 Delta / g_lower)`.
    UcbApprox { k: usize },
    Ts,
    TsApprox,
    /// Certainty-equivalent pricing with the price coefficient known.
    Ce { gamma: Vec<f64> },
    /// Constrained iterated least squares adapted to covariates.
    Cils { kappa: f64 },
    /// Clairvoyant pricing with the true parameter.
    Oracle { theta: DVector<f64> },
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Ucb { .. } => "ucb",
            PolicyKind::UcbApprox { .. } => "ucb_approx",
            PolicyKind::Ts => "ts",
            PolicyKind::TsApprox => "ts_approx",
            PolicyKind::Ce { .. } => "ce",
            PolicyKind::Cils { .. } => "cils",
            PolicyKind::Oracle { .. } => "oracle",
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            PolicyKind::Ucb { k } | PolicyKind::UcbApprox { k } if *k == 0 => {
                Err(Error::invalid("policy.K", "must be at least 1"))
            }
            PolicyKind::Cils { kappa } if !(*kappa > 0.0) => {
                Err(Error::invalid("policy.kappa", "must be positive"))
            }
            PolicyKind::Ce { gamma } if gamma.len() != d => Err(Error::DimensionMismatch {
                expected: d,
                got: gamma.len(),
            }),
            PolicyKind::Oracle { theta } if theta.len() != 2 * d => Err(Error::DimensionMismatch {
                expected: 2 * d,
                got: theta.len(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySettings {
    pub radius_mode: RadiusMode,
    pub ts_scale_mode: ScaleMode,
    /// Re-solve the quasi-MLE every this many periods (1 = every period).
    pub refit_every: usize,
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            radius_mode: RadiusMode::Corollary1,
            ts_scale_mode: ScaleMode::Corollary1,
            refit_every: 1,
        }
    }
}

impl PolicySettings {
    fn validate(&self) -> Result<()> {
        if let RadiusMode::Fixed(c) = self.radius_mode {
            if !(c > 0.0) {
                return Err(Error::invalid("policy.radius_value", "must be positive"));
            }
        }
        if let ScaleMode::Fixed(s) = self.ts_scale_mode {
            if !(s > 0.0) {
                return Err(Error::invalid("policy.ts_scale_value", "must be positive"));
            }
        }
        if self.refit_every == 0 {
            return Err(Error::invalid("policy.refit_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// The candidate a UCB step settled on.
#[derive(Clone, Debug)]
pub struct UcbChoice {
    pub theta: DVector<f64>,
    pub choice: PriceChoice,
    /// Index in the candidate list; 0 is the estimate itself.
    pub index: usize,
}

/// Monte-Carlo solve of `argmax_{theta in set} r*(theta, x)`: the estimate
/// plus `k - 1` uniform draws from the ellipsoid of the given radius.
pub fn ucb_select<R: Rng + ?Sized>(
    est: &Estimator,
    x: &[f64],
    range: PriceRange,
    k: usize,
    radius: f64,
    rng: &mut R,
) -> Result<UcbChoice> {
    let link = est.link();
    let center = est.estimate();
    let mut best = UcbChoice {
        theta: center.clone(),
        choice: optimal_price(link, center, x, range)?,
        index: 0,
    };
    if k > 1 && radius > 0.0 {
        let sampler = EllipsoidSampler::new(center, est.design(), radius, est.feasible_radius());
        for index in 1..k {
            let theta = sampler.sample(rng);
            let choice = optimal_price(link, &theta, x, range)?;
            if choice.revenue > best.choice.revenue {
                best = UcbChoice { theta, choice, index };
            }
        }
    }
    Ok(best)
}

/// Thompson step: `theta~ = theta_hat + scale M^{-1/2} eta`, then price optimally for `theta~`.
pub fn ts_select<R: Rng + ?Sized>(
    est: &Estimator,
    x: &[f64],
    range: PriceRange,
    scale: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, PriceChoice)> {
    let eta = standard_normal(est.dim(), rng);
    let theta = ts_perturb(est.estimate(), &inv_sqrt_spd(est.design().matrix()), scale, &eta);
    let choice = optimal_price(est.link(), &theta, x, range)?;
    Ok((theta, choice))
}

/// CILS rule: move `kappa t^{-1/4}` away from the running mean price when the
/// greedy price sits closer than that to it. `sgn(0) = +1`.
pub fn cils_price(greedy: f64, mean_price: f64, kappa: f64, t: usize, range: PriceRange) -> f64 {
    let width = kappa * (t.max(1) as f64).powf(-0.25);
    let delta = greedy - mean_price;
    let p = if delta.abs() < width {
        let sign = if delta >= 0.0 { 1.0 } else { -1.0 };
        mean_price + sign * width
    } else {
        greedy
    };
    range.clamp(p)
}

/// A pricing policy instance owned by one trial.
#[derive(Clone, Debug)]
pub struct Policy {
    kind: PolicyKind,
    link: LinkFunction,
    range: PriceRange,
    settings: PolicySettings,
    estimator: Option<Estimator>,
    price_sum: f64,
    rounds: usize,
}

impl Policy {
    /// `d` is the covariate dimension. CILS always fits an identity-link least-squares model.
    pub fn new(
        kind: PolicyKind,
        link: LinkFunction,
        d: usize,
        range: PriceRange,
        est_config: EstimatorConfig,
        settings: PolicySettings,
    ) -> Result<Self> {
        kind.validate(d)?;
        settings.validate()?;
        let estimator = match &kind {
            PolicyKind::Oracle { .. } => None,
            PolicyKind::Ce { gamma } => Some(Estimator::known_gamma(link.clone(), gamma, est_config)?),
            PolicyKind::Cils { .. } => Some(Estimator::full(LinkFunction::identity(), d, est_config)?),
            _ => Some(Estimator::full(link.clone(), d, est_config)?),
        };
        let link = match kind {
            PolicyKind::Cils { .. } => LinkFunction::identity(),
            _ => link,
        };
        Ok(Self {
            kind,
            link,
            range,
            settings,
            estimator,
            price_sum: 0.0,
            rounds: 0,
        })
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn estimator(&self) -> Option<&Estimator> {
        self.estimator.as_ref()
    }

    pub fn settings(&self) -> &PolicySettings {
        &self.settings
    }

    pub fn set_solver(&mut self, solver: SolverOptions) {
        if let Some(est) = self.estimator.as_mut() {
            est.set_solver(solver);
        }
    }

    /// Average of the prices charged so far, or the range midpoint before any.
    pub fn mean_price(&self) -> f64 {
        if self.rounds == 0 {
            self.range.midpoint()
        } else {
            self.price_sum / self.rounds as f64
        }
    }

    fn ucb_radius(&self, est: &Estimator, approx: bool) -> f64 {
        let base = match self.settings.radius_mode {
            RadiusMode::Corollary1 => est.radius(),
            RadiusMode::Fixed(c) => c.sqrt(),
        };
        if approx {
            base + approximation_inflation(est.gap(), est.link().g_lower())
        } else {
            base
        }
    }

    fn ts_scale(&self, est: &Estimator, approx: bool) -> f64 {
        let base = match self.settings.ts_scale_mode {
            ScaleMode::Corollary1 => est.radius(),
            ScaleMode::Fixed(s) => s,
        };
        if approx {
            base + approximation_inflation(est.gap(), est.link().g_lower())
        } else {
            base
        }
    }

    /// Price for period `t` (1-based) given covariate `x`.
    pub fn choose_price<R: Rng + ?Sized>(&mut self, x: &[f64], t: usize, rng: &mut R) -> Result<f64> {
        let range = self.range;
        let p = match (&self.kind, self.estimator.as_ref()) {
            (PolicyKind::Oracle { theta }, _) => optimal_price(&self.link, theta, x, range)?.price,
            (PolicyKind::Ucb { k }, Some(est)) => {
                ucb_select(est, x, range, *k, self.ucb_radius(est, false), rng)?.choice.price
            }
            (PolicyKind::UcbApprox { k }, Some(est)) => {
                ucb_select(est, x, range, *k, self.ucb_radius(est, true), rng)?.choice.price
            }
            (PolicyKind::Ts, Some(est)) => ts_select(est, x, range, self.ts_scale(est, false), rng)?.1.price,
            (PolicyKind::TsApprox, Some(est)) => ts_select(est, x, range, self.ts_scale(est, true), rng)?.1.price,
            (PolicyKind::Ce { .. }, Some(est)) => optimal_price(&self.link, &est.full_theta(), x, range)?.price,
            (PolicyKind::Cils { kappa }, Some(est)) => {
                let greedy = optimal_price(&self.link, est.estimate(), x, range)?.price;
                cils_price(greedy, self.mean_price(), *kappa, t, range)
            }
            (_, None) => unreachable!("learning policies always carry an estimator"),
        };
        Ok(p)
    }

    /// Records the outcome of a period and refreshes the estimate.
    pub fn observe(&mut self, x: &[f64], p: f64, demand: f64) -> Result<()> {
        self.price_sum += p;
        self.rounds += 1;
        if let Some(est) = self.estimator.as_mut() {
            est.observe(x, p, demand)?;
            if self.rounds % self.settings.refit_every == 0 {
                est.refit()?;
            } else {
                est.refresh_gap();
            }
        }
        Ok(())
    }
}

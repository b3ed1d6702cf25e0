use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{mean_demand, LinkFunction, ParamVector};
use crate::error::{Error, Result};

/// Distribution of the additive demand shock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShockSpec {
    /// Demand is 0 or 1 with `P(1) = g(.)`; the shock is the centered residual.
    Bernoulli,
    Gaussian { sigma: f64 },
    /// Uniform on `[-sigma, sigma]`.
    BoundedUniform { sigma: f64 },
}

impl ShockSpec {
    /// A valid sub-Gaussian proxy for the shock (Hoeffding for bounded shocks).
    pub fn subgaussian_proxy(&self) -> f64 {
        match *self {
            ShockSpec::Bernoulli => 0.5,
            ShockSpec::Gaussian { sigma } | ShockSpec::BoundedUniform { sigma } => sigma,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DemandModel {
    pub link: LinkFunction,
    pub theta_star: ParamVector,
    pub shock: ShockSpec,
    pub sigma_bar: f64,
}

impl DemandModel {
    pub fn new(
        link: LinkFunction,
        theta_star: ParamVector,
        shock: ShockSpec,
        sigma_bar: f64,
    ) -> Result<Self> {
        match shock {
            ShockSpec::Gaussian { sigma } | ShockSpec::BoundedUniform { sigma } if sigma < 0.0 => {
                return Err(Error::invalid("sigma", "must be nonnegative"));
            }
            _ => {}
        }
        if !(sigma_bar > 0.0) {
            return Err(Error::invalid("sigma_bar", "must be positive"));
        }
        if sigma_bar < shock.subgaussian_proxy() {
            return Err(Error::invalid(
                "sigma_bar",
                format!(
                    "{sigma_bar} is below the shock's sub-Gaussian proxy {}",
                    shock.subgaussian_proxy()
                ),
            ));
        }
        Ok(Self {
            link,
            theta_star,
            shock,
            sigma_bar,
        })
    }

    pub fn mean(&self, x: &[f64], p: f64) -> Result<f64> {
        mean_demand(&self.link, self.theta_star.as_vector(), x, p)
    }
}

/// Realized demand `g(.) + shock`. Consumes exactly one shock draw per call.
pub fn sample_demand<R: Rng + ?Sized>(model: &DemandModel, x: &[f64], p: f64, rng: &mut R) -> Result<f64> {
    let mean = model.mean(x, p)?;
    match model.shock {
        ShockSpec::Bernoulli => {
            let u: f64 = rng.random();
            if !(0.0..=1.0).contains(&mean) {
                return Err(Error::BernoulliMean(mean));
            }
            Ok(if u < mean { 1.0 } else { 0.0 })
        }
        ShockSpec::Gaussian { sigma } => {
            let e: f64 = rng.sample(StandardNormal);
            Ok(mean + sigma * e)
        }
        ShockSpec::BoundedUniform { sigma } => {
            let u: f64 = rng.random();
            Ok(mean + sigma * (2.0 * u - 1.0))
        }
    }
}

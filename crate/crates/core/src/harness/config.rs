//! Experiment configuration: a TOML document with `[experiment]`, `[demand]`,
//! `[prices]`, `[covariates]` and `[policy]` sections.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariates::{default_blocks, CovariateMode, CovariateStreamSpec};
use crate::error::{Error, Result};
use crate::estimation::{AscentMethod, EstimatorConfig, SolverOptions};
use crate::glm::{LinkFunction, ParamVector, PriceRange, ShockSpec};
use crate::policies::{PolicyKind, PolicySettings, RadiusMode, ScaleMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub demand: DemandSection,
    #[serde(default)]
    pub prices: PriceSection,
    #[serde(default)]
    pub covariates: CovariateSection,
    pub policy: PolicySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkName {
    Identity,
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseName {
    Gaussian,
    Bernoulli,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenName {
    /// `beta ~ U((1/sqrt d)[1,2]^d)`, `gamma ~ -U((1/sqrt d)[0,1]^d)`.
    Uniform,
}

/// How one half of `theta*` is produced for each trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamGen {
    Named(GenName),
    /// Pinned values, identical in every trial.
    Values(Vec<f64>),
}

impl Default for ParamGen {
    fn default() -> Self {
        ParamGen::Named(GenName::Uniform)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    #[serde(default = "default_link")]
    pub link: LinkName,
    #[serde(default = "default_noise")]
    pub noise: NoiseName,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Defaults to the shock's own sub-Gaussian proxy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_bar: Option<f64>,
    #[serde(default = "default_theta_bar")]
    pub theta_bar: f64,
    #[serde(default)]
    pub beta_gen: ParamGen,
    #[serde(default)]
    pub gamma_gen: ParamGen,
}

fn default_link() -> LinkName {
    LinkName::Identity
}
fn default_noise() -> NoiseName {
    NoiseName::Gaussian
}
fn default_sigma() -> f64 {
    0.25
}
fn default_theta_bar() -> f64 {
    3.0
}

impl Default for DemandSection {
    fn default() -> Self {
        Self {
            link: default_link(),
            noise: default_noise(),
            sigma: default_sigma(),
            sigma_bar: None,
            theta_bar: default_theta_bar(),
            beta_gen: ParamGen::default(),
            gamma_gen: ParamGen::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSection {
    pub min: f64,
    pub max: f64,
}

impl Default for PriceSection {
    fn default() -> Self {
        Self { min: 0.1, max: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateModeName {
    Iid,
    Phased,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSection {
    #[serde(default = "default_cov_mode")]
    pub mode: CovariateModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub normalize: bool,
    /// Defaults to `1 / sqrt(d)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

fn default_cov_mode() -> CovariateModeName {
    CovariateModeName::Iid
}

impl Default for CovariateSection {
    fn default() -> Self {
        Self {
            mode: CovariateModeName::Iid,
            phases: None,
            blocks: None,
            file: None,
            normalize: false,
            scale: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Ucb,
    UcbApprox,
    Ts,
    TsApprox,
    Ce,
    Cils,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusModeName {
    Corollary1,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Newton,
    Gradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyName,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    /// CILS perturbation size; defaults to `d / 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default = "default_radius_mode")]
    pub radius_mode: RadiusModeName,
    /// Bound on the squared M-norm in `fixed` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_value: Option<f64>,
    #[serde(default = "default_radius_mode")]
    pub ts_scale_mode: RadiusModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts_scale_value: Option<f64>,
    #[serde(default = "default_refit")]
    pub refit_every: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_solver")]
    pub solver: SolverName,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_lambda() -> f64 {
    1.0
}
fn default_k() -> usize {
    100
}
fn default_radius_mode() -> RadiusModeName {
    RadiusModeName::Corollary1
}
fn default_refit() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_solver() -> SolverName {
    SolverName::Newton
}
fn default_max_iter() -> usize {
    10_000
}

impl PolicySection {
    pub fn new(kind: PolicyName) -> Self {
        Self {
            kind,
            lambda: default_lambda(),
            k: default_k(),
            kappa: None,
            radius_mode: default_radius_mode(),
            radius_value: None,
            ts_scale_mode: default_radius_mode(),
            ts_scale_value: None,
            refit_every: default_refit(),
            tol: default_tol(),
            solver: default_solver(),
            max_iter: default_max_iter(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    /// Defaults matching the i.i.d. experiment for the given policy.
    pub fn new(d: usize, horizon: usize, trials: usize, seed: u64, kind: PolicyName) -> Self {
        Self {
            experiment: ExperimentSection {
                d,
                horizon,
                trials,
                seed,
            },
            demand: DemandSection::default(),
            prices: PriceSection::default(),
            covariates: CovariateSection::default(),
            policy: PolicySection::new(kind),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative covariate file path is resolved
    /// against the config's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(file) = cfg.covariates.file.as_mut() {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    *file = dir.join(&*file);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if e.horizon == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        if e.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        let dm = &self.demand;
        if !(dm.sigma >= 0.0 && dm.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be nonnegative"));
        }
        positive("theta_bar", dm.theta_bar)?;
        if let Some(s) = dm.sigma_bar {
            positive("sigma_bar", s)?;
            if s < self.shock().subgaussian_proxy() {
                return Err(Error::invalid(
                    "sigma_bar",
                    format!("below the shock's sub-Gaussian proxy {}", self.shock().subgaussian_proxy()),
                ));
            }
        }
        match (dm.link, dm.noise) {
            (LinkName::Logistic, NoiseName::Bernoulli) | (LinkName::Identity, NoiseName::Gaussian | NoiseName::Uniform) => {}
            (LinkName::Logistic, _) => {
                return Err(Error::invalid("noise", "the logistic link needs bernoulli demand"))
            }
            (LinkName::Identity, NoiseName::Bernoulli) => {
                return Err(Error::invalid("noise", "bernoulli demand needs the logistic link"))
            }
        }
        for (field, gen) in [("beta_gen", &dm.beta_gen), ("gamma_gen", &dm.gamma_gen)] {
            if let ParamGen::Values(v) = gen {
                if v.len() != e.d {
                    return Err(Error::invalid(field, format!("expected {} values, got {}", e.d, v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::invalid(field, "values must be finite"));
                }
            }
        }
        // the largest norm the generator can produce must fit in the ball
        let worst = |gen: &ParamGen, hi: f64| match gen {
            ParamGen::Named(GenName::Uniform) => hi * hi,
            ParamGen::Values(v) => v.iter().map(|x| x * x).sum(),
        };
        let worst_norm = (worst(&dm.beta_gen, 2.0) + worst(&dm.gamma_gen, 1.0)).sqrt();
        if worst_norm > dm.theta_bar {
            return Err(Error::invalid(
                "theta_bar",
                format!("{} does not cover parameters of norm up to {worst_norm:.4}", dm.theta_bar),
            ));
        }
        PriceRange::new(self.prices.min, self.prices.max)
            .map_err(|_| Error::invalid("prices", format!("need 0 < min < max, got [{}, {}]", self.prices.min, self.prices.max)))?;
        let c = &self.covariates;
        if let Some(s) = c.scale {
            positive("scale", s)?;
        }
        match c.mode {
            CovariateModeName::Phased if c.phases.is_none() => {
                return Err(Error::invalid("phases", "required when mode = \"phased\""))
            }
            CovariateModeName::File if c.file.is_none() => {
                return Err(Error::invalid("file", "required when mode = \"file\""))
            }
            _ => {}
        }
        self.covariate_spec().validate().map_err(|err| match err {
            Error::Invalid { field, message } => Error::Invalid {
                field: field.trim_start_matches("covariates.").to_string(),
                message,
            },
            other => other,
        })?;
        let p = &self.policy;
        positive("lambda", p.lambda)?;
        positive("tol", p.tol)?;
        if p.k == 0 {
            return Err(Error::invalid("K", "must be at least 1"));
        }
        if p.refit_every == 0 {
            return Err(Error::invalid("refit_every", "must be at least 1"));
        }
        if p.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        if let Some(k) = p.kappa {
            positive("kappa", k)?;
        }
        if p.radius_mode == RadiusModeName::Fixed {
            positive("radius_value", p.radius_value.ok_or_else(|| Error::invalid("radius_value", "required when radius_mode = \"fixed\""))?)?;
        }
        if p.ts_scale_mode == RadiusModeName::Fixed {
            positive("ts_scale_value", p.ts_scale_value.ok_or_else(|| Error::invalid("ts_scale_value", "required when ts_scale_mode = \"fixed\""))?)?;
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.experiment.d
    }

    pub fn horizon(&self) -> usize {
        self.experiment.horizon
    }

    pub fn trials(&self) -> usize {
        self.experiment.trials
    }

    pub fn link(&self) -> LinkFunction {
        match self.demand.link {
            LinkName::Identity => LinkFunction::identity(),
            LinkName::Logistic => LinkFunction::logistic(self.demand.theta_bar),
        }
    }

    pub fn shock(&self) -> ShockSpec {
        match self.demand.noise {
            NoiseName::Gaussian => ShockSpec::Gaussian { sigma: self.demand.sigma },
            NoiseName::Uniform => ShockSpec::BoundedUniform { sigma: self.demand.sigma },
            NoiseName::Bernoulli => ShockSpec::Bernoulli,
        }
    }

    /// Sub-Gaussian constant handed to the estimator. Never zero, so that
    /// noiseless runs still get a nondegenerate radius.
    pub fn sigma_bar(&self) -> f64 {
        self.demand
            .sigma_bar
            .unwrap_or_else(|| self.shock().subgaussian_proxy())
            .max(f64::MIN_POSITIVE)
    }

    pub fn price_range(&self) -> PriceRange {
        PriceRange {
            min: self.prices.min,
            max: self.prices.max,
        }
    }

    pub fn covariate_spec(&self) -> CovariateStreamSpec {
        let d = self.d();
        let c = &self.covariates;
        let mode = match c.mode {
            CovariateModeName::Iid => CovariateMode::Iid,
            CovariateModeName::Phased => {
                let phases = c.phases.unwrap_or(2);
                CovariateMode::Phased {
                    phases,
                    blocks: c.blocks.unwrap_or_else(|| default_blocks(phases)),
                }
            }
            CovariateModeName::File => CovariateMode::File {
                path: c.file.clone().unwrap_or_default(),
            },
        };
        CovariateStreamSpec {
            mode,
            d,
            normalize: c.normalize,
            scale: c.scale.unwrap_or(1.0 / (d as f64).sqrt()),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.policy.tol,
            max_iter: self.policy.max_iter,
            method: match self.policy.solver {
                SolverName::Newton => AscentMethod::ProjectedNewton,
                SolverName::Gradient => AscentMethod::ProjectedGradient,
            },
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            lambda: self.policy.lambda,
            theta_bar: self.demand.theta_bar,
            sigma_bar: self.sigma_bar(),
            horizon: self.horizon(),
            solver: self.solver_options(),
        }
    }

    pub fn policy_settings(&self) -> PolicySettings {
        let p = &self.policy;
        PolicySettings {
            radius_mode: match p.radius_mode {
                RadiusModeName::Corollary1 => RadiusMode::Corollary1,
                RadiusModeName::Fixed => RadiusMode::Fixed(p.radius_value.unwrap_or(1.0)),
            },
            ts_scale_mode: match p.ts_scale_mode {
                RadiusModeName::Corollary1 => ScaleMode::Corollary1,
                RadiusModeName::Fixed => ScaleMode::Fixed(p.ts_scale_value.unwrap_or(1.0)),
            },
            refit_every: p.refit_every,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.policy.kappa.unwrap_or(self.d() as f64 / 10.0)
    }

    /// The policy for one trial; CE and the oracle read the trial's `theta*`.
    pub fn policy_kind(&self, theta_star: &ParamVector) -> PolicyKind {
        let k = self.policy.k;
        match self.policy.kind {
            PolicyName::Ucb => PolicyKind::Ucb { k },
            PolicyName::UcbApprox => PolicyKind::UcbApprox { k },
            PolicyName::Ts => PolicyKind::Ts,
            PolicyName::TsApprox => PolicyKind::TsApprox,
            PolicyName::Ce => PolicyKind::Ce {
                gamma: theta_star.gamma().to_vec(),
            },
            PolicyName::Cils => PolicyKind::Cils { kappa: self.kappa() },
            PolicyName::Oracle => PolicyKind::Oracle {
                theta: theta_star.as_vector().clone(),
            },
        }
    }

    /// Draws `theta*` for one trial. Pinned halves consume no randomness.
    pub fn draw_theta_star<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParamVector> {
        let d = self.d();
        let s = 1.0 / (d as f64).sqrt();
        let beta = match &self.demand.beta_gen {
            ParamGen::Values(v) => v.clone(),
            ParamGen::Named(GenName::Uniform) => (0..d).map(|_| s * (1.0 + rng.random::<f64>())).collect(),
        };
        let gamma = match &self.demand.gamma_gen {
            ParamGen::Values(v) => v.clone(),
            ParamGen::Named(GenName::Uniform) => (0..d).map(|_| -s * rng.random::<f64>()).collect(),
        };
        ParamVector::new(&beta, &gamma, self.demand.theta_bar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SAMPLE: &str = r#"
[experiment]
d = 6
T = 1500
trials = 100
seed = 7

[demand]
link = "identity"
noise = "gaussian"
sigma = 0.25

[prices]
min = 0.1
max = 5.0

[covariates]
mode = "phased"
phases = 2

[policy]
kind = "ucb"
lambda = 1.0
K = 100
radius_mode = "fixed"
radius_value = 0.6
"#;

    fn field_of(err: Error) -> String {
        match err {
            Error::Invalid { field, .. } => field,
            other => panic!("expected a field error, got {other}"),
        }
    }

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.horizon(), 1500);
        assert_eq!(cfg.policy.k, 100);
        assert_eq!(cfg.policy_settings().radius_mode, RadiusMode::Fixed(0.6));
        assert_eq!(
            cfg.covariate_spec().mode,
            CovariateMode::Phased { phases: 2, blocks: 2 }
        );
        assert_eq!(cfg.kappa(), 0.6);
        assert_eq!(cfg.sigma_bar(), 0.25);
    }

    #[test]
    fn zero_horizon_names_t() {
        let text = SAMPLE.replace("T = 1500", "T = 0");
        assert_eq!(field_of(ExperimentConfig::from_toml_str(&text).unwrap_err()), "T");
    }

    #[test]
    fn field_errors() {
        let cases = [
            ("trials = 100", "trials = 0", "trials"),
            ("lambda = 1.0", "lambda = 0.0", "lambda"),
            ("radius_value = 0.6", "radius_value = -1.0", "radius_value"),
            ("phases = 2", "phases = 1", "phases"),
            ("max = 5.0", "max = 0.05", "prices"),
            ("sigma = 0.25", "sigma = 0.25\nsigma_bar = 0.1", "sigma_bar"),
            ("noise = \"gaussian\"", "noise = \"bernoulli\"", "noise"),
        ];
        for (from, to, field) in cases {
            let text = SAMPLE.replace(from, to);
            assert_eq!(field_of(ExperimentConfig::from_toml_str(&text).unwrap_err()), field, "{to}");
        }
    }

    #[test]
    fn syntax_and_unknown_keys_are_config_errors() {
        let err = ExperimentConfig::from_toml_str("[experiment]\nd = \n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("line")), "{err}");
        let err = ExperimentConfig::from_toml_str(&SAMPLE.replace("K = 100", "K = 100\nbogus = 1")).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("bogus")), "{err}");
    }

    #[test]
    fn json_and_toml_round_trip() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.demand.beta_gen = ParamGen::Values(vec![0.5; 6]);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        let toml_text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&toml_text).unwrap(), cfg);
    }

    #[test]
    fn theta_star_generation_ranges() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = 1.0 / 6f64.sqrt();
        for _ in 0..200 {
            let th = cfg.draw_theta_star(&mut rng).unwrap();
            assert!(th.beta().iter().all(|&b| (s..=2.0 * s).contains(&b)));
            assert!(th.gamma().iter().all(|&g| (-s..=0.0).contains(&g)));
        }
    }

    #[test]
    fn pinned_theta_star_is_reused() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.demand.beta_gen = ParamGen::Values(vec![0.5; 6]);
        cfg.demand.gamma_gen = ParamGen::Values(vec![-0.2; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = cfg.draw_theta_star(&mut rng).unwrap();
        let b = cfg.draw_theta_star(&mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.beta(), &[0.5; 6]);
    }

    #[test]
    fn explicit_values_parse_from_toml() {
        let text = SAMPLE.replace(
            "sigma = 0.25",
            "sigma = 0.25\nbeta_gen = [1, 1, 1, 1, 1, 1]\ngamma_gen = \"uniform\"",
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg.demand.beta_gen, ParamGen::Values(vec![1.0; 6]));
        let short = SAMPLE.replace("sigma = 0.25", "sigma = 0.25\nbeta_gen = [1.0]");
        assert_eq!(field_of(ExperimentConfig::from_toml_str(&short).unwrap_err()), "beta_gen");
    }
}

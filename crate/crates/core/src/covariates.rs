//! Covariate streams: i.i.d., phased (block-activated), and file-backed
//! sequences, plus the feature map `z = (x, p x)`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CovariateMode {
    Iid,
    /// The horizon is cut into `phases` equal phases; phase `m` activates
    /// block `(m - 1) mod blocks` of the coordinates.
    Phased { phases: usize, blocks: usize },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateStreamSpec {
    #[serde(flatten)]
    pub mode: CovariateMode,
    pub d: usize,
    /// Rescale each `x_t` so that `||(x, p x)|| <= 1` for every admissible price.
    pub normalize: bool,
    /// Active entries are uniform on `[0, scale]`.
    pub scale: f64,
}

impl CovariateStreamSpec {
    pub fn iid(d: usize) -> Self {
        Self {
            mode: CovariateMode::Iid,
            d,
            normalize: false,
            scale: 1.0 / (d as f64).sqrt(),
        }
    }

    /// Two phases use two blocks; six phases cycle through three blocks.
    pub fn phased(d: usize, phases: usize) -> Self {
        Self {
            mode: CovariateMode::Phased {
                phases,
                blocks: default_blocks(phases),
            },
            ..Self::iid(d)
        }
    }

    pub fn file(d: usize, path: impl Into<PathBuf>) -> Self {
        Self {
            mode: CovariateMode::File { path: path.into() },
            ..Self::iid(d)
        }
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid("covariates.scale", "must be positive"));
        }
        if let CovariateMode::Phased { phases, blocks } = self.mode {
            if phases < 2 {
                return Err(Error::invalid("covariates.phases", "need at least 2 phases"));
            }
            if blocks == 0 || blocks > self.d {
                return Err(Error::invalid(
                    "covariates.blocks",
                    format!("must be in 1..={}", self.d),
                ));
            }
        }
        Ok(())
    }
}

pub fn default_blocks(phases: usize) -> usize {
    if phases % 3 == 0 && phases > 3 {
        3
    } else if phases % 2 == 0 && phases > 2 {
        phases / 2
    } else {
        phases
    }
}

/// 1-based phase of period `t`: phase `k` ends at `floor(k T / n)`.
pub fn phase_of(t: usize, horizon: usize, phases: usize) -> usize {
    ((t * phases).div_ceil(horizon)).clamp(1, phases)
}

/// Coordinate range of block `b` when `d` entries are split into `blocks`
/// contiguous groups, earlier groups taking the remainder.
pub fn block_range(d: usize, blocks: usize, b: usize) -> std::ops::Range<usize> {
    let base = d / blocks;
    let extra = d % blocks;
    let start = b * base + b.min(extra);
    let len = base + usize::from(b < extra);
    start..start + len
}

/// Raw covariate for period `t` (1-based) of a generated stream.
///
/// File streams have no generator; use [`CovariateStream`] for them.
pub fn next_covariate<R: Rng + ?Sized>(
    spec: &CovariateStreamSpec,
    t: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = spec.d;
    let mut x = vec![0.0; d];
    let active = match spec.mode {
        CovariateMode::Iid => 0..d,
        CovariateMode::Phased { phases, blocks } => {
            let phase = phase_of(t, horizon, phases);
            block_range(d, blocks, (phase - 1) % blocks)
        }
        CovariateMode::File { ref path } => {
            return Err(Error::CovariateFile {
                path: path.display().to_string(),
                message: "file streams must be loaded, not generated".into(),
            })
        }
    };
    for xi in &mut x[active] {
        *xi = spec.scale * rng.random::<f64>();
    }
    Ok(x)
}

/// Scales `x` to norm `1 / sqrt(1 + p_max^2)`, so `||(x, p x)|| <= 1` for `p <= p_max`.
pub fn feature_normalize(x: &mut [f64], p_max: f64) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        let s = 1.0 / (n * (1.0 + p_max * p_max).sqrt());
        x.iter_mut().for_each(|v| *v *= s);
    }
}

/// A covariate source bound to a horizon; loads file rows up front.
#[derive(Clone, Debug)]
pub struct CovariateStream {
    spec: CovariateStreamSpec,
    horizon: usize,
    rows: Option<Vec<Vec<f64>>>,
}

impl CovariateStream {
    pub fn new(spec: CovariateStreamSpec, horizon: usize) -> Result<Self> {
        spec.validate()?;
        let rows = match &spec.mode {
            CovariateMode::File { path } => Some(load_covariates(path, spec.d, horizon, false)?),
            _ => None,
        };
        Ok(Self { spec, horizon, rows })
    }

    pub fn spec(&self) -> &CovariateStreamSpec {
        &self.spec
    }

    /// Full sequence `x_1..x_T`, normalized when the spec asks for it.
    pub fn sequence<R: Rng + ?Sized>(&self, p_max: f64, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(self.horizon);
        for t in 1..=self.horizon {
            let mut x = match &self.rows {
                Some(rows) => rows[t - 1].clone(),
                None => next_covariate(&self.spec, t, self.horizon, rng)?,
            };
            if self.spec.normalize {
                feature_normalize(&mut x, p_max);
            }
            out.push(x);
        }
        Ok(out)
    }
}

/// `z = (x, p x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub DVector<f64>);

impl FeatureVector {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

pub fn make_feature(x: &[f64], p: f64) -> FeatureVector {
    let d = x.len();
    FeatureVector(DVector::from_fn(2 * d, |i, _| if i < d { x[i] } else { p * x[i - d] }))
}

/// Reads `horizon` rows of `d` comma-separated numbers. Extra rows are ignored.
/// With `normalize`, every nonzero row is scaled to unit Euclidean norm.
pub fn load_covariates(path: &Path, d: usize, horizon: usize, normalize: bool) -> Result<Vec<Vec<f64>>> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::CovariateFile {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    let mut rows = Vec::with_capacity(horizon);
    for (i, line) in text.lines().enumerate() {
        if rows.len() == horizon {
            break;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d {
            return Err(Error::CovariateParse {
                path: shown,
                row: i + 1,
                column: fields.len().min(d) + 1,
                message: format!("expected {d} fields, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(d);
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::CovariateParse {
                path: shown.clone(),
                row: i + 1,
                column: j + 1,
                message: format!("not a number: {f:?}"),
            })?;
            row.push(v);
        }
        if normalize {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                row.iter_mut().for_each(|v| *v /= n);
            }
        }
        rows.push(row);
    }
    if rows.len() < horizon {
        return Err(Error::InsufficientRows {
            needed: horizon,
            found: rows.len(),
        });
    }
    Ok(rows)
}

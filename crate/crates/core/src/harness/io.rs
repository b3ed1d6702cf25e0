//! On-disk formats: per-trial ledger CSV, aggregate JSON, and two-column plot data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{aggregate_curves, AggregateResult, CurvePoint};
use super::trial::TrialResult;
use crate::error::{Error, Result};

pub const LEDGER_HEADER: [&str; 8] = [
    "trial",
    "t",
    "price",
    "demand",
    "oracle_revenue",
    "expected_revenue",
    "inst_regret",
    "cum_regret",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerCsvRow {
    pub trial: usize,
    pub t: usize,
    pub price: f64,
    pub demand: f64,
    pub oracle_revenue: f64,
    pub expected_revenue: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

pub fn write_ledger_csv(path: &Path, result: &TrialResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in &result.ledger {
        w.serialize(LedgerCsvRow {
            trial: result.trial,
            t: r.t,
            price: r.price,
            demand: r.demand,
            oracle_revenue: r.oracle_revenue,
            expected_revenue: r.expected_revenue,
            inst_regret: r.inst_regret,
            cum_regret: r.cum_regret,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Summary checks attached to every aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAudits {
    pub final_mean_cum_regret: f64,
    pub final_stderr: f64,
    /// Largest `|cum_regret(T) - sum(oracle - expected)|` over trials.
    pub max_accounting_residual: f64,
    pub min_inst_regret: f64,
}

impl RunAudits {
    pub fn of(agg: &AggregateResult) -> Self {
        let trials = &agg.trials;
        Self {
            final_mean_cum_regret: agg.final_mean(),
            final_stderr: agg.final_stderr(),
            max_accounting_residual: trials.iter().map(TrialResult::accounting_residual).fold(0.0, f64::max),
            min_inst_regret: trials
                .iter()
                .flat_map(|t| t.ledger.iter().map(|r| r.inst_regret))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config_echo: ExperimentConfig,
    pub per_t: Vec<CurvePoint>,
    pub audits: serde_json::Value,
}

impl AggregateReport {
    pub fn new(config: &ExperimentConfig, agg: &AggregateResult) -> Result<Self> {
        Ok(Self {
            config_echo: config.clone(),
            per_t: agg.per_t.clone(),
            audits: serde_json::to_value(RunAudits::of(agg))?,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<AggregateReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        row: e.line(),
        message: e.to_string(),
    })
}

/// Mean `cum_regret` per `t` over all trials in one or more ledger files.
pub fn read_ledger_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let shown = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut curves: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (i, rec) in rdr.deserialize::<LedgerCsvRow>().enumerate() {
        // header is row 1
        let row = rec.map_err(|e| Error::Parse {
            path: shown.clone(),
            row: i + 2,
            message: e.to_string(),
        })?;
        let curve = curves.entry(row.trial).or_default();
        if row.t != curve.len() + 1 {
            return Err(Error::Parse {
                path: shown,
                row: i + 2,
                message: format!("trial {} jumps to t = {} after {} rows", row.trial, row.t, curve.len()),
            });
        }
        curve.push(row.cum_regret);
    }
    let curves: Vec<Vec<f64>> = curves.into_values().collect();
    Ok(aggregate_curves(&curves))
}

/// Writes `t mean_cum_regret` lines. Input is an aggregate JSON (by
/// extension) or a ledger CSV.
pub fn plot_data(input: &Path, output: &Path) -> Result<usize> {
    let points = if input.extension().is_some_and(|e| e == "json") {
        read_aggregate(input)?.per_t
    } else {
        read_ledger_curve(input)?
    };
    if points.is_empty() {
        return Err(Error::Parse {
            path: input.display().to_string(),
            row: 1,
            message: "no data rows".into(),
        });
    }
    let mut out = std::io::BufWriter::new(fs::File::create(output)?);
    for p in &points {
        writeln!(out, "{} {}", p.t, p.mean_cum_regret)?;
    }
    out.flush()?;
    Ok(points.len())
}

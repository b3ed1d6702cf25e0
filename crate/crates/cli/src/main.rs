use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pricing_core::harness::config::{ExperimentConfig, PolicyName};
use pricing_core::harness::io::{plot_data, write_json, write_ledger_csv, AggregateReport};
use pricing_core::harness::{coverage_audit, potential_audit, run_experiment, run_trial_audited, AuditOptions, AuditRow};
use pricing_core::Error;

#[derive(Parser)]
#[command(name = "dynprice", version, about = "Dynamic pricing with covariates: experiments, audits and plot data")]
struct Cli {
    /// Worker threads for trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of an experiment and write ledgers plus an aggregate.
    Run {
        config: PathBuf,
        out_dir: PathBuf,
        /// Override `[experiment] trials`.
        #[arg(long)]
        trials: Option<usize>,
        /// Override `[policy] kind`.
        #[arg(long, value_enum)]
        policy: Option<Policy>,
    },
    /// Check a bound empirically.
    Audit {
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: AuditKind,
        out_dir: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        /// Scale applied to the confidence radius in coverage audits.
        #[arg(long, default_value_t = 1.0)]
        radius_multiplier: f64,
    },
    /// Convert an aggregate JSON or a ledger CSV into `t mean_cum_regret` lines.
    PlotData { input: PathBuf, out: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    Coverage,
    Potential,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Ucb,
    UcbApprox,
    Ts,
    TsApprox,
    Ce,
    Cils,
    Oracle,
}

impl From<Policy> for PolicyName {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Ucb => PolicyName::Ucb,
            Policy::UcbApprox => PolicyName::UcbApprox,
            Policy::Ts => PolicyName::Ts,
            Policy::TsApprox => PolicyName::TsApprox,
            Policy::Ce => PolicyName::Ce,
            Policy::Cils => PolicyName::Cils,
            Policy::Oracle => PolicyName::Oracle,
        }
    }
}

/// A config problem: exit status 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn load_config(path: &Path, trials: Option<usize>, policy: Option<Policy>) -> Result<ExperimentConfig> {
    if !path.is_file() {
        return Err(ConfigError(format!("config file {} not found", path.display())).into());
    }
    let mut cfg = ExperimentConfig::from_path(path).map_err(|e| match e {
        Error::Invalid { field, message } => ConfigError(format!("{}: field `{field}`: {message}", path.display())),
        other => ConfigError(other.to_string()),
    })?;
    if let Some(n) = trials {
        if n == 0 {
            return Err(ConfigError("--trials: must be at least 1".into()).into());
        }
        cfg.experiment.trials = n;
    }
    if let Some(p) = policy {
        cfg.policy.kind = p.into();
    }
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(cfg)
}

/// `out_dir/<config stem>`, created if missing.
fn run_dir(out_dir: &Path, config: &Path) -> Result<PathBuf> {
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    let dir = out_dir.join(stem);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn cmd_run(config: &Path, out_dir: &Path, trials: Option<usize>, policy: Option<Policy>, jobs: Option<usize>) -> Result<()> {
    let cfg = load_config(config, trials, policy)?;
    let dir = run_dir(out_dir, config)?;
    let agg = run_experiment(&cfg, jobs)?;
    let width = (cfg.trials() - 1).to_string().len().max(3);
    for t in &agg.trials {
        let path = dir.join(format!("trial_{:0width$}.csv", t.trial));
        write_ledger_csv(&path, t).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = AggregateReport::new(&cfg, &agg)?;
    write_json(&dir.join("aggregate.json"), &report)?;
    println!(
        "{}: {} trials, T = {}, final mean cumulative regret {:.6} (stderr {:.6})",
        dir.display(),
        cfg.trials(),
        cfg.horizon(),
        agg.final_mean(),
        agg.final_stderr()
    );
    Ok(())
}

#[derive(Serialize)]
struct AuditReport<T: Serialize> {
    config_echo: ExperimentConfig,
    kind: &'static str,
    summary: T,
    /// Estimator trajectory of trial 0.
    trace: Vec<AuditRow>,
}

fn cmd_audit(config: &Path, kind: AuditKind, out_dir: &Path, trials: Option<usize>, mult: f64, jobs: Option<usize>) -> Result<()> {
    let cfg = load_config(config, trials, None)?;
    let dir = run_dir(out_dir, config)?;
    let (_, trace) = run_trial_audited(
        &cfg,
        0,
        AuditOptions {
            radius_multiplier: mult,
            features: false,
        },
    )?;
    match kind {
        AuditKind::Coverage => {
            let rep = coverage_audit(&cfg, mult, jobs)?;
            println!(
                "coverage: theta* inside the confidence set at every t in {:.4} of {} trials",
                rep.fraction,
                rep.covered.len()
            );
            let path = dir.join("audit_coverage.json");
            write_json(&path, &AuditReport { config_echo: cfg, kind: "coverage", summary: rep, trace: trace.rows })?;
        }
        AuditKind::Potential => {
            let reps = potential_audit(&cfg, jobs)?;
            let bad = reps.iter().filter(|r| !r.ok).count();
            let worst = reps.iter().map(|r| r.lhs / r.bound).fold(0.0, f64::max);
            println!(
                "potential: {} of {} trials within the bound, max lhs/bound {worst:.4}",
                reps.len() - bad,
                reps.len()
            );
            let path = dir.join("audit_potential.json");
            write_json(&path, &AuditReport { config_echo: cfg, kind: "potential", summary: reps, trace: trace.rows })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = cli.jobs;
    if jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { config, out_dir, trials, policy } => cmd_run(&config, &out_dir, trials, policy, jobs),
        Command::Audit { config, kind, out_dir, trials, radius_multiplier } => {
            cmd_audit(&config, kind, &out_dir, trials, radius_multiplier, jobs)
        }
        Command::PlotData { input, out } => plot_data(&input, &out)
            .map(|n| println!("wrote {n} rows to {}", out.display()))
            .map_err(Into::into),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ConfigError>() => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

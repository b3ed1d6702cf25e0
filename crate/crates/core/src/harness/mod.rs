//! Trial orchestration, regret accounting against the clairvoyant price,
//! aggregation over trials, and bound audits.

pub mod config;
mod experiment;
pub mod io;
mod trial;

pub use config::ExperimentConfig;
pub use experiment::{
    aggregate_curves, coverage_audit, map_trials, potential_audit, potential_audit_trial, run_experiment,
    AggregateResult, CoverageReport, CurvePoint,
};
pub use trial::{
    run_trial, run_trial_audited, stream_rng, trial_seed, AuditOptions, AuditRow, AuditTrace, LedgerRow, Stream,
    TrialResult,
};

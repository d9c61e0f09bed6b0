//! Monte Carlo experiments: spec files in, result tables out.

mod run;
mod spec;
mod table;

pub use run::{
    broadcast_designs, eve_mean_sinr, jamming_for, run_experiment, run_trial, trial_rng, Sample,
};
pub use spec::{ExperimentId, ExperimentSpec, SweepVariable};
pub use table::{ResultRow, ResultTable, TrialFailure};

//! Scenarios, references, sampled uncertainty, closed loops, Monte-Carlo
//! batches and their metrics.

mod closed_loop;
mod metrics;
mod monte_carlo;
pub mod output;
mod references;
mod scenario;
mod uncertainty;

use std::path::PathBuf;

use thiserror::Error;

use crate::controllers::ControllerError;
use crate::integrator::IntegratorError;

pub use closed_loop::{
    plant_initial_state, run_closed_loop, run_controller, schedule_with_input, ControlRecord, PlantModel,
    RunFailure, RunResult,
};
pub use metrics::{compute_metrics, s2_series, CentralPath, MetricsContext, MetricsReport, RunSeries};
pub use monte_carlo::{
    monte_carlo, run_metrics, wy_sweep_specs, ControllerSpec, MonteCarloResult, SpecResult, WY_SWEEP,
};
pub use references::{
    build_references, default_guess, diet_schedule, equilibrium, DietPhase, DietPlan, Equilibrium, FeedingConfig,
    FeedingMode, References,
};
pub use scenario::{
    ControllerConfig, InputBounds, OutputConfig, PiConfig, PiTuning, PlantStart, Scenario, ScenarioContext, SolverConfig,
    StateBounds, TimingConfig, WeightsConfig,
};
pub use uncertainty::{
    apply_noise, derive_seed, knockdown_profile, noise_seed, sample_kinetics, sample_knockdown, KnockdownConfig,
    KnockdownWindow, Realization, UncertaintyConfig, TRUNCATION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot parse {0}")]
    Parse(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Simulation(#[from] IntegratorError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("controller output {input} at step {step} leaves the input set (previous {previous})")]
    ConstraintViolation { step: usize, input: f64, previous: f64 },
}

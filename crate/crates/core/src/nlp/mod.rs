//! Multiple-shooting transcription and a constrained NLP solver.

mod kkt;
mod log;
mod problem;
mod solver;
mod transcribe;

pub use kkt::{kkt_parts, kkt_residual, lagrangian_gradient, KktParts, Multipliers};
pub use log::write_iteration_log;
pub use problem::{ClosureNlp, EvalError, LinearRow, NlpFunctions, NlpProblem, VarBlock};
pub use solver::{solve, IterRecord, NlpSolution, SolveStatus, SolverOptions};
pub use transcribe::{
    transcribe, CostSpec, InitialStateDof, OcpSpec, ShootingNlp, SlackConfig, TranscribeError,
    DecodedSolution, Transcription, TubeTarget,
};

//! Tube-based robust NMPC for anaerobic co-digestion.
//!
//! * [`model`]: reduced-order digester dynamics and measurement map.
//! * [`integrator`]: fixed-step RK4 with forward sensitivities.
//! * [`nlp`]: multiple-shooting transcription and an interior-point solver.
//! * [`controllers`]: classical, offline-tube and online-tube NMPC, override-PI.
//! * [`harness`]: references, uncertainty, closed loops, Monte-Carlo metrics.
//! * [`parallel`]: ordered map over runs, rayon-backed under the `parallel` feature.

pub mod controllers;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod nlp;
pub mod parallel;

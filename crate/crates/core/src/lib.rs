//! Temporal stabilization of per-frame control sequences and related tooling.
//!
//! Face-video editing pipelines drive a parametric head model with one control
//! vector per frame (expression plus pose). Editing each frame independently
//! leaves high-frequency jitter on those controls, which shows up as flicker in
//! the rendered video. This crate implements the pieces needed to measure and
//! remove that jitter:
//!
//! * [`spline`] — Catmull–Rom interpolation of scalar time series, the
//!   building block of the stabilizer.
//! * [`stabilizer`] — ensemble smoothing: the sequence is split into `m`
//!   phase-shifted subsequences, one spline is fitted per subsequence and
//!   dimension, and per timestamp the closest-agreeing estimates are averaged
//!   while outliers are discarded.
//! * [`aggregator`] — multi-head cross-attention fusion of per-frame latent
//!   codes into a single code, with analytic gradients.
//! * [`metrics`] — optical-flow based temporal-coherence metric (`flv`),
//!   plus RMSE and a discrete roughness measure for control sequences.
//! * [`synth`] — seeded generators for synthetic trajectories and flow
//!   fields, used for benchmarks and tests.
//! * [`io`] — CSV / Middlebury `.flo` / JSON readers and writers.
//! * [`report`] — machine-readable run reports for the CLI.
//!
//! All numeric routines are pure functions of their inputs: no global state,
//! no hidden randomness (generators take explicit seeds), and deterministic
//! summation orders so results are reproducible bit for bit.

pub mod aggregator;
pub mod error;
pub mod io;
pub mod metrics;
pub mod report;
pub mod spline;
pub mod stabilizer;
pub mod synth;

pub use error::{Error, Result};
pub use spline::{CatmullRomSpline, KnotSeries};
pub use stabilizer::{ControlSequence, StabilizerConfig};

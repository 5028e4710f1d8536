//! Experiment orchestration: configuration, per-benchmark data and
//! scenarios, and the identify / predict / control / sweep runners.

pub mod benchmarks;
mod config;
mod fit;
mod runner;

pub use config::{
    Benchmark, DmdcOptions, DroneSetup, ExperimentConfig, ExternalSetup, F8Setup, LorenzSetup, Method, MpcOverrides,
    SchroederParams, WeakOptions,
};
pub use fit::{build_problem, fit_drone, fit_model, fit_sparse, FitOptions, FittedModel};
pub use runner::{
    derive_seed, run_control, run_identify, run_predict, run_sweep, sweep_points, write_manifest, write_timings,
    ControlOutput, ControlRow, IdentifyOutput, IdentifyRow, PredictOutput, PredictRow, RunOptions, SweepOutput,
    SweepPoint, Timing,
};

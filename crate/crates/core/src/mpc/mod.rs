//! Receding-horizon control on an identified (or exact) forward operator.

mod closed_loop;
mod config;
mod cost;
pub mod optimizer;
mod solve;

pub use closed_loop::{receding_horizon_run, ControlLog, PlantSetup};
pub use config::{MpcConfig, Obstacle, OutputBound};
pub use cost::{horizon_cost, input_cost, state_cost};
pub use solve::{enforce_rate_bounds, solve_mpc_step, MpcProblem, MpcSolution};

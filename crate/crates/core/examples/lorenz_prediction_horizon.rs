//! Prediction horizons of each method on the Lorenz validation window.
//!
//! cargo run --release --example lorenz_prediction_horizon -- [realizations]

use wsindy_mpc::experiment::{run_predict, ExperimentConfig, Method, RunOptions};

fn main() -> wsindy_mpc::Result<()> {
    let realizations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let cfg = ExperimentConfig {
        methods: vec![Method::Sindyc, Method::Wsindyc, Method::Dmdc],
        noise_levels: vec![0.0, 0.05, 0.25],
        realizations,
        ..Default::default()
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = run_predict(&cfg, &RunOptions { workers, ..Default::default() })?;
    println!("{:<10} {:>6} {:>8} {:>8} {:>8}", "method", "eta", "median", "q25", "q75");
    for s in &out.summary {
        println!("{:<10} {:>6} {:>8.3} {:>8.3} {:>8.3}", s.method, s.sweep_value, s.median, s.q25, s.q75);
    }
    Ok(())
}

//! Full sweep from a TOML config, as the CLI would run it.
//!
//! cargo run --release --example noise_sweep -- configs/f8.toml

use wsindy_mpc::experiment::{run_sweep, ExperimentConfig, RunOptions};

fn main() -> wsindy_mpc::Result<()> {
    let mut cfg = match std::env::args().nth(1) {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::from_toml_str("benchmark = \"f8\"\nmethods = [\"wsindyc\", \"sindyc\"]\nnoise_levels = [0.0, 0.05]\nrealizations = 2\n")?,
    };
    cfg.realizations = cfg.realizations.min(4);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = run_sweep(&cfg, &RunOptions { workers, ..Default::default() })?;
    if let Some(p) = &out.predict {
        for s in &p.summary {
            println!("horizon  {:<10} {:<6} median {:.3}", s.method, s.sweep_value, s.median);
        }
    }
    for s in &out.control.summary {
        println!("{:<14} {:<10} {:<6} median {:.4e}  success {:.2}", s.metric, s.method, s.sweep_value, s.median, s.success_rate);
    }
    Ok(())
}

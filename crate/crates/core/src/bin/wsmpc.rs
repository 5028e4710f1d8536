use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use wsindy_mpc::experiment::{
    run_control, run_identify, run_predict, run_sweep, write_manifest, write_timings, ExperimentConfig, RunOptions,
};
use wsindy_mpc::Result;

#[derive(Parser)]
#[command(name = "wsmpc", version, about = "Sparse identification and MPC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit models and write them with their fit reports.
    Identify(Common),
    /// Open-loop prediction horizons on the validation window.
    Predict(Common),
    /// Closed-loop MPC runs and metric summaries.
    Control(Common),
    /// Prediction followed by control.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the true plant as the MPC model.
    #[arg(long)]
    oracle: bool,
}

fn run(name: &str, c: &Common) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    let opts = RunOptions { workers: c.workers, oracle: c.oracle, out: Some(out.clone()) };
    info!("{name}: benchmark {}, {} realization(s), output in {}", cfg.benchmark.name(), cfg.realizations, out.display());
    let start = Instant::now();
    let timings = match name {
        "identify" => {
            let o = run_identify(&cfg, &opts)?;
            let failed = o.rows.iter().filter(|r| r.status != "ok").count();
            info!("{} fits, {failed} failed", o.rows.len());
            o.timings
        }
        "predict" => {
            let o = run_predict(&cfg, &opts)?;
            for s in &o.summary {
                info!("{} @ {}: median horizon {:.3}", s.method, s.sweep_value, s.median);
            }
            o.timings
        }
        "control" => run_control(&cfg, &opts)?.timings,
        _ => {
            let o = run_sweep(&cfg, &opts)?;
            let mut t = o.predict.map(|p| p.timings).unwrap_or_default();
            t.extend(o.control.timings);
            t
        }
    };
    write_timings(&out.join("timings.csv"), &timings)?;
    write_manifest(&out, &cfg, name, &opts, start.elapsed().as_secs_f64())?;
    info!("done in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Identify(c) => ("identify", c),
        Command::Predict(c) => ("predict", c),
        Command::Control(c) => ("control", c),
        Command::Sweep(c) => ("sweep", c),
    };
    match run(name, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}

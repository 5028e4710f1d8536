//! External-data path: write a simulator record to CSV, then identify and
//! control from the file alone.

use wsindy_mpc::experiment::{run_sweep, Benchmark, ExperimentConfig, Method, RunOptions};
use wsindy_mpc::plants::plasma::plasma_training_series_physical;

fn main() -> wsindy_mpc::Result<()> {
    let dir = std::env::temp_dir().join("wsmpc_plasma_example");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("plasma.csv");
    plasma_training_series_physical()?.save_csv(&csv)?;
    println!("wrote {}", csv.display());

    let mut cfg = ExperimentConfig {
        benchmark: Benchmark::External,
        methods: vec![Method::Sindyc, Method::Wsindyc],
        noise_levels: vec![0.0, 0.05],
        realizations: 3,
        stls_threshold: 1e-3,
        out_dir: dir.join("out"),
        ..Default::default()
    };
    cfg.external.csv = Some(csv);
    let out = run_sweep(&cfg, &RunOptions { out: Some(cfg.out_dir.clone()), ..Default::default() })?;
    for s in out.control.summary.iter().filter(|s| s.metric == "rel_error") {
        println!("{:<8} eta {:<5} median rel error {:.4}  success {:.2}", s.method, s.sweep_value, s.median, s.success_rate);
    }
    println!("tables in {}", cfg.out_dir.display());
    Ok(())
}

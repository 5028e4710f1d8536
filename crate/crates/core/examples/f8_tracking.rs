//! Angle-of-attack tracking on the F-8 with rate-limited tail deflection.

use wsindy_mpc::experiment::benchmarks::{state_names, BenchmarkData};
use wsindy_mpc::experiment::{run_control, Benchmark, ExperimentConfig, Method, RunOptions};
use wsindy_mpc::plants::f8_reference;

fn main() -> wsindy_mpc::Result<()> {
    let cfg = ExperimentConfig { benchmark: Benchmark::F8, ..Default::default() };
    let data = BenchmarkData::generate(&cfg)?;
    let model = wsindy_mpc::experiment::benchmarks::identify(&cfg, Method::Wsindyc, &data.train)?;
    println!("{}", model.symbolic(&state_names(Benchmark::F8, 3)));

    let out = run_control(&cfg, &RunOptions::default())?;
    let log = out.logs.values().next().expect("one run");
    for k in (0..log.len()).step_by(10) {
        println!("t = {:4.2}  alpha = {:7.4}  r = {:7.4}  u = {:7.4}", log.t[k], log.x[k][0], f8_reference(log.t[k]), log.u[k][0]);
    }
    for r in &out.rows {
        println!("{} = {}", r.metric, r.value);
    }
    Ok(())
}

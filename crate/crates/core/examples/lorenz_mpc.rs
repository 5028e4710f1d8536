//! Drive the Lorenz system to its negative-wing equilibrium with MPC on a
//! WSINDYc model, and on the true plant for comparison.

use wsindy_mpc::experiment::{run_control, ExperimentConfig, RunOptions};
use wsindy_mpc::plants::lorenz::lorenz_target;

fn main() -> wsindy_mpc::Result<()> {
    let cfg = ExperimentConfig::default();
    let target = lorenz_target();
    for oracle in [true, false] {
        let out = run_control(&cfg, &RunOptions { oracle, ..Default::default() })?;
        let (tag, log) = out.logs.iter().next().expect("one run");
        println!("== {tag}");
        for k in (0..log.len()).step_by(log.len() / 10) {
            let d: f64 = log.x[k].iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            println!("t = {:5.2}  u = {:8.3}  distance {d:8.4}", log.t[k], log.u[k][0]);
        }
        for r in &out.rows {
            println!("{} = {:.4}", r.metric, r.value);
        }
    }
    Ok(())
}

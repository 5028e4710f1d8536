//! Quadrotor circling past a spherical obstacle, with an identified model
//! inside the MPC and noisy state feedback.
//!
//! cargo run --release --example drone_obstacle_avoidance -- [noise level]

use wsindy_mpc::experiment::{run_control, Benchmark, ExperimentConfig, RunOptions};

fn main() -> wsindy_mpc::Result<()> {
    let eta: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let cfg = ExperimentConfig { benchmark: Benchmark::Drone, noise_levels: vec![eta], ..Default::default() };
    let out = run_control(&cfg, &RunOptions::default())?;
    let log = out.logs.values().next().expect("one run");
    let o = cfg.drone.obstacle_center;
    for k in (0..log.len()).step_by(log.len() / 12) {
        let p = &log.x[k][..3];
        let d = p.iter().zip(o).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("t = {:5.2}  p = ({:6.3}, {:6.3}, {:6.3})  |p - o| = {d:.3}", log.t[k], p[0], p[1], p[2]);
    }
    for r in &out.rows {
        println!("{} = {:.5}", r.metric, r.value);
    }
    Ok(())
}

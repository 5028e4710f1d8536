//! Fit DMDc to forced Lorenz data around the target equilibrium and roll it
//! out against the truth.

use wsindy_mpc::baselines::{dmdc_fit, dmdc_rollout};
use wsindy_mpc::experiment::benchmarks::BenchmarkData;
use wsindy_mpc::experiment::ExperimentConfig;
use wsindy_mpc::plants::lorenz::lorenz_target;

fn main() -> wsindy_mpc::Result<()> {
    let data = BenchmarkData::generate(&ExperimentConfig::default())?;
    let ts = &data.train;
    let model = dmdc_fit(ts, Some(&lorenz_target()), None)?;
    println!("rank {}\nA = {:.4}B = {:.4}", model.rank, model.a, model.bm);

    let steps = 200;
    let inputs: Vec<Vec<f64>> = (0..steps).map(|k| ts.input_row(k)).collect();
    let pred = dmdc_rollout(&model, &ts.state_row(0), &inputs)?;
    for k in (0..=steps).step_by(40) {
        let truth = ts.state_row(k);
        let err: f64 = truth.iter().zip(&pred[k]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("t = {:.3}  error {err:.4}", ts.times()[k]);
    }
    Ok(())
}

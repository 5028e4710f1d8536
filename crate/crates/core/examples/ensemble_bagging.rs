//! Compare a single weak fit against the bagged ensemble on noisy Lorenz data.

use wsindy_mpc::data::{add_noise, NoiseSpec};
use wsindy_mpc::experiment::benchmarks::{library, BenchmarkData};
use wsindy_mpc::experiment::{build_problem, ExperimentConfig, Method, WeakOptions};
use wsindy_mpc::funclib::symbolic_model;
use wsindy_mpc::regression::{ensemble_fit, mstls, EnsembleConfig};

fn main() -> wsindy_mpc::Result<()> {
    let cfg = ExperimentConfig::default();
    let data = BenchmarkData::generate(&cfg)?;
    let noisy = add_noise(&data.train, &NoiseSpec::new(0.2, 3))?;
    let lib = library(&cfg)?.expect("polynomial library");
    let problem = build_problem(Method::Wsindyc, &lib, &noisy, &[0, 1, 2], &WeakOptions::default())?;
    let targets = ["x1".to_string(), "x2".to_string(), "x3".to_string()];

    let single = mstls(&problem)?;
    println!("single fit, λ* = {:?}\n{}", single.lambda_star, symbolic_model(&lib, &single.w, &targets));

    let ens = ensemble_fit(&problem, &EnsembleConfig { seed: 7, ..Default::default() })?;
    println!("ensemble, median λ* = {:?}\n{}", ens.lambda_star, symbolic_model(&lib, &ens.w, &targets));
    Ok(())
}

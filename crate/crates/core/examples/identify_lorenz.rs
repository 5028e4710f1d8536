//! Identify the forced Lorenz system with every method and print the models.
//!
//! cargo run --release --example identify_lorenz -- [noise level]

use wsindy_mpc::data::{add_noise, NoiseSpec};
use wsindy_mpc::experiment::benchmarks::{library, state_names, BenchmarkData};
use wsindy_mpc::experiment::{fit_model, Benchmark, ExperimentConfig, FitOptions, Method};

fn main() -> wsindy_mpc::Result<()> {
    let eta: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.0);
    let cfg = ExperimentConfig::default();
    let data = BenchmarkData::generate(&cfg)?;
    let train = add_noise(&data.train, &NoiseSpec::new(eta, 1))?;
    let lib = library(&cfg)?.expect("lorenz uses a polynomial library");
    let names = state_names(Benchmark::Lorenz, 3);
    println!("{} samples, dt = {}, noise level {eta}\n", train.len(), train.dt());
    for method in Method::ALL {
        let model = fit_model(method, &lib, &train, &FitOptions::default())?;
        println!("== {method} ({} nonzero)\n{}", model.n_terms(), model.symbolic(&names));
    }
    Ok(())
}

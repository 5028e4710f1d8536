use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::config::{Benchmark, ExperimentConfig, Method};
use super::fit::{fit_drone, fit_model, FitOptions, FittedModel};
use crate::data::{normalize, NormalizationScales, TimeSeries};
use crate::dynamics::{simulate_substepped, ForwardOperator, InputHold, Rhs, Rk4, DIVERGENCE_LIMIT};
use crate::error::{Error, Result};
use crate::funclib::{build_poly_library, build_poly_library_linear_inputs, FunctionLibrary};
use crate::metrics::{
    avg_rel_error, clearance_in_window, is_tracking_success, min_clearance, mse_outside_obstacle,
};
use crate::mpc::{ControlLog, MpcConfig, PlantSetup};
use crate::plants::lorenz::lorenz_target;
use crate::plants::plasma::{plasma_reference, plasma_training_series};
use crate::plants::quadrotor::{circle_reference, drone_training_reference, hover_state, simulate_pd_flight};
use crate::plants::signals::{lorenz_validation_input, schroeder_sweep};
use crate::plants::{f8_reference, Lorenz, PdGains, Quadrotor, QuadrotorParams, F8};

pub type Reference = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Noise-free data shared by every realization of a benchmark.
#[derive(Clone)]
pub struct BenchmarkData {
    pub benchmark: Benchmark,
    /// Full-length clean training record (normalized units for external data).
    pub train: TimeSeries,
    /// Lorenz only: true trajectory after the training window under the
    /// validation forcing.
    pub validation: Option<TimeSeries>,
    /// External data only: a fixed WSINDYc fit of the clean record, used as
    /// the plant in closed loop.
    pub surrogate: Option<Arc<dyn Rhs>>,
}

impl std::fmt::Debug for BenchmarkData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkData")
            .field("benchmark", &self.benchmark)
            .field("train_len", &self.train.len())
            .field("surrogate", &self.surrogate.is_some())
            .finish()
    }
}

/// A closed-loop task: the true plant, the controller settings and the
/// reference.
#[derive(Clone)]
pub struct Scenario {
    pub plant: PlantSetup,
    pub mpc: MpcConfig,
    pub reference: Reference,
    /// Integration step of the identified model inside the forward operator.
    pub dt_model: f64,
}

impl Scenario {
    /// The plant itself as prediction model.
    pub fn oracle_operator(&self) -> Result<ForwardOperator> {
        ForwardOperator::new(self.plant.rhs.clone(), self.mpc.ts, self.dt_model)
    }
}

pub fn state_names(b: Benchmark, d: usize) -> Vec<String> {
    match b {
        Benchmark::Drone => crate::plants::quadrotor::STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        _ => crate::funclib::default_targets(d),
    }
}

fn lorenz_training(cfg: &ExperimentConfig) -> Result<TimeSeries> {
    let c = &cfg.lorenz;
    let p = c.input.clone();
    simulate_substepped(
        &Lorenz,
        &c.x0,
        move |t| vec![schroeder_sweep(t, p.amplitude, p.harmonics, p.period)],
        c.t_train,
        c.dt_train,
        c.truth_substeps,
        InputHold::Continuous,
    )
}

fn lorenz_validation(cfg: &ExperimentConfig, train: &TimeSeries) -> Result<TimeSeries> {
    let c = &cfg.lorenz;
    let x0 = train.state_row(train.len() - 1);
    simulate_substepped(
        &Lorenz,
        &x0,
        |t| vec![lorenz_validation_input(t)],
        c.t_valid,
        c.dt_train,
        c.truth_substeps,
        InputHold::Continuous,
    )
}

fn f8_training(cfg: &ExperimentConfig) -> Result<TimeSeries> {
    let c = &cfg.f8;
    let p = c.input.clone();
    let off = c.input_offset;
    simulate_substepped(
        &F8,
        &c.x0_train,
        move |t| vec![off + schroeder_sweep(t, p.amplitude, p.harmonics, p.period)],
        c.t_train,
        c.dt_train,
        c.truth_substeps,
        InputHold::Continuous,
    )
}

fn drone_training(cfg: &ExperimentConfig) -> Result<TimeSeries> {
    let c = &cfg.drone;
    simulate_pd_flight(
        &QuadrotorParams::default(),
        &PdGains::default(),
        drone_training_reference,
        c.t_train,
        c.dt_train,
        c.truth_substeps,
    )
}

fn external_training(cfg: &ExperimentConfig) -> Result<TimeSeries> {
    let c = &cfg.external;
    match &c.csv {
        Some(path) => {
            let raw = TimeSeries::load_csv(path)?;
            let scales = NormalizationScales::new(c.state_scales.clone(), c.input_scales.clone())?;
            normalize(&raw, &scales)
        }
        None => plasma_training_series(),
    }
}

impl BenchmarkData {
    pub fn generate(cfg: &ExperimentConfig) -> Result<Self> {
        let b = cfg.benchmark;
        let train = match b {
            Benchmark::Lorenz => lorenz_training(cfg)?,
            Benchmark::F8 => f8_training(cfg)?,
            Benchmark::Drone => drone_training(cfg)?,
            Benchmark::External => external_training(cfg)?,
        };
        let validation = if b == Benchmark::Lorenz { Some(lorenz_validation(cfg, &train)?) } else { None };
        let surrogate = if b == Benchmark::External && cfg.external.csv.is_some() {
            let lib = library(cfg)?.expect("polynomial library");
            let opts = FitOptions { weak: cfg.weak.clone(), ..Default::default() };
            fit_model(Method::Wsindyc, &lib, &train, &opts)?.rhs()
        } else {
            None
        };
        Ok(Self { benchmark: b, train, validation, surrogate })
    }

    /// First `n` training samples, or the whole record.
    pub fn training_prefix(&self, n: Option<usize>) -> Result<TimeSeries> {
        match n {
            None => Ok(self.train.clone()),
            Some(n) if n <= self.train.len() => self.train.slice(0..n),
            Some(n) => Err(Error::TooFewSamples { needed: n, got: self.train.len() }),
        }
    }
}

/// Candidate library for the polynomial benchmarks; `None` for the
/// quadrotor, whose libraries are fixed.
pub fn library(cfg: &ExperimentConfig) -> Result<Option<FunctionLibrary>> {
    Ok(match cfg.benchmark {
        Benchmark::Lorenz => Some(build_poly_library_linear_inputs(3, 1, 2)?),
        Benchmark::F8 => Some(build_poly_library(3, 1, cfg.f8.library_degree)?),
        Benchmark::Drone => None,
        Benchmark::External => {
            let d = cfg.external.state_scales.len();
            let v = cfg.external.input_scales.len();
            Some(build_poly_library(d, v, cfg.external.library_degree)?)
        }
    })
}

pub fn fit_options(cfg: &ExperimentConfig) -> FitOptions {
    let dmdc_shift = match cfg.benchmark {
        Benchmark::Lorenz => Some(lorenz_target().to_vec()),
        _ => None,
    };
    FitOptions {
        stls_threshold: cfg.stls_threshold,
        weak: cfg.weak.clone(),
        ensemble: cfg.ensemble.clone(),
        dmdc: cfg.dmdc.clone(),
        dmdc_shift,
    }
}

/// Fits `method` to a (possibly noisy) training record.
pub fn identify(cfg: &ExperimentConfig, method: Method, ts: &TimeSeries) -> Result<FittedModel> {
    let opts = fit_options(cfg);
    match library(cfg)? {
        Some(lib) => fit_model(method, &lib, ts, &opts),
        None => fit_drone(method, ts, &opts),
    }
}

/// Open-loop prediction of the validation window from its first state under
/// the validation forcing. States after a blow-up are +inf.
pub fn predict_validation(model: &FittedModel, truth: &TimeSeries) -> Result<TimeSeries> {
    let n = truth.len();
    let dt = truth.dt();
    let d = truth.state_dim();
    let mut states = DMatrix::from_element(n, d, f64::INFINITY);
    let mut x = truth.state_row(0);
    let mut ws = Rk4::new(d);
    let finite = |x: &[f64]| x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT);
    let step: Box<dyn Fn(&mut Rk4, &mut [f64], f64)> = match model {
        FittedModel::Linear(m) => {
            let op = ForwardOperator::discrete(Arc::new(m.clone()), m.dt)?;
            Box::new(move |ws, x, t| {
                let _ = op.step_in_place(ws, x, &[lorenz_validation_input(t)]);
            })
        }
        _ => {
            let rhs = model.rhs().expect("continuous model");
            Box::new(move |ws, x, t| {
                let u = [lorenz_validation_input(t), lorenz_validation_input(t + 0.5 * dt), lorenz_validation_input(t + dt)];
                ws.step_varying(rhs.as_ref(), x, [&u[0..1], &u[1..2], &u[2..3]], dt);
            })
        }
    };
    for k in 0..n {
        if !finite(&x) {
            break;
        }
        for i in 0..d {
            states[(k, i)] = x[i];
        }
        if k + 1 < n {
            step(&mut ws, &mut x, k as f64 * dt);
        }
    }
    TimeSeries::uniform(truth.times()[0], dt, states, truth.inputs().clone())
}

fn circle_state(t: f64, c: &super::config::DroneSetup) -> Vec<f64> {
    let p = circle_reference(t, c.circle_center, c.circle_radius, c.circle_height, c.circle_period);
    let w = 2.0 * PI / c.circle_period;
    let (s, co) = (w * t).sin_cos();
    let mut x = hover_state(p);
    x[3] = -c.circle_radius * w * s;
    x[4] = c.circle_radius * w * co;
    x
}

/// Closed-loop task for the configured benchmark.
pub fn scenario(cfg: &ExperimentConfig, data: &BenchmarkData) -> Result<Scenario> {
    match cfg.benchmark {
        Benchmark::Lorenz => {
            let c = &cfg.lorenz;
            let valid = data.validation.as_ref().expect("lorenz validation");
            let target = lorenz_target().to_vec();
            Ok(Scenario {
                plant: PlantSetup {
                    rhs: Arc::new(Lorenz),
                    dt: c.dt_plant,
                    x0: valid.state_row(valid.len() - 1),
                    u0: vec![0.0],
                    t_total: c.t_control,
                },
                mpc: c.mpc_config(),
                reference: Arc::new(move |_| target.clone()),
                dt_model: c.dt_model,
            })
        }
        Benchmark::F8 => {
            let c = &cfg.f8;
            Ok(Scenario {
                plant: PlantSetup {
                    rhs: Arc::new(F8),
                    dt: c.dt_plant,
                    x0: c.x0_control.clone(),
                    u0: vec![0.0],
                    t_total: c.t_control,
                },
                mpc: c.mpc_config(),
                reference: Arc::new(|t| vec![f8_reference(t), 0.0, 0.0]),
                dt_model: c.dt_model,
            })
        }
        Benchmark::Drone => {
            let c = cfg.drone.clone();
            let params = QuadrotorParams::default();
            Ok(Scenario {
                plant: PlantSetup {
                    rhs: Arc::new(Quadrotor { params }),
                    dt: c.dt_plant,
                    x0: circle_state(0.0, &c),
                    u0: vec![params.hover_thrust(), 0.0, 0.0, 0.0],
                    t_total: c.t_control,
                },
                mpc: c.mpc_config(),
                dt_model: c.dt_model,
                reference: Arc::new(move |t| circle_state(t, &c)),
            })
        }
        Benchmark::External => {
            let c = cfg.external.clone();
            let last = data.train.len() - 1;
            let x0 = data.train.state_row(last);
            let x_start = x0[0];
            let d = x0.len();
            let rhs: Arc<dyn Rhs> = match &data.surrogate {
                Some(r) => r.clone(),
                None => Arc::new(crate::plants::plasma::PlasmaSurrogate),
            };
            Ok(Scenario {
                plant: PlantSetup { rhs, dt: c.dt_plant, x0, u0: data.train.input_row(last), t_total: c.t_control },
                mpc: c.mpc_config(),
                dt_model: c.dt_model,
                reference: Arc::new(move |t| {
                    let mut r = vec![0.0; d];
                    r[0] = plasma_reference(t, x_start, c.reference_rel_amplitude, c.reference_freq);
                    r
                }),
            })
        }
    }
}

/// One scalar outcome of a closed-loop run and its success rule.
#[derive(Debug, Clone, Copy)]
pub struct ControlMetric {
    pub name: &'static str,
    pub value: f64,
    pub success: Option<fn(f64) -> bool>,
}

fn metric(name: &'static str, value: f64, success: Option<fn(f64) -> bool>) -> ControlMetric {
    ControlMetric { name, value, success }
}

fn reference_matrix(log: &ControlLog, reference: &Reference, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(log.len(), cols.len(), |k, i| reference(log.t[k])[cols[i]])
}

/// Per-benchmark metrics of a closed-loop log.
pub fn control_metrics(cfg: &ExperimentConfig, sc: &Scenario, log: &ControlLog) -> Result<Vec<ControlMetric>> {
    if log.is_empty() {
        return Err(Error::Diverged(0.0));
    }
    let last = &log.x[log.len() - 1];
    Ok(match cfg.benchmark {
        Benchmark::Lorenz => {
            let target = lorenz_target();
            let dist = last.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            vec![
                metric("terminal_cost", log.total_cost(), None),
                metric("final_distance", dist, Some(|d| d < 1.0)),
            ]
        }
        Benchmark::F8 => {
            let r = reference_matrix(log, &sc.reference, &[0]);
            let err = (0..log.len()).map(|k| (log.x[k][0] - r[(k, 0)]).abs()).sum::<f64>() / log.len() as f64;
            let (lo, hi) = (sc.mpc.u_min[0], sc.mpc.u_max[0]);
            let bounds = sc.mpc.rate_bounds(0);
            let mut prev = sc.plant.u0[0];
            let mut max_du = 0.0_f64;
            let mut ok = true;
            for u in &log.u {
                let du = u[0] - prev;
                ok &= u[0] >= lo && u[0] <= hi && du >= bounds.0 && du <= bounds.1;
                max_du = max_du.max(du.abs());
                prev = u[0];
            }
            vec![
                metric("mean_abs_error", err, Some(|e| e < 0.02)),
                metric("max_abs_du", max_du, None),
                metric("constraints_met", if ok { 1.0 } else { 0.0 }, Some(|v| v == 1.0)),
                metric("terminal_cost", log.total_cost(), None),
            ]
        }
        Benchmark::Drone => {
            let c = &cfg.drone;
            let traj = log.states(Some(&[0, 1, 2]));
            let r = reference_matrix(log, &sc.reference, &[0, 1, 2]);
            let mse = mse_outside_obstacle(&traj, &r, c.obstacle_center, c.dmin)?;
            let arm = QuadrotorParams::default().arm;
            let clear = min_clearance(&traj, c.obstacle_center, c.obstacle_radius, arm);
            vec![
                metric("mse", mse, None),
                metric("min_clearance", clear, Some(clearance_in_window)),
                metric("terminal_cost", log.total_cost(), None),
            ]
        }
        Benchmark::External => {
            let x = log.states(Some(&[0]));
            let r = reference_matrix(log, &sc.reference, &[0]);
            let e = avg_rel_error(&x, &r)?;
            vec![
                metric("rel_error", e, Some(is_tracking_success)),
                metric("terminal_cost", log.total_cost(), None),
            ]
        }
    })
}

/// Same metric names with worst-case values, for runs that failed.
pub fn failed_metrics(cfg: &ExperimentConfig) -> Vec<ControlMetric> {
    let names: &[(&'static str, f64, Option<fn(f64) -> bool>)] = match cfg.benchmark {
        Benchmark::Lorenz => &[("terminal_cost", f64::INFINITY, None), ("final_distance", f64::INFINITY, Some(|d| d < 1.0))],
        Benchmark::F8 => &[
            ("mean_abs_error", f64::INFINITY, Some(|e| e < 0.02)),
            ("max_abs_du", f64::INFINITY, None),
            ("constraints_met", 0.0, Some(|v| v == 1.0)),
            ("terminal_cost", f64::INFINITY, None),
        ],
        Benchmark::Drone => &[
            ("mse", f64::INFINITY, None),
            ("min_clearance", f64::NEG_INFINITY, Some(clearance_in_window)),
            ("terminal_cost", f64::INFINITY, None),
        ],
        Benchmark::External => &[("rel_error", f64::INFINITY, Some(is_tracking_success)), ("terminal_cost", f64::INFINITY, None)],
    };
    names.iter().map(|(n, w, s)| metric(n, *w, *s)).collect()
}

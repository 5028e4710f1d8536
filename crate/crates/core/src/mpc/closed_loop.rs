use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;

use super::config::MpcConfig;
use super::cost::{input_cost, state_cost};
use super::solve::solve_mpc_step;
use crate::data::FeedbackNoise;
use crate::dynamics::{renormalize_quaternion, ForwardOperator, Rhs, Rk4};
use crate::error::{Error, Result};

/// The true plant and the run length for a closed-loop simulation.
#[derive(Clone)]
pub struct PlantSetup {
    pub rhs: Arc<dyn Rhs>,
    /// Plant integration step; each update interval takes round(Ts/dt) RK4 steps.
    pub dt: f64,
    pub x0: Vec<f64>,
    /// Input applied before the first solve.
    pub u0: Vec<f64>,
    pub t_total: f64,
}

/// Per-step record; row j holds the input applied over [t_j, t_{j+1}] and
/// the plant state and feedback at t_{j+1}.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlLog {
    pub t: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub stage_cost: Vec<f64>,
    pub cum_cost: Vec<f64>,
    pub iters: Vec<usize>,
    pub wall_ms: Vec<f64>,
    /// Steps where the model rollout blew up and u_prev was held.
    pub diverged_steps: Vec<usize>,
    /// The run hit a divergence (model or plant).
    pub failed: bool,
}

impl ControlLog {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.cum_cost.last().copied().unwrap_or(0.0)
    }

    /// Plant states as a matrix, optionally restricted to some columns.
    pub fn states(&self, cols: Option<&[usize]>) -> DMatrix<f64> {
        let d = self.x.first().map_or(0, |x| x.len());
        let all: Vec<usize> = (0..d).collect();
        let cols = cols.unwrap_or(&all);
        DMatrix::from_fn(self.len(), cols.len(), |k, i| self.x[k][cols[i]])
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Columns t, u_1..u_V, x_1..x_D, y_1..y_D, stage_cost, cum_cost, iters, wall_ms.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let v = self.u.first().map_or(0, |u| u.len());
        let d = self.x.first().map_or(0, |x| x.len());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=v).map(|i| format!("u_{i}")));
        header.extend((1..=d).map(|i| format!("x_{i}")));
        header.extend((1..=d).map(|i| format!("y_{i}")));
        header.extend(["stage_cost", "cum_cost", "iters", "wall_ms"].map(String::from));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![self.t[k].to_string()];
            rec.extend(self.u[k].iter().chain(&self.x[k]).chain(&self.y[k]).map(|v| v.to_string()));
            rec.push(self.stage_cost[k].to_string());
            rec.push(self.cum_cost[k].to_string());
            rec.push(self.iters[k].to_string());
            rec.push(format!("{:.3}", self.wall_ms[k]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the receding-horizon loop for round(T/Ts) updates.
///
/// The model is rolled out from the noisy measurement, only the first move
/// is applied to the true plant, and `r_seq[k] = reference(t_j + (k+1)·Ts)`.
/// A plant blow-up ends the run early with `failed` set.
pub fn receding_horizon_run(
    plant: &PlantSetup,
    model: &ForwardOperator,
    cfg: &MpcConfig,
    noise: &mut FeedbackNoise,
    reference: &dyn Fn(f64) -> Vec<f64>,
) -> Result<ControlLog> {
    cfg.validate()?;
    let d = model.state_dim();
    let v = model.input_dim();
    if plant.rhs.state_dim() != d || plant.rhs.input_dim() != v || plant.x0.len() != d || plant.u0.len() != v {
        return Err(Error::DimensionMismatch("plant/model dimensions".into()));
    }
    if noise.sigmas().len() != d {
        return Err(Error::DimensionMismatch("feedback noise length".into()));
    }
    let steps_f = plant.t_total / cfg.ts;
    let steps = steps_f.round();
    if steps < 1.0 || (steps - steps_f).abs() > 1e-9 * steps {
        return Err(Error::Config(format!("T = {} is not a multiple of Ts = {}", plant.t_total, cfg.ts)));
    }
    let steps = steps as usize;
    let plant_op = ForwardOperator::new(plant.rhs.clone(), cfg.ts, plant.dt)?;
    let quat = model.quaternion_block();
    let measure = |noise: &mut FeedbackNoise, x: &[f64]| -> Vec<f64> {
        let mut y = noise.corrupt(x);
        if let Some(off) = quat {
            if renormalize_quaternion(&mut y, off).is_err() {
                y[off..off + 4].copy_from_slice(&x[off..off + 4]);
            }
        }
        y
    };

    let mut log = ControlLog::default();
    let mut ws = Rk4::new(d);
    let mut x = plant.x0.clone();
    let mut y = measure(noise, &x);
    let mut u_prev = plant.u0.clone();
    let mut warm: Option<Vec<Vec<f64>>> = None;
    let mut cum = 0.0;
    for j in 0..steps {
        let tj = j as f64 * cfg.ts;
        let r_seq: Vec<Vec<f64>> = (1..=cfg.mp).map(|k| reference(tj + k as f64 * cfg.ts)).collect();
        let clock = Instant::now();
        let sol = solve_mpc_step(model, &y, &u_prev, &r_seq, cfg, warm.as_deref())?;
        let wall = clock.elapsed().as_secs_f64() * 1e3;
        if sol.diverged {
            log.diverged_steps.push(j);
            log.failed = true;
        }
        let u = sol.first().to_vec();
        if plant_op.step_in_place(&mut ws, &mut x, &u).is_err() {
            log.failed = true;
            break;
        }
        let t1 = tj + cfg.ts;
        let stage = state_cost(&x, &reference(t1), cfg) + input_cost(&u, &u_prev, cfg);
        cum += stage;
        y = measure(noise, &x);
        log.t.push(t1);
        log.u.push(u.clone());
        log.x.push(x.clone());
        log.y.push(y.clone());
        log.stage_cost.push(stage);
        log.cum_cost.push(cum);
        log.iters.push(sol.iterations);
        log.wall_ms.push(wall);
        warm = if sol.diverged { None } else { Some(sol.shifted()) };
        u_prev = u;
    }
    Ok(log)
}

//! Evaluation metrics and sweep summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::error::{Error, Result};

/// Relative tracking error below which a run counts as a success.
pub const SUCCESS_REL_ERROR: f64 = 0.03;

/// Clearance window counted as a successful avoidance (metres).
pub const CLEARANCE_WINDOW: (f64, f64) = (0.10, 0.20);

fn same_grid(a: &TimeSeries, b: &TimeSeries) -> bool {
    a.len() == b.len()
        && a.state_dim() == b.state_dim()
        && a.times().iter().zip(b.times()).all(|(x, y)| (x - y).abs() <= 1e-9 * a.dt())
}

/// Time from the first sample until the Euclidean state error first reaches
/// `eps`; the full duration if it never does.
pub fn prediction_horizon(truth: &TimeSeries, pred: &TimeSeries, eps: f64) -> Result<f64> {
    if !same_grid(truth, pred) {
        return Err(Error::GridMismatch);
    }
    let t0 = truth.times()[0];
    for k in 0..truth.len() {
        let e: f64 = (0..truth.state_dim())
            .map(|i| (truth.states()[(k, i)] - pred.states()[(k, i)]).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(e < eps) {
            return Ok(truth.times()[k] - t0);
        }
    }
    Ok(truth.duration())
}

fn row_norm(m: &DMatrix<f64>, k: usize) -> f64 {
    m.row(k).norm()
}

/// mean_k ‖x_k − r_k‖ / mean_k ‖r_k‖ over aligned rows.
pub fn avg_rel_error(x: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != r.shape() || x.nrows() == 0 {
        return Err(Error::GridMismatch);
    }
    let n = x.nrows();
    let scale: f64 = (0..n).map(|k| row_norm(r, k)).sum::<f64>() / n as f64;
    if scale == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff = x - r;
    let err: f64 = (0..n).map(|k| row_norm(&diff, k)).sum::<f64>() / n as f64;
    Ok(err / scale)
}

pub fn is_tracking_success(rel_error: f64) -> bool {
    rel_error < SUCCESS_REL_ERROR
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean squared 3-D position error over samples whose reference lies
/// farther than `dmin` from the obstacle centre.
pub fn mse_outside_obstacle(traj: &DMatrix<f64>, reference: &DMatrix<f64>, o: [f64; 3], dmin: f64) -> Result<f64> {
    if traj.shape() != reference.shape() || traj.ncols() != 3 {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 0..traj.nrows() {
        let r = [reference[(k, 0)], reference[(k, 1)], reference[(k, 2)]];
        if dist(&r, &o) > dmin {
            let p = [traj[(k, 0)], traj[(k, 1)], traj[(k, 2)]];
            total += dist(&p, &r).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / count as f64)
}

/// min_k ‖p_k − o‖ − radius − arm; negative means contact.
pub fn min_clearance(traj: &DMatrix<f64>, o: [f64; 3], obstacle_radius: f64, arm: f64) -> f64 {
    (0..traj.nrows())
        .map(|k| dist(&[traj[(k, 0)], traj[(k, 1)], traj[(k, 2)]], &o))
        .fold(f64::INFINITY, f64::min)
        - obstacle_radius
        - arm
}

pub fn clearance_in_window(c: f64) -> bool {
    (CLEARANCE_WINDOW.0..=CLEARANCE_WINDOW.1).contains(&c)
}

/// Quantile by linear interpolation at plotting position (n+1)p, clamped to
/// the sample range. Infinite values sort last and propagate.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, p)
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = ((n + 1) as f64 * p).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let a = v[lo - 1];
    if frac == 0.0 || lo == n {
        return a;
    }
    let b = v[lo];
    if a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub method: String,
    pub sweep_value: f64,
    pub metric: String,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub success_rate: f64,
    pub n_realizations: usize,
}

/// Median and quartiles of per-realization values; `success` counts
/// realizations that pass the metric's rule (rate 0 when absent).
pub fn summarize(
    method: &str,
    sweep_value: f64,
    metric: &str,
    values: &[f64],
    success: Option<&dyn Fn(f64) -> bool>,
) -> SweepSummary {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    let ok = success.map_or(0, |f| values.iter().filter(|x| f(**x)).count());
    SweepSummary {
        method: method.to_string(),
        sweep_value,
        metric: metric.to_string(),
        median: quantile_sorted(&v, 0.5),
        q25: quantile_sorted(&v, 0.25),
        q75: quantile_sorted(&v, 0.75),
        success_rate: if n > 0 { ok as f64 / n as f64 } else { 0.0 },
        n_realizations: n,
    }
}

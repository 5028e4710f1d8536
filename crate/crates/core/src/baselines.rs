//! Dynamic mode decomposition with control.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::dynamics::DiscreteMap;
use crate::error::{Error, Result};
use crate::linalg::pinv;

/// Singular values below this fraction of the largest are discarded.
pub const SVD_REL_TOL: f64 = 1e-10;

/// Discrete map `x_{k+1} − s = A (x_k − s) + Bm u_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub bm: DMatrix<f64>,
    pub dt: f64,
    pub shift: Vec<f64>,
    pub rank: usize,
}

/// Least-squares `[A Bm] = X₂·pinv([X₁; U₁])` on shifted states.
pub fn dmdc_fit(ts: &TimeSeries, shift: Option<&[f64]>, rank: Option<usize>) -> Result<LinearModel> {
    let n = ts.len();
    let d = ts.state_dim();
    let v = ts.input_dim();
    if n < d + v + 1 {
        return Err(Error::TooFewSamples { needed: d + v + 1, got: n });
    }
    let shift: Vec<f64> = match shift {
        Some(s) if s.len() == d => s.to_vec(),
        Some(_) => return Err(Error::DimensionMismatch("shift length".into())),
        None => vec![0.0; d],
    };
    let mut omega = DMatrix::zeros(d + v, n - 1);
    let mut x2 = DMatrix::zeros(d, n - 1);
    for k in 0..n - 1 {
        for i in 0..d {
            omega[(i, k)] = ts.states()[(k, i)] - shift[i];
            x2[(i, k)] = ts.states()[(k + 1, i)] - shift[i];
        }
        for i in 0..v {
            omega[(d + i, k)] = ts.inputs()[(k, i)];
        }
    }
    let (p, r) = pinv(&omega, SVD_REL_TOL, rank);
    if r == 0 {
        return Err(Error::RankDeficient);
    }
    let g = x2 * p;
    Ok(LinearModel {
        a: g.columns(0, d).into_owned(),
        bm: g.columns(d, v).into_owned(),
        dt: ts.dt(),
        shift,
        rank: r,
    })
}

/// Iterates the map over `inputs`; returns `inputs.len() + 1` states in
/// absolute coordinates.
pub fn dmdc_rollout(m: &LinearModel, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = m.a.nrows();
    if x0.len() != d || inputs.iter().any(|u| u.len() != m.bm.ncols()) {
        return Err(Error::DimensionMismatch("rollout dimensions".into()));
    }
    let s = DVector::from_column_slice(&m.shift);
    let mut z = DVector::from_column_slice(x0) - &s;
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(x0.to_vec());
    for u in inputs {
        z = &m.a * &z + &m.bm * DVector::from_column_slice(u);
        out.push((&z + &s).iter().copied().collect());
    }
    Ok(out)
}

impl DiscreteMap for LinearModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.bm.ncols()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn step(&self, x: &mut [f64], u: &[f64]) {
        let d = x.len();
        let z: Vec<f64> = (0..d).map(|i| x[i] - self.shift[i]).collect();
        for i in 0..d {
            let mut acc = self.shift[i];
            for j in 0..d {
                acc += self.a[(i, j)] * z[j];
            }
            for (j, uj) in u.iter().enumerate() {
                acc += self.bm[(i, j)] * uj;
            }
            x[i] = acc;
        }
    }
}

impl LinearModel {
    /// One-step training residual ‖X₂ − [A Bm]Ω‖_F.
    pub fn one_step_residual(&self, ts: &TimeSeries) -> f64 {
        let mut total = 0.0;
        for k in 0..ts.len() - 1 {
            let x = DVector::from_iterator(ts.state_dim(), (0..ts.state_dim()).map(|i| ts.states()[(k, i)] - self.shift[i]));
            let u = DVector::from_iterator(ts.input_dim(), (0..ts.input_dim()).map(|i| ts.inputs()[(k, i)]));
            let pred = &self.a * x + &self.bm * u;
            for i in 0..ts.state_dim() {
                total += (ts.states()[(k + 1, i)] - self.shift[i] - pred[i]).powi(2);
            }
        }
        total.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_dynamics_min_norm_input_map() {
        let states = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let ts = TimeSeries::uniform(0.0, 0.1, states, DMatrix::zeros(4, 1)).unwrap();
        let m = dmdc_fit(&ts, None, None).unwrap();
        let x = dmdc_rollout(&m, &[1.0, 0.0], &vec![vec![0.0]; 3]).unwrap();
        assert!(x.iter().all(|s| (s[0] - 1.0).abs() < 1e-12 && s[1].abs() < 1e-12));
        assert!(m.bm.amax() < 1e-12);
    }

    #[test]
    fn geometric_rollout() {
        let m = LinearModel {
            a: DMatrix::from_element(1, 1, 0.5),
            bm: DMatrix::zeros(1, 1),
            dt: 1.0,
            shift: vec![0.0],
            rank: 1,
        };
        let x = dmdc_rollout(&m, &[1.0], &vec![vec![0.0]; 5]).unwrap();
        for (k, s) in x.iter().enumerate() {
            assert_eq!(s[0], 0.5f64.powi(k as i32));
        }
    }
}

use std::cell::RefCell;

use super::config::MpcConfig;
use super::cost::horizon_cost_unchecked;
use super::optimizer::{fd_gradient, minimize_box, OptOptions};
use crate::dynamics::{ForwardOperator, Rk4};
use crate::error::{Error, Result};

const MAX_PENALTY_ROUNDS: usize = 5;
const VIOLATION_TOL: f64 = 1e-9;

/// One finite-horizon problem: measured state, previous input and the
/// reference sequence, with the decision vector holding mc moves row-major.
pub struct MpcProblem<'a> {
    pub op: &'a ForwardOperator,
    pub y: &'a [f64],
    pub u_prev: &'a [f64],
    pub r_seq: &'a [Vec<f64>],
    pub cfg: &'a MpcConfig,
    ws: RefCell<Rk4>,
}

impl<'a> MpcProblem<'a> {
    pub fn new(op: &'a ForwardOperator, y: &'a [f64], u_prev: &'a [f64], r_seq: &'a [Vec<f64>], cfg: &'a MpcConfig) -> Result<Self> {
        cfg.validate()?;
        let d = op.state_dim();
        let v = op.input_dim();
        if cfg.state_dim() != d || cfg.input_dim() != v || y.len() != d || u_prev.len() != v {
            return Err(Error::DimensionMismatch("MPC problem dimensions".into()));
        }
        if r_seq.len() != cfg.mp || r_seq.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch(format!("reference sequence must have {} rows of length {d}", cfg.mp)));
        }
        Ok(Self { op, y, u_prev, r_seq, cfg, ws: RefCell::new(Rk4::new(d)) })
    }

    pub fn n_vars(&self) -> usize {
        self.cfg.mc * self.cfg.input_dim()
    }

    pub fn decode(&self, z: &[f64]) -> Vec<Vec<f64>> {
        z.chunks(self.cfg.input_dim()).map(|c| c.to_vec()).collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.cfg.u_min.repeat(self.cfg.mc)
    }

    pub fn upper(&self) -> Vec<f64> {
        self.cfg.u_max.repeat(self.cfg.mc)
    }

    /// Predicted states x̂_{j+1}..x̂_{j+mp}, inputs held after mc.
    pub fn predict(&self, z: &[f64]) -> Result<Vec<Vec<f64>>> {
        let v = self.cfg.input_dim();
        let mut ws = self.ws.borrow_mut();
        let mut x = self.y.to_vec();
        let mut out = Vec::with_capacity(self.cfg.mp);
        for k in 0..self.cfg.mp {
            let m = k.min(self.cfg.mc - 1);
            self.op.step_in_place(&mut ws, &mut x, &z[m * v..(m + 1) * v])?;
            out.push(x.clone());
        }
        Ok(out)
    }

    /// Horizon cost, +∞ when the rollout blows up.
    pub fn cost(&self, z: &[f64]) -> f64 {
        match self.predict(z) {
            Ok(xs) => horizon_cost_unchecked(&xs, &self.decode(z), self.u_prev, self.r_seq, self.cfg),
            Err(_) => f64::INFINITY,
        }
    }

    /// Sum of squared rate and output bound violations.
    pub fn violation(&self, z: &[f64], xs: &[Vec<f64>]) -> f64 {
        let v = self.cfg.input_dim();
        let mut s = 0.0;
        if self.cfg.du_min.is_some() {
            let mut prev = self.u_prev;
            for m in 0..self.cfg.mc {
                let u = &z[m * v..(m + 1) * v];
                for i in 0..v {
                    let (lo, hi) = self.cfg.rate_bounds(i);
                    let du = u[i] - prev[i];
                    s += (lo - du).max(0.0).powi(2) + (du - hi).max(0.0).powi(2);
                }
                prev = u;
            }
        }
        for x in xs {
            for b in &self.cfg.output_bounds {
                let xi = x[b.state_index];
                s += (b.lo - xi).max(0.0).powi(2) + (xi - b.hi).max(0.0).powi(2);
            }
        }
        s
    }

    /// Horizon cost plus `rho` times the squared constraint violation.
    pub fn objective(&self, z: &[f64], rho: f64) -> f64 {
        match self.predict(z) {
            Ok(xs) => {
                horizon_cost_unchecked(&xs, &self.decode(z), self.u_prev, self.r_seq, self.cfg)
                    + rho * self.violation(z, &xs)
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// Finite-difference gradient of the penalized objective.
    pub fn gradient(&self, z: &[f64], rho: f64) -> Vec<f64> {
        let f = |w: &[f64]| self.objective(w, rho);
        fd_gradient(&f, z, f(z), &self.lower(), &self.upper())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// mc moves; the first is applied.
    pub u_seq: Vec<Vec<f64>>,
    /// Horizon cost of `u_seq` without penalty.
    pub cost: f64,
    pub iterations: usize,
    /// The rollout blew up for every candidate and `u_prev` is held.
    pub diverged: bool,
}

impl MpcSolution {
    pub fn first(&self) -> &[f64] {
        &self.u_seq[0]
    }

    /// Previous solution shifted by one move, last move repeated.
    pub fn shifted(&self) -> Vec<Vec<f64>> {
        let mut s: Vec<Vec<f64>> = self.u_seq[1..].to_vec();
        s.push(self.u_seq[self.u_seq.len() - 1].clone());
        s
    }
}

/// Largest value ≤ `hi` whose difference from `prev` stays ≤ `dhi`, and
/// likewise from below; both rate and box bounds then hold exactly in
/// floating point.
fn clip_move(u: f64, prev: f64, umin: f64, umax: f64, dlo: f64, dhi: f64) -> f64 {
    let lo = umin.max(prev + dlo);
    let hi = umax.min(prev + dhi);
    if lo > hi {
        return if prev + dlo > umax { umax } else { umin };
    }
    let mut c = u.clamp(lo, hi);
    while c - prev > dhi && c > umin {
        c = c.next_down();
    }
    while c - prev < dlo && c < umax {
        c = c.next_up();
    }
    c
}

/// Sequentially clips moves onto the box and the rate bounds.
pub fn enforce_rate_bounds(u_seq: &mut [Vec<f64>], u_prev: &[f64], cfg: &MpcConfig) {
    let mut prev = u_prev.to_vec();
    for u in u_seq.iter_mut() {
        for i in 0..u.len() {
            let (dlo, dhi) = cfg.rate_bounds(i);
            u[i] = clip_move(u[i], prev[i], cfg.u_min[i], cfg.u_max[i], dlo, dhi);
        }
        prev.clone_from(u);
    }
}

/// Solves one receding-horizon problem from the measured state `y`.
///
/// `warm` seeds the optimizer (typically [`MpcSolution::shifted`]); without
/// it every move starts at `u_prev` projected onto the box.
pub fn solve_mpc_step(
    op: &ForwardOperator,
    y: &[f64],
    u_prev: &[f64],
    r_seq: &[Vec<f64>],
    cfg: &MpcConfig,
    warm: Option<&[Vec<f64>]>,
) -> Result<MpcSolution> {
    let prob = MpcProblem::new(op, y, u_prev, r_seq, cfg)?;
    let v = cfg.input_dim();
    let lo = prob.lower();
    let hi = prob.upper();
    let hold: Vec<f64> = u_prev.repeat(cfg.mc);
    let mut z = match warm {
        Some(w) if w.len() == cfg.mc && w.iter().all(|u| u.len() == v) => w.concat(),
        Some(_) => return Err(Error::DimensionMismatch("warm start".into())),
        None => hold.clone(),
    };
    for i in 0..z.len() {
        z[i] = z[i].clamp(lo[i], hi[i]);
    }
    let mut rho = cfg.penalty;
    if !prob.objective(&z, rho).is_finite() {
        let mut zh = hold.clone();
        for i in 0..zh.len() {
            zh[i] = zh[i].clamp(lo[i], hi[i]);
        }
        if !prob.objective(&zh, rho).is_finite() {
            return Ok(MpcSolution { u_seq: vec![u_prev.to_vec(); cfg.mc], cost: f64::INFINITY, iterations: 0, diverged: true });
        }
        z = zh;
    }
    let opts = OptOptions { max_iters: cfg.max_opt_iters, ..Default::default() };
    let mut iterations = 0;
    for round in 0..MAX_PENALTY_ROUNDS {
        let r = minimize_box(|w: &[f64]| prob.objective(w, rho), |w: &[f64], _| prob.gradient(w, rho), &z, &lo, &hi, &opts);
        iterations += r.iterations;
        z = r.z;
        let viol = prob.predict(&z).map(|xs| prob.violation(&z, &xs)).unwrap_or(0.0);
        if viol <= VIOLATION_TOL || round + 1 == MAX_PENALTY_ROUNDS {
            break;
        }
        rho *= 2.0;
    }
    let mut u_seq = prob.decode(&z);
    enforce_rate_bounds(&mut u_seq, u_prev, cfg);
    let z = u_seq.concat();
    let cost = prob.cost(&z);
    if !cost.is_finite() {
        return Ok(MpcSolution { u_seq: vec![u_prev.to_vec(); cfg.mc], cost, iterations, diverged: true });
    }
    Ok(MpcSolution { u_seq, cost, iterations, diverged: false })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dynamics::FnRhs;

    fn integrator(d: usize) -> ForwardOperator {
        let rhs = FnRhs::new(d, d, |_x: &[f64], u: &[f64], dx: &mut [f64]| dx.copy_from_slice(u));
        ForwardOperator::with_substeps(Arc::new(rhs), 1.0, 1).unwrap()
    }

    #[test]
    fn at_target_returns_zero() {
        let op = integrator(1);
        let cfg = MpcConfig::new(5, 3, 1.0, vec![1.0], vec![0.1], vec![0.1], vec![-2.0], vec![2.0]);
        let s = solve_mpc_step(&op, &[0.0], &[0.0], &vec![vec![0.0]; 5], &cfg, None).unwrap();
        assert!(s.u_seq.iter().flatten().all(|u| u.abs() < 1e-6));
    }

    #[test]
    fn scalar_lq_toy() {
        let op = integrator(1);
        let cfg = MpcConfig::new(1, 1, 1.0, vec![1.0], vec![1.0], vec![0.0], vec![-5.0], vec![5.0]);
        let s = solve_mpc_step(&op, &[1.0], &[0.0], &[vec![0.0]], &cfg, None).unwrap();
        assert!((s.first()[0] + 0.5).abs() < 1e-5, "{:?}", s.u_seq);
        assert!((s.cost - 0.5).abs() < 1e-9);
    }

    #[test]
    fn active_box_bound() {
        let op = integrator(1);
        let cfg = MpcConfig::new(1, 1, 1.0, vec![1.0], vec![1.0], vec![0.0], vec![0.0], vec![1.0]);
        let s = solve_mpc_step(&op, &[1.0], &[0.5], &[vec![0.0]], &cfg, None).unwrap();
        assert_eq!(s.first()[0], 0.0);
    }

    #[test]
    fn infeasible_box() {
        let op = integrator(1);
        let cfg = MpcConfig::new(1, 1, 1.0, vec![1.0], vec![1.0], vec![0.0], vec![1.0], vec![0.0]);
        assert!(matches!(
            solve_mpc_step(&op, &[1.0], &[0.5], &[vec![0.0]], &cfg, None),
            Err(Error::InfeasibleBounds(_))
        ));
    }

    #[test]
    fn rate_bounds_hold_exactly() {
        let op = integrator(1);
        let mut cfg = MpcConfig::new(6, 4, 1.0, vec![1.0], vec![0.0], vec![0.0], vec![-3.0], vec![3.0]);
        cfg.du_min = Some(vec![-0.1]);
        cfg.du_max = Some(vec![0.1]);
        let u_prev = [0.3];
        let s = solve_mpc_step(&op, &[5.0], &u_prev, &vec![vec![0.0]; 6], &cfg, None).unwrap();
        let mut prev = u_prev[0];
        for u in s.u_seq.iter().map(|u| u[0]) {
            assert!(u - prev >= -0.1 && u - prev <= 0.1, "{prev} -> {u}");
            prev = u;
        }
        assert!(s.first()[0] < 0.3);
    }

    #[test]
    fn clip_move_is_exact() {
        for (u, prev) in [(1.0, 0.7), (-1.0, 0.3), (0.55, 0.45), (0.1 + 0.2, 0.0)] {
            let c = clip_move(u, prev, -2.0, 2.0, -0.1, 0.1);
            assert!(c - prev <= 0.1 && c - prev >= -0.1);
        }
    }

    #[test]
    fn diverging_model_holds_previous_input() {
        let rhs = FnRhs::new(1, 1, |x: &[f64], _u: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let op = ForwardOperator::with_substeps(Arc::new(rhs), 0.1, 10).unwrap();
        let cfg = MpcConfig::new(20, 2, 1.0, vec![1.0], vec![1.0], vec![1.0], vec![-1.0], vec![1.0]);
        let s = solve_mpc_step(&op, &[100.0], &[0.25], &vec![vec![0.0]; 20], &cfg, None).unwrap();
        assert!(s.diverged);
        assert_eq!(s.first(), &[0.25]);
    }
}

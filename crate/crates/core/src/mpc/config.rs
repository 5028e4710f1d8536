use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spherical keep-out region acting on the first three state entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 3],
    pub dmin: f64,
    pub weight: f64,
}

/// Box on one state entry of the predicted trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBound {
    pub state_index: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub mp: usize,
    pub mc: usize,
    pub ts: f64,
    /// Diagonals of Q, R_u and R_Δu.
    pub q: Vec<f64>,
    pub ru: Vec<f64>,
    pub rdu: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    #[serde(default)]
    pub du_min: Option<Vec<f64>>,
    #[serde(default)]
    pub du_max: Option<Vec<f64>>,
    #[serde(default)]
    pub output_bounds: Vec<OutputBound>,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
    #[serde(default = "default_iters")]
    pub max_opt_iters: usize,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
}

fn default_iters() -> usize {
    100
}

fn default_penalty() -> f64 {
    1e4
}

impl MpcConfig {
    /// Unconstrained-rate config with the default iteration cap and penalty.
    pub fn new(mp: usize, mc: usize, ts: f64, q: Vec<f64>, ru: Vec<f64>, rdu: Vec<f64>, u_min: Vec<f64>, u_max: Vec<f64>) -> Self {
        Self {
            mp,
            mc,
            ts,
            q,
            ru,
            rdu,
            u_min,
            u_max,
            du_min: None,
            du_max: None,
            output_bounds: Vec::new(),
            obstacle: None,
            max_opt_iters: default_iters(),
            penalty: default_penalty(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.q.len()
    }

    pub fn input_dim(&self) -> usize {
        self.ru.len()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.input_dim();
        if self.mc == 0 || self.mp == 0 || self.mc > self.mp {
            return Err(Error::Config(format!("need 1 <= mc <= mp (mc = {}, mp = {})", self.mc, self.mp)));
        }
        if !(self.ts > 0.0) {
            return Err(Error::Config(format!("Ts = {}", self.ts)));
        }
        if self.rdu.len() != v || self.u_min.len() != v || self.u_max.len() != v {
            return Err(Error::DimensionMismatch("input weight/bound lengths".into()));
        }
        if self.q.iter().chain(&self.ru).chain(&self.rdu).any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        for i in 0..v {
            if self.u_min[i] > self.u_max[i] {
                return Err(Error::InfeasibleBounds(format!("u_min[{i}] = {} > u_max[{i}] = {}", self.u_min[i], self.u_max[i])));
            }
        }
        match (&self.du_min, &self.du_max) {
            (None, None) => {}
            (Some(lo), Some(hi)) => {
                if lo.len() != v || hi.len() != v {
                    return Err(Error::DimensionMismatch("rate bound lengths".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| *l > 0.0 || *h < 0.0) {
                    return Err(Error::InfeasibleBounds("rate bounds must bracket zero".into()));
                }
            }
            _ => return Err(Error::Config("give both du_min and du_max or neither".into())),
        }
        for b in &self.output_bounds {
            if b.state_index >= self.state_dim() || b.lo > b.hi {
                return Err(Error::InfeasibleBounds(format!("output bound on state {}", b.state_index)));
            }
        }
        if let Some(o) = &self.obstacle {
            if self.state_dim() < 3 || !(o.dmin > 0.0) || o.weight < 0.0 {
                return Err(Error::Config("obstacle needs 3 position states, dmin > 0, weight >= 0".into()));
            }
        }
        Ok(())
    }

    /// Rate bounds for input `i`, unbounded when absent.
    pub fn rate_bounds(&self, i: usize) -> (f64, f64) {
        match (&self.du_min, &self.du_max) {
            (Some(lo), Some(hi)) => (lo[i], hi[i]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

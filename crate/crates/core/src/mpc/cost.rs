use super::config::MpcConfig;
use crate::error::{Error, Result};

#[inline]
fn weighted_sq(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..w.len() {
        if w[i] != 0.0 {
            let d = a[i] - b[i];
            s += w[i] * d * d;
        }
    }
    s
}

/// Q-weighted tracking error plus the obstacle hinge for one predicted state.
#[inline]
pub fn state_cost(x: &[f64], r: &[f64], cfg: &MpcConfig) -> f64 {
    let mut c = weighted_sq(x, r, &cfg.q);
    if let Some(o) = &cfg.obstacle {
        let d = ((x[0] - o.center[0]).powi(2) + (x[1] - o.center[1]).powi(2) + (x[2] - o.center[2]).powi(2)).sqrt();
        let gap = (o.dmin - d).max(0.0);
        c += o.weight * gap * gap;
    }
    c
}

/// ‖u‖²_Ru + ‖u − u_prev‖²_RΔu.
#[inline]
pub fn input_cost(u: &[f64], u_prev: &[f64], cfg: &MpcConfig) -> f64 {
    let mut c = 0.0;
    for i in 0..u.len() {
        let du = u[i] - u_prev[i];
        c += cfg.ru[i] * u[i] * u[i] + cfg.rdu[i] * du * du;
    }
    c
}

/// Finite-horizon objective.
///
/// `xhat_seq[k]` is the prediction for step k+1 and is compared with
/// `r_seq[k]`, for k = 0..mp−1. Input terms run over all mc moves, the first
/// rate term taken against `u_prev`.
pub fn horizon_cost(
    xhat_seq: &[Vec<f64>],
    u_seq: &[Vec<f64>],
    u_prev: &[f64],
    r_seq: &[Vec<f64>],
    cfg: &MpcConfig,
) -> Result<f64> {
    let d = cfg.state_dim();
    let v = cfg.input_dim();
    if xhat_seq.len() != cfg.mp
        || r_seq.len() != cfg.mp
        || u_seq.len() != cfg.mc
        || u_prev.len() != v
        || xhat_seq.iter().chain(r_seq).any(|x| x.len() != d)
        || u_seq.iter().any(|u| u.len() != v)
    {
        return Err(Error::DimensionMismatch("horizon sequences".into()));
    }
    Ok(horizon_cost_unchecked(xhat_seq, u_seq, u_prev, r_seq, cfg))
}

pub(crate) fn horizon_cost_unchecked(
    xhat_seq: &[Vec<f64>],
    u_seq: &[Vec<f64>],
    u_prev: &[f64],
    r_seq: &[Vec<f64>],
    cfg: &MpcConfig,
) -> f64 {
    let mut j: f64 = xhat_seq.iter().zip(r_seq).map(|(x, r)| state_cost(x, r, cfg)).sum();
    let mut prev = u_prev;
    for u in u_seq {
        j += input_cost(u, prev, cfg);
        prev = u;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::config::Obstacle;

    fn cfg1(mp: usize, mc: usize) -> MpcConfig {
        MpcConfig::new(mp, mc, 1.0, vec![1.0], vec![0.0], vec![0.0], vec![-1.0], vec![1.0])
    }

    #[test]
    fn zero_when_on_reference() {
        let c = cfg1(2, 1);
        let x = vec![vec![3.0], vec![4.0]];
        assert_eq!(horizon_cost(&x, &[vec![0.0]], &[0.0], &x, &c).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_sum() {
        let c = cfg1(2, 1);
        let x = vec![vec![1.0], vec![2.0]];
        let r = vec![vec![0.0], vec![0.0]];
        assert_eq!(horizon_cost(&x, &[vec![0.3]], &[0.0], &r, &c).unwrap(), 5.0);
        assert!(horizon_cost(&x, &[vec![0.3]], &[0.0], &r[..1], &c).is_err());
    }

    #[test]
    fn inactive_obstacle() {
        let mut c = MpcConfig::new(1, 1, 1.0, vec![0.0; 3], vec![0.0], vec![0.0], vec![-1.0], vec![1.0]);
        c.obstacle = Some(Obstacle { center: [0.0; 3], dmin: 0.35, weight: 1500.0 });
        let far = vec![vec![1.0, 0.0, 0.0]];
        assert_eq!(horizon_cost(&far, &[vec![0.0]], &[0.0], &far, &c).unwrap(), 0.0);
        let near = vec![vec![0.25, 0.0, 0.0]];
        let j = horizon_cost(&near, &[vec![0.0]], &[0.0], &near, &c).unwrap();
        assert!((j - 1500.0 * 0.01).abs() < 1e-9);
    }
}

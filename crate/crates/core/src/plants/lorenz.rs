use crate::dynamics::Rhs;

pub const SIGMA: f64 = 10.0;
pub const RHO: f64 = 28.0;
pub const BETA: f64 = 8.0 / 3.0;

/// Lorenz 63 with additive actuation on the first state.
#[inline]
pub fn lorenz_rhs(x: &[f64], u: f64) -> [f64; 3] {
    [
        SIGMA * (x[1] - x[0]) + u,
        x[0] * (RHO - x[2]) - x[1],
        x[0] * x[1] - BETA * x[2],
    ]
}

/// Equilibrium on the negative wing, (−√72, −√72, 27).
pub fn lorenz_target() -> [f64; 3] {
    let s = (BETA * (RHO - 1.0)).sqrt();
    [-s, -s, RHO - 1.0]
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lorenz;

impl Rhs for Lorenz {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&lorenz_rhs(x, u[0]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points_and_substitution() {
        let s = 72f64.sqrt();
        for sign in [-1.0, 1.0] {
            assert!(lorenz_rhs(&[sign * s, sign * s, 27.0], 0.0).iter().all(|v| v.abs() < 1e-12));
        }
        let d = lorenz_rhs(&[1.0, 1.0, 1.0], 0.0);
        assert_eq!(d, [0.0, 26.0, 1.0 - 8.0 / 3.0]);
        let a = lorenz_rhs(&[0.3, -1.2, 4.0], 0.0);
        let b = lorenz_rhs(&[0.3, -1.2, 4.0], 1.0);
        assert_eq!([b[0] - a[0], b[1] - a[1], b[2] - a[2]], [1.0, 0.0, 0.0]);
        let t = lorenz_target();
        assert!((t[0] + s).abs() < 1e-12 && t[2] == 27.0);
    }
}

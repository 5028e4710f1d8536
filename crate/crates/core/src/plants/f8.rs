use crate::dynamics::Rhs;

/// F-8 Crusader longitudinal model: x = (angle of attack, pitch angle, pitch
/// rate), u = tail deflection.
#[inline]
pub fn f8_rhs(x: &[f64], u: f64) -> [f64; 3] {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let x1s = x1 * x1;
    let us = u * u;
    [
        -0.877 * x1 + x3 - 0.088 * x1 * x3 + 0.47 * x1s - 0.019 * x2 * x2 - x1s * x3 + 3.846 * x1s * x1
            - 0.215 * u
            + 0.28 * x1s * u
            + 0.47 * x1 * us
            + 0.63 * us * u,
        x3,
        -4.208 * x1 - 0.396 * x3 - 0.47 * x1s - 3.564 * x1s * x1 - 20.967 * u + 6.265 * x1s * u + 46.0 * x1 * us
            + 61.4 * us * u,
    ]
}

/// Angle-of-attack reference.
pub fn f8_reference(t: f64) -> f64 {
    0.4 * (-0.5 / (1.0 + (t / 0.1 - 0.8).exp()) + 1.0 / (1.0 + (t / 0.1 - 3.0).exp()) - 0.4)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct F8;

impl Rhs for F8 {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx.copy_from_slice(&f8_rhs(x, u[0]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_and_input_terms() {
        assert_eq!(f8_rhs(&[0.0; 3], 0.0), [0.0; 3]);
        let d = f8_rhs(&[0.0; 3], 0.1);
        assert!((d[0] - (-0.215 * 0.1 + 0.63 * 0.001)).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - (-20.967 * 0.1 + 61.4 * 0.001)).abs() < 1e-14);
        assert_eq!(f8_rhs(&[0.2, -0.4, 1.7], 0.3)[1], 1.7);
    }

    #[test]
    fn reference_limits() {
        assert!((f8_reference(100.0) + 0.16).abs() < 1e-12);
        let r0 = 0.4 * (-0.5 / (1.0 + (-0.8f64).exp()) + 1.0 / (1.0 + (-3.0f64).exp()) - 0.4);
        assert_eq!(f8_reference(0.0), r0);
        for k in 0..6001 {
            let r = f8_reference(k as f64 * 1e-3);
            assert!((-0.2..=0.4).contains(&r));
        }
    }
}

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Fourth-order finite-difference derivative of every column.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub values: DMatrix<f64>,
    /// Rows computed with the centred stencil; the rest are one-sided.
    pub interior: Range<usize>,
}

pub fn fd_derivative(x: &DMatrix<f64>, dt: f64) -> Result<Derivative> {
    let n = x.nrows();
    if n < 5 {
        return Err(Error::TooFewSamples { needed: 5, got: n });
    }
    let h12 = 12.0 * dt;
    let mut out = DMatrix::zeros(n, x.ncols());
    for c in 0..x.ncols() {
        let v = x.column(c);
        for k in 2..n - 2 {
            out[(k, c)] = (-v[k + 2] + 8.0 * v[k + 1] - 8.0 * v[k - 1] + v[k - 2]) / h12;
        }
        out[(0, c)] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / h12;
        out[(1, c)] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / h12;
        let l = n - 1;
        out[(l - 1, c)] = -(-3.0 * v[l] - 10.0 * v[l - 1] + 18.0 * v[l - 2] - 6.0 * v[l - 3] + v[l - 4]) / h12;
        out[(l, c)] = -(-25.0 * v[l] + 48.0 * v[l - 1] - 36.0 * v[l - 2] + 16.0 * v[l - 3] - 3.0 * v[l - 4]) / h12;
    }
    Ok(Derivative { values: out, interior: 2..n - 2 })
}

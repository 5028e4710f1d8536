//! Small dense least-squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot size below which a column-equilibrated QR is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Least-squares solution of `a w ≈ b`.
///
/// Columns are equilibrated before a Householder QR. If the triangular factor
/// is numerically singular (or there are fewer rows than columns) a ridge
/// system with penalty `1e-10·trace(AᵀA)/J` (in equilibrated units) is solved
/// instead; `RankDeficient` is returned only if that also fails.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} rows vs rhs of {}", b.len())));
    }
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    if norms.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOutput("least-squares input".into()));
    }
    let mut s = a.clone();
    for (j, nj) in norms.iter().enumerate() {
        if *nj > 0.0 {
            s.column_mut(j).scale_mut(1.0 / nj);
        }
    }
    let mut sol = None;
    if m >= n && norms.iter().all(|v| *v > 0.0) {
        let qr = s.clone().qr();
        let r = qr.r();
        let dmax = (0..n).fold(0.0_f64, |acc, i| acc.max(r[(i, i)].abs()));
        let dmin = (0..n).fold(f64::INFINITY, |acc, i| acc.min(r[(i, i)].abs()));
        if dmin > RANK_TOL * dmax {
            let qtb = qr.q().transpose() * b;
            sol = r.solve_upper_triangular(&qtb);
        }
    }
    let z = match sol {
        Some(z) => z,
        None => ridge(&s, b)?,
    };
    let mut w = z;
    for (j, nj) in norms.iter().enumerate() {
        w[j] = if *nj > 0.0 { w[j] / nj } else { 0.0 };
    }
    Ok(w)
}

fn ridge(s: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = s.ncols();
    let mut ata = s.transpose() * s;
    let mu = 1e-10 * ata.trace() / n as f64;
    if !(mu > 0.0) {
        return Err(Error::RankDeficient);
    }
    for i in 0..n {
        ata[(i, i)] += mu;
    }
    let atb = s.transpose() * b;
    let chol = ata.cholesky().ok_or(Error::RankDeficient)?;
    Ok(chol.solve(&atb))
}

/// Moore–Penrose pseudo-inverse by SVD. Singular values below
/// `rel_tol·σ_max` are dropped; `rank` further truncates when given.
/// Returns the pseudo-inverse and the number of retained singular values.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64, rank: Option<usize>) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, s| a.max(*s));
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|a, b| sv[*b].total_cmp(&sv[*a]));
    let mut keep: Vec<usize> = order.into_iter().filter(|i| smax > 0.0 && sv[*i] > rel_tol * smax).collect();
    if let Some(r) = rank {
        keep.truncate(r);
    }
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for &i in &keep {
        let vi = vt.row(i).transpose();
        let ui = u.column(i);
        out += (vi * ui.transpose()) / sv[i];
    }
    (out, keep.len())
}

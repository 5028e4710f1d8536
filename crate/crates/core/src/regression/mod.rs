//! Sparse regression: sequential thresholding, λ selection over a log grid,
//! strong-form derivative targets and bagged ensembles.

mod ensemble;
mod fd;

pub use ensemble::{ensemble_fit, ensemble_fit_with, EnsembleConfig};
pub use fd::{fd_derivative, Derivative};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::lstsq;

pub const DEFAULT_MAX_SWEEPS: usize = 10;

/// Fixed threshold of plain (strong-form) SINDYc.
pub const DEFAULT_STLS_THRESHOLD: f64 = 0.1;

/// `{10^(−4 + 4ℓ/99) : ℓ = 0..99}`.
pub fn lambda_grid() -> Vec<f64> {
    (0..100).map(|l| 10f64.powf(-4.0 + 4.0 * l as f64 / 99.0)).collect()
}

/// Design matrix `a` (R×J) and targets `b` (R×D), one regression per column.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl RegressionProblem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != b.nrows() {
            return Err(Error::DimensionMismatch(format!("A has {} rows, b has {}", a.nrows(), b.nrows())));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty regression problem".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput("regression data".into()));
        }
        Ok(Self { a, b })
    }

    pub fn n_terms(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.b.ncols()
    }
}

/// Strong-form problem Θ w ≈ ẋ using the centred-stencil rows only.
pub fn strong_form_problem(theta: &DMatrix<f64>, x: &DMatrix<f64>, dt: f64, dims: &[usize]) -> Result<RegressionProblem> {
    if theta.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch("Θ and X row counts".into()));
    }
    if dims.iter().any(|d| *d >= x.ncols()) {
        return Err(Error::DimensionMismatch("target dimension out of range".into()));
    }
    let d = fd_derivative(x, dt)?;
    let rows = d.interior.clone();
    let a = theta.rows(rows.start, rows.len()).into_owned();
    let mut b = DMatrix::zeros(rows.len(), dims.len());
    for (k, c) in dims.iter().enumerate() {
        b.column_mut(k).copy_from(&d.values.column(*c).rows(rows.start, rows.len()));
    }
    RegressionProblem::new(a, b)
}

/// Result of a sparse fit. Per-dimension λ selection: `lambda_star`,
/// `loss_curve` and `all_empty` have one entry per target column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    pub w: DMatrix<f64>,
    pub lambda_star: Vec<f64>,
    pub support: Vec<Vec<usize>>,
    pub loss_curve: Vec<Vec<f64>>,
    pub all_empty: Vec<bool>,
}

impl SparseFit {
    /// Fit report as JSON: λ*, support, coefficients and (λ, ℒ) pairs per dimension.
    pub fn report(&self, term_names: &[String]) -> serde_json::Value {
        let grid = lambda_grid();
        let dims: Vec<serde_json::Value> = (0..self.w.ncols())
            .map(|d| {
                let coefficients: serde_json::Map<String, serde_json::Value> = self.support[d]
                    .iter()
                    .map(|j| (term_names[*j].clone(), json!(self.w[(*j, d)])))
                    .collect();
                let curve: Vec<[f64; 2]> = if self.loss_curve[d].len() == grid.len() {
                    grid.iter().zip(&self.loss_curve[d]).map(|(l, v)| [*l, *v]).collect()
                } else {
                    Vec::new()
                };
                json!({
                    "lambda_star": self.lambda_star[d],
                    "support": self.support[d].iter().map(|j| term_names[*j].clone()).collect::<Vec<_>>(),
                    "coefficients": coefficients,
                    "loss_curve": curve,
                    "all_empty": self.all_empty[d],
                })
            })
            .collect();
        json!({ "dimensions": dims })
    }
}

/// QR-compressed form of a design matrix: the
/// triangular factor stands in for A, `Qᵀb` for b; the original ‖b‖ and
/// column norms are carried separately.
pub(crate) struct Compressed {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub b_norms: Vec<f64>,
    pub col_norms: Vec<f64>,
}

pub(crate) fn compress(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Compressed {
    let col_norms: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();
    let b_norms: Vec<f64> = (0..b.ncols()).map(|j| b.column(j).norm()).collect();
    if a.nrows() > a.ncols() {
        let qr = a.clone().qr();
        let qtb = qr.q().transpose() * b;
        Compressed { a: qr.r(), b: qtb, b_norms, col_norms }
    } else {
        Compressed { a: a.clone(), b: b.clone(), b_norms, col_norms }
    }
}

fn solve_subset(a: &DMatrix<f64>, b: &DVector<f64>, subset: &[usize]) -> Result<DVector<f64>> {
    let sub = a.select_columns(subset);
    lstsq(&sub, b)
}

/// Relative slack on both threshold bounds, so a coefficient sitting exactly
/// on a bound is not dropped by rounding.
pub const THRESHOLD_SLACK: f64 = 1e-10;

/// How a coefficient is judged small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Rule {
    /// `λ·s_j ≤ |w_j| ≤ s_j/λ`, `s_j = max(1, ‖b‖/‖A_j‖)`.
    Scaled,
    /// `|w_j| ≥ λ`.
    Absolute,
}

/// Sequential thresholding; keeps the terms that pass `rule`.
pub(crate) fn stls_rule(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    b_norm: f64,
    col_norms: &[f64],
    lambda: f64,
    max_sweeps: usize,
    rule: Rule,
) -> Result<DVector<f64>> {
    let j = a.ncols();
    let mut active: Vec<usize> = (0..j).filter(|c| col_norms[*c] > 0.0).collect();
    let scale: Vec<f64> = match rule {
        Rule::Scaled => col_norms.iter().map(|n| if *n > 0.0 { (b_norm / n).max(1.0) } else { f64::INFINITY }).collect(),
        Rule::Absolute => vec![1.0; j],
    };
    let upper = rule == Rule::Scaled;
    let expand = |sub: &DVector<f64>, idx: &[usize]| {
        let mut w = DVector::zeros(j);
        for (k, c) in idx.iter().enumerate() {
            w[*c] = sub[k];
        }
        w
    };
    for _ in 0..max_sweeps.max(1) {
        if active.is_empty() {
            return Ok(DVector::zeros(j));
        }
        let sub = solve_subset(a, b, &active)?;
        let keep: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|(k, c)| {
                let w = sub[*k].abs();
                let s = scale[**c];
                lambda * s * (1.0 - THRESHOLD_SLACK) <= w
                    && (!upper || lambda == 0.0 || w <= s / lambda * (1.0 + THRESHOLD_SLACK))
            })
            .map(|(_, c)| *c)
            .collect();
        if keep.len() == active.len() {
            return Ok(expand(&sub, &active));
        }
        active = keep;
    }
    if active.is_empty() {
        return Ok(DVector::zeros(j));
    }
    let sub = solve_subset(a, b, &active)?;
    Ok(expand(&sub, &active))
}

pub(crate) fn stls_core(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    b_norm: f64,
    col_norms: &[f64],
    lambda: f64,
    max_sweeps: usize,
) -> Result<DVector<f64>> {
    stls_rule(a, b, b_norm, col_norms, lambda, max_sweeps, Rule::Scaled)
}

/// Sequentially thresholded least squares for one target column, with the
/// two-sided scaled rule.
pub fn stls(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, max_sweeps: usize) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch("A rows vs b".into()));
    }
    let col_norms: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();
    stls_core(a, b, b.norm(), &col_norms, lambda, max_sweeps)
}

/// One column of an MSTLS fit.
#[derive(Debug, Clone)]
pub(crate) struct ColumnFit {
    pub w: DVector<f64>,
    pub lambda_star: f64,
    pub loss_curve: Vec<f64>,
    pub all_empty: bool,
}

/// ℒ(λ) = ‖A(wλ − w0)‖/‖A w0‖ + nnz(wλ)/J, with 0/0 read as 0.
pub(crate) fn mstls_loss(a: &DMatrix<f64>, w: &DVector<f64>, w0: &DVector<f64>, aw0_norm: f64, j: usize) -> f64 {
    let num = (a * (w - w0)).norm();
    let fit = if aw0_norm > 0.0 { num / aw0_norm } else if num == 0.0 { 0.0 } else { f64::INFINITY };
    let nnz = w.iter().filter(|v| **v != 0.0).count();
    fit + nnz as f64 / j as f64
}

pub(crate) fn mstls_column(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    b_norm: f64,
    col_norms: &[f64],
    grid: &[f64],
    max_sweeps: usize,
    j_full: usize,
) -> Result<ColumnFit> {
    let w0 = stls_core(a, b, b_norm, col_norms, 0.0, 1)?;
    let aw0 = (a * &w0).norm();
    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    let mut curve = Vec::with_capacity(grid.len());
    let mut all_empty = true;
    for &lambda in grid {
        let w = stls_core(a, b, b_norm, col_norms, lambda, max_sweeps)?;
        if w.iter().any(|v| *v != 0.0) {
            all_empty = false;
        }
        let loss = mstls_loss(a, &w, &w0, aw0, j_full);
        curve.push(loss);
        if best.as_ref().map_or(true, |(l, _, _)| loss <= *l) {
            best = Some((loss, lambda, w));
        }
    }
    let (_, lambda_star, w) = best.ok_or_else(|| Error::Config("empty λ grid".into()))?;
    if all_empty {
        log::warn!("every threshold removed all terms; returning zero coefficients");
    }
    Ok(ColumnFit { w, lambda_star, loss_curve: curve, all_empty })
}

/// MSTLS over a λ grid with per-column selection.
pub fn mstls_with_grid(problem: &RegressionProblem, grid: &[f64], max_sweeps: usize) -> Result<SparseFit> {
    let c = compress(&problem.a, &problem.b);
    let cols: Vec<Result<ColumnFit>> = (0..problem.n_targets())
        .into_par_iter()
        .map(|d| mstls_column(&c.a, &c.b.column(d).into_owned(), c.b_norms[d], &c.col_norms, grid, max_sweeps, problem.n_terms()))
        .collect();
    assemble_fit(cols, problem.n_terms())
}

pub(crate) fn assemble_fit(cols: Vec<Result<ColumnFit>>, j: usize) -> Result<SparseFit> {
    let cols: Vec<ColumnFit> = cols.into_iter().collect::<Result<_>>()?;
    let mut w = DMatrix::zeros(j, cols.len());
    let mut support = Vec::new();
    for (d, c) in cols.iter().enumerate() {
        w.column_mut(d).copy_from(&c.w);
        support.push((0..j).filter(|i| c.w[*i] != 0.0).collect());
    }
    Ok(SparseFit {
        w,
        lambda_star: cols.iter().map(|c| c.lambda_star).collect(),
        support,
        loss_curve: cols.iter().map(|c| c.loss_curve.clone()).collect(),
        all_empty: cols.iter().map(|c| c.all_empty).collect(),
    })
}

/// Plain sequential thresholding at one fixed λ, keeping `|w_j| ≥ λ`.
pub fn stls_fixed(problem: &RegressionProblem, lambda: f64) -> Result<SparseFit> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("threshold must be >= 0, got {lambda}")));
    }
    let c = compress(&problem.a, &problem.b);
    let cols = (0..problem.n_targets())
        .map(|d| fixed_column(&c.a, &c.b.column(d).into_owned(), c.b_norms[d], &c.col_norms, lambda))
        .collect();
    assemble_fit(cols, problem.n_terms())
}

pub(crate) fn fixed_column(a: &DMatrix<f64>, b: &DVector<f64>, b_norm: f64, col_norms: &[f64], lambda: f64) -> Result<ColumnFit> {
    let w = stls_rule(a, b, b_norm, col_norms, lambda, DEFAULT_MAX_SWEEPS, Rule::Absolute)?;
    Ok(ColumnFit { all_empty: w.iter().all(|v| *v == 0.0), w, lambda_star: lambda, loss_curve: Vec::new() })
}

/// MSTLS with the default 100-point grid and 10 sweeps.
pub fn mstls(problem: &RegressionProblem) -> Result<SparseFit> {
    mstls_with_grid(problem, &lambda_grid(), DEFAULT_MAX_SWEEPS)
}

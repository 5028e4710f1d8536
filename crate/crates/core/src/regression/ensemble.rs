use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    assemble_fit, compress, fixed_column, lambda_grid, mstls_column, ColumnFit, RegressionProblem, SparseFit,
    DEFAULT_MAX_SWEEPS,
};
use crate::error::{Error, Result};

/// Two-stage bagging: library bags select candidate terms, data bags
/// (bootstrap over rows) give the coefficient distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub n_library_bags: usize,
    pub library_sample_frac: f64,
    pub term_inclusion_threshold: f64,
    pub n_data_bags: usize,
    pub coef_inclusion_threshold: f64,
    /// Resample rows with replacement; `false` reuses every row in each bag.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_library_bags: 100,
            library_sample_frac: 0.9,
            term_inclusion_threshold: 0.4,
            n_data_bags: 100,
            coef_inclusion_threshold: 0.6,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if self.n_library_bags == 0 || self.n_data_bags == 0 || !frac_ok(self.library_sample_frac) {
            return Err(Error::Config("ensemble counts must be >= 1 and fractions in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.term_inclusion_threshold) || !(0.0..=1.0).contains(&self.coef_inclusion_threshold) {
            return Err(Error::Config("inclusion thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn bag_rng(seed: u64, stage: u64, dim: usize, bag: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stage << 56) ^ ((dim as u64) << 32) ^ bag as u64);
    rng
}

/// MSTLS on a sub-problem, counting sparsity against the full library size,
/// or plain thresholding at a fixed λ.
fn fit_subproblem(a: &DMatrix<f64>, b: &DVector<f64>, j_full: usize, fixed: Option<f64>) -> Result<ColumnFit> {
    let c = compress(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
    let b0 = c.b.column(0).into_owned();
    match fixed {
        Some(l) => fixed_column(&c.a, &b0, c.b_norms[0], &c.col_norms, l),
        None => mstls_column(&c.a, &b0, c.b_norms[0], &c.col_norms, &lambda_grid(), DEFAULT_MAX_SWEEPS, j_full),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Row weights √count from a bootstrap draw, or all ones.
fn row_weights(r: usize, bootstrap: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if !bootstrap {
        return vec![1.0; r];
    }
    let mut counts = vec![0u32; r];
    for _ in 0..r {
        counts[rng.random_range(0..r)] += 1;
    }
    counts.iter().map(|c| (*c as f64).sqrt()).collect()
}

fn ensemble_column(problem: &RegressionProblem, d: usize, cfg: &EnsembleConfig, fixed: Option<f64>) -> Result<ColumnFit> {
    let j = problem.n_terms();
    let rows = problem.a.nrows();
    let b = problem.b.column(d).into_owned();
    let k = ((cfg.library_sample_frac * j as f64).ceil() as usize).clamp(1, j);

    let stage1: Vec<Result<Vec<usize>>> = (0..cfg.n_library_bags)
        .into_par_iter()
        .map(|bag| {
            let mut rng = bag_rng(cfg.seed, 1, d, bag);
            let mut cols = sample(&mut rng, j, k).into_vec();
            cols.sort_unstable();
            let fit = fit_subproblem(&problem.a.select_columns(&cols), &b, j, fixed)?;
            Ok(cols.iter().enumerate().filter(|(i, _)| fit.w[*i] != 0.0).map(|(_, c)| *c).collect())
        })
        .collect();
    let mut counts = vec![0usize; j];
    for s in stage1 {
        for c in s? {
            counts[c] += 1;
        }
    }
    let reduced: Vec<usize> = (0..j)
        .filter(|c| counts[*c] as f64 / cfg.n_library_bags as f64 >= cfg.term_inclusion_threshold)
        .collect();
    if reduced.is_empty() {
        return Err(Error::EmptyReducedLibrary(d));
    }

    let a_red = problem.a.select_columns(&reduced);
    let stage2: Vec<Result<ColumnFit>> = (0..cfg.n_data_bags)
        .into_par_iter()
        .map(|bag| {
            let mut rng = bag_rng(cfg.seed, 2, d, bag);
            let wts = row_weights(rows, cfg.bootstrap, &mut rng);
            let mut a = a_red.clone();
            let mut bb = b.clone();
            for (r, w) in wts.iter().enumerate() {
                if *w != 1.0 {
                    a.row_mut(r).scale_mut(*w);
                    bb[r] *= w;
                }
            }
            fit_subproblem(&a, &bb, j, fixed)
        })
        .collect();
    let bags: Vec<ColumnFit> = stage2.into_iter().collect::<Result<_>>()?;
    let mut lambdas: Vec<f64> = bags.iter().map(|f| f.lambda_star).collect();
    lambdas.sort_by(|a, b| a.total_cmp(b));
    let lambda_star = lambdas[(lambdas.len() - 1) / 2];
    let mut w = DVector::zeros(j);
    for (i, c) in reduced.iter().enumerate() {
        let mut vals: Vec<f64> = bags.iter().map(|f| f.w[i]).collect();
        let freq = vals.iter().filter(|v| **v != 0.0).count() as f64 / bags.len() as f64;
        if freq >= cfg.coef_inclusion_threshold && freq > 0.0 {
            w[*c] = median(&mut vals);
        }
    }
    // λ* reported as the lower median over data bags
    Ok(ColumnFit { all_empty: w.iter().all(|v| *v == 0.0), w, lambda_star, loss_curve: Vec::new() })
}

/// Bagged MSTLS. Every target column is bagged independently with its own
/// random streams derived from `cfg.seed`.
pub fn ensemble_fit(problem: &RegressionProblem, cfg: &EnsembleConfig) -> Result<SparseFit> {
    ensemble_fit_with(problem, cfg, None)
}

/// Bagging around plain thresholding at `fixed` λ when given, MSTLS otherwise.
pub fn ensemble_fit_with(problem: &RegressionProblem, cfg: &EnsembleConfig, fixed: Option<f64>) -> Result<SparseFit> {
    cfg.validate()?;
    if problem.n_terms() < 2 || problem.a.nrows() < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: problem.a.nrows() });
    }
    let cols = (0..problem.n_targets()).map(|d| ensemble_column(problem, d, cfg, fixed)).collect();
    assemble_fit(cols, problem.n_terms())
}

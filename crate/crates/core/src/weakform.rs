//! Weak-form regression systems.
//!
//! Multiplying ẋ = Θ(x, u)w by a compactly supported test function φ centred
//! at each interior sample and integrating by parts gives
//! `−∫φ̇ x dt = ∫φ Θ dt · w`, so no derivative of the data is needed. With
//! trapezoid quadrature both sides are discrete correlations of the sampled
//! signals with the (weighted) samples of φ̇ and φ.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Polynomial bump φ(t) = C(1 − (t/(mΔt))²)^p on `[−mΔt, mΔt]`, sampled on
/// the data grid, with its analytic derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    m: usize,
    p: u32,
    dt: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

pub const DEFAULT_DEGREE: u32 = 16;

pub fn make_test_function(m: usize, p: u32, dt: f64) -> Result<TestFunction> {
    if m < 2 {
        return Err(Error::InvalidSupport(format!("half support {m} < 2")));
    }
    if p < 2 {
        return Err(Error::InvalidSupport(format!("degree {p} < 2")));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidGrid(format!("dt = {dt}")));
    }
    let mf = m as f64;
    let half_width = mf * dt;
    let mut phi = Vec::with_capacity(2 * m + 1);
    let mut dphi = Vec::with_capacity(2 * m + 1);
    for k in 0..=2 * m {
        let i = k as f64 - mf;
        let s = i / mf;
        let base = 1.0 - s * s;
        if k == 0 || k == 2 * m {
            phi.push(0.0);
            dphi.push(0.0);
        } else {
            phi.push(base.powi(p as i32));
            dphi.push(-2.0 * p as f64 * (i * dt) / (half_width * half_width) * base.powi(p as i32 - 1));
        }
    }
    let integral: f64 = quadrature_weights(m, dt).iter().zip(&phi).map(|(w, f)| w * f).sum();
    let c = 1.0 / integral;
    phi.iter_mut().for_each(|v| *v *= c);
    dphi.iter_mut().for_each(|v| *v *= c);
    // Enforce exact antisymmetry of φ̇ and symmetry of φ.
    for k in 0..m {
        let j = 2 * m - k;
        let a = 0.5 * (dphi[k] - dphi[j]);
        dphi[k] = a;
        dphi[j] = -a;
        let s = 0.5 * (phi[k] + phi[j]);
        phi[k] = s;
        phi[j] = s;
    }
    dphi[m] = 0.0;
    Ok(TestFunction { m, p, dt, phi, dphi })
}

/// Trapezoid weights over 2m+1 points.
fn quadrature_weights(m: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![dt; 2 * m + 1];
    w[0] *= 0.5;
    w[2 * m] *= 0.5;
    w
}

impl TestFunction {
    pub fn half_support(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> u32 {
        self.p
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn dphi(&self) -> &[f64] {
        &self.dphi
    }

    /// Quadrature-weighted kernels (𝒬∘φ, −𝒬∘φ̇) used in assembly.
    fn kernels(&self) -> (Vec<f64>, Vec<f64>) {
        let q = quadrature_weights(self.m, self.dt);
        let g: Vec<f64> = q.iter().zip(&self.phi).map(|(w, f)| w * f).collect();
        let b: Vec<f64> = q.iter().zip(&self.dphi).map(|(w, f)| -w * f).collect();
        (g, b)
    }
}

/// Heuristic half support m = clamp(round(N/20), 5, (N−3)/2).
pub fn default_support(n: usize, _dt: f64) -> Result<usize> {
    if n < 50 {
        return Err(Error::TooFewSamples { needed: 50, got: n });
    }
    let m = (n as f64 / 20.0).round() as usize;
    Ok(m.clamp(5, (n - 3) / 2))
}

/// Weak system `G w ≈ B` for one state dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakSystem {
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub dim_index: usize,
}

impl WeakSystem {
    /// Fewer rows than unknowns.
    pub fn is_underdetermined(&self) -> bool {
        self.g.nrows() <= self.g.ncols()
    }
}

/// Weak systems for several target columns sharing one test function: the
/// common `G` and one `B` column per target.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakForm {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub dims: Vec<usize>,
}

impl WeakForm {
    pub fn system(&self, k: usize) -> WeakSystem {
        WeakSystem { g: self.g.clone(), b: self.b.column(k).into_owned(), dim_index: self.dims[k] }
    }

    /// Sample index at the centre of row r.
    pub fn row_center(&self, r: usize, m: usize) -> usize {
        r + m
    }
}

/// Valid-part correlation `out[r] = Σ_k kern[k]·x[r+k]` by direct summation.
pub fn correlate_valid_direct(x: &[f64], kern: &[f64]) -> Vec<f64> {
    let l = kern.len();
    if x.len() < l {
        return Vec::new();
    }
    (0..=x.len() - l).map(|r| kern.iter().zip(&x[r..r + l]).map(|(a, b)| a * b).sum()).collect()
}

/// FFT correlator for a fixed signal length and a set of kernels.
struct FftCorrelator {
    n: usize,
    l: usize,
    nfft: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectra: Vec<Vec<Complex<f64>>>,
}

impl FftCorrelator {
    fn new(n: usize, kernels: &[&[f64]]) -> Self {
        let l = kernels[0].len();
        let nfft = (n + l - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nfft);
        let inv = planner.plan_fft_inverse(nfft);
        let spectra = kernels
            .iter()
            .map(|k| {
                // correlation = convolution with the reversed kernel
                let mut buf = vec![Complex::new(0.0, 0.0); nfft];
                for (i, v) in k.iter().rev().enumerate() {
                    buf[i] = Complex::new(*v, 0.0);
                }
                fwd.process(&mut buf);
                buf
            })
            .collect();
        Self { n, l, nfft, fwd, inv, spectra }
    }

    /// Correlates `x` with kernel `which`.
    fn correlate(&self, x: &[f64], which: usize) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
        buf.resize(self.nfft, Complex::new(0.0, 0.0));
        self.fwd.process(&mut buf);
        for (a, b) in buf.iter_mut().zip(&self.spectra[which]) {
            *a *= b;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.nfft as f64;
        (self.l - 1..self.n).map(|i| buf[i].re * scale).collect()
    }
}

fn check_inputs(theta: &DMatrix<f64>, x: &DMatrix<f64>, tf: &TestFunction, dims: &[usize]) -> Result<()> {
    let n = theta.nrows();
    if x.nrows() != n {
        return Err(Error::DimensionMismatch(format!("Θ has {n} rows, X has {}", x.nrows())));
    }
    if dims.iter().any(|d| *d >= x.ncols()) {
        return Err(Error::DimensionMismatch("target dimension out of range".into()));
    }
    if n <= 2 * tf.m {
        return Err(Error::InvalidSupport(format!("2m+1 = {} exceeds N = {n}", 2 * tf.m + 1)));
    }
    if theta.iter().chain(x.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteOutput("weak-form input data".into()));
    }
    Ok(())
}

fn warn_if_underdetermined(rows: usize, j: usize) {
    if rows <= j {
        log::warn!("weak system has {rows} rows for {j} unknowns");
    }
}

/// FFT-based assembly of the weak form for the target columns `dims` of `x`.
pub fn assemble_weak_form(
    theta: &DMatrix<f64>,
    x: &DMatrix<f64>,
    tf: &TestFunction,
    dims: &[usize],
) -> Result<WeakForm> {
    check_inputs(theta, x, tf, dims)?;
    let n = theta.nrows();
    let rows = n - 2 * tf.m;
    warn_if_underdetermined(rows, theta.ncols());
    let (kg, kb) = tf.kernels();
    let corr = FftCorrelator::new(n, &[&kg, &kb]);
    let mut g = DMatrix::zeros(rows, theta.ncols());
    for j in 0..theta.ncols() {
        let col = corr.correlate(theta.column(j).as_slice(), 0);
        g.column_mut(j).copy_from_slice(&col);
    }
    let mut b = DMatrix::zeros(rows, dims.len());
    for (k, d) in dims.iter().enumerate() {
        let col = corr.correlate(x.column(*d).as_slice(), 1);
        b.column_mut(k).copy_from_slice(&col);
    }
    Ok(WeakForm { g, b, dims: dims.to_vec() })
}

/// Reference assembly by direct summation.
pub fn assemble_weak_form_direct(
    theta: &DMatrix<f64>,
    x: &DMatrix<f64>,
    tf: &TestFunction,
    dims: &[usize],
) -> Result<WeakForm> {
    check_inputs(theta, x, tf, dims)?;
    let n = theta.nrows();
    let rows = n - 2 * tf.m;
    let (kg, kb) = tf.kernels();
    let mut g = DMatrix::zeros(rows, theta.ncols());
    for j in 0..theta.ncols() {
        g.column_mut(j).copy_from_slice(&correlate_valid_direct(theta.column(j).as_slice(), &kg));
    }
    let mut b = DMatrix::zeros(rows, dims.len());
    for (k, d) in dims.iter().enumerate() {
        b.column_mut(k).copy_from_slice(&correlate_valid_direct(x.column(*d).as_slice(), &kb));
    }
    Ok(WeakForm { g, b, dims: dims.to_vec() })
}

/// Weak system for a single state dimension.
pub fn assemble_weak_system(
    theta: &DMatrix<f64>,
    x: &DMatrix<f64>,
    tf: &TestFunction,
    dim: usize,
) -> Result<WeakSystem> {
    Ok(assemble_weak_form(theta, x, tf, &[dim])?.system(0))
}

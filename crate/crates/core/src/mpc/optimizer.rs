//! Box-constrained projected quasi-Newton minimizer with finite-difference
//! gradients.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct OptOptions {
    pub max_iters: usize,
    pub step_tol: f64,
    pub grad_tol: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self { max_iters: 100, step_tol: 1e-8, grad_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub z: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
}

pub fn project(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..z.len() {
        z[i] = z[i].clamp(lo[i], hi[i]);
    }
}

/// Forward differences with step 1e−6·max(1, |z_i|), switching to a backward
/// difference when the forward point would leave the box.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, z: &[f64], f0: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; z.len()];
    let mut zz = z.to_vec();
    for i in 0..z.len() {
        let h = 1e-6 * z[i].abs().max(1.0);
        let (step, sign) = if z[i] + h <= hi[i] || z[i] - h < lo[i] { (h, 1.0) } else { (-h, -1.0) };
        zz[i] = z[i] + step;
        let fi = f(&zz);
        g[i] = sign * (fi - f0) / h;
        zz[i] = z[i];
    }
    g
}

fn projected_gradient(z: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..z.len())
        .map(|i| if (z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0) { 0.0 } else { g[i] })
        .collect()
}

/// Minimizes `f` over the box `[lo, hi]` from `z0`.
///
/// Accepted iterates never increase the objective (Armijo backtracking along
/// the projection arc). Stops on the iteration cap, a step shorter than
/// `step_tol`, or a projected gradient below `grad_tol·max(1, |f|)`.
pub fn minimize_box<F, G>(f: F, grad: G, z0: &[f64], lo: &[f64], hi: &[f64], opts: &OptOptions) -> OptResult
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], f64) -> Vec<f64>,
{
    let n = z0.len();
    let mut z = z0.to_vec();
    project(&mut z, lo, hi);
    let mut fz = f(&z);
    let mut history = vec![fz];
    if n == 0 || !fz.is_finite() {
        return OptResult { z, f: fz, iterations: 0, history };
    }
    let mut g = grad(&z, fz);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let span = (0..n)
        .map(|i| hi[i] - lo[i])
        .filter(|w| w.is_finite() && *w > 0.0)
        .fold(f64::INFINITY, f64::min);
    let span = if span.is_finite() { span } else { 1.0 };
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let pg = projected_gradient(&z, &g, lo, hi);
        let pg_norm = pg.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if pg_norm <= opts.grad_tol * fz.abs().max(1.0) {
            break;
        }
        iterations += 1;
        let free: Vec<bool> = pg.iter().zip(&g).map(|(p, g)| !(*p == 0.0 && *g != 0.0)).collect();
        let gv = DVector::from_iterator(n, (0..n).map(|i| if free[i] { g[i] } else { 0.0 }));
        let mut d = -(&h * &gv);
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if d.dot(&gv) >= 0.0 {
            h = DMatrix::identity(n, n);
            scaled = false;
            d = -gv.clone();
        }
        let mut alpha = if scaled {
            1.0
        } else {
            let dmax = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            (0.1 * span / dmax).min(1.0)
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = (0..n).map(|i| z[i] + alpha * d[i]).collect();
            project(&mut trial, lo, hi);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - z[i])).sum();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fz + 1e-4 * decrease && ft <= fz {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= 0.5;
        }
        let Some((znew, fnew)) = accepted else { break };
        let s = DVector::from_iterator(n, (0..n).map(|i| znew[i] - z[i]));
        let step = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        z = znew;
        fz = fnew;
        history.push(fz);
        if step <= opts.step_tol {
            break;
        }
        let gnew = grad(&z, fz);
        let y = DVector::from_iterator(n, (0..n).map(|i| gnew[i] - g[i]));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        g = gnew;
    }
    OptResult { z, f: fz, iterations, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_with_active_bound() {
        let f = |z: &[f64]| (z[0] + 0.5).powi(2) + 2.0 * (z[1] - 0.3).powi(2);
        let lo = [0.0, -1.0];
        let hi = [1.0, 1.0];
        let g = |z: &[f64], f0: f64| fd_gradient(&f, z, f0, &lo, &hi);
        let r = minimize_box(f, g, &[0.5, 0.9], &lo, &hi, &OptOptions::default());
        assert_eq!(r.z[0], 0.0);
        assert!((r.z[1] - 0.3).abs() < 1e-5);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rosenbrock_in_box() {
        let f = |z: &[f64]| 100.0 * (z[1] - z[0] * z[0]).powi(2) + (1.0 - z[0]).powi(2);
        let lo = [-2.0, -2.0];
        let hi = [2.0, 2.0];
        let g = |z: &[f64], f0: f64| fd_gradient(&f, z, f0, &lo, &hi);
        let opts = OptOptions { max_iters: 500, ..Default::default() };
        let r = minimize_box(f, g, &[-1.2, 1.0], &lo, &hi, &opts);
        assert!((r.z[0] - 1.0).abs() < 1e-3 && (r.z[1] - 1.0).abs() < 2e-3, "{:?}", r.z);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

//! Build the weak system for ẋ = −x by FFT and by direct summation and
//! watch the integration-by-parts residual shrink with the step size.

use nalgebra::DMatrix;
use wsindy_mpc::weakform::{assemble_weak_form, assemble_weak_form_direct, make_test_function, DEFAULT_DEGREE};

fn main() -> wsindy_mpc::Result<()> {
    println!("{:>8} {:>6} {:>12} {:>12}", "dt", "rows", "residual", "fft-direct");
    for dt in [0.1_f64, 0.05, 0.025, 0.0125] {
        let n = (4.0 / dt).round() as usize + 1;
        let x = DMatrix::from_fn(n, 1, |k, _| (-(k as f64) * dt).exp());
        let tf = make_test_function((0.5 / dt).round() as usize, DEFAULT_DEGREE, dt)?;
        let fft = assemble_weak_form(&x, &x, &tf, &[0])?;
        let direct = assemble_weak_form_direct(&x, &x, &tf, &[0])?;
        // w = −1 solves the weak system up to quadrature error
        let residual = (&fft.g * -1.0 - &fft.b).amax();
        let diff = (&fft.g - &direct.g).amax().max((&fft.b - &direct.b).amax());
        println!("{dt:>8} {:>6} {residual:>12.3e} {diff:>12.1e}", fft.g.nrows());
    }
    Ok(())
}

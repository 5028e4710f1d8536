//! Two-state surrogate of a gas-puff-actuated plasma boundary, in normalized
//! units: x1 is separatrix density / 1e16, x2 is inverse divertor temperature
//! / 1e-4, u is puff rate / 1e18.

use std::f64::consts::PI;

use crate::data::{denormalize, NormalizationScales, TimeSeries};
use crate::dynamics::{simulate_substepped, InputHold, Rhs};
use crate::error::Result;
use crate::plants::signals::schroeder_sweep;

/// ẋ1 = 22500 − 30 x1 + 15 u, ẋ2 = −40 x2 + 0.0089 x1².
#[derive(Debug, Clone, Copy, Default)]
pub struct PlasmaSurrogate;

impl Rhs for PlasmaSurrogate {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = 22500.0 - 30.0 * x[0] + 15.0 * u[0];
        dx[1] = -40.0 * x[1] + 0.0089 * x[0] * x[0];
    }
}

/// Non-negative puff-rate excitation around 1500.
pub fn plasma_training_input(t: f64) -> f64 {
    (1500.0 + schroeder_sweep(t, 1800.0, 12, 0.4)).max(0.0)
}

/// Normalized training record: 4001 samples over 0.4 s, starting at the
/// equilibrium of the mean input.
pub fn plasma_training_series() -> Result<TimeSeries> {
    let x1 = 1500.0;
    let x0 = [x1, 0.0089 * x1 * x1 / 40.0];
    simulate_substepped(
        &PlasmaSurrogate,
        &x0,
        |t| vec![plasma_training_input(t)],
        0.4,
        1e-4,
        1,
        InputHold::Continuous,
    )
}

/// The same record in physical units, as it would arrive from a simulator.
pub fn plasma_training_series_physical() -> Result<TimeSeries> {
    denormalize(&plasma_training_series()?, &NormalizationScales::plasma())
}

/// Sinusoidal density target starting at `x_start`, oscillating at `freq` Hz
/// with relative amplitude `rel_amplitude`.
pub fn plasma_reference(t: f64, x_start: f64, rel_amplitude: f64, freq: f64) -> f64 {
    x_start * (1.0 + rel_amplitude * (2.0 * PI * freq * t).sin())
}

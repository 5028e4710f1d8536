//! Weak-form sparse identification of controlled dynamical systems and
//! model-predictive control on the identified models.

pub mod baselines;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod funclib;
pub mod linalg;
pub mod metrics;
pub mod mpc;
pub mod plants;
pub mod regression;
pub mod weakform;

pub use error::{Error, Result};

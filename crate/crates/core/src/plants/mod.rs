//! Benchmark plants and excitation signals.

pub mod f8;
pub mod lorenz;
pub mod plasma;
pub mod quadrotor;
pub mod signals;

pub use f8::{f8_reference, f8_rhs, F8};
pub use lorenz::{lorenz_rhs, Lorenz};
pub use quadrotor::{quat_to_rotmat, quadrotor_rhs, IdentifiedQuadrotor, PdGains, Quadrotor, QuadrotorParams};
pub use signals::schroeder_sweep;

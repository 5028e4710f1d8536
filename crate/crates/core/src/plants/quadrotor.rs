//! Rigid-body quadrotor with unit-quaternion attitude, a cascaded PD
//! controller used to generate identification data, and reference paths.
//!
//! State layout: `[px, py, pz, vx, vy, vz, q0, q1, q2, q3, p, q, r]` with the
//! quaternion scalar-first; input `[F, Mx, My, Mz]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::dynamics::{Rhs, Rk4};
use crate::error::{Error, Result};
use crate::funclib::{build_drone_rotational_library, build_drone_translational_library, FunctionLibrary};

pub const STATE_DIM: usize = 13;
pub const INPUT_DIM: usize = 4;
pub const QUAT_OFFSET: usize = 6;
pub const STATE_NAMES: [&str; STATE_DIM] =
    ["px", "py", "pz", "vx", "vy", "vz", "q0", "q1", "q2", "q3", "p", "q", "r"];
pub const INPUT_NAMES: [&str; INPUT_DIM] = ["F", "Mx", "My", "Mz"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub g: f64,
    pub inertia: [f64; 3],
    pub arm: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self { mass: 1.3, g: 9.81, inertia: [0.0281, 0.0286, 0.0551], arm: 0.165 }
    }
}

impl QuadrotorParams {
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.g
    }
}

/// Body-to-inertial rotation from a scalar-first quaternion. The quaternion
/// is normalized first.
pub fn quat_to_rotmat(q: &[f64; 4]) -> Result<[[f64; 3]; 3]> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !(n > 1e-300) || !n.is_finite() {
        return Err(Error::ZeroQuaternion);
    }
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Ok([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])
}

/// Roll, pitch, yaw (ZYX) from a quaternion.
pub fn euler_zyx(q: &[f64]) -> (f64, f64, f64) {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    (roll, pitch, yaw)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// ½ Ω(ω) q
#[inline]
pub fn quat_kinematics(q: &[f64], w: &[f64], dq: &mut [f64]) {
    let (p, qq, r) = (w[0], w[1], w[2]);
    dq[0] = 0.5 * (-p * q[1] - qq * q[2] - r * q[3]);
    dq[1] = 0.5 * (p * q[0] + r * q[2] - qq * q[3]);
    dq[2] = 0.5 * (qq * q[0] - r * q[1] + p * q[3]);
    dq[3] = 0.5 * (r * q[0] + qq * q[1] - p * q[2]);
}

/// Full 13-state derivative. Assumes a (near) unit quaternion.
pub fn quadrotor_rhs(params: &QuadrotorParams, x: &[f64], u: &[f64], dx: &mut [f64]) {
    let (w, qx, qy, qz) = (x[6], x[7], x[8], x[9]);
    let f = u[0] / params.mass;
    dx[0] = x[3];
    dx[1] = x[4];
    dx[2] = x[5];
    // third column of R times F/m
    dx[3] = 2.0 * (qx * qz + w * qy) * f;
    dx[4] = 2.0 * (qy * qz - w * qx) * f;
    dx[5] = (1.0 - 2.0 * (qx * qx + qy * qy)) * f - params.g;
    quat_kinematics(&x[6..10], &x[10..13], &mut dx[6..10]);
    let [ixx, iyy, izz] = params.inertia;
    let (p, q, r) = (x[10], x[11], x[12]);
    dx[10] = (u[1] + (iyy - izz) * q * r) / ixx;
    dx[11] = (u[2] + (izz - ixx) * p * r) / iyy;
    dx[12] = (u[3] + (ixx - iyy) * p * q) / izz;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Quadrotor {
    pub params: QuadrotorParams,
}

impl Rhs for Quadrotor {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }
    fn input_dim(&self) -> usize {
        INPUT_DIM
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        quadrotor_rhs(&self.params, x, u, dx)
    }
    fn quaternion_block(&self) -> Option<usize> {
        Some(QUAT_OFFSET)
    }
}

/// Hover state at position `p`: level attitude, at rest.
pub fn hover_state(p: [f64; 3]) -> Vec<f64> {
    let mut x = vec![0.0; STATE_DIM];
    x[..3].copy_from_slice(&p);
    x[QUAT_OFFSET] = 1.0;
    x
}

/// Diagonal gains of the position and attitude loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
    pub kp_m: [f64; 3],
    pub kd_m: [f64; 3],
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: [15.0; 3], kd: [12.0; 3], kp_m: [160.0; 3], kd_m: [25.0; 3] }
    }
}

/// Desired position, velocity, acceleration, yaw and yaw rate at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSample {
    pub pos: [f64; 3],
    pub vel: [f64; 3],
    pub acc: [f64; 3],
    pub psi: f64,
    pub psi_rate: f64,
}

/// Cascaded PD law: commanded acceleration, thrust, tilt set-points and
/// attitude moments.
pub fn pd_controller(params: &QuadrotorParams, gains: &PdGains, x: &[f64], r: &RefSample) -> [f64; 4] {
    let mut a = [0.0; 3];
    for i in 0..3 {
        a[i] = r.acc[i] + gains.kd[i] * (r.vel[i] - x[3 + i]) + gains.kp[i] * (r.pos[i] - x[i]);
    }
    let thrust = params.mass * (params.g + a[2]);
    let (s, c) = r.psi.sin_cos();
    let phi_des = (a[0] * s - a[1] * c) / params.g;
    let theta_des = (a[0] * c + a[1] * s) / params.g;
    let (phi, theta, psi) = euler_zyx(&x[6..10]);
    let eta_err = [phi_des - phi, theta_des - theta, wrap_angle(r.psi - psi)];
    let w_des = [0.0, 0.0, r.psi_rate];
    let mut out = [thrust, 0.0, 0.0, 0.0];
    for i in 0..3 {
        out[1 + i] =
            params.inertia[i] * (gains.kd_m[i] * (w_des[i] - x[10 + i]) + gains.kp_m[i] * eta_err[i]);
    }
    out
}

/// Lissajous-type excitation path used for identification flights, with
/// analytic derivatives and yaw ψ = (π/6) sin t.
pub fn drone_training_reference(t: f64) -> RefSample {
    let (s05, c05) = (0.5 * t).sin_cos();
    let (s15, c15) = (1.5 * t).sin_cos();
    let (s3, c3) = (3.0 * t).sin_cos();
    let pos = [
        1.5 * s05 + 0.8 * s15 + 0.3 * s3,
        1.5 * c05 + 0.8 * c15 + 0.3 * s3,
        1.5 + 0.5 * s05 + 0.3 * s15,
    ];
    let vel = [
        0.75 * c05 + 1.2 * c15 + 0.9 * c3,
        -0.75 * s05 - 1.2 * s15 + 0.9 * c3,
        0.25 * c05 + 0.45 * c15,
    ];
    let acc = [
        -0.375 * s05 - 1.8 * s15 - 2.7 * s3,
        -0.375 * c05 - 1.8 * c15 - 2.7 * s3,
        -0.125 * s05 - 0.675 * s15,
    ];
    RefSample { pos, vel, acc, psi: PI / 6.0 * t.sin(), psi_rate: PI / 6.0 * t.cos() }
}

/// Horizontal circle of `radius` at height `height` about `center`,
/// counter-clockwise with the given period, starting on the +x side.
pub fn circle_reference(t: f64, center: [f64; 2], radius: f64, height: f64, period: f64) -> [f64; 3] {
    let w = 2.0 * PI / period;
    let (s, c) = (w * t).sin_cos();
    [center[0] + radius * c, center[1] + radius * s, height]
}

/// Closed-loop PD flight sampled every `dt` for `t_final`; the controller
/// output is held over each sample interval, integrated with `substeps` RK4
/// steps. Starts on the reference at level attitude.
pub fn simulate_pd_flight(
    params: &QuadrotorParams,
    gains: &PdGains,
    reference: impl Fn(f64) -> RefSample,
    t_final: f64,
    dt: f64,
    substeps: usize,
) -> Result<TimeSeries> {
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || substeps == 0 {
        return Err(Error::InvalidGrid(format!("T = {t_final}, dt = {dt}")));
    }
    let plant = Quadrotor { params: *params };
    let r0 = reference(0.0);
    let mut x = hover_state(r0.pos);
    x[3..6].copy_from_slice(&r0.vel);
    let mut states = DMatrix::zeros(steps + 1, STATE_DIM);
    let mut inputs = DMatrix::zeros(steps + 1, INPUT_DIM);
    let mut ws = Rk4::new(STATE_DIM);
    let h = dt / substeps as f64;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let u = pd_controller(params, gains, &x, &reference(t));
        for i in 0..STATE_DIM {
            states[(k, i)] = x[i];
        }
        for i in 0..INPUT_DIM {
            inputs[(k, i)] = u[i];
        }
        if k == steps {
            break;
        }
        for _ in 0..substeps {
            ws.step(&plant, &mut x, &u, h);
            let n = x[6..10].iter().map(|v| v * v).sum::<f64>().sqrt();
            x[6..10].iter_mut().for_each(|v| *v /= n);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged(t + dt));
        }
    }
    TimeSeries::uniform(0.0, dt, states, inputs)
}

/// Quadrotor model with known kinematics (ṗ = v, quaternion rates) and
/// identified translational and rotational accelerations.
#[derive(Debug, Clone)]
pub struct IdentifiedQuadrotor {
    tr_library: FunctionLibrary,
    tr_coefficients: DMatrix<f64>,
    ro_library: FunctionLibrary,
    ro_coefficients: DMatrix<f64>,
}

impl IdentifiedQuadrotor {
    /// Coefficient matrices are J×3 over the standard drone libraries.
    pub fn new(tr_coefficients: DMatrix<f64>, ro_coefficients: DMatrix<f64>) -> Result<Self> {
        let tr_library = build_drone_translational_library();
        let ro_library = build_drone_rotational_library();
        if tr_coefficients.shape() != (tr_library.len(), 3) || ro_coefficients.shape() != (ro_library.len(), 3) {
            return Err(Error::DimensionMismatch("drone coefficient shapes".into()));
        }
        Ok(Self { tr_library, tr_coefficients, ro_library, ro_coefficients })
    }

    /// Exact coefficients of the rigid-body model in the library basis.
    pub fn exact(params: &QuadrotorParams) -> Self {
        let mut tr = DMatrix::zeros(13, 3);
        for i in 0..3 {
            tr[(i, i)] = 1.0 / params.mass;
        }
        tr[(3, 2)] = -params.g;
        let [ixx, iyy, izz] = params.inertia;
        let mut ro = DMatrix::zeros(13, 3);
        ro[(0, 0)] = 1.0 / ixx;
        ro[(1, 1)] = 1.0 / iyy;
        ro[(2, 2)] = 1.0 / izz;
        ro[(5, 0)] = (iyy - izz) / ixx; // qr
        ro[(4, 1)] = (izz - ixx) / iyy; // pr
        ro[(3, 2)] = (ixx - iyy) / izz; // pq
        Self::new(tr, ro).expect("library sizes are fixed")
    }

    pub fn translational(&self) -> (&FunctionLibrary, &DMatrix<f64>) {
        (&self.tr_library, &self.tr_coefficients)
    }

    pub fn rotational(&self) -> (&FunctionLibrary, &DMatrix<f64>) {
        (&self.ro_library, &self.ro_coefficients)
    }
}

fn accumulate(lib: &FunctionLibrary, w: &DMatrix<f64>, x: &[f64], u: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, term) in lib.terms().iter().enumerate() {
        if (0..3).all(|c| w[(j, c)] == 0.0) {
            continue;
        }
        let th = term.evaluate(x, u);
        for c in 0..3 {
            out[c] += th * w[(j, c)];
        }
    }
}

impl Rhs for IdentifiedQuadrotor {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }
    fn input_dim(&self) -> usize {
        INPUT_DIM
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = x[3];
        dx[1] = x[4];
        dx[2] = x[5];
        accumulate(&self.tr_library, &self.tr_coefficients, x, u, &mut dx[3..6]);
        quat_kinematics(&x[6..10], &x[10..13], &mut dx[6..10]);
        accumulate(&self.ro_library, &self.ro_coefficients, x, u, &mut dx[10..13]);
    }
    fn quaternion_block(&self) -> Option<usize> {
        Some(QUAT_OFFSET)
    }
}

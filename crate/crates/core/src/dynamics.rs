//! Right-hand sides, fixed-step RK4 integration and the substepped forward
//! operator used by the controller.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::funclib::{FunctionLibrary, LibrarySpec};

/// Largest state magnitude accepted before a trajectory is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Continuous-time vector field ẋ = f(x, u).
pub trait Rhs: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]);

    /// Offset of a 4-entry unit-quaternion block in the state, if any.
    fn quaternion_block(&self) -> Option<usize> {
        None
    }
}

/// Closure-backed right-hand side.
pub struct FnRhs<F> {
    d: usize,
    v: usize,
    f: F,
}

impl<F> FnRhs<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(state_dim: usize, input_dim: usize, f: F) -> Self {
        Self { d: state_dim, v: input_dim, f }
    }
}

impl<F> Rhs for FnRhs<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.d
    }
    fn input_dim(&self) -> usize {
        self.v
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        (self.f)(x, u, dx)
    }
}

impl<T: Rhs + ?Sized> Rhs for Arc<T> {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        (**self).eval(x, u, dx)
    }
    fn quaternion_block(&self) -> Option<usize> {
        (**self).quaternion_block()
    }
}

/// ẋ = Θ(x, u)·W over a fitted library.
#[derive(Clone, Debug)]
pub struct IdentifiedModel {
    library: FunctionLibrary,
    coefficients: DMatrix<f64>,
    quaternion: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct StoredModel {
    library: LibrarySpec,
    terms: Vec<String>,
    coefficients: Vec<Vec<f64>>,
    quaternion: Option<usize>,
}

impl IdentifiedModel {
    /// `coefficients` is J×D with D equal to the library state dimension.
    pub fn new(library: FunctionLibrary, coefficients: DMatrix<f64>) -> Result<Self> {
        if coefficients.nrows() != library.len() || coefficients.ncols() != library.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "coefficients {}x{} for library of {} terms over {} states",
                coefficients.nrows(),
                coefficients.ncols(),
                library.len(),
                library.state_dim()
            )));
        }
        Ok(Self { library, coefficients, quaternion: None })
    }

    pub fn with_quaternion_block(mut self, offset: usize) -> Self {
        self.quaternion = Some(offset);
        self
    }

    pub fn library(&self) -> &FunctionLibrary {
        &self.library
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    /// ẋ estimate at one point.
    pub fn eval_model(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.library.state_dim() || u.len() != self.library.input_dim() {
            return Err(Error::DimensionMismatch("state/input length".into()));
        }
        let mut dx = vec![0.0; x.len()];
        self.eval(x, u, &mut dx);
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput("identified model".into()));
        }
        Ok(dx)
    }

    pub fn to_json(&self) -> Result<String> {
        let stored = StoredModel {
            library: self.library.spec().clone(),
            terms: self.library.names(),
            coefficients: (0..self.coefficients.nrows())
                .map(|j| self.coefficients.row(j).iter().copied().collect())
                .collect(),
            quaternion: self.quaternion,
        };
        serde_json::to_string_pretty(&stored).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stored: StoredModel = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let library = FunctionLibrary::from_spec(&stored.library)?;
        if library.names() != stored.terms {
            return Err(Error::Parse("stored term names do not match the rebuilt library".into()));
        }
        let j = stored.coefficients.len();
        let d = library.state_dim();
        let flat: Vec<f64> = stored.coefficients.iter().flatten().copied().collect();
        if flat.len() != j * d {
            return Err(Error::Parse("ragged coefficient table".into()));
        }
        let model = Self::new(library, DMatrix::from_row_slice(j, d, &flat))?;
        Ok(match stored.quaternion {
            Some(q) => model.with_quaternion_block(q),
            None => model,
        })
    }
}

impl Rhs for IdentifiedModel {
    fn state_dim(&self) -> usize {
        self.library.state_dim()
    }
    fn input_dim(&self) -> usize {
        self.library.input_dim()
    }
    fn eval(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx.iter_mut().for_each(|v| *v = 0.0);
        let d = dx.len();
        for (j, term) in self.library.terms().iter().enumerate() {
            let mut active = false;
            for c in 0..d {
                if self.coefficients[(j, c)] != 0.0 {
                    active = true;
                    break;
                }
            }
            if !active {
                continue;
            }
            let th = term.evaluate(x, u);
            for (c, out) in dx.iter_mut().enumerate() {
                *out += th * self.coefficients[(j, c)];
            }
        }
    }
    fn quaternion_block(&self) -> Option<usize> {
        self.quaternion
    }
}

/// Scratch buffers for allocation-free RK4 steps.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    /// One classical RK4 step in place with `u` held.
    pub fn step<R: Rhs + ?Sized>(&mut self, rhs: &R, x: &mut [f64], u: &[f64], h: f64) {
        self.step_varying(rhs, x, [u, u, u], h)
    }

    /// One RK4 step with separate input samples at t, t+h/2 and t+h.
    pub fn step_varying<R: Rhs + ?Sized>(&mut self, rhs: &R, x: &mut [f64], u: [&[f64]; 3], h: f64) {
        let n = x.len();
        rhs.eval(x, u[0], &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        rhs.eval(&self.tmp, u[1], &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        rhs.eval(&self.tmp, u[1], &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        rhs.eval(&self.tmp, u[2], &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn check_state(x: &[f64], t: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(Error::Diverged(t));
    }
    Ok(())
}

pub(crate) fn renormalize_quaternion(x: &mut [f64], offset: usize) -> Result<()> {
    let q = &mut x[offset..offset + 4];
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroQuaternion);
    }
    q.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

/// Single RK4 step with zero-order-hold input.
pub fn rk4_step<R: Rhs + ?Sized>(rhs: &R, x: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidGrid(format!("step size {h}")));
    }
    if x.len() != rhs.state_dim() || u.len() != rhs.input_dim() {
        return Err(Error::DimensionMismatch("state/input length".into()));
    }
    let mut out = x.to_vec();
    Rk4::new(x.len()).step(rhs, &mut out, u, h);
    check_state(&out, h)?;
    Ok(out)
}

/// A model that is already discrete in time, advanced one native step at a time.
pub trait DiscreteMap: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Native step length.
    fn dt(&self) -> f64;
    fn step(&self, x: &mut [f64], u: &[f64]);
}

#[derive(Clone)]
enum Stepper {
    Ode(Arc<dyn Rhs>),
    Map(Arc<dyn DiscreteMap>),
}

/// Discrete map x⁺ = F(x, u): `n_substeps` RK4 steps of `dt_model` with `u`
/// fixed, or `n_substeps` native steps of a discrete model.
#[derive(Clone)]
pub struct ForwardOperator {
    stepper: Stepper,
    dt_model: f64,
    n_substeps: usize,
}

impl std::fmt::Debug for ForwardOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardOperator")
            .field("dt_model", &self.dt_model)
            .field("n_substeps", &self.n_substeps)
            .finish()
    }
}

fn substeps(ts: f64, dt: f64) -> Result<usize> {
    if !(ts > 0.0) || !(dt > 0.0) {
        return Err(Error::Config(format!("Ts = {ts}, dt_model = {dt}")));
    }
    Ok(((ts / dt).round() as usize).max(1))
}

impl ForwardOperator {
    /// Substep count is `round(ts / dt_model)`, at least one.
    pub fn new(rhs: Arc<dyn Rhs>, ts: f64, dt_model: f64) -> Result<Self> {
        let n = substeps(ts, dt_model)?;
        Ok(Self { stepper: Stepper::Ode(rhs), dt_model, n_substeps: n })
    }

    pub fn with_substeps(rhs: Arc<dyn Rhs>, dt_model: f64, n_substeps: usize) -> Result<Self> {
        if !(dt_model > 0.0) || n_substeps == 0 {
            return Err(Error::Config(format!("dt_model = {dt_model}, n_substeps = {n_substeps}")));
        }
        Ok(Self { stepper: Stepper::Ode(rhs), dt_model, n_substeps })
    }

    /// Wraps a discrete model; one update covers `round(ts / map.dt())` native steps.
    pub fn discrete(map: Arc<dyn DiscreteMap>, ts: f64) -> Result<Self> {
        let dt = map.dt();
        let n = substeps(ts, dt)?;
        Ok(Self { stepper: Stepper::Map(map), dt_model: dt, n_substeps: n })
    }

    /// The continuous right-hand side, if the model has one.
    pub fn rhs(&self) -> Option<&Arc<dyn Rhs>> {
        match &self.stepper {
            Stepper::Ode(r) => Some(r),
            Stepper::Map(_) => None,
        }
    }

    pub fn quaternion_block(&self) -> Option<usize> {
        self.rhs().and_then(|r| r.quaternion_block())
    }

    pub fn dt_model(&self) -> f64 {
        self.dt_model
    }

    pub fn n_substeps(&self) -> usize {
        self.n_substeps
    }

    pub fn state_dim(&self) -> usize {
        match &self.stepper {
            Stepper::Ode(r) => r.state_dim(),
            Stepper::Map(m) => m.state_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.stepper {
            Stepper::Ode(r) => r.input_dim(),
            Stepper::Map(m) => m.input_dim(),
        }
    }

    /// Applies the operator in place using caller-owned scratch space.
    pub fn step_in_place(&self, ws: &mut Rk4, x: &mut [f64], u: &[f64]) -> Result<()> {
        match &self.stepper {
            Stepper::Ode(rhs) => {
                let q = rhs.quaternion_block();
                for s in 0..self.n_substeps {
                    ws.step(&**rhs, x, u, self.dt_model);
                    if let Some(off) = q {
                        renormalize_quaternion(x, off)?;
                    }
                    check_state(x, (s + 1) as f64 * self.dt_model)?;
                }
            }
            Stepper::Map(m) => {
                for s in 0..self.n_substeps {
                    m.step(x, u);
                    check_state(x, (s + 1) as f64 * self.dt_model)?;
                }
            }
        }
        Ok(())
    }

    pub fn forward_step(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_dim() || u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch("state/input length".into()));
        }
        let mut out = x.to_vec();
        self.step_in_place(&mut Rk4::new(x.len()), &mut out, u)?;
        Ok(out)
    }
}

/// How the input signal is sampled inside an integration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputHold {
    /// Sampled at each substep start and held.
    Zoh,
    /// Sampled at the RK4 stage times.
    Continuous,
}

/// Open-loop trajectory sampled every `dt`, integrating with `substeps` RK4
/// steps per sample. Inputs are recorded at the sample times.
pub fn simulate_substepped<R, S>(
    rhs: &R,
    x0: &[f64],
    signal: S,
    t_final: f64,
    dt: f64,
    substeps: usize,
    hold: InputHold,
) -> Result<TimeSeries>
where
    R: Rhs + ?Sized,
    S: Fn(f64) -> Vec<f64>,
{
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::InvalidGrid(format!("dt = {dt}, substeps = {substeps}")));
    }
    let steps_f = t_final / dt;
    let steps = steps_f.round();
    if (steps - steps_f).abs() > 1e-9 * steps.max(1.0) || steps < 1.0 {
        return Err(Error::InvalidGrid(format!("T = {t_final} is not a multiple of dt = {dt}")));
    }
    let steps = steps as usize;
    let d = rhs.state_dim();
    let v = rhs.input_dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch("initial state length".into()));
    }
    let h = dt / substeps as f64;
    let q = rhs.quaternion_block();
    let mut states = DMatrix::zeros(steps + 1, d);
    let mut inputs = DMatrix::zeros(steps + 1, v);
    let mut x = x0.to_vec();
    let mut ws = Rk4::new(d);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let uk = signal(t);
        if uk.len() != v {
            return Err(Error::DimensionMismatch("input signal length".into()));
        }
        for i in 0..d {
            states[(k, i)] = x[i];
        }
        for i in 0..v {
            inputs[(k, i)] = uk[i];
        }
        if k == steps {
            break;
        }
        for s in 0..substeps {
            let ts = t + s as f64 * h;
            match hold {
                InputHold::Zoh => {
                    let u = if s == 0 { uk.clone() } else { signal(ts) };
                    ws.step(rhs, &mut x, &u, h);
                }
                InputHold::Continuous => {
                    let u0 = signal(ts);
                    let um = signal(ts + 0.5 * h);
                    let u1 = signal(ts + h);
                    ws.step_varying(rhs, &mut x, [&u0, &um, &u1], h);
                }
            }
            if let Some(off) = q {
                renormalize_quaternion(&mut x, off)?;
            }
            check_state(&x, ts + h)?;
        }
    }
    TimeSeries::uniform(0.0, dt, states, inputs)
}

/// Open-loop RK4 trajectory with one step per sample and zero-order hold.
pub fn simulate<R, S>(rhs: &R, x0: &[f64], signal: S, t_final: f64, dt: f64) -> Result<TimeSeries>
where
    R: Rhs + ?Sized,
    S: Fn(f64) -> Vec<f64>,
{
    simulate_substepped(rhs, x0, signal, t_final, dt, 1, InputHold::Zoh)
}

/// Rolls a discrete operator forward over a given input sequence, returning
/// `inputs.len() + 1` states.
pub fn rollout(op: &ForwardOperator, x0: &[f64], inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    let mut x = x0.to_vec();
    let mut ws = Rk4::new(x.len());
    out.push(x.clone());
    for u in inputs {
        op.step_in_place(&mut ws, &mut x, u)?;
        out.push(x.clone());
    }
    Ok(out)
}

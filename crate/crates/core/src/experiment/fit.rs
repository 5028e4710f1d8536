use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::json;

use super::config::{DmdcOptions, Method, WeakOptions};
use crate::baselines::{dmdc_fit, LinearModel};
use crate::data::TimeSeries;
use crate::dynamics::{ForwardOperator, IdentifiedModel, Rhs};
use crate::error::{Error, Result};
use crate::funclib::{evaluate, symbolic_model, FunctionLibrary};
use crate::plants::IdentifiedQuadrotor;
use crate::regression::{
    ensemble_fit_with, mstls, stls_fixed, strong_form_problem, EnsembleConfig, RegressionProblem, SparseFit,
    DEFAULT_STLS_THRESHOLD,
};
use crate::weakform::{assemble_weak_form, default_support, make_test_function};

/// Everything a sparse fit needs besides the data and library.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Threshold of the strong-form methods.
    pub stls_threshold: f64,
    pub weak: WeakOptions,
    pub ensemble: EnsembleConfig,
    pub dmdc: DmdcOptions,
    /// DMDc works in deviations from this state.
    pub dmdc_shift: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            stls_threshold: DEFAULT_STLS_THRESHOLD,
            weak: WeakOptions::default(),
            ensemble: EnsembleConfig::default(),
            dmdc: DmdcOptions::default(),
            dmdc_shift: None,
        }
    }
}

/// Regression problem for the chosen method: weak (test-function
/// integrated) or strong (finite-difference) form.
pub fn build_problem(method: Method, lib: &FunctionLibrary, ts: &TimeSeries, dims: &[usize], weak: &WeakOptions) -> Result<RegressionProblem> {
    let theta = evaluate(lib, ts)?;
    if method.is_weak() {
        let m = if weak.support == 0 { default_support(ts.len(), ts.dt())? } else { weak.support };
        let tf = make_test_function(m, weak.degree, ts.dt())?;
        let wf = assemble_weak_form(&theta, ts.states(), &tf, dims)?;
        RegressionProblem::new(wf.g, wf.b)
    } else {
        strong_form_problem(&theta, ts.states(), ts.dt(), dims)
    }
}

/// Sparse fit of the state derivatives `dims` over `lib`. Weak-form methods
/// select λ by MSTLS; strong-form methods threshold at `stls_threshold`.
pub fn fit_sparse(method: Method, lib: &FunctionLibrary, ts: &TimeSeries, dims: &[usize], opts: &FitOptions) -> Result<SparseFit> {
    if method == Method::Dmdc {
        return Err(Error::Config("dmdc is not a sparse-regression method".into()));
    }
    let problem = build_problem(method, lib, ts, dims, &opts.weak)?;
    let fixed = (!method.is_weak()).then_some(opts.stls_threshold);
    match (method.is_ensemble(), fixed) {
        (true, f) => ensemble_fit_with(&problem, &opts.ensemble, f),
        (false, Some(l)) => stls_fixed(&problem, l),
        (false, None) => mstls(&problem),
    }
}

/// An identified model in one of the three forms the benchmarks use.
#[derive(Clone)]
pub enum FittedModel {
    /// Polynomial (or custom-library) ODE.
    Sparse { model: IdentifiedModel, fit: SparseFit },
    /// Quadrotor with identified translational and rotational accelerations.
    Drone { model: IdentifiedQuadrotor, translational: SparseFit, rotational: SparseFit },
    Linear(LinearModel),
}

impl std::fmt::Debug for FittedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FittedModel::Sparse { fit, .. } => f.debug_struct("Sparse").field("support", &fit.support).finish(),
            FittedModel::Drone { translational, rotational, .. } => f
                .debug_struct("Drone")
                .field("translational", &translational.support)
                .field("rotational", &rotational.support)
                .finish(),
            FittedModel::Linear(m) => f.debug_struct("Linear").field("rank", &m.rank).finish(),
        }
    }
}

impl FittedModel {
    /// Discrete forward operator over one update interval `ts`.
    pub fn operator(&self, ts: f64, dt_model: f64) -> Result<ForwardOperator> {
        match self {
            FittedModel::Sparse { model, .. } => ForwardOperator::new(Arc::new(model.clone()), ts, dt_model),
            FittedModel::Drone { model, .. } => ForwardOperator::new(Arc::new(model.clone()), ts, dt_model),
            FittedModel::Linear(m) => ForwardOperator::discrete(Arc::new(m.clone()), ts),
        }
    }

    /// Continuous right-hand side, absent for DMDc.
    pub fn rhs(&self) -> Option<Arc<dyn Rhs>> {
        match self {
            FittedModel::Sparse { model, .. } => Some(Arc::new(model.clone())),
            FittedModel::Drone { model, .. } => Some(Arc::new(model.clone())),
            FittedModel::Linear(_) => None,
        }
    }

    pub fn linear(&self) -> Option<&LinearModel> {
        match self {
            FittedModel::Linear(m) => Some(m),
            _ => None,
        }
    }

    /// Number of nonzero coefficients.
    pub fn n_terms(&self) -> usize {
        let nnz = |w: &DMatrix<f64>| w.iter().filter(|v| **v != 0.0).count();
        match self {
            FittedModel::Sparse { fit, .. } => nnz(&fit.w),
            FittedModel::Drone { translational, rotational, .. } => nnz(&translational.w) + nnz(&rotational.w),
            FittedModel::Linear(m) => nnz(&m.a) + nnz(&m.bm),
        }
    }

    /// Human-readable equations.
    pub fn symbolic(&self, state_names: &[String]) -> String {
        match self {
            FittedModel::Sparse { model, .. } => symbolic_model(model.library(), model.coefficients(), state_names),
            FittedModel::Drone { model, .. } => {
                let (tl, tw) = model.translational();
                let (rl, rw) = model.rotational();
                let tn: Vec<String> = state_names[3..6].to_vec();
                let rn: Vec<String> = state_names[10..13].to_vec();
                format!("{}\n{}", symbolic_model(tl, tw, &tn), symbolic_model(rl, rw, &rn))
            }
            FittedModel::Linear(m) => {
                let mut s = String::from("x+ - s = A (x - s) + B u\nA =\n");
                for i in 0..m.a.nrows() {
                    let row: Vec<String> = m.a.row(i).iter().map(|v| format!("{v:.6e}")).collect();
                    s += &format!("  [{}]\n", row.join(", "));
                }
                s += "B =\n";
                for i in 0..m.bm.nrows() {
                    let row: Vec<String> = m.bm.row(i).iter().map(|v| format!("{v:.6e}")).collect();
                    s += &format!("  [{}]\n", row.join(", "));
                }
                s
            }
        }
    }

    /// Serialized model.
    pub fn to_json(&self) -> Result<String> {
        let v = match self {
            FittedModel::Sparse { model, .. } => return model.to_json(),
            FittedModel::Drone { model, .. } => {
                let part = |lib: &FunctionLibrary, w: &DMatrix<f64>| {
                    json!({
                        "terms": lib.names(),
                        "rows": (0..w.nrows()).map(|j| w.row(j).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                    })
                };
                let (tl, tw) = model.translational();
                let (rl, rw) = model.rotational();
                json!({ "kind": "quadrotor", "translational": part(tl, tw), "rotational": part(rl, rw) })
            }
            FittedModel::Linear(m) => serde_json::to_value(m).map_err(|e| Error::Parse(e.to_string()))?,
        };
        serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Fit report (λ*, supports, loss curves) as JSON.
    pub fn report(&self) -> serde_json::Value {
        match self {
            FittedModel::Sparse { model, fit } => fit.report(&model.library().names()),
            FittedModel::Drone { model, translational, rotational } => json!({
                "translational": translational.report(&model.translational().0.names()),
                "rotational": rotational.report(&model.rotational().0.names()),
            }),
            FittedModel::Linear(m) => json!({ "rank": m.rank, "dt": m.dt, "shift": m.shift }),
        }
    }
}

/// Fits every state derivative over one library (Lorenz, F-8, plasma).
pub fn fit_model(method: Method, lib: &FunctionLibrary, ts: &TimeSeries, opts: &FitOptions) -> Result<FittedModel> {
    if method == Method::Dmdc {
        return Ok(FittedModel::Linear(dmdc_fit(ts, opts.dmdc_shift.as_deref(), opts.dmdc.rank)?));
    }
    let dims: Vec<usize> = (0..ts.state_dim()).collect();
    let fit = fit_sparse(method, lib, ts, &dims, opts)?;
    let model = IdentifiedModel::new(lib.clone(), fit.w.clone())?;
    Ok(FittedModel::Sparse { model, fit })
}

/// Quadrotor fit: velocity derivatives over the translational library and
/// body-rate derivatives over the rotational library; kinematics are known.
pub fn fit_drone(method: Method, ts: &TimeSeries, opts: &FitOptions) -> Result<FittedModel> {
    if method == Method::Dmdc {
        return Ok(FittedModel::Linear(dmdc_fit(ts, opts.dmdc_shift.as_deref(), opts.dmdc.rank)?));
    }
    let tl = crate::funclib::build_drone_translational_library();
    let rl = crate::funclib::build_drone_rotational_library();
    let translational = fit_sparse(method, &tl, ts, &[3, 4, 5], opts)?;
    let rotational = fit_sparse(method, &rl, ts, &[10, 11, 12], opts)?;
    let model = IdentifiedQuadrotor::new(translational.w.clone(), rotational.w.clone())?;
    Ok(FittedModel::Drone { model, translational, rotational })
}

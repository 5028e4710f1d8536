//! Candidate-function libraries Θ(x, u).
//!
//! A library is an ordered list of scalar terms over the concatenated variable
//! vector `[x_1..x_D, u_1..u_V]`. Polynomial libraries are ordered by total
//! degree and then by descending lexicographic exponent tuple, so that
//! `[1, x1, x2, u1, x1^2, x1*x2, ...]` is stable across builds and coefficient
//! matrices from different runs line up row for row.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::plants::quadrotor::{self, quat_to_rotmat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermKind {
    Constant,
    Monomial,
    InputMonomial,
    Cross,
    Custom,
}

/// Structural description of a term: its kind and per-variable powers over
/// `[x, u]`. Custom terms carry the powers of the variables they touch when
/// that is meaningful, zeros otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermTag {
    pub kind: TermKind,
    pub exponents: Vec<u32>,
}

pub type CustomFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum TermEval {
    /// (variable index into [x, u], power)
    Monomial(Vec<(usize, u32)>),
    Custom(CustomFn),
}

#[derive(Clone)]
pub struct Term {
    name: String,
    tag: TermTag,
    eval: TermEval,
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Term").field("name", &self.name).field("tag", &self.tag).finish()
    }
}

impl Term {
    /// Monomial with the given powers over `[x, u]`.
    pub fn monomial(exponents: Vec<u32>, state_dim: usize, var_names: &[String]) -> Self {
        let factors: Vec<(usize, u32)> =
            exponents.iter().enumerate().filter(|(_, e)| **e > 0).map(|(i, e)| (i, *e)).collect();
        let has_x = factors.iter().any(|(i, _)| *i < state_dim);
        let has_u = factors.iter().any(|(i, _)| *i >= state_dim);
        let kind = match (has_x, has_u) {
            (false, false) => TermKind::Constant,
            (true, false) => TermKind::Monomial,
            (false, true) => TermKind::InputMonomial,
            (true, true) => TermKind::Cross,
        };
        let name = if factors.is_empty() {
            "1".to_string()
        } else {
            factors
                .iter()
                .map(|(i, e)| if *e == 1 { var_names[*i].clone() } else { format!("{}^{}", var_names[*i], e) })
                .collect::<Vec<_>>()
                .join("*")
        };
        Self { name, tag: TermTag { kind, exponents }, eval: TermEval::Monomial(factors) }
    }

    /// Arbitrary term, e.g. trigonometric or physics-informed products.
    pub fn custom(name: impl Into<String>, n_vars: usize, f: CustomFn) -> Self {
        Self {
            name: name.into(),
            tag: TermTag { kind: TermKind::Custom, exponents: vec![0; n_vars] },
            eval: TermEval::Custom(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tag(&self) -> &TermTag {
        &self.tag
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64], u: &[f64]) -> f64 {
        match &self.eval {
            TermEval::Monomial(factors) => {
                let d = x.len();
                let mut v = 1.0;
                for &(i, e) in factors {
                    let base = if i < d { x[i] } else { u[i - d] };
                    v *= if e == 1 { base } else { base.powi(e as i32) };
                }
                v
            }
            TermEval::Custom(f) => f(x, u),
        }
    }
}

/// How a library was built; enough to rebuild it after deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LibrarySpec {
    Polynomial { state_dim: usize, input_dim: usize, degree: u32 },
    PolynomialLinearInputs { state_dim: usize, input_dim: usize, degree: u32 },
    DroneTranslational,
    DroneRotational,
    Subset { base: Box<LibrarySpec>, indices: Vec<usize> },
    Custom,
}

#[derive(Clone, Debug)]
pub struct FunctionLibrary {
    terms: Vec<Term>,
    state_dim: usize,
    input_dim: usize,
    spec: LibrarySpec,
}

fn default_names(d: usize, v: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).chain((1..=v).map(|i| format!("u{i}"))).collect()
}

/// All exponent tuples of length `n` with total degree exactly `deg`, in
/// descending lexicographic order.
fn exponent_tuples(n: usize, deg: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return if deg == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=deg).rev() {
        for mut rest in exponent_tuples(n - 1, deg - first) {
            let mut t = Vec::with_capacity(n);
            t.push(first);
            t.append(&mut rest);
            out.push(t);
        }
    }
    out
}

impl FunctionLibrary {
    pub fn new(terms: Vec<Term>, state_dim: usize, input_dim: usize) -> Result<Self> {
        Self::with_spec(terms, state_dim, input_dim, LibrarySpec::Custom)
    }

    fn with_spec(terms: Vec<Term>, state_dim: usize, input_dim: usize, spec: LibrarySpec) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("library must contain at least one term".into()));
        }
        let mut names: Vec<&str> = terms.iter().map(|t| t.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("library term names must be unique".into()));
        }
        Ok(Self { terms, state_dim, input_dim, spec })
    }

    /// Rebuilds a library from its spec. Custom libraries cannot be rebuilt.
    pub fn from_spec(spec: &LibrarySpec) -> Result<Self> {
        match spec {
            LibrarySpec::Polynomial { state_dim, input_dim, degree } => {
                build_poly_library(*state_dim, *input_dim, *degree)
            }
            LibrarySpec::PolynomialLinearInputs { state_dim, input_dim, degree } => {
                build_poly_library_linear_inputs(*state_dim, *input_dim, *degree)
            }
            LibrarySpec::DroneTranslational => Ok(build_drone_translational_library()),
            LibrarySpec::DroneRotational => Ok(build_drone_rotational_library()),
            LibrarySpec::Subset { base, indices } => Self::from_spec(base)?.select(indices),
            LibrarySpec::Custom => Err(Error::Config("custom libraries cannot be rebuilt from a spec".into())),
        }
    }

    pub fn spec(&self) -> &LibrarySpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.name == name)
    }

    /// Sub-library keeping `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|i| *i >= self.len()) {
            return Err(Error::DimensionMismatch("term index out of range".into()));
        }
        let terms = indices.iter().map(|i| self.terms[*i].clone()).collect();
        let spec = match self.spec {
            LibrarySpec::Custom => LibrarySpec::Custom,
            _ => LibrarySpec::Subset { base: Box::new(self.spec.clone()), indices: indices.to_vec() },
        };
        Self::with_spec(terms, self.state_dim, self.input_dim, spec)
    }

    /// Appends a custom term (e.g. `sin(x1)`); the result is no longer rebuildable from a spec.
    pub fn with_custom_term(mut self, name: impl Into<String>, f: CustomFn) -> Result<Self> {
        let n = self.state_dim + self.input_dim;
        self.terms.push(Term::custom(name, n, f));
        Self::with_spec(self.terms, self.state_dim, self.input_dim, LibrarySpec::Custom)
    }

    /// Θ(x, u) for a single point.
    pub fn evaluate_point(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.evaluate(x, u);
        }
    }
}

/// Monomials in (x, u) of total degree ≤ `degree`, constant included.
pub fn build_poly_library(state_dim: usize, input_dim: usize, degree: u32) -> Result<FunctionLibrary> {
    if degree < 1 {
        return Err(Error::Config("polynomial degree must be >= 1".into()));
    }
    let names = default_names(state_dim, input_dim);
    let n = state_dim + input_dim;
    let terms = (0..=degree)
        .flat_map(|deg| exponent_tuples(n, deg))
        .map(|e| Term::monomial(e, state_dim, &names))
        .collect();
    FunctionLibrary::with_spec(terms, state_dim, input_dim, LibrarySpec::Polynomial { state_dim, input_dim, degree })
}

/// State monomials up to `degree` plus each input entering linearly (no
/// input powers, no state-input products).
pub fn build_poly_library_linear_inputs(
    state_dim: usize,
    input_dim: usize,
    degree: u32,
) -> Result<FunctionLibrary> {
    let full = build_poly_library(state_dim, input_dim, degree)?;
    let terms = full
        .terms
        .into_iter()
        .filter(|t| {
            let input_deg: u32 = t.tag.exponents[state_dim..].iter().sum();
            let state_deg: u32 = t.tag.exponents[..state_dim].iter().sum();
            input_deg == 0 || (input_deg == 1 && state_deg == 0)
        })
        .collect();
    FunctionLibrary::with_spec(
        terms,
        state_dim,
        input_dim,
        LibrarySpec::PolynomialLinearInputs { state_dim, input_dim, degree },
    )
}

fn drone_var_names() -> Vec<String> {
    quadrotor::STATE_NAMES.iter().chain(quadrotor::INPUT_NAMES.iter()).map(|s| s.to_string()).collect()
}

/// Monomials up to degree 2 in the variables `vars` (indices into `[x, u]`),
/// constant first, skipping any names already present in `existing`.
fn quadratic_monomials(vars: &[usize], n_vars: usize, state_dim: usize, existing: &[String]) -> Vec<Term> {
    let names = drone_var_names();
    let mut out = Vec::new();
    for deg in 0..=2u32 {
        for e in exponent_tuples(vars.len(), deg) {
            let mut full = vec![0u32; n_vars];
            for (k, &v) in vars.iter().enumerate() {
                full[v] = e[k];
            }
            let term = Term::monomial(full, state_dim, &names);
            if !existing.iter().any(|n| n == term.name()) {
                out.push(term);
            }
        }
    }
    out
}

/// Translational-acceleration library over the 13-state quadrotor layout
/// `[p(3), v(3), q(4), ω(3)]` with inputs `[F, Mx, My, Mz]`:
/// `[R13·F, R23·F, R33·F, 1, vx, vy, vz, vx^2, vx*vy, vx*vz, vy^2, vy*vz, vz^2]`
/// (13 terms). Rotation entries come from the (renormalized) quaternion.
pub fn build_drone_translational_library() -> FunctionLibrary {
    let d = quadrotor::STATE_DIM;
    let n = d + quadrotor::INPUT_DIM;
    let mut terms = Vec::new();
    for (row, name) in ["R13*F", "R23*F", "R33*F"].iter().enumerate() {
        let f: CustomFn = Arc::new(move |x: &[f64], u: &[f64]| {
            let q = [x[6], x[7], x[8], x[9]];
            match quat_to_rotmat(&q) {
                Ok(r) => r[row][2] * u[0],
                Err(_) => f64::NAN,
            }
        });
        terms.push(Term::custom(*name, n, f));
    }
    let names: Vec<String> = terms.iter().map(|t| t.name.clone()).collect();
    terms.extend(quadratic_monomials(&[3, 4, 5], n, d, &names));
    FunctionLibrary::with_spec(terms, d, quadrotor::INPUT_DIM, LibrarySpec::DroneTranslational)
        .expect("drone translational library is well formed")
}

/// Rotational-dynamics library:
/// `[Mx, My, Mz, p*q, p*r, q*r, 1, p, q, r, p^2, q^2, r^2]` (13 terms).
pub fn build_drone_rotational_library() -> FunctionLibrary {
    let d = quadrotor::STATE_DIM;
    let n = d + quadrotor::INPUT_DIM;
    let names = drone_var_names();
    let mut terms = Vec::new();
    for m in 0..3 {
        let mut e = vec![0u32; n];
        e[d + 1 + m] = 1;
        terms.push(Term::monomial(e, d, &names));
    }
    for (a, b) in [(10, 11), (10, 12), (11, 12)] {
        let mut e = vec![0u32; n];
        e[a] = 1;
        e[b] = 1;
        terms.push(Term::monomial(e, d, &names));
    }
    let existing: Vec<String> = terms.iter().map(|t| t.name.clone()).collect();
    terms.extend(quadratic_monomials(&[10, 11, 12], n, d, &existing));
    FunctionLibrary::with_spec(terms, d, quadrotor::INPUT_DIM, LibrarySpec::DroneRotational)
        .expect("drone rotational library is well formed")
}

/// Θ(X, U): N×J matrix of term values at every sample.
pub fn evaluate(lib: &FunctionLibrary, ts: &TimeSeries) -> Result<DMatrix<f64>> {
    if ts.state_dim() != lib.state_dim() || ts.input_dim() != lib.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "library over ({}, {}) evaluated on series ({}, {})",
            lib.state_dim(),
            lib.input_dim(),
            ts.state_dim(),
            ts.input_dim()
        )));
    }
    let n = ts.len();
    let j = lib.len();
    let mut theta = DMatrix::zeros(n, j);
    let mut x = vec![0.0; ts.state_dim()];
    let mut u = vec![0.0; ts.input_dim()];
    for k in 0..n {
        for (i, v) in x.iter_mut().enumerate() {
            *v = ts.states()[(k, i)];
        }
        for (i, v) in u.iter_mut().enumerate() {
            *v = ts.inputs()[(k, i)];
        }
        for (c, term) in lib.terms.iter().enumerate() {
            let v = term.evaluate(&x, &u);
            if !v.is_finite() {
                return Err(Error::NonFiniteOutput(format!("term `{}` at sample {k}", term.name)));
            }
            theta[(k, c)] = v;
        }
    }
    Ok(theta)
}

/// Formats `v` with `sig` significant digits, like C's `%g`.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if exp < -4 || exp >= sig as i32 {
        let m = format!("{:.*e}", sig - 1, v);
        let (mant, e) = m.split_once('e').unwrap();
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let f = format!("{:.*}", decimals, v);
        if f.contains('.') {
            f.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            f
        }
    };
    s
}

/// `d<target>/dt = c1*name1 + c2*name2 + ...`, one line per column of `w`,
/// coefficients at 6 significant digits; zero coefficients omitted.
pub fn symbolic_model(lib: &FunctionLibrary, w: &DMatrix<f64>, targets: &[String]) -> String {
    let mut lines = Vec::new();
    for (d, target) in targets.iter().enumerate().take(w.ncols()) {
        let parts: Vec<String> = (0..lib.len())
            .filter(|j| w[(*j, d)] != 0.0)
            .map(|j| format!("{}*{}", fmt_sig(w[(j, d)], 6), lib.terms[j].name))
            .collect();
        let rhs = if parts.is_empty() { "0".to_string() } else { parts.join(" + ") };
        lines.push(format!("d{target}/dt = {rhs}"));
    }
    lines.join("\n")
}

/// Default target labels `x_1..x_D`.
pub fn default_targets(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x_{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
    }

    #[test]
    fn poly_library_shapes_and_order() {
        let lib = build_poly_library(1, 0, 2).unwrap();
        assert_eq!(lib.names(), vec!["1", "x1", "x1^2"]);
        let lib = build_poly_library(2, 2, 1).unwrap();
        assert_eq!(lib.names(), vec!["1", "x1", "x2", "u1", "u2"]);
        let lib = build_poly_library(3, 1, 2).unwrap();
        assert_eq!(lib.len(), 15);
        // Independent count of degree <= 2 monomials in 4 variables.
        let mut count = 0;
        for a in 0..=2 {
            for b in 0..=2 {
                for c in 0..=2 {
                    for d in 0..=2 {
                        if a + b + c + d <= 2 {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(count, 15);
        for (d, v, deg) in [(2, 1, 3), (4, 0, 2), (3, 2, 3)] {
            let lib = build_poly_library(d, v, deg).unwrap();
            assert_eq!(lib.len() as u64, binom((d + v) as u64 + deg as u64, deg as u64));
        }
        let a = build_poly_library(3, 1, 3).unwrap().names();
        let b = build_poly_library(3, 1, 3).unwrap().names();
        assert_eq!(a, b);
    }

    #[test]
    fn linear_input_library() {
        let lib = build_poly_library_linear_inputs(3, 1, 2).unwrap();
        assert_eq!(lib.len(), 11);
        assert_eq!(&lib.names()[..5], &["1", "x1", "x2", "x3", "u1"]);
        assert!(lib.index_of("x1*u1").is_none());
    }

    #[test]
    fn evaluation_examples() {
        let lib = build_poly_library(1, 0, 1).unwrap();
        let ts = TimeSeries::uniform(
            0.0,
            1.0,
            DMatrix::from_column_slice(2, 1, &[2.0, 5.0]),
            DMatrix::zeros(2, 0),
        )
        .unwrap();
        let theta = evaluate(&lib, &ts).unwrap();
        assert_eq!(theta.column(0).as_slice(), &[1.0, 1.0]);
        assert_eq!(theta.column(1).as_slice(), &[2.0, 5.0]);

        let lib = build_poly_library(1, 1, 2).unwrap();
        let j = lib.index_of("x1*u1").unwrap();
        assert_eq!(lib.terms()[j].evaluate(&[3.0], &[4.0]), 12.0);

        let lib = build_poly_library(3, 1, 2).unwrap();
        let s = 72f64.sqrt();
        let j = lib.index_of("x1*x2").unwrap();
        assert!((lib.terms()[j].evaluate(&[-s, -s, 27.0], &[0.0]) - 72.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_bad_dims_and_nonfinite() {
        let lib = build_poly_library(2, 0, 1).unwrap();
        let ts = TimeSeries::uniform(0.0, 1.0, DMatrix::zeros(3, 1), DMatrix::zeros(3, 0)).unwrap();
        assert!(matches!(evaluate(&lib, &ts), Err(Error::DimensionMismatch(_))));
        let lib = build_poly_library(1, 0, 1)
            .unwrap()
            .with_custom_term("1/x1", Arc::new(|x: &[f64], _: &[f64]| 1.0 / x[0]))
            .unwrap();
        assert!(matches!(evaluate(&lib, &ts), Err(Error::NonFiniteOutput(_))));
    }

    #[test]
    fn drone_translational_terms() {
        let lib = build_drone_translational_library();
        assert_eq!(lib.len(), 13);
        let mut x = [0.0; 13];
        x[6] = 1.0;
        let mut out = vec![0.0; 13];
        lib.evaluate_point(&x, &[1.0, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(&out[..3], &[0.0, 0.0, 1.0]);
        assert_eq!(out[3], 1.0);
        assert!(out[4..].iter().all(|v| *v == 0.0));
        let mg = 1.3 * 9.81;
        lib.evaluate_point(&x, &[mg, 0.0, 0.0, 0.0], &mut out);
        assert_eq!(out[2], mg);
        assert_eq!(lib.names()[3..7], ["1", "vx", "vy", "vz"]);
    }

    #[test]
    fn drone_rotational_terms() {
        let lib = build_drone_rotational_library();
        assert_eq!(lib.len(), 13);
        assert_eq!(lib.names()[..10], ["Mx", "My", "Mz", "p*q", "p*r", "q*r", "1", "p", "q", "r"]);
        let mut x = [0.0; 13];
        x[6] = 1.0;
        x[10] = 1.0;
        x[11] = 1.0;
        let mut out = vec![0.0; 13];
        lib.evaluate_point(&x, &[0.0; 4], &mut out);
        assert_eq!(&out[3..6], &[1.0, 0.0, 0.0]);
        x[10] = 0.0;
        x[11] = 0.0;
        lib.evaluate_point(&x, &[0.0, 1.0, 2.0, 3.0], &mut out);
        assert_eq!(&out[..3], &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn spec_roundtrip_and_subset() {
        let lib = build_poly_library_linear_inputs(3, 1, 2).unwrap();
        let sub = lib.select(&[1, 4, 7]).unwrap();
        let rebuilt = FunctionLibrary::from_spec(sub.spec()).unwrap();
        assert_eq!(rebuilt.names(), sub.names());
        let json = serde_json::to_string(sub.spec()).unwrap();
        let spec: LibrarySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(&spec, sub.spec());
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(fmt_sig(10.0, 6), "10");
        assert_eq!(fmt_sig(-8.0 / 3.0, 6), "-2.66667");
        assert_eq!(fmt_sig(1.234567e-7, 6), "1.23457e-7");
        assert_eq!(fmt_sig(28.000001, 6), "28");
        let lib = build_poly_library(1, 0, 1).unwrap();
        let w = DMatrix::from_column_slice(2, 1, &[0.0, -1.0]);
        assert_eq!(symbolic_model(&lib, &w, &default_targets(1)), "dx_1/dt = -1*x1");
    }
}

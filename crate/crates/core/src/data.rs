//! Time-series containers, synthetic measurement noise, CSV ingestion and
//! channel normalization.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled state and input trajectories.
///
/// `states` is N×D and `inputs` is N×V (V may be zero). Rows are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    states: DMatrix<f64>,
    inputs: DMatrix<f64>,
    dt: f64,
}

fn grid_tolerance(dt: f64, times: &[f64]) -> f64 {
    let tmax = times.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    1e-12 * dt + 8.0 * f64::EPSILON * tmax
}

impl TimeSeries {
    /// Builds a series from explicit sample times. The spacing of the first two
    /// samples defines `dt`; every other spacing must match it to rounding.
    pub fn new(times: Vec<f64>, states: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        let n = times.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if states.nrows() != n || inputs.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} times, {} state rows, {} input rows",
                n,
                states.nrows(),
                inputs.nrows()
            )));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("non-increasing times (dt = {dt})")));
        }
        let tol = grid_tolerance(dt, &times);
        for k in 1..n {
            let spacing = times[k] - times[k - 1];
            if (spacing - dt).abs() > tol {
                return Err(Error::NonUniformGrid { row: k, spacing, dt });
            }
        }
        Ok(Self { times, states, inputs, dt })
    }

    /// Builds the grid `t0 + k·dt`.
    pub fn uniform(t0: f64, dt: f64, states: DMatrix<f64>, inputs: DMatrix<f64>) -> Result<Self> {
        let times = (0..states.nrows()).map(|k| t0 + k as f64 * dt).collect();
        Self::new(times, states, inputs)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn duration(&self) -> f64 {
        self.times[self.len() - 1] - self.times[0]
    }

    pub fn state_row(&self, k: usize) -> Vec<f64> {
        self.states.row(k).iter().copied().collect()
    }

    pub fn input_row(&self, k: usize) -> Vec<f64> {
        self.inputs.row(k).iter().copied().collect()
    }

    /// Same grid and inputs with replaced states.
    pub fn with_states(&self, states: DMatrix<f64>) -> Result<Self> {
        Self::new(self.times.clone(), states, self.inputs.clone())
    }

    /// Contiguous sub-series over sample indices `range`.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start >= range.end {
            return Err(Error::DimensionMismatch(format!(
                "slice {:?} of series with {} samples",
                range,
                self.len()
            )));
        }
        let rows = range.end - range.start;
        Self::new(
            self.times[range.clone()].to_vec(),
            self.states.rows(range.start, rows).into_owned(),
            self.inputs.rows(range.start, rows).into_owned(),
        )
    }

    /// Loads a CSV with header `t,x1..xD,u1..uV`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
        if cols.first().map(String::as_str) != Some("t") {
            return Err(Error::Parse("first column must be `t`".into()));
        }
        let mut d = 0;
        let mut v = 0;
        for (i, name) in cols.iter().enumerate().skip(1) {
            let expected_x = format!("x{}", d + 1);
            let expected_u = format!("u{}", v + 1);
            if v == 0 && *name == expected_x {
                d += 1;
            } else if *name == expected_u {
                v += 1;
            } else {
                return Err(Error::Parse(format!("unexpected column `{name}` at position {i}")));
            }
        }
        let mut times = Vec::new();
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 1 + d + v {
                return Err(Error::Parse(format!("row {}: expected {} fields, got {}", row + 1, 1 + d + v, rec.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: `{}`: {e}", row + 1, s)))
            };
            times.push(parse(&rec[0])?);
            for i in 0..d {
                xs.push(parse(&rec[1 + i])?);
            }
            for i in 0..v {
                us.push(parse(&rec[1 + d + i])?);
            }
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid("non-increasing times".into()));
        }
        for k in 1..n {
            let spacing = times[k] - times[k - 1];
            if ((spacing - dt) / dt).abs() > 1e-6 {
                return Err(Error::NonUniformGrid { row: k, spacing, dt });
            }
        }
        let states = DMatrix::from_row_slice(n, d, &xs);
        let inputs = DMatrix::from_row_slice(n, v, &us);
        // Tolerance on read is looser than on construction; keep the parsed times.
        Ok(Self { times, states, inputs, dt })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.state_dim()).map(|i| format!("x{i}")));
        header.extend((1..=self.input_dim()).map(|i| format!("u{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut rec = vec![format!("{}", self.times[k])];
            rec.extend(self.states.row(k).iter().map(|v| format!("{v}")));
            rec.extend(self.inputs.row(k).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Unbiased sample standard deviation of every state channel.
pub fn std_per_dim(ts: &TimeSeries) -> Result<Vec<f64>> {
    column_std(ts.states())
}

pub(crate) fn column_std(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    (0..m.ncols())
        .map(|i| {
            let col = m.column(i);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            let std = (ss / (n - 1) as f64).sqrt();
            if !(std > 1e-14 * mean.abs()) {
                Err(Error::ConstantChannel(i))
            } else {
                Ok(std)
            }
        })
        .collect()
}

/// Relative noise magnitude: σ_i = η_i · std(x_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eta {
    Shared(f64),
    PerDim(Vec<f64>),
}

impl Eta {
    pub fn for_dim(&self, i: usize) -> f64 {
        match self {
            Eta::Shared(e) => *e,
            Eta::PerDim(v) => v[i],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Eta::Shared(e) => *e == 0.0,
            Eta::PerDim(v) => v.iter().all(|e| *e == 0.0),
        }
    }
}

/// Gaussian measurement-noise specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub eta: Eta,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(eta: f64, seed: u64) -> Self {
        Self { eta: Eta::Shared(eta), seed }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match &self.eta {
            Eta::Shared(e) if *e < 0.0 || !e.is_finite() => Err(Error::Config(format!("eta must be >= 0, got {e}"))),
            Eta::PerDim(v) if v.len() != d => {
                Err(Error::DimensionMismatch(format!("{} eta values for {} states", v.len(), d)))
            }
            Eta::PerDim(v) if v.iter().any(|e| *e < 0.0 || !e.is_finite()) => {
                Err(Error::Config("eta must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Per-channel σ given the clean training series.
    pub fn sigmas(&self, ts: &TimeSeries) -> Result<Vec<f64>> {
        self.validate(ts.state_dim())?;
        if self.eta.is_zero() {
            return Ok(vec![0.0; ts.state_dim()]);
        }
        let std = std_per_dim(ts)?;
        Ok(std.iter().enumerate().map(|(i, s)| self.eta.for_dim(i) * s).collect())
    }
}

/// Returns `Y = X + E` with `E[k,i] ~ N(0, (η_i·std_i)²)`. Inputs are untouched.
pub fn add_noise(ts: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries> {
    let sigmas = spec.sigmas(ts)?;
    if sigmas.iter().all(|s| *s == 0.0) {
        return Ok(ts.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut states = ts.states().clone();
    for k in 0..ts.len() {
        for (i, s) in sigmas.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            states[(k, i)] += s * z;
        }
    }
    ts.with_states(states)
}

/// Streaming feedback corruption `y = x + ε` used inside closed-loop runs.
#[derive(Debug, Clone)]
pub struct FeedbackNoise {
    sigmas: Vec<f64>,
    rng: ChaCha8Rng,
}

impl FeedbackNoise {
    pub fn new(sigmas: Vec<f64>, seed: u64) -> Self {
        Self { sigmas, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn none(d: usize) -> Self {
        Self::new(vec![0.0; d], 0)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn corrupt(&mut self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.sigmas)
            .map(|(v, s)| {
                if *s == 0.0 {
                    *v
                } else {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    v + s * z
                }
            })
            .collect()
    }
}

/// Positive per-channel divisors applied by [`normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScales {
    pub state_scales: Vec<f64>,
    pub input_scales: Vec<f64>,
}

impl NormalizationScales {
    pub fn new(state_scales: Vec<f64>, input_scales: Vec<f64>) -> Result<Self> {
        if state_scales.iter().chain(&input_scales).any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("normalization scales must be positive and finite".into()));
        }
        Ok(Self { state_scales, input_scales })
    }

    /// Plasma boundary convention: separatrix density by 1e16, inverse divertor
    /// temperature by 1e-4, gas-puff rate by 1e18.
    pub fn plasma() -> Self {
        Self { state_scales: vec![1e16, 1e-4], input_scales: vec![1e18] }
    }

    fn check(&self, ts: &TimeSeries) -> Result<()> {
        if self.state_scales.len() != ts.state_dim() || self.input_scales.len() != ts.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "scales ({}, {}) for series ({}, {})",
                self.state_scales.len(),
                self.input_scales.len(),
                ts.state_dim(),
                ts.input_dim()
            )));
        }
        Ok(())
    }
}

fn scale_columns(ts: &TimeSeries, scales: &NormalizationScales, divide: bool) -> Result<TimeSeries> {
    scales.check(ts)?;
    let mut x = ts.states().clone();
    let mut u = ts.inputs().clone();
    for (i, s) in scales.state_scales.iter().enumerate() {
        x.column_mut(i).apply(|v| *v = if divide { *v / s } else { *v * s });
    }
    for (i, s) in scales.input_scales.iter().enumerate() {
        u.column_mut(i).apply(|v| *v = if divide { *v / s } else { *v * s });
    }
    Ok(TimeSeries { times: ts.times.clone(), states: x, inputs: u, dt: ts.dt })
}

/// Divides every state and input column by its scale.
pub fn normalize(ts: &TimeSeries, scales: &NormalizationScales) -> Result<TimeSeries> {
    scale_columns(ts, scales, true)
}

pub fn denormalize(ts: &TimeSeries, scales: &NormalizationScales) -> Result<TimeSeries> {
    scale_columns(ts, scales, false)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::benchmarks::{control_metrics, failed_metrics, identify, predict_validation, scenario, state_names, BenchmarkData};
use super::config::{Benchmark, ExperimentConfig, Method};
use super::fit::FittedModel;
use crate::data::{add_noise, FeedbackNoise, NoiseSpec, TimeSeries};
use crate::error::{Error, Result};
use crate::metrics::{prediction_horizon, summarize, SweepSummary};
use crate::mpc::{receding_horizon_run, ControlLog};

const PURPOSE_TRAIN: u64 = 1;
const PURPOSE_FEEDBACK: u64 = 2;
const PURPOSE_ENSEMBLE: u64 = 3;

/// Reproducible per-realization seed, independent of method and scheduling.
pub fn derive_seed(base: u64, purpose: u64, sweep_idx: usize, realization: usize) -> u64 {
    let mut h = Sha256::new();
    for v in [base, purpose, sweep_idx as u64, realization as u64] {
        h.update(v.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Use the true plant as the prediction model in closed loop.
    pub oracle: bool,
    /// Where to write results; nothing is written when absent.
    pub out: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 1, oracle: false, out: None }
    }
}

/// One sweep point: a noise level, or a training length at the single noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub eta: f64,
    pub length: Option<usize>,
}

impl SweepPoint {
    pub fn value(&self) -> f64 {
        self.length.map_or(self.eta, |n| n as f64)
    }
}

pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    if cfg.data_lengths.is_empty() {
        cfg.noise_levels.iter().enumerate().map(|(index, &eta)| SweepPoint { index, eta, length: None }).collect()
    } else {
        let eta = cfg.noise_levels[0];
        cfg.data_lengths.iter().enumerate().map(|(index, &n)| SweepPoint { index, eta, length: Some(n) }).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Task {
    method: Option<Method>,
    point: SweepPoint,
    realization: usize,
}

impl Task {
    fn method_name(&self) -> &'static str {
        self.method.map_or("oracle", Method::name)
    }

    fn tag(&self) -> String {
        format!("{}_s{:02}_r{:03}", self.method_name(), self.point.index, self.realization)
    }
}

fn tasks(cfg: &ExperimentConfig, methods: &[Option<Method>]) -> Vec<Task> {
    let mut out = Vec::new();
    for m in methods {
        for point in sweep_points(cfg) {
            for realization in 0..cfg.realizations {
                out.push(Task { method: *m, point, realization });
            }
        }
    }
    out
}

fn noisy_training(cfg: &ExperimentConfig, data: &BenchmarkData, t: &Task) -> Result<TimeSeries> {
    let clean = data.training_prefix(t.point.length)?;
    let seed = derive_seed(cfg.seed, PURPOSE_TRAIN, t.point.index, t.realization);
    add_noise(&clean, &NoiseSpec::new(t.point.eta, seed))
}

fn fit_task(cfg: &ExperimentConfig, data: &BenchmarkData, t: &Task, method: Method) -> Result<FittedModel> {
    let ts = noisy_training(cfg, data, t)?;
    let mut c = cfg.clone();
    c.ensemble.seed = derive_seed(cfg.seed, PURPOSE_ENSEMBLE, t.point.index, t.realization);
    identify(&c, method, &ts)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn status(r: &Result<()>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(e) => e.to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn write_summary(path: &Path, rows: &[SweepSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall time of one stage of one realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub method: String,
    pub sweep_value: f64,
    pub realization: usize,
    pub stage: String,
    pub wall_ms: f64,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyRow {
    pub method: String,
    pub sweep_value: f64,
    pub realization: usize,
    pub n_terms: Option<usize>,
    pub status: String,
}

#[derive(Debug, Clone, Default)]
pub struct IdentifyOutput {
    pub rows: Vec<IdentifyRow>,
    /// Symbolic model per task tag, for successful fits.
    pub models: BTreeMap<String, String>,
    pub timings: Vec<Timing>,
}

/// Fits every (method, sweep point, realization) and writes the models,
/// their symbolic form and fit reports.
pub fn run_identify(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<IdentifyOutput> {
    cfg.validate()?;
    let data = BenchmarkData::generate(cfg)?;
    let methods: Vec<Option<Method>> = cfg.methods.iter().map(|m| Some(*m)).collect();
    let all = tasks(cfg, &methods);
    let model_dir = opts.out.as_ref().map(|o| o.join("models"));
    if let Some(d) = &model_dir {
        fs::create_dir_all(d)?;
    }
    let results: Vec<(IdentifyRow, Option<String>, Timing)> = pool(opts.workers)?.install(|| {
        all.par_iter()
            .map(|t| {
                let start = Instant::now();
                let fitted = fit_task(cfg, &data, t, t.method.expect("method"));
                let names = state_names(cfg.benchmark, data.train.state_dim());
                let mut text = None;
                let written = fitted.as_ref().map_err(Clone::clone).and_then(|m| {
                    let s = m.symbolic(&names);
                    if let Some(d) = &model_dir {
                        fs::write(d.join(format!("{}.json", t.tag())), m.to_json()?)?;
                        fs::write(d.join(format!("{}.txt", t.tag())), &s)?;
                        let report = serde_json::to_string_pretty(&m.report()).map_err(|e| Error::Parse(e.to_string()))?;
                        fs::write(d.join(format!("{}_report.json", t.tag())), report)?;
                    }
                    text = Some(s);
                    Ok(())
                });
                let row = IdentifyRow {
                    method: t.method_name().into(),
                    sweep_value: t.point.value(),
                    realization: t.realization,
                    n_terms: fitted.as_ref().ok().map(FittedModel::n_terms),
                    status: status(&written),
                };
                let timing = Timing {
                    method: row.method.clone(),
                    sweep_value: row.sweep_value,
                    realization: t.realization,
                    stage: "identify".into(),
                    wall_ms: ms(start),
                };
                (row, text, timing)
            })
            .collect()
    });
    let mut out = IdentifyOutput::default();
    for ((row, text, timing), t) in results.into_iter().zip(&all) {
        if let Some(s) = text {
            out.models.insert(t.tag(), s);
        }
        out.rows.push(row);
        out.timings.push(timing);
    }
    if let Some(dir) = &opts.out {
        let mut w = csv_writer(&dir.join("identify.csv"))?;
        w.write_record(["method", "sweep_value", "realization", "n_terms", "status"])?;
        for r in &out.rows {
            let nt = r.n_terms.map_or(String::new(), |n| n.to_string());
            w.write_record([r.method.clone(), fmt_f64(r.sweep_value), r.realization.to_string(), nt, r.status.clone()])?;
        }
        w.flush()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictRow {
    pub method: String,
    pub sweep_value: f64,
    pub realization: usize,
    /// Time until the prediction error first reaches eps; 0 when the fit failed.
    pub horizon: f64,
    pub status: String,
}

#[derive(Debug, Clone, Default)]
pub struct PredictOutput {
    pub rows: Vec<PredictRow>,
    pub summary: Vec<SweepSummary>,
    pub timings: Vec<Timing>,
}

/// Open-loop prediction horizons over the validation window (Lorenz).
pub fn run_predict(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PredictOutput> {
    cfg.validate()?;
    if cfg.benchmark != Benchmark::Lorenz {
        return Err(Error::Config(format!("predict is defined for the lorenz benchmark, not {}", cfg.benchmark.name())));
    }
    let data = BenchmarkData::generate(cfg)?;
    let truth = data.validation.clone().expect("lorenz validation");
    let methods: Vec<Option<Method>> = cfg.methods.iter().map(|m| Some(*m)).collect();
    let all = tasks(cfg, &methods);
    let results: Vec<(PredictRow, Timing)> = pool(opts.workers)?.install(|| {
        all.par_iter()
            .map(|t| {
                let start = Instant::now();
                let horizon = fit_task(cfg, &data, t, t.method.expect("method"))
                    .and_then(|m| predict_validation(&m, &truth))
                    .and_then(|p| prediction_horizon(&truth, &p, cfg.eps));
                let row = PredictRow {
                    method: t.method_name().into(),
                    sweep_value: t.point.value(),
                    realization: t.realization,
                    horizon: *horizon.as_ref().unwrap_or(&0.0),
                    status: status(&horizon.map(|_| ())),
                };
                let timing = Timing {
                    method: row.method.clone(),
                    sweep_value: row.sweep_value,
                    realization: t.realization,
                    stage: "predict".into(),
                    wall_ms: ms(start),
                };
                (row, timing)
            })
            .collect()
    });
    let mut out = PredictOutput::default();
    for (row, timing) in results {
        out.rows.push(row);
        out.timings.push(timing);
    }
    for m in &cfg.methods {
        for p in sweep_points(cfg) {
            let vals: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.method == m.name() && r.sweep_value == p.value())
                .filter(|r| !cfg.exclude_failed || r.status == "ok")
                .map(|r| r.horizon)
                .collect();
            out.summary.push(summarize(m.name(), p.value(), "prediction_horizon", &vals, None));
        }
    }
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
        let mut w = csv_writer(&dir.join("predict_raw.csv"))?;
        w.write_record(["method", "sweep_value", "realization", "horizon", "status"])?;
        for r in &out.rows {
            w.write_record([r.method.clone(), fmt_f64(r.sweep_value), r.realization.to_string(), fmt_f64(r.horizon), r.status.clone()])?;
        }
        w.flush()?;
        write_summary(&dir.join("predict_summary.csv"), &out.summary)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlRow {
    pub method: String,
    pub sweep_value: f64,
    pub realization: usize,
    pub metric: String,
    pub value: f64,
    /// Identification or closed-loop failure; the value is then the metric's worst case.
    pub failed: bool,
    pub status: String,
}

#[derive(Debug, Clone, Default)]
pub struct ControlOutput {
    pub rows: Vec<ControlRow>,
    pub summary: Vec<SweepSummary>,
    /// Closed-loop logs by task tag.
    pub logs: BTreeMap<String, ControlLog>,
    pub timings: Vec<Timing>,
}

type ControlResult = (Vec<ControlRow>, Option<ControlLog>, Vec<Timing>);

fn control_task(cfg: &ExperimentConfig, data: &BenchmarkData, t: &Task, log_dir: Option<&Path>) -> ControlResult {
    let start = Instant::now();
    let sc = scenario(cfg, data);
    let mut timings = Vec::new();
    let timing = |stage: &str, wall_ms: f64| Timing {
        method: t.method_name().into(),
        sweep_value: t.point.value(),
        realization: t.realization,
        stage: stage.into(),
        wall_ms,
    };
    let run = sc.and_then(|sc| {
        let op = match t.method {
            None => sc.oracle_operator()?,
            Some(m) => fit_task(cfg, data, t, m)?.operator(sc.mpc.ts, sc.dt_model)?,
        };
        timings.push(timing("identify", ms(start)));
        let clean = data.training_prefix(t.point.length)?;
        let sigmas = NoiseSpec::new(t.point.eta, 0).sigmas(&clean)?;
        let mut noise = FeedbackNoise::new(sigmas, derive_seed(cfg.seed, PURPOSE_FEEDBACK, t.point.index, t.realization));
        let c0 = Instant::now();
        let reference = sc.reference.clone();
        let log = receding_horizon_run(&sc.plant, &op, &sc.mpc, &mut noise, &move |tt| reference(tt))?;
        timings.push(timing("control", ms(c0)));
        if let Some(d) = log_dir {
            log.save_csv(d.join(format!("{}.csv", t.tag())))?;
        }
        Ok((sc, log))
    });
    let base = |metric: &str, value: f64, failed: bool, status: String| ControlRow {
        method: t.method_name().into(),
        sweep_value: t.point.value(),
        realization: t.realization,
        metric: metric.into(),
        value,
        failed,
        status,
    };
    match run {
        Ok((sc, log)) => {
            let metrics = if log.failed { Err(Error::Diverged(log.t.last().copied().unwrap_or(0.0))) } else { control_metrics(cfg, &sc, &log) };
            let rows = match metrics {
                Ok(ms) => ms.iter().map(|m| base(m.name, m.value, false, "ok".into())).collect(),
                Err(e) => failed_metrics(cfg).iter().map(|m| base(m.name, m.value, true, e.to_string())).collect(),
            };
            (rows, Some(log), timings)
        }
        Err(e) => (failed_metrics(cfg).iter().map(|m| base(m.name, m.value, true, e.to_string())).collect(), None, timings),
    }
}

/// Closed-loop runs for every (method, sweep point, realization), or for the
/// true-plant model when `opts.oracle` is set.
pub fn run_control(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ControlOutput> {
    cfg.validate()?;
    let data = BenchmarkData::generate(cfg)?;
    let methods: Vec<Option<Method>> = if opts.oracle { vec![None] } else { cfg.methods.iter().map(|m| Some(*m)).collect() };
    let all = tasks(cfg, &methods);
    let log_dir = opts.out.as_ref().map(|o| o.join("logs"));
    if let Some(d) = &log_dir {
        fs::create_dir_all(d)?;
    }
    let results: Vec<ControlResult> =
        pool(opts.workers)?.install(|| all.par_iter().map(|t| control_task(cfg, &data, t, log_dir.as_deref())).collect());
    let mut out = ControlOutput::default();
    for ((rows, log, timings), t) in results.into_iter().zip(&all) {
        out.rows.extend(rows);
        out.timings.extend(timings);
        if let Some(l) = log {
            out.logs.insert(t.tag(), l);
        }
    }
    let rules = failed_metrics(cfg);
    for m in &methods {
        let name = m.map_or("oracle", Method::name);
        for p in sweep_points(cfg) {
            for rule in &rules {
                let vals: Vec<f64> = out
                    .rows
                    .iter()
                    .filter(|r| r.method == name && r.sweep_value == p.value() && r.metric == rule.name)
                    .filter(|r| !(cfg.exclude_failed && r.failed))
                    .map(|r| r.value)
                    .collect();
                let success = rule.success.map(|f| move |v: f64| f(v));
                out.summary.push(summarize(
                    name,
                    p.value(),
                    rule.name,
                    &vals,
                    success.as_ref().map(|f| f as &dyn Fn(f64) -> bool),
                ));
            }
        }
    }
    if let Some(dir) = &opts.out {
        let mut w = csv_writer(&dir.join("control_raw.csv"))?;
        w.write_record(["method", "sweep_value", "realization", "metric", "value", "failed", "status"])?;
        for r in &out.rows {
            w.write_record([
                r.method.clone(),
                fmt_f64(r.sweep_value),
                r.realization.to_string(),
                r.metric.clone(),
                fmt_f64(r.value),
                r.failed.to_string(),
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        write_summary(&dir.join("control_summary.csv"), &out.summary)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub predict: Option<PredictOutput>,
    pub control: ControlOutput,
}

/// Prediction (where defined) followed by closed-loop control.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let predict = if cfg.benchmark == Benchmark::Lorenz && !opts.oracle { Some(run_predict(cfg, opts)?) } else { None };
    let control = run_control(cfg, opts)?;
    Ok(SweepOutput { predict, control })
}

pub fn write_timings(path: &Path, timings: &[Timing]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for t in timings {
        w.serialize(t)?;
    }
    w.flush()?;
    Ok(())
}

fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// Run manifest: config hash, git revision, wall time and emitted files.
pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig, command: &str, opts: &RunOptions, wall_s: f64) -> Result<()> {
    let mut files: Vec<String> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if let Ok(rel) = p.strip_prefix(dir) {
                files.push(rel.display().to_string());
            }
        }
    }
    files.retain(|f| f != "manifest.json");
    files.sort();
    let m = json!({
        "command": command,
        "benchmark": cfg.benchmark.name(),
        "config_hash": cfg.hash()?,
        "git_revision": git_revision(),
        "seed": cfg.seed,
        "workers": opts.workers,
        "oracle": opts.oracle,
        "wall_time_s": wall_s,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_field() {
        let s = derive_seed(1, PURPOSE_TRAIN, 0, 0);
        assert_eq!(s, derive_seed(1, PURPOSE_TRAIN, 0, 0));
        for other in [derive_seed(2, PURPOSE_TRAIN, 0, 0), derive_seed(1, PURPOSE_FEEDBACK, 0, 0), derive_seed(1, PURPOSE_TRAIN, 1, 0), derive_seed(1, PURPOSE_TRAIN, 0, 1)] {
            assert_ne!(s, other);
        }
    }

    #[test]
    fn length_sweep_uses_single_noise_level() {
        let mut c = ExperimentConfig::default();
        c.noise_levels = vec![0.01];
        c.data_lengths = vec![100, 500];
        let p = sweep_points(&c);
        assert_eq!(p.len(), 2);
        assert_eq!((p[1].eta, p[1].value()), (0.01, 500.0));
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mpc::{MpcConfig, Obstacle, OutputBound};
use crate::regression::EnsembleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sindyc")]
    Sindyc,
    #[serde(rename = "wsindyc")]
    Wsindyc,
    #[serde(rename = "e-sindyc")]
    ESindyc,
    #[serde(rename = "e-wsindyc")]
    EWsindyc,
    #[serde(rename = "dmdc")]
    Dmdc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Sindyc, Method::Wsindyc, Method::ESindyc, Method::EWsindyc, Method::Dmdc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sindyc => "sindyc",
            Method::Wsindyc => "wsindyc",
            Method::ESindyc => "e-sindyc",
            Method::EWsindyc => "e-wsindyc",
            Method::Dmdc => "dmdc",
        }
    }

    pub fn is_weak(self) -> bool {
        matches!(self, Method::Wsindyc | Method::EWsindyc)
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, Method::ESindyc | Method::EWsindyc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}' (expected one of sindyc, wsindyc, e-sindyc, e-wsindyc, dmdc)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Lorenz,
    F8,
    Drone,
    External,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Lorenz => "lorenz",
            Benchmark::F8 => "f8",
            Benchmark::Drone => "drone",
            Benchmark::External => "external",
        }
    }
}

/// Test-function settings; `support = 0` picks the half support from the
/// record length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakOptions {
    pub support: usize,
    pub degree: u32,
}

impl Default for WeakOptions {
    fn default() -> Self {
        Self { support: 0, degree: crate::weakform::DEFAULT_DEGREE }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmdcOptions {
    /// Truncation rank; all retained singular values when absent.
    pub rank: Option<usize>,
}

/// Field-wise overrides of a benchmark's default controller.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcOverrides {
    pub mp: Option<usize>,
    pub mc: Option<usize>,
    pub ts: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub ru: Option<Vec<f64>>,
    pub rdu: Option<Vec<f64>>,
    pub u_min: Option<Vec<f64>>,
    pub u_max: Option<Vec<f64>>,
    pub du_min: Option<Vec<f64>>,
    pub du_max: Option<Vec<f64>>,
    pub output_bounds: Option<Vec<OutputBound>>,
    pub max_opt_iters: Option<usize>,
    pub penalty: Option<f64>,
}

impl MpcOverrides {
    pub fn apply(&self, mut c: MpcConfig) -> MpcConfig {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone(); })*};
        }
        set!(mp, mc, ts, q, ru, rdu, u_min, u_max, output_bounds, max_opt_iters, penalty);
        if self.du_min.is_some() {
            c.du_min = self.du_min.clone();
        }
        if self.du_max.is_some() {
            c.du_max = self.du_max.clone();
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchroederParams {
    pub amplitude: f64,
    pub harmonics: usize,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorenzSetup {
    pub dt_train: f64,
    pub t_train: f64,
    pub t_valid: f64,
    pub t_control: f64,
    pub x0: Vec<f64>,
    /// RK4 steps per sample for ground truth.
    pub truth_substeps: usize,
    pub input: SchroederParams,
    pub dt_model: f64,
    pub dt_plant: f64,
    pub mpc: MpcOverrides,
}

impl Default for SchroederParams {
    fn default() -> Self {
        Self { amplitude: 25.0, harmonics: 31, period: 10.0 }
    }
}

impl Default for LorenzSetup {
    fn default() -> Self {
        Self {
            dt_train: 1e-3,
            t_train: 10.0,
            t_valid: 10.0,
            t_control: 5.0,
            x0: vec![-8.0, 8.0, 27.0],
            truth_substeps: 10,
            input: SchroederParams::default(),
            dt_model: 1e-3,
            dt_plant: 1e-3,
            mpc: MpcOverrides::default(),
        }
    }
}

impl LorenzSetup {
    pub fn mpc_config(&self) -> MpcConfig {
        self.mpc.apply(MpcConfig::new(10, 10, 0.01, vec![1.0; 3], vec![0.001], vec![0.001], vec![-50.0], vec![50.0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct F8Setup {
    pub dt_train: f64,
    pub t_train: f64,
    pub t_control: f64,
    pub x0_train: Vec<f64>,
    pub x0_control: Vec<f64>,
    pub truth_substeps: usize,
    /// Training input: offset plus a Schroeder multisine.
    pub input_offset: f64,
    pub input: SchroederParams,
    pub library_degree: u32,
    pub dt_model: f64,
    pub dt_plant: f64,
    pub mpc: MpcOverrides,
}

impl Default for F8Setup {
    fn default() -> Self {
        Self {
            dt_train: 1e-3,
            t_train: 6.0,
            t_control: 6.0,
            x0_train: vec![0.0; 3],
            x0_control: vec![0.0; 3],
            truth_substeps: 10,
            input_offset: 0.0,
            input: SchroederParams { amplitude: 0.1, harmonics: 12, period: 3.0 },
            library_degree: 3,
            dt_model: 0.01,
            dt_plant: 1e-3,
            mpc: MpcOverrides::default(),
        }
    }
}

impl F8Setup {
    pub fn mpc_config(&self) -> MpcConfig {
        let mut c = MpcConfig::new(13, 13, 0.01, vec![25.0, 0.0, 0.0], vec![0.05], vec![0.05], vec![-0.3], vec![0.5]);
        c.du_min = Some(vec![-0.1]);
        c.du_max = Some(vec![0.1]);
        c.output_bounds = vec![OutputBound { state_index: 0, lo: -0.2, hi: 0.4 }];
        self.mpc.apply(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroneSetup {
    pub dt_train: f64,
    pub t_train: f64,
    pub truth_substeps: usize,
    pub t_control: f64,
    pub circle_center: [f64; 2],
    pub circle_radius: f64,
    pub circle_height: f64,
    pub circle_period: f64,
    pub obstacle_center: [f64; 3],
    pub obstacle_radius: f64,
    pub dmin: f64,
    pub q_obs: f64,
    pub dt_model: f64,
    pub dt_plant: f64,
    pub mpc: MpcOverrides,
}

impl Default for DroneSetup {
    fn default() -> Self {
        Self {
            dt_train: 0.01,
            t_train: 30.0,
            truth_substeps: 10,
            t_control: 10.0,
            circle_center: [0.0, 0.0],
            circle_radius: 1.2,
            circle_height: 1.5,
            circle_period: 10.0,
            obstacle_center: [0.0, 1.615, 1.5],
            obstacle_radius: 0.10,
            dmin: 0.35,
            q_obs: 1500.0,
            dt_model: 0.01,
            dt_plant: 0.005,
            mpc: MpcOverrides::default(),
        }
    }
}

impl DroneSetup {
    pub fn mpc_config(&self) -> MpcConfig {
        let q = [vec![250.0; 3], vec![1.0; 3], vec![10.0; 4], vec![0.1; 3]].concat();
        let mut c = MpcConfig::new(
            16,
            2,
            0.05,
            q,
            vec![0.02, 2.0, 2.0, 2.0],
            vec![0.03, 1.5, 1.5, 1.5],
            vec![0.0, -2.0, -2.0, -2.0],
            vec![20.0, 1.0, 1.0, 1.0],
        );
        c.obstacle = Some(Obstacle { center: self.obstacle_center, dmin: self.dmin, weight: self.q_obs });
        self.mpc.apply(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternalSetup {
    /// Physical-unit CSV (columns t, x1.., u1..); the synthetic surrogate when absent.
    pub csv: Option<PathBuf>,
    pub state_scales: Vec<f64>,
    pub input_scales: Vec<f64>,
    pub library_degree: u32,
    pub t_control: f64,
    pub reference_rel_amplitude: f64,
    pub reference_freq: f64,
    pub dt_model: f64,
    pub dt_plant: f64,
    pub mpc: MpcOverrides,
}

impl Default for ExternalSetup {
    fn default() -> Self {
        Self {
            csv: None,
            state_scales: vec![1e16, 1e-4],
            input_scales: vec![1e18],
            library_degree: 2,
            t_control: 0.3,
            reference_rel_amplitude: 0.05,
            reference_freq: 5.0,
            dt_model: 1e-4,
            dt_plant: 1e-4,
            mpc: MpcOverrides::default(),
        }
    }
}

impl ExternalSetup {
    pub fn mpc_config(&self) -> MpcConfig {
        self.mpc.apply(MpcConfig::new(10, 10, 0.025, vec![25.0, 0.0], vec![0.001], vec![0.001], vec![0.0], vec![6e3]))
    }
}

/// One experiment: a benchmark, the methods to compare, the noise levels and
/// the number of noise realizations per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub methods: Vec<Method>,
    pub noise_levels: Vec<f64>,
    pub realizations: usize,
    /// Training lengths (samples) for data-length sweeps.
    pub data_lengths: Vec<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Prediction-horizon tolerance.
    pub eps: f64,
    /// Drop diverged realizations from medians instead of counting them as worst case.
    pub exclude_failed: bool,
    /// Fixed threshold of SINDYc and E-SINDYc.
    pub stls_threshold: f64,
    pub weak: WeakOptions,
    pub ensemble: EnsembleConfig,
    pub dmdc: DmdcOptions,
    pub lorenz: LorenzSetup,
    pub f8: F8Setup,
    pub drone: DroneSetup,
    pub external: ExternalSetup,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: Benchmark::Lorenz,
            methods: vec![Method::Wsindyc],
            noise_levels: vec![0.0],
            realizations: 1,
            data_lengths: Vec::new(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            eps: 3.0,
            exclude_failed: false,
            stls_threshold: crate::regression::DEFAULT_STLS_THRESHOLD,
            weak: WeakOptions::default(),
            ensemble: EnsembleConfig::default(),
            dmdc: DmdcOptions::default(),
            lorenz: LorenzSetup::default(),
            f8: F8Setup::default(),
            drone: DroneSetup::default(),
            external: ExternalSetup::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Config("noise_levels must be a non-empty list of values >= 0".into()));
        }
        if !(self.stls_threshold >= 0.0) {
            return Err(Error::Config("stls_threshold must be >= 0".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if !self.data_lengths.is_empty() && self.noise_levels.len() != 1 {
            return Err(Error::Config("a data-length sweep takes exactly one noise level".into()));
        }
        if self.data_lengths.contains(&0) {
            return Err(Error::Config("data lengths must be positive".into()));
        }
        if self.weak.degree < 2 {
            return Err(Error::Config("test-function degree must be >= 2".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> Result<String> {
        let text = self.to_toml_string()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

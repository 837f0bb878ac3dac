//! Run configuration (TOML) and the reproducibility manifest derived from it.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use surfwave::analysis::NormLadder;
use surfwave::dispersion::PhysicalConfig;
use surfwave::kernels::KernelContext;
use surfwave::solver::{Formulation, SolverConfig};
use surfwave::spectral::{
    random_bandlimited, to_spectral, AmplitudeState, GridSpec, SpectralGrid,
};

use crate::exit::Failure;

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = concat!("surfwave-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_physical")]
    pub physical: PhysicalConfig,
    #[serde(default)]
    pub root: RootChoice,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialProfile,
    /// Authoritative norm ladder; copied into the solver settings.
    #[serde(default)]
    pub norms: NormLadder,
    #[serde(default)]
    pub fields: FieldsSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub bench: BenchSection,
}

fn default_physical() -> PhysicalConfig {
    PhysicalConfig { v1: 0.0, b1: 0.5, h1: 1.0, nu: 1.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootChoice {
    /// Position in the list printed by `roots` (ascending λ).
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_modes: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_modes: 256, length: 2.0 * PI }
    }
}

fn one() -> f64 {
    1.0
}
fn first_mode() -> i64 {
    1
}
fn bump_width() -> f64 {
    0.5
}
fn default_band() -> usize {
    8
}

/// Named initial profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `A cos(2π m θ / L)`.
    Cosine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "first_mode")]
        mode: i64,
    },
    /// `A sin(2π m θ / L)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "first_mode")]
        mode: i64,
    },
    /// `A exp(-((θ - L/2)/w)²)`, projected onto the resolved modes.
    GaussianBump {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "bump_width")]
        width: f64,
    },
    /// Uniformly random modes `1..=band` drawn from the run seed.
    RandomBandlimited {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_band")]
        band: usize,
    },
}

impl Default for InitialProfile {
    fn default() -> Self {
        InitialProfile::Cosine { amplitude: 1.0, mode: 1 }
    }
}

impl InitialProfile {
    pub fn build(&self, grid: &SpectralGrid, seed: u64) -> surfwave::Result<AmplitudeState> {
        match *self {
            InitialProfile::Cosine { amplitude, mode } => AmplitudeState::cosine(grid, amplitude, mode),
            InitialProfile::Sine { amplitude, mode } => AmplitudeState::sine(grid, amplitude, mode),
            InitialProfile::GaussianBump { amplitude, width } => {
                let c = 0.5 * grid.length();
                let v: Vec<f64> = grid
                    .theta()
                    .iter()
                    .map(|t| amplitude * (-((t - c) / width).powi(2)).exp())
                    .collect();
                let mut s = to_spectral(&v, grid)?;
                let ny = grid.nyquist_index();
                s.coeffs[ny] = Default::default();
                Ok(s)
            }
            InitialProfile::RandomBandlimited { amplitude, band } => {
                Ok(random_bandlimited(grid, band, seed)?.scaled(amplitude))
            }
        }
    }

    fn validate(&self, grid: &SpectralGrid) -> anyhow::Result<()> {
        let h = (grid.n_modes() / 2) as i64;
        match *self {
            InitialProfile::Cosine { amplitude, mode } | InitialProfile::Sine { amplitude, mode } => {
                if !amplitude.is_finite() {
                    bail!("initial amplitude must be finite");
                }
                if mode == 0 || mode.abs() >= h {
                    bail!("initial mode {mode} outside 1..{h}");
                }
            }
            InitialProfile::GaussianBump { amplitude, width } => {
                if !amplitude.is_finite() || !(width > 0.0 && width.is_finite()) {
                    bail!("gaussian-bump needs a finite amplitude and a positive width");
                }
            }
            InitialProfile::RandomBandlimited { amplitude, band } => {
                if !amplitude.is_finite() {
                    bail!("initial amplitude must be finite");
                }
                if band == 0 || band as i64 >= h {
                    bail!("band {band} outside 1..{h}");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldsSection {
    pub eta_min: f64,
    pub eta_max: f64,
    /// Number of `η` rows, spread evenly over `[eta_min, eta_max]`.
    pub rows: usize,
    /// Interface amplitude `ε` used for the interface curve.
    pub epsilon: f64,
    /// Depths used for the decay-rate fit.
    pub decay_depths: Vec<f64>,
}

impl Default for FieldsSection {
    fn default() -> Self {
        Self {
            eta_min: -2.0,
            eta_max: 2.0,
            rows: 41,
            epsilon: 0.01,
            decay_depths: vec![0.0, 0.5, 1.0],
        }
    }
}

impl FieldsSection {
    pub fn eta(&self) -> Vec<f64> {
        if self.rows == 1 {
            return vec![self.eta_min];
        }
        let h = (self.eta_max - self.eta_min) / (self.rows - 1) as f64;
        (0..self.rows).map(|i| self.eta_min + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub samples: usize,
    /// Vacuum decay factors at which the σ-dependent identities are checked.
    pub sigmas: Vec<f64>,
    pub n_modes: usize,
    pub random_states: usize,
    pub interpolation_states: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            samples: 100_000,
            sigmas: vec![0.1, 0.5, 1.0],
            n_modes: 64,
            random_states: 50,
            interpolation_states: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub sizes: Vec<usize>,
    /// Seconds spent per (path, size) cell.
    pub budget: f64,
    pub min_repetitions: usize,
    pub threads: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            sizes: vec![256, 1024, 4096],
            budget: 0.5,
            min_repetitions: 3,
            threads: 1,
        }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            physical: default_physical(),
            root: RootChoice::default(),
            grid: GridSection::default(),
            solver: SolverConfig::default(),
            initial: InitialProfile::default(),
            norms: NormLadder::default(),
            fields: FieldsSection::default(),
            verify: VerifySection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub formulation: Option<Formulation>,
    pub n_modes: Option<usize>,
    pub length: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
    pub snapshot_every: Option<u64>,
}

impl Config {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        Ok(cfg)
    }

    /// Reads `path` (defaults when `None`), applies overrides and validates.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, Failure> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .map_err(Failure::config)?;
                Config::parse(&text)
                    .with_context(|| format!("parsing {}", p.display()))
                    .map_err(Failure::config)?
            }
            None => Config::default(),
        };
        cfg.apply(ov);
        cfg.validate().map_err(Failure::config)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(f) = ov.formulation {
            self.solver.formulation = f;
        }
        if let Some(n) = ov.n_modes {
            self.grid.n_modes = n;
        }
        if let Some(l) = ov.length {
            self.grid.length = l;
        }
        if let Some(t) = ov.t_end {
            self.solver.t_end = t;
        }
        if let Some(s) = ov.seed {
            self.seed = s;
        }
        if let Some(s) = ov.snapshot_every {
            self.solver.snapshot_every = s;
        }
        self.solver.norms = self.norms.clone();
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        self.physical.validate()?;
        let grid = self.spectral_grid()?;
        self.solver.validate()?;
        if !(self.solver.t_end >= 0.0 && self.solver.t_end.is_finite()) {
            bail!("t_end must be finite and non-negative");
        }
        self.norms.validate()?;
        self.initial.validate(&grid)?;
        let f = &self.fields;
        if f.rows == 0 || !(f.eta_min <= f.eta_max) || !f.epsilon.is_finite() {
            bail!("fields: need rows >= 1, eta_min <= eta_max and a finite epsilon");
        }
        if f.decay_depths.len() < 2 {
            bail!("fields: decay_depths needs at least two depths");
        }
        for &s in &self.verify.sigmas {
            KernelContext::new(s)?;
        }
        if self.verify.samples == 0 || self.verify.random_states == 0 {
            bail!("verify: samples and random_states must be positive");
        }
        SpectralGrid::new(self.verify.n_modes, 2.0 * PI)?;
        if self.bench.sizes.is_empty() {
            bail!("bench: sizes must not be empty");
        }
        for &n in &self.bench.sizes {
            SpectralGrid::new(n, 2.0 * PI)?;
        }
        if !(self.bench.budget >= 0.0) || self.bench.threads == 0 {
            bail!("bench: budget must be non-negative and threads positive");
        }
        Ok(())
    }

    pub fn spectral_grid(&self) -> surfwave::Result<SpectralGrid> {
        SpectralGrid::new(self.grid.n_modes, self.grid.length)
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest::new(ManifestBody {
            physical: self.physical,
            chosen_root_index: self.root.index,
            grid: GridSpec { n_modes: self.grid.n_modes, length: self.grid.length },
            solver: self.solver.clone(),
            norms: self.norms.clone(),
            initial: self.initial.clone(),
            seed: self.seed,
            artifact_version: ARTIFACT_VERSION.to_string(),
        })
    }
}

/// Everything that affects a run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestBody {
    pub physical: PhysicalConfig,
    pub chosen_root_index: usize,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub norms: NormLadder,
    pub initial: InitialProfile,
    pub seed: u64,
    pub artifact_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Hex SHA-256 of the canonical JSON encoding of `body`.
    pub config_hash: String,
    #[serde(flatten)]
    pub body: ManifestBody,
}

impl RunManifest {
    pub fn new(body: ManifestBody) -> Self {
        let config_hash = hex::encode(hash_body(&body));
        Self { config_hash, body }
    }

    pub fn hash_bytes(&self) -> [u8; 32] {
        hash_body(&self.body)
    }
}

fn hash_body(body: &ManifestBody) -> [u8; 32] {
    let bytes = serde_json::to_vec(body).expect("manifest serialises");
    Sha256::digest(&bytes).into()
}

//! Experiment configuration, dispatch, persistence and parameter sweeps.
//!
//! A config is a TOML document:
//!
//! ```toml
//! task = "gap"            # gap | corr | lr | bell | split | sweep
//! seed = 7
//! output_dir = "out"
//!
//! [model]
//! kind = "xxz"            # heisenberg | xxz | fermion | custom
//! delta = 2.0
//!
//! [chain]
//! length = 12
//! boundary = "periodic"
//!
//! [task_parameters]
//! lengths = [8, 10, 12]
//! ```
//!
//! Every run is keyed by a SHA-256 digest of the resolved config (minus the
//! output directory) and the crate version. Records are written as
//! `<digest>.json` next to any CSV series, each through a temporary file
//! that is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bell::{bell_seesaw, BellOutcome};
use crate::clustering::{cj_scan, correlation_profile, decay_fit, default_window, CjBracket, CorrelationPoint, DecayFit};
use crate::dynamics::{light_cone_fit, lr_surface, write_light_cone_csv, LightConeFit, LightConeSample, LrGrid, LrOptions};
use crate::error::{Error, Result};
use crate::models::{build_hamiltonian, fermion_spec, heisenberg_spec, xxz_spec, ChainConfig, DensityTerm, InteractionSpec};
use crate::ops::jw::{jordan_wigner, FermionMode};
use crate::ops::local::{LocalOperator, Pauli};
use crate::spectral::{gap_scan, ground_bundle, GapScan, GroundStateBundle, SolveMethod, SolverOptions, DENSE_EIG_DIM};
use crate::split_diag::{split_report_from_bundle, write_entropy_csv, SplitOptions, SplitReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_MEMORY_CAP: u64 = 8 << 30;
pub const SWEEP_INDEX: &str = "sweep_index.json";

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Heisenberg {
        #[serde(default = "one")]
        j: f64,
    },
    Xxz {
        #[serde(default = "one")]
        jxy: f64,
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        h: f64,
    },
    Fermion {
        #[serde(default = "default_hopping")]
        hopping: Vec<f64>,
        #[serde(default)]
        mu: f64,
        #[serde(default)]
        density: Vec<DensityTerm>,
    },
    Custom {
        spec: InteractionSpec,
    },
}

fn default_hopping() -> Vec<f64> {
    vec![1.0]
}

impl ModelConfig {
    pub fn to_spec(&self) -> Result<InteractionSpec> {
        match self {
            Self::Heisenberg { j } => Ok(heisenberg_spec(*j)),
            Self::Xxz { jxy, delta, h } => Ok(xxz_spec(*jxy, *delta, *h)),
            Self::Fermion { hopping, mu, density } => fermion_spec(hopping, density, *mu),
            Self::Custom { spec } => {
                spec.validate()?;
                Ok(spec.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Gap,
    Corr,
    Lr,
    Bell,
    Split,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub chain: ChainConfig,
    pub task: Task,
    #[serde(default)]
    pub task_parameters: toml::Table,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_memory_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}

/// Solver knobs shared by every task that needs ground states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
}

fn default_k() -> usize {
    crate::spectral::DEFAULT_K
}
fn default_tol() -> f64 {
    1e-9
}
fn default_cluster_tol() -> f64 {
    crate::spectral::DEFAULT_CLUSTER_TOL
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { k: default_k(), tol: default_tol(), cluster_tol: default_cluster_tol() }
    }
}

impl SolverParams {
    fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions { k: self.k, tol: self.tol, cluster_tol: self.cluster_tol, seed, ..SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapParams {
    /// Extra lengths for a finite-size scan; the chain length is always solved.
    #[serde(default)]
    pub lengths: Vec<usize>,
    #[serde(default)]
    pub solver: SolverParams,
}

/// Operator names accepted in configs: `I`, `X`, `Y`, `Z`, `c`, `cdag`.
fn site_operator(name: &str, site: usize, length: usize) -> Result<LocalOperator> {
    match name {
        "c" => jordan_wigner(FermionMode::annihilate(site), length),
        "cdag" => jordan_wigner(FermionMode::create(site), length),
        _ => {
            let mut chars = name.chars();
            match (chars.next().and_then(Pauli::from_char), chars.next()) {
                (Some(p), None) => Ok(LocalOperator::pauli(site, p)),
                _ => Err(Error::Config(format!("unknown operator name `{name}`"))),
            }
        }
    }
}

fn pauli_z() -> String {
    "Z".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrParams {
    #[serde(default = "pauli_z")]
    pub q: String,
    #[serde(default = "pauli_z")]
    pub r: String,
    #[serde(default)]
    pub site: usize,
    /// Index of the ground-cluster vector used as the state.
    #[serde(default)]
    pub state: usize,
    pub j_max: Option<usize>,
    pub window: Option<(usize, usize)>,
    #[serde(default)]
    pub bracket_widths: Vec<usize>,
    #[serde(default)]
    pub solver: SolverParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrParams {
    #[serde(default = "pauli_z")]
    pub q: String,
    #[serde(default = "pauli_z")]
    pub r: String,
    #[serde(default)]
    pub twisted: bool,
    pub distances: Option<Vec<usize>>,
    pub times: Option<Vec<f64>>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "yes")]
    pub stop_at_front: bool,
    #[serde(default = "default_lr_tol")]
    pub tol: f64,
}

fn default_threshold() -> f64 {
    crate::dynamics::DEFAULT_FRONT_THRESHOLD
}
fn yes() -> bool {
    true
}
fn default_lr_tol() -> f64 {
    LrOptions::default().tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BellParams {
    pub left: Option<Vec<usize>>,
    pub right: Option<Vec<usize>>,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub state: usize,
    #[serde(default)]
    pub solver: SolverParams,
}

fn default_width() -> usize {
    1
}
fn default_restarts() -> usize {
    8
}
fn default_iters() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitParams {
    #[serde(default = "default_mi_width")]
    pub mi_width: usize,
    #[serde(default = "default_separations")]
    pub mi_separations: Vec<usize>,
    #[serde(default)]
    pub solver: SolverParams,
}

fn default_mi_width() -> usize {
    2
}
fn default_separations() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Dotted path of a numeric config entry, e.g. `model.delta`.
    pub axis: String,
    pub values: Vec<f64>,
    /// Task run at every point of the sweep.
    pub task: Task,
    #[serde(default)]
    pub parameters: toml::Table,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_parallelism() -> usize {
    1
}

fn parse_params<T: DeserializeOwned>(table: &toml::Table) -> Result<T> {
    toml::Value::Table(table.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("task_parameters: {}", e.message())))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Schema and consistency checks; runs before any allocation.
    pub fn validate(&self) -> Result<()> {
        let spec = self.model.to_spec()?;
        self.chain.validate(spec.range)?;
        match self.task {
            Task::Gap => {
                let p: GapParams = parse_params(&self.task_parameters)?;
                for &l in &p.lengths {
                    ChainConfig::new(l, self.chain.boundary).validate(spec.range)?;
                }
            }
            Task::Corr => {
                let p: CorrParams = parse_params(&self.task_parameters)?;
                site_operator(&p.q, p.site, self.chain.length)?;
                site_operator(&p.r, 0, self.chain.length)?;
            }
            Task::Lr => {
                let p: LrParams = parse_params(&self.task_parameters)?;
                site_operator(&p.q, 0, self.chain.length)?;
                site_operator(&p.r, 0, self.chain.length)?;
            }
            Task::Bell => {
                parse_params::<BellParams>(&self.task_parameters)?;
            }
            Task::Split => {
                parse_params::<SplitParams>(&self.task_parameters)?;
            }
            Task::Sweep => {
                let p: SweepParams = parse_params(&self.task_parameters)?;
                if p.task == Task::Sweep {
                    return Err(Error::Config("nested sweeps are not supported".into()));
                }
                if p.values.is_empty() {
                    return Err(Error::Config("sweep values list is empty".into()));
                }
                if p.parallelism == 0 {
                    return Err(Error::Config("sweep parallelism must be at least 1".into()));
                }
                self.sweep_point(&p, p.values[0])?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved config (without `output_dir`) and tool version.
    pub fn digest(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value)?;
        let mut h = Sha256::new();
        h.update(TOOL_VERSION.as_bytes());
        h.update([0u8]);
        h.update(canonical.as_bytes());
        Ok(hex::encode(h.finalize()))
    }

    /// Copy of the config with the numeric entry at `axis` replaced.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let mut slot = &mut root;
        for key in axis.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(key))
                .ok_or_else(|| Error::Config(format!("sweep axis `{axis}` does not name a config entry")))?;
        }
        *slot = match slot {
            toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) | toml::Value::Float(_) => toml::Value::Float(value),
            _ => return Err(Error::Config(format!("sweep axis `{axis}` is not numeric"))),
        };
        let cfg: Self = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    fn sweep_point(&self, p: &SweepParams, value: f64) -> Result<Self> {
        let mut base = self.clone();
        base.task = p.task;
        base.task_parameters = p.parameters.clone();
        let cfg = base.with_axis(&p.axis, value)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Rough peak memory of a task in bytes, computed before building anything.
pub fn estimate_peak_bytes(cfg: &ExperimentConfig) -> Result<u64> {
    let spec = cfg.model.to_spec()?;
    let lengths: Vec<usize> = match cfg.task {
        Task::Gap => {
            let p: GapParams = parse_params(&cfg.task_parameters)?;
            std::iter::once(cfg.chain.length).chain(p.lengths).collect()
        }
        Task::Sweep => return Ok(0),
        _ => vec![cfg.chain.length],
    };
    let mut peak = 0f64;
    for l in lengths {
        let dim = 2f64.powi(l as i32);
        let vec_bytes = 16.0 * dim;
        let terms = (spec.terms.len() * l + 1) as f64;
        let h_bytes = dim * terms * 20.0 + 8.0 * dim;
        let eig_bytes = if dim <= DENSE_EIG_DIM as f64 { 3.0 * dim * dim * 16.0 } else { 80.0 * vec_bytes };
        let extra = match cfg.task {
            Task::Lr => 200.0 * vec_bytes,
            _ => 0.0,
        };
        peak = peak.max(h_bytes + eig_bytes + extra);
    }
    Ok(peak.min(u64::MAX as f64) as u64)
}

fn check_memory(cfg: &ExperimentConfig) -> Result<()> {
    let needed = estimate_peak_bytes(cfg)?;
    if needed > cfg.memory_cap_bytes {
        return Err(Error::ResourceCap { needed, cap: cfg.memory_cap_bytes });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_digest: String,
    pub tool_version: String,
    pub task: Task,
    pub wall_time: f64,
    pub payload: serde_json::Value,
}

impl ResultRecord {
    /// Canonical serialization of the payload alone.
    pub fn payload_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.payload)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub use_cache: bool,
    /// Write records and series to the output directory.
    pub persist: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { use_cache: true, persist: true }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn record_path(cfg: &ExperimentConfig, digest: &str) -> PathBuf {
    cfg.output_dir.join(format!("{digest}.json"))
}

#[derive(Debug, Serialize)]
struct GapPayload<'a> {
    length: usize,
    energies: &'a [f64],
    gap: Option<f64>,
    degeneracy: usize,
    method: SolveMethod,
    residuals: &'a [f64],
    scan: &'a GapScan,
}

#[derive(Debug, Serialize)]
struct CorrPayload<'a> {
    state_tag: &'a str,
    points: &'a [CorrelationPoint],
    fit: Option<DecayFit>,
    fit_error: Option<String>,
    brackets: &'a [CjBracket],
}

#[derive(Debug, Serialize)]
struct LrPayload<'a> {
    samples: &'a [LightConeSample],
    fit: Option<LightConeFit>,
    fit_error: Option<String>,
}

#[derive(Debug, Serialize)]
struct BellPayload<'a> {
    left: &'a [usize],
    right: &'a [usize],
    outcome: &'a BellOutcome,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepIndexEntry {
    pub value: f64,
    pub digest: Option<String>,
    pub status: String,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepIndex {
    pub axis: String,
    pub task: Task,
    pub entries: Vec<SweepIndexEntry>,
}

struct Outputs {
    payload: serde_json::Value,
    series: Vec<(&'static str, Vec<u8>)>,
}

fn ground(spec: &InteractionSpec, cfg: &ExperimentConfig, solver: &SolverParams) -> Result<GroundStateBundle> {
    ground_bundle(spec, &cfg.chain, &solver.options(cfg.seed))
}

fn pick_state(bundle: &GroundStateBundle, index: usize) -> Result<&[crate::linalg::C64]> {
    bundle
        .vectors
        .get(index)
        .map(|v| v.amplitudes.as_slice())
        .ok_or_else(|| Error::Config(format!("state index {index} exceeds the {} computed states", bundle.vectors.len())))
}

fn execute(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Outputs> {
    let spec = cfg.model.to_spec()?;
    let l = cfg.chain.length;
    match cfg.task {
        Task::Gap => {
            let p: GapParams = parse_params(&cfg.task_parameters)?;
            let bundle = ground(&spec, cfg, &p.solver)?;
            let mut lengths = p.lengths.clone();
            if !lengths.contains(&l) {
                lengths.push(l);
            }
            lengths.sort_unstable();
            let scan = gap_scan(&spec, &lengths, cfg.chain.boundary, &p.solver.options(cfg.seed))?;
            let payload = serde_json::to_value(GapPayload {
                length: l,
                energies: &bundle.energies,
                gap: bundle.gap,
                degeneracy: bundle.degeneracy,
                method: bundle.method,
                residuals: &bundle.residuals,
                scan: &scan,
            })?;
            Ok(Outputs { payload, series: vec![("gap", scan.to_csv_string()?.into_bytes())] })
        }
        Task::Corr => {
            let p: CorrParams = parse_params(&cfg.task_parameters)?;
            let bundle = ground(&spec, cfg, &p.solver)?;
            let psi = pick_state(&bundle, p.state)?;
            let q = site_operator(&p.q, p.site, l)?;
            let r = site_operator(&p.r, p.site, l)?;
            let j_max = p.j_max.unwrap_or(l / 2).min(l - 1 - p.site);
            let tag = format!("ground[{}] of {:?} L={} {}", p.state, cfg.model, l, cfg.chain.boundary);
            let series = correlation_profile(psi, &q, &r, 1..=j_max, &tag)?;
            let window = p.window.unwrap_or_else(|| default_window(l));
            let (fit, fit_error) = match decay_fit(&series, window) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let brackets = if p.bracket_widths.is_empty() {
                Vec::new()
            } else {
                let cut = l / 2 - 1;
                let bj: Vec<usize> = (1..l).filter(|j| cut + j < l).collect();
                let widths: Vec<usize> = p.bracket_widths.clone();
                let mut out = Vec::new();
                for w in widths {
                    let js: Vec<usize> = bj.iter().copied().filter(|j| cut + j + w <= l && cut + 1 >= w).collect();
                    out.extend(cj_scan(psi, cut, &js, &[w], cfg.seed)?);
                }
                out
            };
            let payload = serde_json::to_value(CorrPayload {
                state_tag: &series.state_tag,
                points: &series.points,
                fit,
                fit_error,
                brackets: &brackets,
            })?;
            let mut csv = Vec::new();
            series.write_csv(&mut csv)?;
            let mut series_out = vec![("correlator", csv)];
            if !brackets.is_empty() {
                let mut b = Vec::new();
                crate::clustering::write_brackets_csv(&brackets, &mut b)?;
                series_out.push(("brackets", b));
            }
            Ok(Outputs { payload, series: series_out })
        }
        Task::Lr => {
            let p: LrParams = parse_params(&cfg.task_parameters)?;
            let h = build_hamiltonian(&spec, &cfg.chain)?;
            let q = site_operator(&p.q, 0, l)?;
            let default = LrGrid::default_for(l);
            let grid = LrGrid { distances: p.distances.clone().unwrap_or(default.distances), times: p.times.clone().unwrap_or(default.times) };
            let r_name = p.r.clone();
            let place = move |j: usize| site_operator(&r_name, j, l);
            let lr_opts = LrOptions { tol: p.tol, seed: cfg.seed, ..LrOptions::default() };
            let stop = p.stop_at_front.then_some(p.threshold);
            let samples = lr_surface(&h, &q, &place, &grid, p.twisted, stop, &lr_opts)?;
            let (fit, fit_error) = match light_cone_fit(&samples, p.threshold) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let payload = serde_json::to_value(LrPayload { samples: &samples, fit, fit_error })?;
            let mut csv = Vec::new();
            write_light_cone_csv(&samples, &mut csv)?;
            Ok(Outputs { payload, series: vec![("light_cone", csv)] })
        }
        Task::Bell => {
            let p: BellParams = parse_params(&cfg.task_parameters)?;
            let cut = l / 2;
            let left = p.left.clone().unwrap_or_else(|| (cut.saturating_sub(p.width)..cut).collect());
            let right = p.right.clone().unwrap_or_else(|| (cut..(cut + p.width).min(l)).collect());
            let bundle = ground(&spec, cfg, &p.solver)?;
            let psi = pick_state(&bundle, p.state)?;
            let outcome = bell_seesaw(psi, &left, &right, p.restarts, p.max_iters, cfg.seed)?;
            let payload = serde_json::to_value(BellPayload { left: &left, right: &right, outcome: &outcome })?;
            Ok(Outputs { payload, series: Vec::new() })
        }
        Task::Split => {
            let p: SplitParams = parse_params(&cfg.task_parameters)?;
            let opts = SplitOptions { solver: p.solver.options(cfg.seed), mi_width: p.mi_width, mi_separations: p.mi_separations.clone() };
            let bundle = ground_bundle(&spec, &cfg.chain, &opts.solver)?;
            let report: SplitReport = split_report_from_bundle(&bundle, &cfg.chain, spec.kind, &opts)?;
            let mut csv = Vec::new();
            write_entropy_csv(bundle.ground_vector(), &mut csv)?;
            Ok(Outputs { payload: serde_json::to_value(report)?, series: vec![("entropy", csv)] })
        }
        Task::Sweep => {
            let p: SweepParams = parse_params(&cfg.task_parameters)?;
            let (records, index) = sweep(cfg, &p.axis, &p.values, p.parallelism, opts)?;
            info!("sweep finished: {} of {} runs succeeded", records.len(), index.entries.len());
            Ok(Outputs { payload: serde_json::to_value(&index)?, series: Vec::new() })
        }
    }
}

/// Validates, checks the memory guard, then runs or loads from cache.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ResultRecord> {
    cfg.validate()?;
    check_memory(cfg)?;
    let digest = cfg.digest()?;
    let path = record_path(cfg, &digest);
    if opts.use_cache && path.exists() {
        let text = fs::read_to_string(&path)?;
        if let Ok(rec) = serde_json::from_str::<ResultRecord>(&text) {
            info!("cached record {} returned for {:?}", path.display(), cfg.task);
            return Ok(rec);
        }
    }
    let start = Instant::now();
    let out = execute(cfg, opts)?;
    let record = ResultRecord {
        config_digest: digest.clone(),
        tool_version: TOOL_VERSION.to_string(),
        task: cfg.task,
        wall_time: start.elapsed().as_secs_f64(),
        payload: out.payload,
    };
    if opts.persist {
        for (name, bytes) in &out.series {
            write_atomic(&cfg.output_dir.join(format!("{digest}_{name}.csv")), bytes)?;
        }
        write_atomic(&path, serde_json::to_string_pretty(&record)?.as_bytes())?;
        info!("wrote {}", path.display());
    }
    Ok(record)
}

/// Runs the base config at every value of `axis` with at most
/// `parallelism` concurrent runs. Failures are recorded in the index and
/// do not stop the other runs.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[f64],
    parallelism: usize,
    opts: RunOptions,
) -> Result<(Vec<ResultRecord>, SweepIndex)> {
    if values.is_empty() {
        return Err(Error::Config("sweep values list is empty".into()));
    }
    let (inner_task, inner_params) = if base.task == Task::Sweep {
        let p: SweepParams = parse_params(&base.task_parameters)?;
        (p.task, p.parameters)
    } else {
        (base.task, base.task_parameters.clone())
    };
    let mut point_base = base.clone();
    point_base.task = inner_task;
    point_base.task_parameters = inner_params;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<ResultRecord>> = pool.install(|| {
        use rayon::prelude::*;
        values
            .par_iter()
            .map(|&v| {
                let cfg = point_base.with_axis(axis, v)?;
                run(&cfg, opts)
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut entries = Vec::new();
    for (v, r) in values.iter().zip(results) {
        match r {
            Ok(rec) => {
                entries.push(SweepIndexEntry { value: *v, digest: Some(rec.config_digest.clone()), status: "ok".into(), error: None });
                records.push(rec);
            }
            Err(e) => entries.push(SweepIndexEntry { value: *v, digest: None, status: "error".into(), error: Some(e.to_string()) }),
        }
    }
    let index = SweepIndex { axis: axis.to_string(), task: inner_task, entries };
    if opts.persist {
        write_atomic(&base.output_dir.join(SWEEP_INDEX), serde_json::to_string_pretty(&index)?.as_bytes())?;
    }
    Ok((records, index))
}

/// Convenience for building a config in code.
pub fn config(model: ModelConfig, chain: ChainConfig, task: Task, params: toml::Table) -> ExperimentConfig {
    ExperimentConfig {
        model,
        chain,
        task,
        task_parameters: params,
        output_dir: default_output_dir(),
        seed: 0,
        memory_cap_bytes: DEFAULT_MEMORY_CAP,
    }
}

//! Run configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! algorithm = "mosa+"      # rs | mosa | mosa+ | fitest | fitest+
//! budget = 20000           # SUT evaluations per run
//! seed = 1                 # master seed
//! epsilon = 0.05
//! key_points = 27
//! reps = 1
//! jobs = 1
//! out = "runs/mosa+"
//!
//! [sut]
//! kind = "synthetic"       # or "external"
//! plant = "plant.json"     # synthetic only; the bundled plant when absent
//! command = "./my-sut"     # external only, run through `sh -c`
//! timeout_secs = 30
//!
//! [space]
//! roll = [-30.0, 30.0]
//! pitch = [-30.0, 30.0]
//! yaw = [-30.0, 30.0]
//! models = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//!
//! [operators]
//! crossover_probability = 0.9
//! eta_c = 20.0
//! mutation_probability = 0.25
//! eta_m = 20.0
//! eta_low = 5.0
//! eta_high = 50.0
//! ```
//!
//! Every key is optional. Relative paths are resolved against the directory
//! holding the config file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use kpsearch_core::search::{Algorithm, OperatorParams, SearchConfig};
use kpsearch_core::sut::{ExternalSut, ExternalSutOptions, SyntheticSut, SyntheticSutConfig};
use kpsearch_core::{SearchSpace, SystemUnderTest};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub algorithm: Option<String>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub key_points: Option<usize>,
    pub reps: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub sut: SutSection,
    pub space: Option<SearchSpace>,
    pub operators: Option<OperatorParams>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SutSection {
    pub kind: Option<String>,
    pub plant: Option<PathBuf>,
    pub command: Option<String>,
    pub timeout_secs: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.out = cfg.out.map(|p| base.join(p));
        cfg.sut.plant = cfg.sut.plant.map(|p| base.join(p));
        Ok(cfg)
    }
}

/// How to reach the system under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SutSpec {
    Synthetic { plant: Option<PathBuf> },
    External { command: String, timeout_secs: f64 },
}

impl SutSpec {
    /// Parses `synthetic` or `external:<command>`.
    pub fn parse(s: &str, plant: Option<PathBuf>, timeout_secs: f64) -> CliResult<Self> {
        if s == "synthetic" {
            Ok(SutSpec::Synthetic { plant })
        } else if let Some(cmd) = s.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                return Err(CliError::usage("external SUT needs a command: --sut external:<command>"));
            }
            Ok(SutSpec::External { command: cmd.to_string(), timeout_secs })
        } else {
            Err(CliError::usage(format!("unknown SUT '{s}' (expected synthetic or external:<command>)")))
        }
    }

    pub fn synthetic(&self) -> CliResult<Option<SyntheticSut>> {
        match self {
            SutSpec::Synthetic { plant: None } => Ok(Some(SyntheticSut::default_plant())),
            SutSpec::Synthetic { plant: Some(path) } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("cannot read plant {}: {e}", path.display())))?;
                Ok(Some(SyntheticSut::new(SyntheticSutConfig::from_json(&text)?)?))
            }
            SutSpec::External { .. } => Ok(None),
        }
    }

    /// Starts a fresh SUT instance.
    pub fn connect(&self, key_points: usize) -> CliResult<Box<dyn SystemUnderTest>> {
        if let Some(s) = self.synthetic()? {
            return Ok(Box::new(s));
        }
        let SutSpec::External { command, timeout_secs } = self else {
            unreachable!("synthetic handled above")
        };
        let options = ExternalSutOptions { key_points, timeout: Duration::from_secs_f64(*timeout_secs) };
        ExternalSut::spawn(command, options)
            .map(|s| Box::new(s) as Box<dyn SystemUnderTest>)
            .map_err(|e| CliError::runtime(e.to_string()))
    }

    pub fn label(&self) -> String {
        match self {
            SutSpec::Synthetic { plant: None } => "synthetic".into(),
            SutSpec::Synthetic { plant: Some(p) } => format!("synthetic:{}", p.display()),
            SutSpec::External { command, .. } => format!("external:{command}"),
        }
    }
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub algorithm: Option<String>,
    pub budget: Option<u64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub reps: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub sut: Option<String>,
    pub plant: Option<PathBuf>,
}

/// Fully resolved settings for `run`.
#[derive(Debug, Clone)]
pub struct RunSettings {
    /// Search settings; `seed` is the master seed.
    pub search: SearchConfig,
    pub reps: usize,
    pub jobs: usize,
    pub out: PathBuf,
    pub sut: SutSpec,
}

impl RunSettings {
    pub fn resolve(file: FileConfig, o: Overrides) -> CliResult<Self> {
        let algorithm: Algorithm = o
            .algorithm
            .or(file.algorithm)
            .as_deref()
            .unwrap_or("mosa+")
            .parse()
            .map_err(|e: kpsearch_core::Error| CliError::usage(e.to_string()))?;
        let defaults = SearchConfig::default();
        let search = SearchConfig {
            algorithm,
            key_points: file.key_points.unwrap_or(defaults.key_points),
            epsilon: o.epsilon.or(file.epsilon).unwrap_or(defaults.epsilon),
            budget: o.budget.or(file.budget).unwrap_or(defaults.budget),
            seed: o.seed.or(file.seed).unwrap_or(defaults.seed),
            space: file.space.unwrap_or(defaults.space),
            operators: file.operators.unwrap_or(defaults.operators),
        };
        search.validate().map_err(|e| CliError::usage(e.to_string()))?;
        let reps = o.reps.or(file.reps).unwrap_or(1);
        let jobs = o.jobs.or(file.jobs).unwrap_or(1);
        if reps == 0 || jobs == 0 {
            return Err(CliError::usage("--reps and --jobs must be at least 1"));
        }
        let timeout = file.sut.timeout_secs.unwrap_or(30.0);
        if !(timeout.is_finite() && timeout > 0.0) {
            return Err(CliError::usage("sut.timeout_secs must be positive"));
        }
        let kind = match (o.sut, file.sut.kind.as_deref()) {
            (Some(s), _) => s,
            (None, Some("external")) => {
                let cmd = file
                    .sut
                    .command
                    .clone()
                    .ok_or_else(|| CliError::usage("sut.kind = \"external\" needs sut.command"))?;
                format!("external:{cmd}")
            }
            (None, Some("synthetic") | None) => "synthetic".into(),
            (None, Some(other)) => return Err(CliError::usage(format!("unknown sut.kind '{other}'"))),
        };
        let sut = SutSpec::parse(&kind, o.plant.or(file.sut.plant), timeout)?;
        let out = o.out.or(file.out).unwrap_or_else(|| PathBuf::from("runs").join(algorithm.name()));
        Ok(Self { search, reps, jobs, out, sut })
    }
}

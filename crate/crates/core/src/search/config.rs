use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SearchSpace, DEFAULT_EPSILON, DEFAULT_KEY_POINTS};

/// Search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "rs")]
    RandomSearch,
    #[serde(rename = "mosa")]
    Mosa,
    #[serde(rename = "mosa+")]
    MosaPlus,
    #[serde(rename = "fitest")]
    Fitest,
    #[serde(rename = "fitest+")]
    FitestPlus,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::RandomSearch,
        Algorithm::Mosa,
        Algorithm::MosaPlus,
        Algorithm::Fitest,
        Algorithm::FitestPlus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::RandomSearch => "rs",
            Algorithm::Mosa => "mosa",
            Algorithm::MosaPlus => "mosa+",
            Algorithm::Fitest => "fitest",
            Algorithm::FitestPlus => "fitest+",
        }
    }

    /// Whether the SBX distribution index follows the parents' uncovered fitness.
    pub fn adaptive_crossover(&self) -> bool {
        matches!(self, Algorithm::MosaPlus | Algorithm::FitestPlus)
    }

    /// Whether the population shrinks with the number of uncovered objectives.
    pub fn shrinks_population(&self) -> bool {
        matches!(self, Algorithm::Fitest | Algorithm::FitestPlus)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace("_plus", "+").replace("plus", "+");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::config(format!("unknown algorithm '{s}' (expected rs, mosa, mosa+, fitest, fitest+)")))
    }
}

/// Variation operator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorParams {
    pub crossover_probability: f64,
    /// Fixed SBX distribution index used by the non-adaptive variants.
    pub eta_c: f64,
    /// Per-gene mutation probability.
    pub mutation_probability: f64,
    pub eta_m: f64,
    /// Adaptive SBX index when the parents' best uncovered fitness is 0.
    pub eta_low: f64,
    /// Adaptive SBX index when the parents' best uncovered fitness is 1.
    pub eta_high: f64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        Self {
            crossover_probability: 0.9,
            eta_c: 20.0,
            mutation_probability: 0.25,
            eta_m: 20.0,
            eta_low: 5.0,
            eta_high: 50.0,
        }
    }
}

impl OperatorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("crossover_probability", self.crossover_probability),
            ("mutation_probability", self.mutation_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, eta) in [
            ("eta_c", self.eta_c),
            ("eta_m", self.eta_m),
            ("eta_low", self.eta_low),
            ("eta_high", self.eta_high),
        ] {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {eta}")));
            }
        }
        if self.eta_low > self.eta_high {
            return Err(Error::config("eta_low must not exceed eta_high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Number of key-points, hence objectives and the base population size.
    pub key_points: usize,
    pub epsilon: f64,
    /// Maximum number of SUT evaluations.
    pub budget: u64,
    pub seed: u64,
    pub space: SearchSpace,
    pub operators: OperatorParams,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::MosaPlus,
            key_points: DEFAULT_KEY_POINTS,
            epsilon: DEFAULT_EPSILON,
            budget: 20_000,
            seed: 0,
            space: SearchSpace::default(),
            operators: OperatorParams::default(),
        }
    }
}

impl SearchConfig {
    pub fn new(algorithm: Algorithm, budget: u64, seed: u64) -> Self {
        Self { algorithm, budget, seed, ..Self::default() }
    }

    pub fn population_size(&self) -> usize {
        self.key_points
    }

    pub fn validate(&self) -> Result<()> {
        if self.key_points == 0 {
            return Err(Error::config("key_points must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.budget < self.population_size() as u64 {
            return Err(Error::config(format!(
                "budget {} is smaller than the population size {}",
                self.budget,
                self.population_size()
            )));
        }
        self.space.validate()?;
        self.operators.validate()
    }
}

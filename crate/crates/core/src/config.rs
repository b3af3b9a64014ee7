//! Run configuration: one TOML file with named sections.
//!
//! ```toml
//! version = 1
//!
//! [environment]
//! kind = "bernoulli"      # bernoulli | bandit | table | markov
//! p = 0.7
//!
//! [model_class]
//! kind = "bernoulli-grid" # bernoulli-grid | bandit-orderings | members
//! grid = [0.1, 0.3, 0.7]
//! scheme = "uniform"      # uniform | prefix-code (or explicit `weights`)
//!
//! [loss]
//! matrix = [[0.0, 1.0], [1.0, 0.0]]   # rows indexed by percept, columns by action
//!
//! [planner]               # for `plan` and `predict` runs
//! cycles = 100
//! mode = "receding"       # fixed | receding
//! window = 2
//! source = "embedded"     # explicit | embedded
//!
//! [experiment]
//! kind = "convergence"
//! seed_count = 100
//! cycles = 1000
//! window = 2              # read by the interactive kinds
//! checkpoints = [10, 100, 1000]
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::env::{LossMatrix, LossSpec, TableEnv};
use crate::environments::{
    bandit_family, bernoulli_grid, distinct_orderings, make_action_table, make_bandit,
    make_bernoulli, make_markov,
};
use crate::error::{Error, Result};
use crate::mixture::{ModelClass, WeightScheme};
use crate::planner::{LossSource, PlannerConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Hex SHA-256 of arbitrary bytes; stamps every report header.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub environment: Option<EnvironmentSection>,
    pub model_class: Option<ModelClassSection>,
    pub loss: Option<LossSection>,
    pub planner: Option<PlannerSection>,
    pub experiment: Option<ExperimentSection>,
}

/// A parsed config together with the hash of the exact bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let bytes = fs::read(path)?;
    parse(&bytes)
}

pub fn parse(bytes: &[u8]) -> Result<LoadedConfig> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Config(format!("not UTF-8: {e}")))?;
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("parse failure: {e}")))?;
    if file.version != CONFIG_VERSION {
        return Err(Error::Config(format!(
            "config version {} not supported (expected {CONFIG_VERSION})",
            file.version
        )));
    }
    Ok(LoadedConfig {
        file,
        sha256: sha256_hex(bytes),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub kind: String,
    /// `bernoulli`: probability of percept 1.
    pub p: Option<f64>,
    /// `bandit`: per-arm probability of the losing percept.
    pub arm_losses: Option<Vec<f64>>,
    /// `table`: `rows[action][observation]`.
    pub rows: Option<Vec<Vec<f64>>>,
    /// `markov`: `transitions[state][action][next]` plus `initial[state]`.
    pub transitions: Option<Vec<Vec<Vec<f64>>>>,
    pub initial: Option<Vec<f64>>,
}

fn need<T>(v: &Option<T>, kind: &str, field: &str) -> Result<T>
where
    T: Clone,
{
    v.clone()
        .ok_or_else(|| Error::Config(format!("environment kind {kind:?} needs `{field}`")))
}

impl EnvironmentSection {
    pub fn build(&self) -> Result<TableEnv<f64>> {
        match self.kind.as_str() {
            "bernoulli" => make_bernoulli(need(&self.p, "bernoulli", "p")?),
            "bandit" => make_bandit(need(&self.arm_losses, "bandit", "arm_losses")?),
            "table" => make_action_table(need(&self.rows, "table", "rows")?),
            "markov" => make_markov(
                need(&self.transitions, "markov", "transitions")?,
                need(&self.initial, "markov", "initial")?,
            ),
            other => Err(Error::Config(format!("unknown environment kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelClassSection {
    pub kind: String,
    /// `bernoulli-grid`: the candidate values of p.
    pub grid: Option<Vec<f64>>,
    /// `bandit-orderings`: arm losses whose distinct orderings form the class.
    pub arm_losses: Option<Vec<f64>>,
    /// `members`: explicit environments.
    pub members: Option<Vec<EnvironmentSection>>,
    /// `uniform` (default) or `prefix-code`.
    pub scheme: Option<String>,
    /// Overrides `scheme` with explicit prior weights.
    pub weights: Option<Vec<f64>>,
}

impl ModelClassSection {
    pub fn build(&self) -> Result<ModelClass<TableEnv<f64>>> {
        let members = match self.kind.as_str() {
            "bernoulli-grid" => {
                let grid = need(&self.grid, "bernoulli-grid", "grid")?;
                bernoulli_grid(&grid)?
            }
            "bandit-orderings" => {
                let arms = need(&self.arm_losses, "bandit-orderings", "arm_losses")?;
                bandit_family(&distinct_orderings(&arms))?
            }
            "members" => {
                let sections = need(&self.members, "members", "members")?;
                sections
                    .iter()
                    .map(|s| s.build())
                    .collect::<Result<Vec<_>>>()?
            }
            other => return Err(Error::Config(format!("unknown class kind {other:?}"))),
        };
        if let Some(w) = &self.weights {
            return ModelClass::new(members, w.clone());
        }
        match self.scheme.as_deref().unwrap_or("uniform") {
            "uniform" => ModelClass::uniform(members),
            "prefix-code" => ModelClass::with_scheme(members, &WeightScheme::PrefixCode),
            other => Err(Error::Config(format!("unknown weight scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    /// `matrix[percept][action]`, entries in `[0, 1]`.
    pub matrix: Vec<Vec<f64>>,
}

impl LossSection {
    pub fn build(&self) -> Result<LossMatrix<f64>> {
        LossMatrix::new(self.matrix.clone())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    /// Total lifetime in cycles.
    pub cycles: usize,
    /// `fixed` (default) or `receding`.
    pub mode: Option<String>,
    pub window: Option<usize>,
    /// `explicit` (default; uses `[loss]`) or `embedded`.
    pub source: Option<String>,
}

impl PlannerSection {
    pub fn build(&self, loss: Option<&LossMatrix<f64>>) -> Result<PlannerConfig<f64>> {
        let source = match self.source.as_deref().unwrap_or("explicit") {
            "explicit" => {
                let m = loss.ok_or_else(|| {
                    Error::Config("planner source `explicit` needs a [loss] section".into())
                })?;
                LossSource::Explicit(LossSpec::Matrix(m.clone()))
            }
            "embedded" => LossSource::Embedded,
            other => return Err(Error::Config(format!("unknown loss source {other:?}"))),
        };
        match self.mode.as_deref().unwrap_or("fixed") {
            "fixed" => Ok(PlannerConfig::fixed(self.cycles, source)),
            "receding" => {
                let w = self.window.ok_or_else(|| {
                    Error::Config("planner mode `receding` needs `window`".into())
                })?;
                Ok(PlannerConfig::receding(self.cycles, w, source))
            }
            other => Err(Error::Config(format!("unknown planner mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// convergence | regret | planner-oracle | mdp-crosscheck | greedy-check
    /// | bandit-aixi | loss-absorption
    pub kind: String,
    pub seeds: Option<Vec<u64>>,
    /// Shorthand for `seeds = [0, 1, …, seed_count-1]`.
    pub seed_count: Option<u64>,
    /// Interaction length per seed.
    pub cycles: Option<usize>,
    /// Receding lookahead for the interactive kinds.
    pub window: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    /// Case count for the generated suites (policy checks, random MDPs).
    pub cases: Option<usize>,
    /// Seed of the case generator, separate from the simulation seeds.
    pub master_seed: Option<u64>,
}

impl ExperimentSection {
    /// CLI `--seed` wins over `seeds`, which wins over `seed_count`.
    pub fn resolve_seeds(&self, cli: Option<Vec<u64>>) -> Option<Vec<u64>> {
        if let Some(s) = cli {
            return Some(s);
        }
        if let Some(s) = &self.seeds {
            return Some(s.clone());
        }
        self.seed_count.map(|n| (0..n).collect())
    }
}

/// Exact table equality, used to locate the truth inside a model class.
pub fn find_member(class_members: &[TableEnv<f64>], truth: &TableEnv<f64>) -> Option<usize> {
    class_members.iter().position(|m| m == truth)
}

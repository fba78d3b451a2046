use serde::{Deserialize, Serialize};

use super::{Method, OptimizeOptions, Prior, SolverMode};
use crate::error::Result;
use crate::privacy::PrivacyBudget;

/// A single allowance or a sweep over several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Allowance {
    One(f64),
    Many(Vec<f64>),
}

impl Allowance {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Allowance::One(m) => vec![*m],
            Allowance::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaName {
    #[serde(rename = "one_minus_pow")]
    OneMinusPow,
}

/// Output failure probability: explicit, or `1 − (1 − Δ)^m` per allowance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaRule {
    Value(f64),
    Rule(DeltaName),
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Rule(DeltaName::OneMinusPow)
    }
}

fn default_t() -> u64 {
    10_000
}

fn default_tau() -> usize {
    50
}

fn default_iters() -> usize {
    10_000
}

fn default_method() -> Method {
    Method::Integration
}

/// JSON configuration of an optimization run or sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    #[serde(rename = "Delta", default)]
    pub delta_mech: f64,
    pub m: Allowance,
    #[serde(default)]
    pub delta: DeltaRule,
    #[serde(default = "Prior::uniform")]
    pub prior: Prior,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(rename = "T", default = "default_t")]
    pub t: u64,
    #[serde(default = "default_tau")]
    pub tau: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: Option<SolverMode>,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
}

impl OptimizerConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn budget_for(&self, m: f64) -> Result<PrivacyBudget> {
        let b = match self.delta {
            DeltaRule::Value(d) => PrivacyBudget::new(self.eps, self.delta_mech, m, d)?,
            DeltaRule::Rule(DeltaName::OneMinusPow) => PrivacyBudget::one_minus_pow(self.eps, self.delta_mech, m)?,
        };
        b.check_for(self.k)?;
        Ok(b)
    }

    pub fn options(&self) -> OptimizeOptions {
        OptimizeOptions {
            method: self.method,
            t: self.t,
            tau: self.tau,
            seed: self.seed,
            solver: self.solver,
            max_iters: self.max_iters,
        }
    }
}

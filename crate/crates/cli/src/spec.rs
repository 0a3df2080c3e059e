//! Experiment specifications: self-describing JSON documents.
//!
//! A spec names everything a sweep depends on — instance source, policies,
//! prediction model and noise levels, machine count, seeds, and oracle — so
//! that a results file plus its spec reproduces byte for byte. Validation
//! happens eagerly: unknown policy names, payload/model mismatches, and
//! incompatible noise kinds are rejected before any simulation runs.

use precsched::prediction::{Model, NoiseSpec, DEFAULT_GRID};
use precsched::random::RandomSpec;
use precsched::rational::{format_rat, rat, rat_serde, rat_serde_opt, Rat};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::CliError;
use crate::registry;

fn default_m() -> usize {
    1
}
fn default_epsilon() -> Rat {
    rat(1, 10)
}
fn default_noise() -> Vec<NoiseLevelSpec> {
    vec![NoiseLevelSpec::none()]
}

/// A full experiment: the sweep runs over
/// (instance × policy × noise level × seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub source: SourceSpec,
    pub policies: Vec<PolicySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionSpec>,
    #[serde(default = "default_m")]
    pub m: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub oracle: OracleChoice,
}

/// Where instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// A single instance JSON file.
    File { path: String },
    /// A named lower-bound family with integer parameters.
    Family { family: String, params: BTreeMap<String, i64> },
    /// `count` draws from a random model; instance `i` uses generation seed
    /// `master_seed + i`.
    Random { spec: RandomSpec, count: usize },
}

/// A policy by registry name plus policy-specific parameters
/// (e.g. `{"variant": "strict"}` or the nested specs of `time_share`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

impl PolicySpec {
    pub fn bare(name: &str) -> Self {
        PolicySpec { name: name.into(), params: serde_json::Value::Null }
    }
}

/// Prediction model plus the noise levels to sweep (`none` = ground truth).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSpec {
    pub model: Model,
    #[serde(default = "default_noise")]
    pub noise: Vec<NoiseLevelSpec>,
    /// Threshold parameter of the order error measure.
    #[serde(default = "default_epsilon", with = "rat_serde")]
    pub epsilon: Rat,
}

/// One noise level, flat so spec files stay hand-writable. `kind` selects
/// which optional fields apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLevelSpec {
    /// `none`, `weight_factor`, `adjacent_swaps`, or `input_noise`.
    pub kind: String,
    #[serde(default, with = "rat_serde_opt", skip_serializing_if = "Option::is_none")]
    pub beta: Option<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swaps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub len_delta: Option<u32>,
}

impl NoiseLevelSpec {
    pub fn none() -> Self {
        NoiseLevelSpec { kind: "none".into(), beta: None, grid: None, swaps: None, len_delta: None }
    }

    /// Translates into the library's noise description; `None` means truth.
    pub fn to_noise(&self) -> Result<Option<NoiseSpec>, CliError> {
        let beta = |field: &Option<Rat>| {
            field.clone().ok_or_else(|| {
                CliError::InvalidSpec(format!("noise kind '{}' requires beta", self.kind))
            })
        };
        match self.kind.as_str() {
            "none" => Ok(None),
            "weight_factor" => Ok(Some(NoiseSpec::WeightFactor {
                beta: beta(&self.beta)?,
                grid: self.grid.unwrap_or(DEFAULT_GRID),
            })),
            "adjacent_swaps" => {
                let swaps = self.swaps.ok_or_else(|| {
                    CliError::InvalidSpec("noise kind 'adjacent_swaps' requires swaps".into())
                })?;
                Ok(Some(NoiseSpec::AdjacentSwaps { swaps }))
            }
            "input_noise" => Ok(Some(NoiseSpec::InputNoise {
                beta: beta(&self.beta)?,
                grid: self.grid.unwrap_or(DEFAULT_GRID),
                len_delta: self.len_delta.unwrap_or(0),
            })),
            other => Err(CliError::InvalidSpec(format!("unknown noise kind '{other}'"))),
        }
    }

    /// Compact label for result rows, e.g. `weight_factor(beta=1/2)`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(b) = &self.beta {
            parts.push(format!("beta={}", format_rat(b)));
        }
        if let Some(g) = self.grid {
            parts.push(format!("grid={g}"));
        }
        if let Some(s) = self.swaps {
            parts.push(format!("swaps={s}"));
        }
        if let Some(d) = self.len_delta {
            parts.push(format!("len_delta={d}"));
        }
        if parts.is_empty() {
            self.kind.clone()
        } else {
            format!("{}({})", self.kind, parts.join(","))
        }
    }
}

/// Which exact baseline to compute per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Chains → prefix-density rule; otherwise brute force when small
    /// enough, else no baseline.
    #[default]
    Auto,
    ChainExact,
    BruteForce,
    None,
}

/// Payload shape a prediction model produces (used for compatibility
/// checks between policies, models, and noise kinds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Weights,
    Order,
    Instance,
}

pub fn model_payload_kind(model: Model) -> PayloadKind {
    match model {
        Model::StaticWeights | Model::AdaptiveWeights | Model::Averages => PayloadKind::Weights,
        Model::StaticOrder | Model::AdaptiveOrder | Model::ActionsStatic | Model::ActionsAdaptive => {
            PayloadKind::Order
        }
        Model::Input => PayloadKind::Instance,
    }
}

impl ExperimentSpec {
    /// Full eager validation: structure, registry membership, and
    /// model/noise/policy compatibility. Nothing simulates before this
    /// passes.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::InvalidSpec("seeds must be non-empty".into()));
        }
        if self.policies.is_empty() {
            return Err(CliError::InvalidSpec("policies must be non-empty".into()));
        }
        if self.m == 0 {
            return Err(CliError::InvalidSpec("machine count m must be at least 1".into()));
        }
        match &self.source {
            SourceSpec::Random { count, .. } if *count == 0 => {
                return Err(CliError::InvalidSpec("random source count must be at least 1".into()));
            }
            SourceSpec::Family { family, params } => {
                registry::check_family(family, params)?;
            }
            _ => {}
        }
        let model_kind = self.prediction.as_ref().map(|p| model_payload_kind(p.model));
        for policy in &self.policies {
            for need in registry::policy_needs(policy)? {
                match model_kind {
                    Some(kind) if kind == need => {}
                    Some(_) => {
                        return Err(CliError::InvalidSpec(format!(
                            "policy '{}' needs a {:?} payload, which the prediction model does not produce",
                            policy.name, need
                        )));
                    }
                    None => {
                        return Err(CliError::InvalidSpec(format!(
                            "policy '{}' needs predictions but the spec has none",
                            policy.name
                        )));
                    }
                }
            }
        }
        if let Some(pred) = &self.prediction {
            if pred.epsilon <= Rat::from_integer(0.into()) {
                return Err(CliError::InvalidSpec("epsilon must be positive".into()));
            }
            for level in &pred.noise {
                let noise = level.to_noise()?;
                let compatible = match (&noise, model_payload_kind(pred.model)) {
                    (None, _) => true,
                    (Some(NoiseSpec::WeightFactor { .. }), PayloadKind::Weights) => true,
                    (Some(NoiseSpec::AdjacentSwaps { .. }), PayloadKind::Order) => true,
                    (Some(NoiseSpec::InputNoise { .. }), PayloadKind::Instance) => true,
                    _ => false,
                };
                if !compatible {
                    return Err(CliError::InvalidSpec(format!(
                        "noise kind '{}' does not apply to prediction model '{}'",
                        level.kind,
                        pred.model.as_str()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialization cannot fail")
    }
}

// ───────────────────────── tests ─────────────────────────

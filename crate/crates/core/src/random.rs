//! Seeded random instance generators over a rational grid.
//!
//! Experiments need streams of small instances whose shape is controlled
//! (chains, out-forests, or general DAGs) and whose numbers stay exactly
//! representable. All weights and processing times are drawn uniformly from
//! a rational grid `{k/den : k ≤ num_max}`, so every downstream computation
//! — simulation, oracles, ratios — remains exact. Generation is a pure
//! function of ([`RandomSpec`], seed); identical inputs reproduce identical
//! instances byte for byte, which is what makes experiment re-runs
//! deterministic.

use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::rational::{one, rat, rat_serde, zero, Rat};

/// Shape of the generated precedence relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomModel {
    /// Disjoint chains: job `i > 0` extends the previous chain with
    /// probability `attach_prob`, giving geometric chain lengths.
    Chains,
    /// Out-forest: job `i > 0` picks a uniform parent among `0..i` with
    /// probability `attach_prob`, otherwise starts a new root.
    OutForest,
    /// General DAG: each pair `i < j` is an edge with probability
    /// `edge_prob` (zero yields independent jobs).
    General,
}

fn default_grid_den() -> u32 {
    4
}
fn default_grid_num_max() -> u32 {
    12
}
fn default_attach_prob() -> Rat {
    rat(3, 5)
}
fn default_edge_prob() -> Rat {
    rat(1, 4)
}

/// Parameters of a random instance distribution. Serializes with defaults
/// filled in, so a spec file only needs `model` and `n_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub model: RandomModel,
    /// Job count is drawn uniformly from `1..=n_max`.
    pub n_max: usize,
    /// Weight grid: numerators `0..=weight_num_max` over `weight_den`.
    #[serde(default = "default_grid_den")]
    pub weight_den: u32,
    #[serde(default = "default_grid_num_max")]
    pub weight_num_max: u32,
    /// Processing grid: numerators `1..=proc_num_max` over `proc_den`
    /// (processing times must be positive).
    #[serde(default = "default_grid_den")]
    pub proc_den: u32,
    #[serde(default = "default_grid_num_max")]
    pub proc_num_max: u32,
    /// Chain-continuation / parent-attachment probability.
    #[serde(default = "default_attach_prob", with = "rat_serde")]
    pub attach_prob: Rat,
    /// Pairwise edge probability for the general model.
    #[serde(default = "default_edge_prob", with = "rat_serde")]
    pub edge_prob: Rat,
}

impl RandomSpec {
    /// A spec for `model` with the default grids and probabilities.
    pub fn new(model: RandomModel, n_max: usize) -> Self {
        RandomSpec {
            model,
            n_max,
            weight_den: default_grid_den(),
            weight_num_max: default_grid_num_max(),
            proc_den: default_grid_den(),
            proc_num_max: default_grid_num_max(),
            attach_prob: default_attach_prob(),
            edge_prob: default_edge_prob(),
        }
    }

    fn validate(&self) -> Result<(), RandomError> {
        let bad = |msg: String| Err(RandomError::InvalidSpec(msg));
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if self.weight_den == 0 || self.proc_den == 0 {
            return bad("grid denominators must be positive".into());
        }
        if self.proc_num_max == 0 {
            return bad("proc_num_max must be at least 1 (processing is positive)".into());
        }
        for (name, p) in [("attach_prob", &self.attach_prob), ("edge_prob", &self.edge_prob)] {
            if *p < zero() || *p > one() {
                return bad(format!("{name} must lie in [0, 1]"));
            }
            if p.denom().to_u64().is_none() {
                return bad(format!("{name} denominator does not fit in 64 bits"));
            }
        }
        Ok(())
    }
}

/// Errors from random generation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RandomError {
    #[error("invalid random spec: {0}")]
    InvalidSpec(String),
}

/// Exact Bernoulli draw: true with probability `p` (a validated rational in
/// `[0, 1]`) using a single uniform integer below the denominator.
fn bernoulli<R: Rng>(rng: &mut R, p: &Rat) -> bool {
    let den = p.denom().to_u64().expect("validated denominator");
    let num = p.numer().to_u64().unwrap_or(0);
    rng.gen_range(0..den.max(1)) < num
}

fn draw_grid<R: Rng>(rng: &mut R, lo: u32, hi: u32, den: u32) -> Rat {
    rat(rng.gen_range(lo..=hi) as i64, den as i64)
}

/// Draws one instance from the distribution `spec` using a stream seeded by
/// `seed`. Identical `(spec, seed)` pairs yield identical instances.
pub fn generate(spec: &RandomSpec, seed: u64) -> Result<Instance, RandomError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=spec.n_max);
    let mut pw = Vec::with_capacity(n);
    for _ in 0..n {
        let p = draw_grid(&mut rng, 1, spec.proc_num_max, spec.proc_den);
        let w = draw_grid(&mut rng, 0, spec.weight_num_max, spec.weight_den);
        pw.push((p, w));
    }
    let mut edges = Vec::new();
    match spec.model {
        RandomModel::Chains => {
            for i in 1..n {
                if bernoulli(&mut rng, &spec.attach_prob) {
                    edges.push((i - 1, i));
                }
            }
        }
        RandomModel::OutForest => {
            for i in 1..n {
                if bernoulli(&mut rng, &spec.attach_prob) {
                    edges.push((rng.gen_range(0..i), i));
                }
            }
        }
        RandomModel::General => {
            for i in 0..n {
                for j in (i + 1)..n {
                    if bernoulli(&mut rng, &spec.edge_prob) {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    Ok(Instance::new(pw, edges).expect("generated instances are structurally valid"))
}

// ───────────────────────── tests ─────────────────────────

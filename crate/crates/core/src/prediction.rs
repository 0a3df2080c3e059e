//! Prediction bundles for learning-augmented policies: exact ground truths,
//! seeded perturbation, error measures, and the weight-prediction
//! sub-instance construction for chains.
//!
//! Every prediction a policy consumes travels as a [`PredictionBundle`]: a
//! model tag, one of three payload shapes (a per-job rational table, a
//! priority order, or a full predicted instance), and a provenance record —
//! exact truth, or a seeded perturbation of it — so experiments replay bit
//! for bit. Adaptive truth tables cover *every* job, not just the initial
//! front, so any front that materializes at run time is answerable.
//!
//! The error measures price a prediction's distance from its truth in the
//! currency its consumer pays: weighted inversions against the oracle order
//! for action predictions ([`eta_inversions`]), excess schedule cost on
//! padded chain pairs for input predictions ([`lambda_error`]),
//! multiplicative distortion for adaptive weight tables
//! ([`distortion_error`]), and the approximate-largest-inversion count for
//! adaptive orders ([`l_eps_error`]). [`build_weight_subinstances`] splits a
//! chain instance along a static weight prediction into the predicted,
//! underpredicted, overpredicted, and corrected instances that drive the
//! weight-prediction analysis.

use std::collections::BTreeMap;
use std::fmt;

use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::Trace;
use crate::instance::{Instance, JobId, TopologyClass};
use crate::oracle::{opt_brute_force, opt_chain_exact, opt_weighted_max, OracleError};
use crate::rational::{format_rat, parse_rat, rat_int, to_f64, Rat};

/// Default denominator for the rational noise grid.
pub const DEFAULT_GRID: u32 = 1_000_000;

// ───────────────────────── bundle types ─────────────────────────

/// The prediction models a bundle can serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Total outstanding weight behind each initial front job.
    StaticWeights,
    /// Total outstanding weight behind every job, answerable at any front.
    AdaptiveWeights,
    /// One priority order over the jobs, fixed up front.
    StaticOrder,
    /// A priority order re-read at every front (same payload shape).
    AdaptiveOrder,
    /// Weight-per-processing average of each job's successor set.
    Averages,
    /// A full completion order to follow verbatim.
    ActionsStatic,
    /// A completion order treated as priorities among available jobs.
    ActionsAdaptive,
    /// A predicted copy of the whole instance (chains only).
    Input,
}

impl Model {
    /// Every model, in declaration order.
    pub const ALL: [Model; 8] = [
        Model::StaticWeights,
        Model::AdaptiveWeights,
        Model::StaticOrder,
        Model::AdaptiveOrder,
        Model::Averages,
        Model::ActionsStatic,
        Model::ActionsAdaptive,
        Model::Input,
    ];

    /// Stable identifier used in JSON documents and CSV columns.
    pub fn as_str(self) -> &'static str {
        match self {
            Model::StaticWeights => "static_weights",
            Model::AdaptiveWeights => "adaptive_weights",
            Model::StaticOrder => "static_order",
            Model::AdaptiveOrder => "adaptive_order",
            Model::Averages => "averages",
            Model::ActionsStatic => "actions_static",
            Model::ActionsAdaptive => "actions_adaptive",
            Model::Input => "input",
        }
    }

    /// Inverse of [`Model::as_str`].
    pub fn parse(s: &str) -> Option<Model> {
        Model::ALL.into_iter().find(|m| m.as_str() == s)
    }

    fn payload_kind(self) -> PayloadKind {
        match self {
            Model::StaticWeights | Model::AdaptiveWeights | Model::Averages => {
                PayloadKind::Weights
            }
            Model::StaticOrder
            | Model::AdaptiveOrder
            | Model::ActionsStatic
            | Model::ActionsAdaptive => PayloadKind::Order,
            Model::Input => PayloadKind::Instance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PayloadKind {
    Weights,
    Order,
    Instance,
}

/// Model-specific content of a bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Per-job rational table (weights or averages).
    Weights(BTreeMap<JobId, Rat>),
    /// Priority order, highest priority first.
    Order(Vec<JobId>),
    /// A full predicted instance.
    Instance(Instance),
}

/// Seeded noise applied by [`perturb`]; which kind applies depends on the
/// bundle's payload shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoiseSpec {
    /// Multiply every table entry by `exp(u)` with `u` uniform on the
    /// `2·grid + 1` point lattice over `[−β, β]`, snapped onto the rational
    /// grid `k/grid` and floored at `1/grid`.
    WeightFactor { beta: Rat, grid: u32 },
    /// Apply this many uniformly random adjacent transpositions.
    AdjacentSwaps { swaps: u32 },
    /// Weight-factor noise plus a per-chain length delta drawn uniformly
    /// from `−len_delta..=len_delta` (truncating the tail, or padding
    /// zero-weight unit jobs).
    InputNoise { beta: Rat, grid: u32, len_delta: u32 },
}

impl NoiseSpec {
    /// Stable identifier used in JSON documents.
    pub fn kind(&self) -> &'static str {
        match self {
            NoiseSpec::WeightFactor { .. } => "weight_factor",
            NoiseSpec::AdjacentSwaps { .. } => "adjacent_swaps",
            NoiseSpec::InputNoise { .. } => "input_noise",
        }
    }
}

/// Where a bundle's payload came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Derived exactly from the instance.
    Truth,
    /// [`perturb`] applied to a truth bundle with this seed and noise.
    Perturbed { seed: u64, noise: NoiseSpec },
}

/// A prediction ready for consumption by a policy or an error measure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionBundle {
    pub model: Model,
    pub payload: Payload,
    pub provenance: Provenance,
}

/// Errors from prediction derivation, perturbation, and error measures.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PredictionError {
    #[error("instance too large for the exact oracle: n = {n}, limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("average for job {0} is undefined: its successor set has zero total processing")]
    UndefinedAverage(JobId),
    #[error("noise `{noise}` does not apply to model `{model}`")]
    IncompatibleNoise { model: String, noise: String },
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("order history does not match the trace: {0}")]
    HistoryMismatch(String),
    #[error("job {0} must have unit processing time")]
    NonUnitProcessing(JobId),
    #[error("no prediction entry for job {0}")]
    MissingEntry(JobId),
    #[error("bundle JSON: {0}")]
    Json(String),
}

// ───────────────────────── error reports ─────────────────────────

/// A single error-measure value; infinite marks an undefined ratio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorValue {
    Finite(Rat),
    Infinite,
}

impl fmt::Display for ErrorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorValue::Finite(r) => write!(f, "{}", format_rat(r)),
            ErrorValue::Infinite => write!(f, "inf"),
        }
    }
}

/// A computed error measure: named values plus the parameters they depend
/// on, tagged with the model family the measure speaks for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorReport {
    pub model: String,
    /// Named values in a fixed order, e.g. `("lambda", …)`.
    pub values: Vec<(String, ErrorValue)>,
    /// Named parameters, e.g. `("epsilon", …)`.
    pub parameters: Vec<(String, Rat)>,
}

impl ErrorReport {
    /// Looks up a value by name.
    pub fn value(&self, name: &str) -> Option<&ErrorValue> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Looks up a value by name, requiring it to be finite.
    pub fn finite(&self, name: &str) -> Option<&Rat> {
        match self.value(name) {
            Some(ErrorValue::Finite(r)) => Some(r),
            _ => None,
        }
    }
}

// ───────────────────────── shared helpers ─────────────────────────

fn oracle_err(e: OracleError) -> PredictionError {
    match e {
        OracleError::TooLarge { n, limit } => PredictionError::TooLarge { n, limit },
        other => PredictionError::TopologyMismatch(other.to_string()),
    }
}

fn chains_of(inst: &Instance) -> Result<Vec<Vec<JobId>>, PredictionError> {
    inst.chains().map_err(|e| PredictionError::TopologyMismatch(e.to_string()))
}

/// Optimal single-machine completion order: the exact chain solver when the
/// topology allows it, the brute-force solver otherwise.
fn reference_order(inst: &Instance) -> Result<Vec<JobId>, PredictionError> {
    let opt = if inst.classify_topology().class == TopologyClass::Chains {
        opt_chain_exact(inst)
    } else {
        opt_brute_force(inst, 1)
    };
    Ok(opt.map_err(oracle_err)?.order)
}

/// Accumulates disjoint chains into one instance with dense ids.
struct ChainBuilder {
    pw: Vec<(Rat, Rat)>,
    edges: Vec<(JobId, JobId)>,
}

impl ChainBuilder {
    fn new() -> ChainBuilder {
        ChainBuilder { pw: Vec::new(), edges: Vec::new() }
    }

    fn push(&mut self, chain: Vec<(Rat, Rat)>) {
        let first = self.pw.len();
        self.pw.extend(chain);
        for a in first..self.pw.len().saturating_sub(1) {
            self.edges.push((a, a + 1));
        }
    }

    fn build(self) -> Instance {
        Instance::new(self.pw, self.edges).expect("assembled chains are valid")
    }
}

// ───────────────────────── ground truth ─────────────────────────

/// Derives the exact truth bundle for `model` on `inst`.
///
/// Weight tables carry `w(S(v))`, keyed on the initial front for the static
/// model and on every job for the adaptive one; averages carry
/// `w(S(v))/p(S(v))` for every job. Order models rank all jobs by
/// non-increasing `w(S(v))`, ties broken by id. Action models carry the
/// oracle's optimal completion order, and the input model carries the
/// instance itself (chains only).
pub fn ground_truth(inst: &Instance, model: Model) -> Result<PredictionBundle, PredictionError> {
    let payload = match model {
        Model::StaticWeights => {
            let table = inst
                .initial_front()
                .into_iter()
                .map(|v| (v, inst.successor_weight(v)))
                .collect();
            Payload::Weights(table)
        }
        Model::AdaptiveWeights => {
            let table = (0..inst.len()).map(|v| (v, inst.successor_weight(v))).collect();
            Payload::Weights(table)
        }
        Model::Averages => {
            let mut table = BTreeMap::new();
            for v in 0..inst.len() {
                let agg = inst.successor_aggregate(v).expect("id is in range");
                table.insert(v, agg.average.ok_or(PredictionError::UndefinedAverage(v))?);
            }
            Payload::Weights(table)
        }
        Model::StaticOrder | Model::AdaptiveOrder => {
            let weight: Vec<Rat> = (0..inst.len()).map(|v| inst.successor_weight(v)).collect();
            let mut order: Vec<JobId> = (0..inst.len()).collect();
            order.sort_by(|&a, &b| weight[b].cmp(&weight[a]).then(a.cmp(&b)));
            Payload::Order(order)
        }
        Model::ActionsStatic | Model::ActionsAdaptive => Payload::Order(reference_order(inst)?),
        Model::Input => {
            chains_of(inst)?;
            Payload::Instance(inst.clone())
        }
    };
    Ok(PredictionBundle { model, payload, provenance: Provenance::Truth })
}

// ───────────────────────── perturbation ─────────────────────────

/// One multiplicative factor `exp(u)`, `u` uniform on the `2·grid + 1` point
/// lattice over `[−β, β]`, snapped onto the grid `k/grid` and floored at
/// `1/grid`. With `β = 0` the factor is exactly one.
fn draw_factor<R: Rng>(rng: &mut R, beta: &Rat, grid: u32) -> Rat {
    let grid = grid.max(1);
    let k = rng.gen_range(0..=2 * u64::from(grid));
    let u = beta * (rat_int(k as i64) / rat_int(i64::from(grid)) - rat_int(1));
    let snapped = (to_f64(&u).exp() * f64::from(grid)).round() as i64;
    Rat::new(snapped.max(1).into(), i64::from(grid).into())
}

fn perturb_instance<R: Rng>(
    rng: &mut R,
    inst: &Instance,
    beta: &Rat,
    grid: u32,
    len_delta: u32,
) -> Result<Instance, PredictionError> {
    let chains = chains_of(inst)?;
    let mut out = ChainBuilder::new();
    for chain in &chains {
        let delta = rng.gen_range(-i64::from(len_delta)..=i64::from(len_delta));
        let new_len = (chain.len() as i64 + delta).max(1) as usize;
        let mut pw = Vec::with_capacity(new_len);
        for idx in 0..new_len {
            if idx < chain.len() {
                let job = inst.job(chain[idx]);
                pw.push((job.p.clone(), &job.w * draw_factor(rng, beta, grid)));
            } else {
                pw.push((rat_int(1), Rat::zero()));
            }
        }
        out.push(pw);
    }
    Ok(out.build())
}

/// Applies seeded noise to a bundle. The same seed reproduces the same
/// output bit for bit, and the result records its provenance.
pub fn perturb(
    bundle: &PredictionBundle,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<PredictionBundle, PredictionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let payload = match (&bundle.payload, noise) {
        (Payload::Weights(table), NoiseSpec::WeightFactor { beta, grid }) => {
            let mut out = table.clone();
            for value in out.values_mut() {
                *value *= draw_factor(&mut rng, beta, *grid);
            }
            Payload::Weights(out)
        }
        (Payload::Order(order), NoiseSpec::AdjacentSwaps { swaps }) => {
            let mut out = order.clone();
            for _ in 0..*swaps {
                if out.len() >= 2 {
                    let i = rng.gen_range(0..out.len() - 1);
                    out.swap(i, i + 1);
                }
            }
            Payload::Order(out)
        }
        (Payload::Instance(inst), NoiseSpec::InputNoise { beta, grid, len_delta }) => {
            Payload::Instance(perturb_instance(&mut rng, inst, beta, *grid, *len_delta)?)
        }
        _ => {
            return Err(PredictionError::IncompatibleNoise {
                model: bundle.model.as_str().to_string(),
                noise: noise.kind().to_string(),
            })
        }
    };
    Ok(PredictionBundle {
        model: bundle.model,
        payload,
        provenance: Provenance::Perturbed { seed, noise: noise.clone() },
    })
}

// ───────────────────────── error measures ─────────────────────────

/// Signed weighted-inversion error of a predicted completion order against
/// the oracle's optimal order: `Σ (w_j′·p_j − w_j·p_j′)` over pairs `(j′, j)`
/// that the optimal order runs as `j′` before `j` but the prediction
/// inverts. Jobs absent from the prediction rank after every listed one, in
/// id order.
pub fn eta_inversions(inst: &Instance, sigma_hat: &[JobId]) -> Result<ErrorReport, PredictionError> {
    let sigma = reference_order(inst)?;
    let n = inst.len();
    let mut pos_hat: Vec<usize> = (0..n).map(|id| sigma_hat.len() + id).collect();
    for (idx, &j) in sigma_hat.iter().enumerate() {
        if j < n {
            pos_hat[j] = idx;
        }
    }
    let mut eta = Rat::zero();
    for (a, &jp) in sigma.iter().enumerate() {
        for &j in &sigma[a + 1..] {
            if pos_hat[j] < pos_hat[jp] {
                eta += &inst.job(jp).w * &inst.job(j).p - &inst.job(j).w * &inst.job(jp).p;
            }
        }
    }
    Ok(ErrorReport {
        model: "actions".to_string(),
        values: vec![("eta".to_string(), ErrorValue::Finite(eta))],
        parameters: vec![],
    })
}

fn positive_part(a: &Rat, b: &Rat) -> Rat {
    if a > b {
        a - b
    } else {
        Rat::zero()
    }
}

/// Input-prediction error for unit-job chain instances.
///
/// Chains are paired by rank (head order) and each pair is padded with
/// zero-weight unit jobs to a common length, yielding one shared job set
/// with an actual and a predicted weight per job. On that set, `gamma_u`
/// prices the actual weight exceeding its prediction against schedules
/// optimal for the predicted weights, `gamma_a` prices the predicted weight
/// that never materializes against schedules optimal for the actual
/// weights, and `lambda` is their sum.
pub fn lambda_error(
    predicted: &Instance,
    actual: &Instance,
) -> Result<ErrorReport, PredictionError> {
    let pred_chains = chains_of(predicted)?;
    let act_chains = chains_of(actual)?;
    if pred_chains.len() != act_chains.len() {
        return Err(PredictionError::TopologyMismatch(format!(
            "predicted {} chains, actual {}",
            pred_chains.len(),
            act_chains.len()
        )));
    }
    for (inst, chains) in [(predicted, &pred_chains), (actual, &act_chains)] {
        for &j in chains.iter().flatten() {
            if inst.job(j).p != rat_int(1) {
                return Err(PredictionError::NonUnitProcessing(j));
            }
        }
    }
    let mut shared = ChainBuilder::new();
    let mut w = Vec::new();
    let mut w_hat = Vec::new();
    for (pc, ac) in pred_chains.iter().zip(&act_chains) {
        let len = pc.len().max(ac.len());
        for idx in 0..len {
            w.push(ac.get(idx).map_or_else(Rat::zero, |&j| actual.job(j).w.clone()));
            w_hat.push(pc.get(idx).map_or_else(Rat::zero, |&j| predicted.job(j).w.clone()));
        }
        shared.push(vec![(rat_int(1), Rat::zero()); len]);
    }
    let shared = shared.build();
    let unexpected: Vec<Rat> = w.iter().zip(&w_hat).map(|(w, wh)| positive_part(w, wh)).collect();
    let absent: Vec<Rat> = w.iter().zip(&w_hat).map(|(w, wh)| positive_part(wh, w)).collect();
    let gamma_u = opt_weighted_max(&unexpected, &w_hat, &shared).map_err(oracle_err)?;
    let gamma_a = opt_weighted_max(&absent, &w, &shared).map_err(oracle_err)?;
    let lambda = &gamma_u + &gamma_a;
    Ok(ErrorReport {
        model: "input".to_string(),
        values: vec![
            ("gamma_u".to_string(), ErrorValue::Finite(gamma_u)),
            ("gamma_a".to_string(), ErrorValue::Finite(gamma_a)),
            ("lambda".to_string(), ErrorValue::Finite(lambda)),
        ],
        parameters: vec![],
    })
}

/// Multiplicative distortion of an adaptive weight table against the truth:
/// `max_v table(v)/w(S(v)) · max_v w(S(v))/table(v)`. A missing or
/// non-positive entry on either side makes the value infinite. Invariant
/// under uniform positive scaling of the table.
pub fn distortion_error(inst: &Instance, table: &BTreeMap<JobId, Rat>) -> ErrorReport {
    let mut over: Option<Rat> = None;
    let mut under: Option<Rat> = None;
    let mut infinite = false;
    for v in 0..inst.len() {
        let truth = inst.successor_weight(v);
        match table.get(&v) {
            Some(pred) if *pred > Rat::zero() && truth > Rat::zero() => {
                let o = pred / &truth;
                let u = &truth / pred;
                if over.as_ref().map_or(true, |best| o > *best) {
                    over = Some(o);
                }
                if under.as_ref().map_or(true, |best| u > *best) {
                    under = Some(u);
                }
            }
            _ => {
                infinite = true;
                break;
            }
        }
    }
    let value = if infinite {
        ErrorValue::Infinite
    } else {
        match (over, under) {
            (Some(o), Some(u)) => ErrorValue::Finite(o * u),
            _ => ErrorValue::Finite(rat_int(1)),
        }
    };
    ErrorReport {
        model: "adaptive_weights".to_string(),
        values: vec![("distortion".to_string(), value)],
        parameters: vec![],
    }
}

/// Approximate-largest-inversion error of a per-event predicted order
/// history against its trace.
///
/// For every event and every front job `j`, counts the front jobs `i` the
/// prediction ranks no later than `j` although `w(S(j))/(1+ε) ≥ w(S(i))`.
/// The raw value `l_raw` is the maximum count over all events and jobs; the
/// reported value floors it at `1+ε` (and at 1). On a fixed run, `l_raw` is
/// non-increasing in ε.
///
/// # Panics
/// Panics when `eps` is not positive.
pub fn l_eps_error(
    trace: &Trace,
    history: &[(Rat, Vec<JobId>)],
    inst: &Instance,
    eps: &Rat,
) -> Result<ErrorReport, PredictionError> {
    assert!(*eps > Rat::zero(), "epsilon must be positive");
    if history.len() != trace.segments.len() {
        return Err(PredictionError::HistoryMismatch(format!(
            "{} history events vs {} trace segments",
            history.len(),
            trace.segments.len()
        )));
    }
    for (event, segment) in history.iter().zip(&trace.segments) {
        if event.0 != segment.start {
            return Err(PredictionError::HistoryMismatch(format!(
                "event at time {} vs segment starting at {}",
                format_rat(&event.0),
                format_rat(&segment.start)
            )));
        }
        let mut ranked = event.1.clone();
        let mut front = segment.front.clone();
        ranked.sort_unstable();
        front.sort_unstable();
        if ranked != front {
            return Err(PredictionError::HistoryMismatch(format!(
                "front sets differ at time {}",
                format_rat(&event.0)
            )));
        }
    }
    let scale = rat_int(1) + eps;
    let mut l_raw = 0usize;
    for (_, ranked) in history {
        let weights: Vec<Rat> = ranked.iter().map(|&j| inst.successor_weight(j)).collect();
        for (pos_j, w_j) in weights.iter().enumerate() {
            let threshold = w_j / &scale;
            let count = weights[..=pos_j].iter().filter(|w_i| threshold >= **w_i).count();
            l_raw = l_raw.max(count);
        }
    }
    let raw = rat_int(l_raw as i64);
    let reported = raw.clone().max(scale).max(rat_int(1));
    Ok(ErrorReport {
        model: "adaptive_order".to_string(),
        values: vec![
            ("l_raw".to_string(), ErrorValue::Finite(raw)),
            ("reported".to_string(), ErrorValue::Finite(reported)),
        ],
        parameters: vec![("epsilon".to_string(), eps.clone())],
    })
}

// ───────────────────────── weight sub-instances ─────────────────────────

/// The four instances a static chain-weight prediction splits an instance
/// into. All four use fresh dense ids, chains in original head order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSubinstances {
    /// Every chain reshaped so its total weight equals its prediction:
    /// truncated at the first prefix covering an underprediction, or with
    /// the last weight raised to absorb an overprediction.
    pub predicted: Instance,
    /// Only the underpredicted chains: a stand-in job carrying the clipped
    /// weight and the whole substituted prefix's processing, followed by the
    /// untouched actual tail.
    pub underpredicted: Instance,
    /// Only the overpredicted chains: a single job carrying the excess
    /// weight and the whole chain's processing.
    pub overpredicted: Instance,
    /// The predicted instance with every overpredicted chain's final weight
    /// reset to its actual value.
    pub corrected: Instance,
}

/// Splits a chain instance along a static weight prediction (keyed by chain
/// head) into [`WeightSubinstances`].
///
/// # Panics
/// Panics when a predicted weight is negative.
pub fn build_weight_subinstances(
    inst: &Instance,
    w_hat: &BTreeMap<JobId, Rat>,
) -> Result<WeightSubinstances, PredictionError> {
    let chains = chains_of(inst)?;
    let mut predicted = ChainBuilder::new();
    let mut underpredicted = ChainBuilder::new();
    let mut overpredicted = ChainBuilder::new();
    let mut corrected = ChainBuilder::new();
    for chain in &chains {
        let head = chain[0];
        let target = w_hat.get(&head).ok_or(PredictionError::MissingEntry(head))?;
        assert!(*target >= Rat::zero(), "chain weight predictions must be non-negative");
        let pw: Vec<(Rat, Rat)> =
            chain.iter().map(|&j| (inst.job(j).p.clone(), inst.job(j).w.clone())).collect();
        let total: Rat = pw.iter().map(|(_, w)| w.clone()).sum();
        if *target == total {
            predicted.push(pw.clone());
            corrected.push(pw);
        } else if *target < total {
            // Keep the first prefix whose weight covers the prediction; the
            // cut job keeps only the weight needed to hit it exactly.
            let mut acc = Rat::zero();
            let mut cut = 0;
            for (idx, (_, w)) in pw.iter().enumerate() {
                acc += w;
                if *target <= acc {
                    cut = idx;
                    break;
                }
            }
            let clipped = &acc - target;
            let mut hat = pw[..=cut].to_vec();
            hat[cut].1 = &hat[cut].1 - &clipped;
            let prefix_p: Rat = hat.iter().map(|(p, _)| p.clone()).sum();
            predicted.push(hat.clone());
            corrected.push(hat);
            let mut rest = vec![(prefix_p, clipped)];
            rest.extend(pw[cut + 1..].iter().cloned());
            underpredicted.push(rest);
        } else {
            let excess = target - &total;
            let last = pw.len() - 1;
            let mut hat = pw.clone();
            hat[last].1 = &hat[last].1 + &excess;
            predicted.push(hat.clone());
            hat[last].1 = pw[last].1.clone();
            corrected.push(hat);
            let chain_p: Rat = pw.iter().map(|(p, _)| p.clone()).sum();
            overpredicted.push(vec![(chain_p, excess)]);
        }
    }
    Ok(WeightSubinstances {
        predicted: predicted.build(),
        underpredicted: underpredicted.build(),
        overpredicted: overpredicted.build(),
        corrected: corrected.build(),
    })
}

// ───────────────────────── JSON serialization ─────────────────────────

fn noise_to_json(noise: &NoiseSpec) -> Value {
    match noise {
        NoiseSpec::WeightFactor { beta, grid } => json!({
            "kind": "weight_factor",
            "beta": format_rat(beta),
            "grid": grid,
        }),
        NoiseSpec::AdjacentSwaps { swaps } => json!({
            "kind": "adjacent_swaps",
            "swaps": swaps,
        }),
        NoiseSpec::InputNoise { beta, grid, len_delta } => json!({
            "kind": "input_noise",
            "beta": format_rat(beta),
            "grid": grid,
            "len_delta": len_delta,
        }),
    }
}

fn field<'a>(doc: &'a Value, key: &str) -> Result<&'a Value, PredictionError> {
    doc.get(key).ok_or_else(|| PredictionError::Json(format!("missing field `{key}`")))
}

fn str_field<'a>(doc: &'a Value, key: &str) -> Result<&'a str, PredictionError> {
    field(doc, key)?
        .as_str()
        .ok_or_else(|| PredictionError::Json(format!("field `{key}` must be a string")))
}

fn u64_field(doc: &Value, key: &str) -> Result<u64, PredictionError> {
    field(doc, key)?
        .as_u64()
        .ok_or_else(|| PredictionError::Json(format!("field `{key}` must be a non-negative integer")))
}

fn rat_field(doc: &Value, key: &str) -> Result<Rat, PredictionError> {
    parse_rat(str_field(doc, key)?).map_err(|e| PredictionError::Json(e.to_string()))
}

fn noise_from_json(doc: &Value) -> Result<NoiseSpec, PredictionError> {
    match str_field(doc, "kind")? {
        "weight_factor" => Ok(NoiseSpec::WeightFactor {
            beta: rat_field(doc, "beta")?,
            grid: u64_field(doc, "grid")? as u32,
        }),
        "adjacent_swaps" => Ok(NoiseSpec::AdjacentSwaps { swaps: u64_field(doc, "swaps")? as u32 }),
        "input_noise" => Ok(NoiseSpec::InputNoise {
            beta: rat_field(doc, "beta")?,
            grid: u64_field(doc, "grid")? as u32,
            len_delta: u64_field(doc, "len_delta")? as u32,
        }),
        other => Err(PredictionError::Json(format!("unknown noise kind `{other}`"))),
    }
}

impl PredictionBundle {
    /// Serializes to the versioned bundle JSON document.
    pub fn to_json(&self) -> String {
        let payload = match &self.payload {
            Payload::Weights(table) => json!({
                "weights": table
                    .iter()
                    .map(|(id, w)| json!([id, format_rat(w)]))
                    .collect::<Vec<_>>(),
            }),
            Payload::Order(order) => json!({ "order": order }),
            Payload::Instance(inst) => json!({
                "instance": serde_json::from_str::<Value>(&inst.to_json())
                    .expect("instance JSON is valid"),
            }),
        };
        let provenance = match &self.provenance {
            Provenance::Truth => json!({ "origin": "truth" }),
            Provenance::Perturbed { seed, noise } => json!({
                "origin": "perturbed",
                "seed": seed,
                "noise": noise_to_json(noise),
            }),
        };
        let doc = json!({
            "version": 1,
            "model": self.model.as_str(),
            "payload": payload,
            "provenance": provenance,
        });
        serde_json::to_string_pretty(&doc).expect("bundle serialization cannot fail")
    }

    /// Parses the versioned bundle JSON document, checking that the payload
    /// shape matches the model and that every rational is non-negative.
    pub fn from_json(text: &str) -> Result<PredictionBundle, PredictionError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| PredictionError::Json(e.to_string()))?;
        if let Some(version) = doc.get("version") {
            if version.as_u64() != Some(1) {
                return Err(PredictionError::Json(format!("unsupported version {version}")));
            }
        }
        let model_str = str_field(&doc, "model")?;
        let model = Model::parse(model_str)
            .ok_or_else(|| PredictionError::Json(format!("unknown model `{model_str}`")))?;
        let payload_doc = field(&doc, "payload")?;
        let payload = match model.payload_kind() {
            PayloadKind::Weights => {
                let rows = field(payload_doc, "weights")?
                    .as_array()
                    .ok_or_else(|| PredictionError::Json("`weights` must be an array".into()))?;
                let mut table = BTreeMap::new();
                for row in rows {
                    let pair = row
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .ok_or_else(|| PredictionError::Json("weight rows are [id, value] pairs".into()))?;
                    let id = pair[0]
                        .as_u64()
                        .ok_or_else(|| PredictionError::Json("weight row id must be an integer".into()))?
                        as usize;
                    let value = pair[1]
                        .as_str()
                        .ok_or_else(|| PredictionError::Json("weight row value must be a string".into()))?;
                    let value = parse_rat(value).map_err(|e| PredictionError::Json(e.to_string()))?;
                    if value < Rat::zero() {
                        return Err(PredictionError::Json(format!("negative value for job {id}")));
                    }
                    if table.insert(id, value).is_some() {
                        return Err(PredictionError::Json(format!("duplicate id {id}")));
                    }
                }
                Payload::Weights(table)
            }
            PayloadKind::Order => {
                let rows = field(payload_doc, "order")?
                    .as_array()
                    .ok_or_else(|| PredictionError::Json("`order` must be an array".into()))?;
                let order = rows
                    .iter()
                    .map(|v| {
                        v.as_u64().map(|x| x as usize).ok_or_else(|| {
                            PredictionError::Json("order entries must be integers".into())
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Payload::Order(order)
            }
            PayloadKind::Instance => {
                let inner = field(payload_doc, "instance")?;
                let inst = Instance::from_json(&inner.to_string())
                    .map_err(|e| PredictionError::Json(e.to_string()))?;
                Payload::Instance(inst)
            }
        };
        let prov_doc = field(&doc, "provenance")?;
        let provenance = match str_field(prov_doc, "origin")? {
            "truth" => Provenance::Truth,
            "perturbed" => Provenance::Perturbed {
                seed: u64_field(prov_doc, "seed")?,
                noise: noise_from_json(field(prov_doc, "noise")?)?,
            },
            other => return Err(PredictionError::Json(format!("unknown origin `{other}`"))),
        };
        Ok(PredictionBundle { model, payload, provenance })
    }
}

// ───────────────────────── tests ─────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::policy::follow::ActionMode;
    use crate::policy::{follow_action, order_adaptive};
    use crate::rational::rat;

    fn chain(pw: &[(i64, i64)]) -> Instance {
        let jobs = pw.iter().map(|&(p, w)| (rat_int(p), rat_int(w))).collect();
        let edges = (1..pw.len()).map(|i| (i - 1, i)).collect();
        Instance::new(jobs, edges).unwrap()
    }

    fn singletons(ws: &[i64]) -> Instance {
        let jobs = ws.iter().map(|&w| (rat_int(1), rat_int(w))).collect();
        Instance::new(jobs, vec![]).unwrap()
    }

    fn weights(bundle: &PredictionBundle) -> &BTreeMap<JobId, Rat> {
        match &bundle.payload {
            Payload::Weights(t) => t,
            other => panic!("expected weights payload, got {other:?}"),
        }
    }

    fn order(bundle: &PredictionBundle) -> &[JobId] {
        match &bundle.payload {
            Payload::Order(o) => o,
            other => panic!("expected order payload, got {other:?}"),
        }
    }

    // ───────────────────────── ground truth ─────────────────────────

    #[test]
    fn static_weights_cover_the_initial_front() {
        let inst = chain(&[(1, 1), (1, 2)]);
        let bundle = ground_truth(&inst, Model::StaticWeights).unwrap();
        assert_eq!(weights(&bundle), &BTreeMap::from([(0, rat_int(3))]));
        assert_eq!(bundle.provenance, Provenance::Truth);

        let adaptive = ground_truth(&inst, Model::AdaptiveWeights).unwrap();
        assert_eq!(weights(&adaptive), &BTreeMap::from([(0, rat_int(3)), (1, rat_int(2))]));
    }

    #[test]
    fn order_truth_breaks_weight_ties_by_id() {
        // Chain 0→1 has w(S) = (5, 3); singleton 2 has w(S) = 5.
        let inst = Instance::new(
            vec![
                (rat_int(1), rat_int(2)),
                (rat_int(1), rat_int(3)),
                (rat_int(1), rat_int(5)),
            ],
            vec![(0, 1)],
        )
        .unwrap();
        let bundle = ground_truth(&inst, Model::StaticOrder).unwrap();
        assert_eq!(order(&bundle), [0, 2, 1]);
    }

    #[test]
    fn averages_divide_weight_by_processing() {
        // Chain (w=1, w=2, w=0) keeps the average at one over its prefix and
        // drops to zero on the weightless tail.
        let inst = chain(&[(1, 1), (1, 2), (1, 0)]);
        let bundle = ground_truth(&inst, Model::Averages).unwrap();
        let table = weights(&bundle);
        assert_eq!(table[&0], rat_int(1));
        assert_eq!(table[&1], rat_int(1));
        assert_eq!(table[&2], rat_int(0));
    }

    #[test]
    fn averages_reject_zero_processing_subtrees() {
        let inst = Instance::new(vec![(rat_int(0), rat_int(0))], vec![]).unwrap();
        assert_eq!(
            ground_truth(&inst, Model::Averages),
            Err(PredictionError::UndefinedAverage(0))
        );
    }

    #[test]
    fn actions_truth_is_the_oracle_order() {
        let inst = singletons(&[1, 2, 3]);
        let bundle = ground_truth(&inst, Model::ActionsStatic).unwrap();
        assert_eq!(order(&bundle), opt_brute_force(&inst, 1).unwrap().order);

        // A general DAG beyond the brute-force limit is rejected.
        let pw = vec![(rat_int(1), rat_int(1)); 13];
        let big = Instance::new(pw, vec![(0, 2), (1, 2), (0, 3), (2, 3)]).unwrap();
        assert_eq!(
            ground_truth(&big, Model::ActionsAdaptive),
            Err(PredictionError::TooLarge { n: 13, limit: 12 })
        );
    }

    #[test]
    fn input_truth_requires_chains() {
        let tree =
            Instance::new(vec![(rat_int(1), rat_int(1)); 3], vec![(0, 1), (0, 2)]).unwrap();
        assert!(matches!(
            ground_truth(&tree, Model::Input),
            Err(PredictionError::TopologyMismatch(_))
        ));

        let inst = chain(&[(1, 1), (1, 2)]);
        let bundle = ground_truth(&inst, Model::Input).unwrap();
        assert_eq!(bundle.payload, Payload::Instance(inst));
    }

    // ───────────────────────── perturbation ─────────────────────────

    #[test]
    fn zero_noise_is_the_identity() {
        let inst = chain(&[(1, 3), (1, 5)]);
        let truth = ground_truth(&inst, Model::AdaptiveWeights).unwrap();
        let noise = NoiseSpec::WeightFactor { beta: rat_int(0), grid: DEFAULT_GRID };
        let shaken = perturb(&truth, &noise, 11).unwrap();
        assert_eq!(shaken.payload, truth.payload);
        assert_eq!(shaken.provenance, Provenance::Perturbed { seed: 11, noise });

        let actions = ground_truth(&inst, Model::ActionsStatic).unwrap();
        let still = perturb(&actions, &NoiseSpec::AdjacentSwaps { swaps: 0 }, 11).unwrap();
        assert_eq!(still.payload, actions.payload);

        let input = ground_truth(&inst, Model::Input).unwrap();
        let copy = perturb(
            &input,
            &NoiseSpec::InputNoise { beta: rat_int(0), grid: DEFAULT_GRID, len_delta: 0 },
            11,
        )
        .unwrap();
        assert_eq!(copy.payload, input.payload);
    }

    #[test]
    fn perturbation_is_deterministic_per_seed() {
        let inst = singletons(&[1, 2, 3, 4, 5, 6]);
        let truth = ground_truth(&inst, Model::AdaptiveWeights).unwrap();
        let noise = NoiseSpec::WeightFactor { beta: rat(1, 2), grid: DEFAULT_GRID };
        let a = perturb(&truth, &noise, 7).unwrap();
        let b = perturb(&truth, &noise, 7).unwrap();
        assert_eq!(a, b);
        let c = perturb(&truth, &noise, 8).unwrap();
        assert_ne!(a.payload, c.payload);
        // Noise keeps every entry positive.
        for w in weights(&a).values() {
            assert!(*w > Rat::zero());
        }
    }

    #[test]
    fn order_noise_swaps_adjacent_entries() {
        let inst = singletons(&[1, 2, 3, 4]);
        let truth = ground_truth(&inst, Model::StaticOrder).unwrap();
        let shaken = perturb(&truth, &NoiseSpec::AdjacentSwaps { swaps: 1 }, 3).unwrap();
        let before = order(&truth);
        let after = order(&shaken);
        let mut sorted = after.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, [0, 1, 2, 3]);
        let diffs: Vec<usize> =
            (0..4).filter(|&i| before[i] != after[i]).collect();
        assert!(diffs.is_empty() || (diffs.len() == 2 && diffs[1] == diffs[0] + 1));
    }

    #[test]
    fn input_noise_reshapes_chains() {
        let inst = chain(&[(1, 2), (1, 3), (1, 5), (1, 7)]);
        let truth = ground_truth(&inst, Model::Input).unwrap();
        let noise = NoiseSpec::InputNoise { beta: rat_int(0), grid: DEFAULT_GRID, len_delta: 2 };
        for seed in 0..6 {
            let shaken = perturb(&truth, &noise, seed).unwrap();
            let Payload::Instance(out) = &shaken.payload else { panic!("expected instance") };
            let chains = out.chains().unwrap();
            assert_eq!(chains.len(), 1);
            let len = chains[0].len();
            assert!((2..=6).contains(&len));
            for (idx, &j) in chains[0].iter().enumerate() {
                assert_eq!(out.job(j).p, rat_int(1));
                if idx < 4 {
                    // β = 0 keeps kept weights exact.
                    assert_eq!(out.job(j).w, inst.job(idx).w);
                } else {
                    assert_eq!(out.job(j).w, rat_int(0));
                }
            }
        }
    }

    #[test]
    fn incompatible_noise_is_rejected() {
        let inst = chain(&[(1, 1), (1, 2)]);
        let truth = ground_truth(&inst, Model::StaticWeights).unwrap();
        assert_eq!(
            perturb(&truth, &NoiseSpec::AdjacentSwaps { swaps: 1 }, 0),
            Err(PredictionError::IncompatibleNoise {
                model: "static_weights".into(),
                noise: "adjacent_swaps".into(),
            })
        );
    }

    // ───────────────────────── weighted inversions ─────────────────────────

    #[test]
    fn eta_is_zero_on_the_oracle_order() {
        let inst = singletons(&[1, 2]);
        let sigma = ground_truth(&inst, Model::ActionsStatic).unwrap();
        let report = eta_inversions(&inst, order(&sigma)).unwrap();
        assert_eq!(report.finite("eta"), Some(&rat_int(0)));
        assert_eq!(report.model, "actions");
    }

    #[test]
    fn eta_prices_one_reversed_pair() {
        // Unit jobs with weights (1, 2): the optimum runs job 1 first, and
        // the reversed order pays 2·1 − 1·1 = 1. Following that order costs
        // exactly OPT + 1.
        let inst = singletons(&[1, 2]);
        let report = eta_inversions(&inst, &[0, 1]).unwrap();
        assert_eq!(report.finite("eta"), Some(&rat_int(1)));

        let mut policy = follow_action(&[0, 1], ActionMode::Static);
        let (result, _) = simulate(&inst, &mut policy, 1).unwrap();
        let opt = opt_brute_force(&inst, 1).unwrap().objective;
        assert_eq!(result.objective - opt, rat_int(1));
    }

    #[test]
    fn eta_ignores_inverted_identical_jobs() {
        let inst = singletons(&[1, 1]);
        let report = eta_inversions(&inst, &[1, 0]).unwrap();
        assert_eq!(report.finite("eta"), Some(&rat_int(0)));
    }

    // ───────────────────────── input error ─────────────────────────

    #[test]
    fn lambda_is_zero_for_exact_predictions() {
        let inst = chain(&[(1, 1), (1, 1)]);
        let report = lambda_error(&inst, &inst).unwrap();
        assert_eq!(report.finite("gamma_u"), Some(&rat_int(0)));
        assert_eq!(report.finite("gamma_a"), Some(&rat_int(0)));
        assert_eq!(report.finite("lambda"), Some(&rat_int(0)));
    }

    #[test]
    fn lambda_prices_a_single_misweighted_job() {
        let actual = singletons(&[2]);
        let predicted = singletons(&[1]);
        let report = lambda_error(&predicted, &actual).unwrap();
        assert_eq!(report.finite("gamma_u"), Some(&rat_int(1)));
        assert_eq!(report.finite("gamma_a"), Some(&rat_int(0)));
        assert_eq!(report.finite("lambda"), Some(&rat_int(1)));

        let swapped = lambda_error(&actual, &predicted).unwrap();
        assert_eq!(swapped.finite("gamma_u"), Some(&rat_int(0)));
        assert_eq!(swapped.finite("gamma_a"), Some(&rat_int(1)));
    }

    #[test]
    fn lambda_prices_predicted_jobs_that_never_materialize() {
        // The actual chain is one unit job of weight 1; the prediction
        // promises a second weighted job. The phantom weight would have
        // completed at time 2, so the overprediction costs 2.
        let actual = chain(&[(1, 1)]);
        let predicted = chain(&[(1, 1), (1, 1)]);
        let report = lambda_error(&predicted, &actual).unwrap();
        assert_eq!(report.finite("gamma_u"), Some(&rat_int(0)));
        assert_eq!(report.finite("gamma_a"), Some(&rat_int(2)));
        assert_eq!(report.finite("lambda"), Some(&rat_int(2)));

        // A weightless predicted tail costs nothing: the padded instances
        // coincide.
        let benign = chain(&[(1, 1), (1, 0)]);
        let report = lambda_error(&benign, &actual).unwrap();
        assert_eq!(report.finite("lambda"), Some(&rat_int(0)));
    }

    #[test]
    fn lambda_scales_linearly_with_weights() {
        // One two-job chain plus a singleton, with every weight tripled in
        // the second pair of instances.
        let build = |scale: i64| {
            let actual = Instance::new(
                vec![
                    (rat_int(1), rat_int(3 * scale)),
                    (rat_int(1), rat_int(scale)),
                    (rat_int(1), rat_int(2 * scale)),
                ],
                vec![(0, 1)],
            )
            .unwrap();
            let predicted = Instance::new(
                vec![
                    (rat_int(1), rat_int(scale)),
                    (rat_int(1), rat_int(2 * scale)),
                    (rat_int(1), rat_int(5 * scale)),
                ],
                vec![(0, 1)],
            )
            .unwrap();
            lambda_error(&predicted, &actual).unwrap()
        };
        let base = build(1);
        let tripled = build(3);
        assert!(*base.finite("lambda").unwrap() > Rat::zero());
        assert_eq!(
            tripled.finite("lambda").unwrap(),
            &(base.finite("lambda").unwrap() * rat_int(3))
        );
    }

    #[test]
    fn lambda_rejects_bad_shapes() {
        let long = singletons(&[1]);
        let heavy = Instance::new(vec![(rat_int(2), rat_int(1))], vec![]).unwrap();
        assert_eq!(lambda_error(&long, &heavy), Err(PredictionError::NonUnitProcessing(0)));

        let two = singletons(&[1, 1]);
        assert!(matches!(
            lambda_error(&two, &long),
            Err(PredictionError::TopologyMismatch(_))
        ));
    }

    // ───────────────────────── distortion ─────────────────────────

    #[test]
    fn distortion_reads_off_the_two_maxima() {
        let inst = singletons(&[1, 2, 3]);
        let truth = match ground_truth(&inst, Model::AdaptiveWeights).unwrap().payload {
            Payload::Weights(t) => t,
            _ => unreachable!(),
        };
        assert_eq!(distortion_error(&inst, &truth).value("distortion"), Some(&ErrorValue::Finite(rat_int(1))));

        let doubled: BTreeMap<JobId, Rat> =
            truth.iter().map(|(&k, v)| (k, v * rat_int(2))).collect();
        assert_eq!(
            distortion_error(&inst, &doubled).value("distortion"),
            Some(&ErrorValue::Finite(rat_int(1)))
        );

        let mut mixed = truth.clone();
        mixed.insert(0, &truth[&0] * rat_int(2));
        mixed.insert(1, &truth[&1] * rat(1, 3));
        assert_eq!(
            distortion_error(&inst, &mixed).value("distortion"),
            Some(&ErrorValue::Finite(rat_int(6)))
        );
    }

    #[test]
    fn distortion_is_infinite_on_missing_or_zero_entries() {
        let inst = singletons(&[1, 2]);
        let partial = BTreeMap::from([(0, rat_int(1))]);
        assert_eq!(
            distortion_error(&inst, &partial).value("distortion"),
            Some(&ErrorValue::Infinite)
        );

        let zeroed = BTreeMap::from([(0, rat_int(0)), (1, rat_int(2))]);
        assert_eq!(
            distortion_error(&inst, &zeroed).value("distortion"),
            Some(&ErrorValue::Infinite)
        );

        // Zero truth weight behind a job is just as undefined.
        let weightless = singletons(&[0, 1]);
        let table = BTreeMap::from([(0, rat_int(1)), (1, rat_int(1))]);
        assert_eq!(
            distortion_error(&weightless, &table).value("distortion"),
            Some(&ErrorValue::Infinite)
        );
    }

    // ───────────────────────── order inversions ─────────────────────────

    #[test]
    fn l_eps_floors_at_one_plus_eps() {
        let inst = singletons(&[1]);
        let mut policy = order_adaptive(&[0]);
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        let report =
            l_eps_error(&trace, policy.history(), &inst, &rat(1, 10)).unwrap();
        assert_eq!(report.finite("l_raw"), Some(&rat_int(0)));
        assert_eq!(report.finite("reported"), Some(&rat(11, 10)));
        assert_eq!(report.parameters, vec![("epsilon".to_string(), rat(1, 10))]);
    }

    #[test]
    fn l_eps_counts_light_jobs_ranked_ahead_of_a_heavy_one() {
        // Weights (1, 1, 4) with the heavy job predicted last: both light
        // jobs clear 4/(1 + 1/10) ≥ 1, so the heavy job counts two.
        let inst = singletons(&[1, 1, 4]);
        let mut policy = order_adaptive(&[0, 1, 2]);
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        let report =
            l_eps_error(&trace, policy.history(), &inst, &rat(1, 10)).unwrap();
        assert_eq!(report.finite("l_raw"), Some(&rat_int(2)));
        assert_eq!(report.finite("reported"), Some(&rat_int(2)));

        // A much larger ε excuses the same inversions and the floor takes
        // over: the raw count is non-increasing in ε.
        let lenient = l_eps_error(&trace, policy.history(), &inst, &rat_int(9)).unwrap();
        assert_eq!(lenient.finite("l_raw"), Some(&rat_int(0)));
        assert_eq!(lenient.finite("reported"), Some(&rat_int(10)));
    }

    #[test]
    fn l_eps_rejects_histories_from_other_runs() {
        let inst = singletons(&[1, 1, 4]);
        let mut policy = order_adaptive(&[0, 1, 2]);
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        let eps = rat(1, 10);

        let short = &policy.history()[..2];
        assert!(matches!(
            l_eps_error(&trace, short, &inst, &eps),
            Err(PredictionError::HistoryMismatch(_))
        ));

        let mut late = policy.history().to_vec();
        late[1].0 += rat(1, 7);
        assert!(matches!(
            l_eps_error(&trace, &late, &inst, &eps),
            Err(PredictionError::HistoryMismatch(_))
        ));

        let mut foreign = policy.history().to_vec();
        foreign[0].1 = vec![0, 1];
        assert!(matches!(
            l_eps_error(&trace, &foreign, &inst, &eps),
            Err(PredictionError::HistoryMismatch(_))
        ));
    }

    // ───────────────────────── weight sub-instances ─────────────────────────

    #[test]
    fn exact_predictions_leave_the_instance_alone() {
        let inst = Instance::new(
            vec![
                (rat_int(1), rat_int(1)),
                (rat_int(1), rat_int(2)),
                (rat_int(2), rat_int(5)),
            ],
            vec![(0, 1)],
        )
        .unwrap();
        let w_hat = BTreeMap::from([(0, rat_int(3)), (2, rat_int(5))]);
        let subs = build_weight_subinstances(&inst, &w_hat).unwrap();
        assert_eq!(subs.predicted, inst);
        assert_eq!(subs.corrected, inst);
        assert_eq!(subs.underpredicted.len(), 0);
        assert_eq!(subs.overpredicted.len(), 0);
    }

    #[test]
    fn underprediction_truncates_and_spills_the_clipped_weight() {
        // Chain weights (1, 2) predicted as 2: the substituted chain keeps
        // weights (1, 1), and the spill chain starts with a stand-in job
        // carrying the clipped weight 1 over the prefix's processing 2.
        let inst = chain(&[(1, 1), (1, 2)]);
        let w_hat = BTreeMap::from([(0, rat_int(2))]);
        let subs = build_weight_subinstances(&inst, &w_hat).unwrap();
        assert_eq!(subs.predicted, chain(&[(1, 1), (1, 1)]));
        assert_eq!(subs.corrected, subs.predicted);
        assert_eq!(subs.underpredicted, chain(&[(2, 1)]));
        assert_eq!(subs.overpredicted.len(), 0);
    }

    #[test]
    fn overprediction_extends_the_last_weight_and_isolates_the_excess() {
        let inst = chain(&[(1, 1), (1, 2)]);
        let w_hat = BTreeMap::from([(0, rat_int(5))]);
        let subs = build_weight_subinstances(&inst, &w_hat).unwrap();
        assert_eq!(subs.predicted, chain(&[(1, 1), (1, 4)]));
        assert_eq!(subs.overpredicted, chain(&[(2, 2)]));
        assert_eq!(subs.corrected, inst);
        assert_eq!(subs.underpredicted.len(), 0);
    }

    #[test]
    fn predicted_totals_match_their_predictions() {
        // Deterministic pseudo-random chains; the substituted instance must
        // hit every predicted total exactly, and correcting it can only
        // lower the optimum.
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move |mod_: i64| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % mod_ as u64) as i64
        };
        for _ in 0..25 {
            let chains = 1 + next(3);
            let mut pw = Vec::new();
            let mut edges = Vec::new();
            let mut heads = Vec::new();
            for _ in 0..chains {
                let len = 1 + next(3) as usize;
                heads.push(pw.len());
                for idx in 0..len {
                    if idx > 0 {
                        edges.push((pw.len() - 1, pw.len()));
                    }
                    pw.push((rat_int(1 + next(3)), rat_int(next(5))));
                }
            }
            let inst = Instance::new(pw, edges).unwrap();
            let w_hat: BTreeMap<JobId, Rat> =
                heads.iter().map(|&h| (h, rat(next(9), 2))).collect();
            let subs = build_weight_subinstances(&inst, &w_hat).unwrap();
            let predicted_chains = subs.predicted.chains().unwrap();
            assert_eq!(predicted_chains.len(), heads.len());
            for (chain, &head) in predicted_chains.iter().zip(&heads) {
                let total: Rat =
                    chain.iter().map(|&j| subs.predicted.job(j).w.clone()).sum();
                assert_eq!(total, w_hat[&head]);
            }
            let opt = opt_chain_exact(&inst).unwrap().objective;
            let opt_corrected = opt_chain_exact(&subs.corrected).unwrap().objective;
            assert!(opt_corrected <= opt);
        }
    }

    #[test]
    fn subinstances_require_head_predictions() {
        let inst = chain(&[(1, 1)]);
        assert_eq!(
            build_weight_subinstances(&inst, &BTreeMap::new()),
            Err(PredictionError::MissingEntry(0))
        );
    }

    // ───────────────────────── JSON round trips ─────────────────────────

    #[test]
    fn bundles_round_trip_through_json() {
        let inst = chain(&[(1, 1), (1, 2)]);
        for model in Model::ALL {
            let truth = ground_truth(&inst, model).unwrap();
            let back = PredictionBundle::from_json(&truth.to_json()).unwrap();
            assert_eq!(back, truth, "round trip for {}", model.as_str());
        }

        let truth = ground_truth(&inst, Model::AdaptiveWeights).unwrap();
        let noise = NoiseSpec::WeightFactor { beta: rat(1, 2), grid: 1000 };
        let shaken = perturb(&truth, &noise, 99).unwrap();
        let back = PredictionBundle::from_json(&shaken.to_json()).unwrap();
        assert_eq!(back, shaken);
    }

    #[test]
    fn bundle_json_rejects_malformed_documents() {
        let inst = chain(&[(1, 1)]);
        let good = ground_truth(&inst, Model::StaticWeights).unwrap().to_json();

        let bad_version = good.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            PredictionBundle::from_json(&bad_version),
            Err(PredictionError::Json(_))
        ));

        let bad_model = good.replace("static_weights", "mystery_model");
        assert!(matches!(
            PredictionBundle::from_json(&bad_model),
            Err(PredictionError::Json(_))
        ));

        // Payload shape must match the model.
        let mismatched = good.replace("static_weights", "actions_static");
        assert!(matches!(
            PredictionBundle::from_json(&mismatched),
            Err(PredictionError::Json(_))
        ));

        let negative = good.replace("\"1/1\"", "\"-1/1\"");
        assert!(matches!(
            PredictionBundle::from_json(&negative),
            Err(PredictionError::Json(_))
        ));
    }

    #[test]
    fn model_names_agree_with_serde() {
        for model in Model::ALL {
            let via_serde = serde_json::to_string(&model).unwrap();
            assert_eq!(via_serde, format!("\"{}\"", model.as_str()));
            assert_eq!(Model::parse(model.as_str()), Some(model));
        }
    }
}

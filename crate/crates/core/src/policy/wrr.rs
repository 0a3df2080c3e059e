//! Weighted round-robin over chains driven by static total-weight predictions.
//!
//! The policy is built for chain-shaped precedence constraints.  Each chain
//! carries a predicted total weight, keyed by the first job of the chain to
//! show up on the front.  While a chain is alive it receives a rate
//! proportional to its *tracked* weight: the predicted total minus the weight
//! of its jobs completed so far.  Chains whose tracked weight has dropped to
//! zero or below are starved until every positively tracked chain is done,
//! after which the leftovers are drained with uniform rates.
//!
//! On `m` machines the proportional split is preceded by a capping loop: while
//! the largest tracked weight would receive a proportional rate of at least 1,
//! that chain is pinned to rate exactly 1 and the remaining capacity is
//! re-split among the others.  With `m = 1` the loop only fires when a single
//! chain holds all remaining tracked weight, so the policy coincides with the
//! plain proportional rule.

use std::collections::BTreeMap;

use num::{One, Zero};

use crate::engine::{Decision, PolicyView, RateVector};
use crate::policy::{Policy, PolicyError};
use crate::rational::{rat, rat_int, Rat};
use crate::JobId;

struct ChainState {
    /// Tracked weight: prediction minus weight completed since anchoring.
    /// `None` until the chain first surfaces on the front.
    tracked: Option<Rat>,
    /// Front job currently representing the chain, if any.
    front: Option<JobId>,
}

/// Weighted round-robin over chains; see [`wrr_chains`] and [`wdeq_chains`].
pub struct WrrChains {
    label: &'static str,
    predictions: BTreeMap<JobId, Rat>,
    chains: Vec<ChainState>,
    chain_of: BTreeMap<JobId, usize>,
    weight_of: BTreeMap<JobId, Rat>,
}

/// Builds the single-machine weighted round-robin policy for chains.
///
/// `predictions` maps each initial front job to the predicted total weight of
/// its chain.  A chain surfacing without a prediction raises
/// [`PolicyError::MissingPrediction`]; any non-chain precedence raises
/// [`PolicyError::BranchingDetected`].
pub fn wrr_chains(predictions: BTreeMap<JobId, Rat>) -> WrrChains {
    WrrChains::new("wrr_chains", predictions)
}

/// Builds the parallel-machine variant of [`wrr_chains`].
///
/// The decision rule is identical — the machine count is read from the view —
/// but the capping loop only matters for `m > 1`, so the variant carries its
/// own name for reporting.
pub fn wdeq_chains(predictions: BTreeMap<JobId, Rat>) -> WrrChains {
    WrrChains::new("wdeq_chains", predictions)
}

impl WrrChains {
    fn new(label: &'static str, predictions: BTreeMap<JobId, Rat>) -> Self {
        WrrChains {
            label,
            predictions,
            chains: Vec::new(),
            chain_of: BTreeMap::new(),
            weight_of: BTreeMap::new(),
        }
    }

    fn ingest(&mut self, view: &PolicyView) -> Result<(), PolicyError> {
        // New jobs first: they may extend chains whose previous job completed
        // in this very event.
        let mut extended: BTreeMap<JobId, JobId> = BTreeMap::new();
        for reveal in &view.revealed {
            self.weight_of.insert(reveal.id, reveal.weight.clone());
            match reveal.preds.as_slice() {
                [] => {
                    let idx = self.chains.len();
                    self.chains.push(ChainState {
                        tracked: None,
                        front: None,
                    });
                    self.chain_of.insert(reveal.id, idx);
                }
                [pred] => {
                    if let Some(&other) = extended.get(pred) {
                        return Err(PolicyError::BranchingDetected {
                            completed: *pred,
                            revealed: vec![other, reveal.id],
                        });
                    }
                    extended.insert(*pred, reveal.id);
                    let idx = *self.chain_of.get(pred).ok_or(
                        PolicyError::BranchingDetected {
                            completed: *pred,
                            revealed: vec![reveal.id],
                        },
                    )?;
                    self.chain_of.insert(reveal.id, idx);
                }
                preds => {
                    return Err(PolicyError::BranchingDetected {
                        completed: preds[0],
                        revealed: vec![reveal.id],
                    });
                }
            }
        }
        // Completions reduce the tracked weight of anchored chains.
        for done in &view.completed {
            let idx = self.chain_of[done];
            if let Some(tracked) = self.chains[idx].tracked.as_mut() {
                *tracked -= &self.weight_of[done];
            }
        }
        // Refresh which job fronts each chain, anchoring on first contact.
        for chain in &mut self.chains {
            chain.front = None;
        }
        for job in &view.front {
            let idx = self.chain_of[&job.id];
            self.chains[idx].front = Some(job.id);
            if self.chains[idx].tracked.is_none() {
                let predicted = self
                    .predictions
                    .get(&job.id)
                    .cloned()
                    .ok_or(PolicyError::MissingPrediction { id: job.id })?;
                self.chains[idx].tracked = Some(predicted);
            }
        }
        Ok(())
    }
}

impl Policy for WrrChains {
    fn name(&self) -> String {
        self.label.to_string()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        self.ingest(view)?;
        // Pool of alive chains that still have positive tracked weight,
        // ordered by descending weight (ties: ascending front job id).
        let mut pool: Vec<(Rat, JobId)> = self
            .chains
            .iter()
            .filter_map(|c| match (&c.tracked, c.front) {
                (Some(t), Some(job)) if t > &Rat::zero() => Some((t.clone(), job)),
                _ => None,
            })
            .collect();
        if pool.is_empty() {
            // Drain phase: every remaining chain is overdrawn, split evenly.
            let k = view.front.len();
            if k == 0 {
                return Ok(Decision::rates(RateVector::new()));
            }
            let share = rat(view.machines as i64, k as i64);
            let share = if share > Rat::one() { Rat::one() } else { share };
            let ids: Vec<_> = view.front.iter().map(|f| f.id).collect();
            return Ok(Decision::rates(RateVector::uniform(&ids, share)));
        }
        pool.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut rates = RateVector::new();
        let mut capacity = rat_int(view.machines as i64);
        let mut total: Rat = pool.iter().map(|(t, _)| t.clone()).sum();
        let mut rest = pool.as_slice();
        // Pin chains whose proportional share would reach a full machine.
        while let Some(((top, job), tail)) = rest.split_first() {
            if &capacity * top >= total {
                rates.set(*job, Rat::one());
                total -= top;
                capacity -= Rat::one();
                rest = tail;
            } else {
                break;
            }
        }
        for (tracked, job) in rest {
            rates.set(*job, &capacity * tracked / &total);
        }
        Ok(Decision::rates(rates))
    }
}

// ───────────────────────────── tests ─────────────────────────────

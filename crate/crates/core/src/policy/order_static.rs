//! Harmonic-rate policy driven by a static priority order over the initial
//! front of a chain instance.
//!
//! The order fixes a rank for every chain at time zero.  In the strict
//! variant the chain at initial rank `i` keeps the rate `min{1, m/(H_ω · i)}`
//! for its entire life, where `ω` is the initial front size — capacity freed
//! by finished chains is deliberately left idle.  The work-conserving variant
//! re-ranks the surviving chains after every completion and uses the harmonic
//! number of the current chain count, so its rates always sum to the full
//! capacity on a single machine.

use std::collections::BTreeMap;

use num::One;

use crate::engine::{Decision, PolicyView, RateVector};
use crate::policy::{Policy, PolicyError};
use crate::rational::{harmonic, rat_int, Rat};
use crate::JobId;

/// Rate-freezing discipline of [`order_static`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderVariant {
    /// Ranks and the harmonic normalizer are fixed at time zero.
    Strict,
    /// Surviving chains are re-ranked and renormalized after completions.
    WorkConserving,
}

/// Static-order policy for chains; see [`order_static`].
pub struct OrderStatic {
    variant: OrderVariant,
    position: BTreeMap<JobId, usize>,
    /// Initial rank (1-based) of the chain a job belongs to.
    rank_of: BTreeMap<JobId, usize>,
    omega: Option<usize>,
}

/// Builds the policy that orders the initial front by the supplied list and
/// assigns harmonically decaying rates by rank.
///
/// Chains are followed through reveals: a job revealed by a completion
/// inherits its predecessor's rank.  An initial front job missing from the
/// order raises [`PolicyError::MissingInitialJob`]; duplicated entries raise
/// [`PolicyError::OrderNotTotal`]; non-chain precedence raises
/// [`PolicyError::BranchingDetected`].
pub fn order_static(order: &[JobId], variant: OrderVariant) -> OrderStatic {
    OrderStatic {
        variant,
        position: order.iter().enumerate().map(|(i, &j)| (j, i)).collect(),
        rank_of: BTreeMap::new(),
        omega: None,
    }
}

impl OrderStatic {
    fn seed(&mut self, view: &PolicyView) -> Result<(), PolicyError> {
        let mut ranked = Vec::with_capacity(view.front.len());
        for job in &view.front {
            let pos = self
                .position
                .get(&job.id)
                .ok_or(PolicyError::MissingInitialJob { id: job.id })?;
            ranked.push((*pos, job.id));
        }
        ranked.sort();
        for pair in ranked.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(PolicyError::OrderNotTotal { id: pair[1].1 });
            }
        }
        for (rank, &(_, id)) in ranked.iter().enumerate() {
            self.rank_of.insert(id, rank + 1);
        }
        self.omega = Some(ranked.len());
        Ok(())
    }

    fn ingest(&mut self, view: &PolicyView) -> Result<(), PolicyError> {
        let mut extended: BTreeMap<JobId, JobId> = BTreeMap::new();
        for reveal in &view.revealed {
            match reveal.preds.as_slice() {
                [] => {}
                [pred] => {
                    if let Some(&other) = extended.get(pred) {
                        return Err(PolicyError::BranchingDetected {
                            completed: *pred,
                            revealed: vec![other, reveal.id],
                        });
                    }
                    extended.insert(*pred, reveal.id);
                    let rank = *self.rank_of.get(pred).ok_or(
                        PolicyError::BranchingDetected {
                            completed: *pred,
                            revealed: vec![reveal.id],
                        },
                    )?;
                    self.rank_of.insert(reveal.id, rank);
                }
                preds => {
                    return Err(PolicyError::BranchingDetected {
                        completed: preds[0],
                        revealed: vec![reveal.id],
                    });
                }
            }
        }
        Ok(())
    }
}

impl Policy for OrderStatic {
    fn name(&self) -> String {
        match self.variant {
            OrderVariant::Strict => "order_static_strict".to_string(),
            OrderVariant::WorkConserving => "order_static_work_conserving".to_string(),
        }
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        if self.omega.is_none() {
            self.seed(view)?;
        } else {
            self.ingest(view)?;
        }
        let m = rat_int(view.machines as i64);
        let mut rates = RateVector::new();
        match self.variant {
            OrderVariant::Strict => {
                let h = harmonic(self.omega.unwrap());
                for job in &view.front {
                    let rank = self.rank_of[&job.id];
                    let share = &m / (&h * rat_int(rank as i64));
                    rates.set(job.id, if share > Rat::one() { Rat::one() } else { share });
                }
            }
            OrderVariant::WorkConserving => {
                let mut alive: Vec<(usize, JobId)> = view
                    .front
                    .iter()
                    .map(|job| (self.rank_of[&job.id], job.id))
                    .collect();
                alive.sort();
                let h = harmonic(alive.len());
                for (idx, (_, id)) in alive.into_iter().enumerate() {
                    let share = &m / (&h * rat_int(idx as i64 + 1));
                    rates.set(id, if share > Rat::one() { Rat::one() } else { share });
                }
            }
        }
        Ok(Decision::rates(rates))
    }
}

// ───────────────────────────── tests ─────────────────────────────

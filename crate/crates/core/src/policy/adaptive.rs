//! Policies driven by adaptive predictions: per-job successor weights or a
//! total order over all jobs.
//!
//! Unlike the chain policies these make no topology assumption.  The weight
//! variant splits capacity proportionally to the predicted successor weight of
//! every front job; the order variant ranks the front by a predicted priority
//! list and assigns harmonically decaying rates.

use std::collections::BTreeMap;

use num::{One, Zero};

use crate::engine::{Decision, PolicyView, RateVector};
use crate::policy::{Policy, PolicyError};
use crate::rational::{harmonic, rat, rat_int, Rat};
use crate::JobId;

/// Proportional-rate policy over predicted successor weights; see
/// [`wrr_adaptive`].
pub struct WrrAdaptive {
    table: BTreeMap<JobId, Rat>,
}

/// Builds the policy that assigns each front job `j` the rate
/// `min{1, m · Ŵ_j / Σ_{i ∈ F_t} Ŵ_i}` where `Ŵ` is the supplied table of
/// predicted successor weights (one entry per job that may ever surface).
///
/// If every front job has predicted weight zero the capacity is split evenly
/// instead, which also serves as the drain phase for exhausted predictions.
/// A front job without a table entry raises [`PolicyError::OracleFailure`].
pub fn wrr_adaptive(table: BTreeMap<JobId, Rat>) -> WrrAdaptive {
    WrrAdaptive { table }
}

impl Policy for WrrAdaptive {
    fn name(&self) -> String {
        "wrr_adaptive".to_string()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        let mut weights = Vec::with_capacity(view.front.len());
        for job in &view.front {
            let w = self
                .table
                .get(&job.id)
                .ok_or_else(|| PolicyError::OracleFailure {
                    detail: format!("no predicted successor weight for job {}", job.id),
                })?;
            weights.push((job.id, w.clone()));
        }
        let total: Rat = weights.iter().map(|(_, w)| w.clone()).sum();
        if total.is_zero() {
            let k = view.front.len();
            if k == 0 {
                return Ok(Decision::rates(RateVector::new()));
            }
            let share = rat(view.machines as i64, k as i64);
            let share = if share > Rat::one() { Rat::one() } else { share };
            let ids: Vec<_> = weights.iter().map(|(id, _)| *id).collect();
            return Ok(Decision::rates(RateVector::uniform(&ids, share)));
        }
        let m = rat_int(view.machines as i64);
        let mut rates = RateVector::new();
        for (id, w) in weights {
            let share = &m * &w / &total;
            rates.set(id, if share > Rat::one() { Rat::one() } else { share });
        }
        Ok(Decision::rates(rates))
    }
}

/// Harmonic-rate policy over a predicted priority order; see
/// [`order_adaptive`].
pub struct OrderAdaptive {
    position: BTreeMap<JobId, usize>,
    history: Vec<(Rat, Vec<JobId>)>,
}

/// Builds the policy that ranks the front by the supplied total order and
/// assigns the job at rank `i` (1-based) the rate `min{1, m / (H_k · i)}`,
/// where `k = |F_t|` and `H_k` is the `k`-th harmonic number.
///
/// The order must cover every job that can surface; a front job absent from
/// it raises [`PolicyError::OrderNotTotal`].  Every query is recorded as a
/// `(time, ranked front)` pair retrievable via [`OrderAdaptive::history`].
pub fn order_adaptive(order: &[JobId]) -> OrderAdaptive {
    OrderAdaptive {
        position: order.iter().enumerate().map(|(i, &j)| (j, i)).collect(),
        history: Vec::new(),
    }
}

impl OrderAdaptive {
    /// Queries recorded so far: the view time and the front in rank order.
    pub fn history(&self) -> &[(Rat, Vec<JobId>)] {
        &self.history
    }
}

impl Policy for OrderAdaptive {
    fn name(&self) -> String {
        "order_adaptive".to_string()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        let mut ranked = Vec::with_capacity(view.front.len());
        for job in &view.front {
            let pos = self
                .position
                .get(&job.id)
                .ok_or(PolicyError::OrderNotTotal { id: job.id })?;
            ranked.push((*pos, job.id));
        }
        ranked.sort();
        let ranked: Vec<JobId> = ranked.into_iter().map(|(_, id)| id).collect();
        self.history.push((view.time.clone(), ranked.clone()));
        let k = ranked.len();
        if k == 0 {
            return Ok(Decision::rates(RateVector::new()));
        }
        let h = harmonic(k);
        let m = rat_int(view.machines as i64);
        let mut rates = RateVector::new();
        for (idx, id) in ranked.into_iter().enumerate() {
            let share = &m / (&h * rat_int(idx as i64 + 1));
            rates.set(id, if share > Rat::one() { Rat::one() } else { share });
        }
        Ok(Decision::rates(rates))
    }
}

// ───────────────────────────── tests ─────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::instance::Instance;
    use crate::rational::{rat, rat_int};

    fn table(pairs: &[(JobId, i64)]) -> BTreeMap<JobId, Rat> {
        pairs.iter().map(|&(j, w)| (j, rat_int(w))).collect()
    }

    /// Exact successor weights for every job of the instance.
    fn truth(inst: &Instance) -> BTreeMap<JobId, Rat> {
        (0..inst.len()).map(|j| (j, inst.successor_weight(j))).collect()
    }

    #[test]
    fn splits_proportionally_to_the_table() {
        let inst =
            Instance::new(vec![(rat_int(1), rat_int(2)), (rat_int(1), rat_int(1)), (rat_int(1), rat_int(1))], vec![])
                .unwrap();
        let mut policy = wrr_adaptive(table(&[(0, 2), (1, 1), (2, 1)]));
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        assert_eq!(trace.segments[0].rates.get(0), rat(1, 2));
        assert_eq!(trace.segments[0].rates.get(1), rat(1, 4));
        assert_eq!(trace.segments[0].rates.get(2), rat(1, 4));
    }

    #[test]
    fn caps_heavy_jobs_on_parallel_machines() {
        let inst =
            Instance::new(vec![(rat_int(1), rat_int(3)), (rat_int(1), rat_int(1))], vec![]).unwrap();
        let mut policy = wrr_adaptive(table(&[(0, 3), (1, 1)]));
        let (_, trace) = simulate(&inst, &mut policy, 2).unwrap();
        // Uncapped shares would be 3/2 and 1/2.
        assert_eq!(trace.segments[0].rates.get(0), rat_int(1));
        assert_eq!(trace.segments[0].rates.get(1), rat(1, 2));
    }

    #[test]
    fn zero_total_falls_back_to_equal_share() {
        let inst =
            Instance::new(vec![(rat_int(1), rat_int(0)), (rat_int(2), rat_int(0))], vec![]).unwrap();
        let mut policy = wrr_adaptive(table(&[(0, 0), (1, 0)]));
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        assert_eq!(trace.segments[0].rates.get(0), rat(1, 2));
        assert_eq!(trace.segments[0].rates.get(1), rat(1, 2));
    }

    #[test]
    fn missing_entry_is_an_oracle_failure() {
        let inst = Instance::new(vec![(rat_int(1), rat_int(1)); 2], vec![]).unwrap();
        let mut policy = wrr_adaptive(table(&[(0, 1)]));
        let err = simulate(&inst, &mut policy, 1).unwrap_err();
        assert!(matches!(
            err,
            crate::engine::SimError::Policy(PolicyError::OracleFailure { .. })
        ));
    }

    #[test]
    fn truth_on_an_out_tree_front_loads_the_valuable_branch() {
        // Root 0 splits into 1 (leads to weight) and 2 (worthless).
        let inst = Instance::new(
            vec![
                (rat_int(1), rat_int(0)),
                (rat_int(1), rat_int(0)),
                (rat_int(1), rat_int(0)),
                (rat_int(1), rat_int(7)),
            ],
            vec![(0, 1), (0, 2), (1, 3)],
        )
        .unwrap();
        let mut policy = wrr_adaptive(truth(&inst));
        let (result, trace) = simulate(&inst, &mut policy, 1).unwrap();
        // After the root, job 1 (successor weight 7) monopolizes the machine.
        assert_eq!(trace.segments[1].rates.get(1), rat_int(1));
        assert_eq!(trace.segments[1].rates.get(2), rat_int(0));
        assert_eq!(result.completion(3), rat_int(3));
    }

    #[test]
    fn scaling_the_table_leaves_rates_unchanged() {
        let inst = Instance::new(
            vec![
                (rat_int(2), rat_int(5)),
                (rat_int(1), rat_int(2)),
                (rat_int(3), rat_int(1)),
            ],
            vec![(0, 1)],
        )
        .unwrap();
        let base = truth(&inst);
        let scaled: BTreeMap<JobId, Rat> =
            base.iter().map(|(&j, w)| (j, w * rat_int(17))).collect();
        let (_, trace_a) = simulate(&inst, &mut wrr_adaptive(base), 1).unwrap();
        let (_, trace_b) = simulate(&inst, &mut wrr_adaptive(scaled), 1).unwrap();
        assert_eq!(trace_a.segments.len(), trace_b.segments.len());
        for (a, b) in trace_a.segments.iter().zip(trace_b.segments.iter()) {
            assert_eq!(a.start, b.start);
            assert_eq!(a.end, b.end);
            assert_eq!(
                a.rates.iter().collect::<Vec<_>>(),
                b.rates.iter().collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn order_rates_decay_harmonically() {
        let inst = Instance::new(vec![(rat_int(1), rat_int(1)); 3], vec![]).unwrap();
        let mut policy = order_adaptive(&[2, 0, 1]);
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        // H_3 = 11/6; ranks follow the predicted order (2, 0, 1).
        assert_eq!(trace.segments[0].rates.get(2), rat(6, 11));
        assert_eq!(trace.segments[0].rates.get(0), rat(3, 11));
        assert_eq!(trace.segments[0].rates.get(1), rat(2, 11));
    }

    #[test]
    fn order_rates_sum_to_one_on_a_single_machine() {
        use num::One;
        let inst = Instance::new(vec![(rat_int(1), rat_int(1)); 5], vec![]).unwrap();
        let mut policy = order_adaptive(&[4, 3, 2, 1, 0]);
        let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
        assert!(trace.segments[0].rates.sum().is_one());
    }

    #[test]
    fn order_caps_leading_jobs_on_parallel_machines() {
        let inst = Instance::new(vec![(rat_int(1), rat_int(1)); 2], vec![]).unwrap();
        let mut policy = order_adaptive(&[0, 1]);
        let (_, trace) = simulate(&inst, &mut policy, 2).unwrap();
        // H_2 = 3/2; uncapped shares would be 4/3 and 2/3.
        assert_eq!(trace.segments[0].rates.get(0), rat_int(1));
        assert_eq!(trace.segments[0].rates.get(1), rat(2, 3));
    }

    #[test]
    fn order_missing_job_is_reported() {
        let inst = Instance::new(vec![(rat_int(1), rat_int(1)); 2], vec![]).unwrap();
        let mut policy = order_adaptive(&[0]);
        let err = simulate(&inst, &mut policy, 1).unwrap_err();
        assert!(matches!(
            err,
            crate::engine::SimError::Policy(PolicyError::OrderNotTotal { id: 1 })
        ));
    }

    #[test]
    fn order_history_records_every_query() {
        let inst = Instance::new(
            vec![(rat_int(1), rat_int(1)); 3],
            vec![(0, 1)],
        )
        .unwrap();
        let mut policy = order_adaptive(&[0, 1, 2]);
        {
            let (_, trace) = simulate(&inst, &mut policy, 1).unwrap();
            assert_eq!(policy.history().len(), trace.segments.len());
            assert_eq!(policy.history()[0].0, rat_int(0));
            assert_eq!(policy.history()[0].1, vec![0, 2]);
        }
    }

    #[test]
    fn names_are_stable() {
        assert_eq!(wrr_adaptive(BTreeMap::new()).name(), "wrr_adaptive");
        assert_eq!(order_adaptive(&[]).name(), "order_adaptive");
    }
}

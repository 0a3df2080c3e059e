//! Policies that execute a predicted plan: either a priority list over jobs
//! or a whole predicted instance.
//!
//! Both run the `m` highest-priority front jobs at full rate and never idle.
//! The list variant ranks jobs directly by their position in the predicted
//! order; jobs the prediction did not know about are appended behind it in id
//! order, and predicted jobs that never materialize are simply skipped.  The
//! instance variant computes an optimal order for the *predicted* chains,
//! matches predicted chains to actual ones by rank, and walks the plan,
//! discarding entries of chains that ended earlier than predicted and
//! appending jobs revealed beyond the plan in arrival order.

use std::collections::BTreeMap;

use num::One;

use crate::engine::{Decision, PolicyView, RateVector};
use crate::instance::Instance;
use crate::oracle::opt_chain_exact;
use crate::policy::{Policy, PolicyError};
use crate::rational::Rat;
use crate::JobId;

/// Flavor label for [`follow_action`]: whether the priority list was produced
/// for the initial front only or for the whole job set.  The execution rule is
/// the same either way; the mode is carried for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Static,
    Adaptive,
}

/// List-following policy; see [`follow_action`].
pub struct FollowAction {
    mode: ActionMode,
    priority: BTreeMap<JobId, usize>,
    horizon: usize,
}

/// Builds the policy that runs, at every moment, the `m` front jobs ranked
/// highest by the predicted order `sigma` (earlier is better).
///
/// Actual jobs absent from `sigma` get priority `|sigma| + id`, i.e. they are
/// processed after all predicted jobs, in id order.  Predicted jobs that do
/// not exist in the actual instance never surface and are skipped for free.
pub fn follow_action(sigma: &[JobId], mode: ActionMode) -> FollowAction {
    FollowAction {
        mode,
        priority: sigma.iter().enumerate().map(|(i, &j)| (j, i)).collect(),
        horizon: sigma.len(),
    }
}

impl Policy for FollowAction {
    fn name(&self) -> String {
        match self.mode {
            ActionMode::Static => "follow_action_static".to_string(),
            ActionMode::Adaptive => "follow_action_adaptive".to_string(),
        }
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        let mut ranked: Vec<(usize, JobId)> = view
            .front
            .iter()
            .map(|job| {
                let pri = self
                    .priority
                    .get(&job.id)
                    .copied()
                    .unwrap_or(self.horizon + job.id);
                (pri, job.id)
            })
            .collect();
        ranked.sort();
        let mut rates = RateVector::new();
        for &(_, id) in ranked.iter().take(view.machines) {
            rates.set(id, Rat::one());
        }
        Ok(Decision::rates(rates))
    }
}

/// Plan entry: which matched chain must advance, pointing at the job at depth
/// `depth` (number of predicted predecessors inside the chain).
struct PlanEntry {
    chain: usize,
    depth: usize,
}

/// Instance-following policy; see [`follow_input`].
pub struct FollowInput {
    plan: Vec<PlanEntry>,
    predicted_chains: usize,
    /// Chain index of every known actual job.
    chain_of: BTreeMap<JobId, usize>,
    /// Jobs completed so far per actual chain.
    completed: Vec<usize>,
    /// Position in the plan from which unsatisfied entries may remain.
    cursor: usize,
    /// Arrival rank of every revealed job, for ordering beyond-plan jobs.
    arrival: BTreeMap<JobId, usize>,
    seeded: bool,
}

/// Builds the policy that precomputes an optimal order for the predicted
/// chain instance and replays it on the actual instance.
///
/// Predicted chains are matched to actual chains by rank: the k-th predicted
/// chain (by smallest job id) drives the k-th initial front job (by id).  A
/// front job's priority is the plan position of its chain's next outstanding
/// entry; entries of chains that already ended are discarded, and jobs beyond
/// a chain's predicted length are queued after the whole plan in arrival
/// order.  The `m` best-priority front jobs run at rate 1.
///
/// Errors: [`PolicyError::TopologyMismatch`] if the predicted instance is not
/// made of chains (raised here), [`PolicyError::UnmatchedChain`] if the
/// initial front size differs from the predicted chain count, and
/// [`PolicyError::BranchingDetected`] if the actual instance branches (both
/// raised during simulation).
pub fn follow_input(predicted: &Instance) -> Result<FollowInput, PolicyError> {
    let chains = predicted
        .chains()
        .map_err(|_| PolicyError::TopologyMismatch {
            detail: "predicted instance is not a disjoint union of chains".to_string(),
        })?;
    let mut chain_depth: BTreeMap<JobId, (usize, usize)> = BTreeMap::new();
    for (rank, chain) in chains.iter().enumerate() {
        for (depth, &job) in chain.iter().enumerate() {
            chain_depth.insert(job, (rank, depth));
        }
    }
    let order = opt_chain_exact(predicted)
        .map_err(|e| PolicyError::OracleFailure {
            detail: format!("planning on the predicted instance failed: {e}"),
        })?
        .order;
    let plan = order
        .into_iter()
        .map(|job| {
            let (chain, depth) = chain_depth[&job];
            PlanEntry { chain, depth }
        })
        .collect();
    Ok(FollowInput {
        plan,
        predicted_chains: chains.len(),
        chain_of: BTreeMap::new(),
        completed: vec![0; chains.len()],
        cursor: 0,
        arrival: BTreeMap::new(),
        seeded: false,
    })
}

impl FollowInput {
    fn ingest(&mut self, view: &PolicyView) -> Result<(), PolicyError> {
        if !self.seeded {
            self.seeded = true;
            if view.front.len() != self.predicted_chains {
                return Err(PolicyError::UnmatchedChain {
                    expected: self.predicted_chains,
                    found: view.front.len(),
                });
            }
            for (rank, job) in view.front.iter().enumerate() {
                self.chain_of.insert(job.id, rank);
                self.arrival.insert(job.id, self.arrival.len());
            }
            return Ok(());
        }
        let mut extended: BTreeMap<JobId, JobId> = BTreeMap::new();
        for reveal in &view.revealed {
            self.arrival.insert(reveal.id, self.arrival.len());
            match reveal.preds.as_slice() {
                [] => {
                    // A root surfacing after time zero cannot belong to any
                    // matched chain.
                    return Err(PolicyError::UnmatchedChain {
                        expected: self.predicted_chains,
                        found: self.predicted_chains + 1,
                    });
                }
                [pred] => {
                    if let Some(&other) = extended.get(pred) {
                        return Err(PolicyError::BranchingDetected {
                            completed: *pred,
                            revealed: vec![other, reveal.id],
                        });
                    }
                    extended.insert(*pred, reveal.id);
                    let chain = *self.chain_of.get(pred).ok_or(
                        PolicyError::BranchingDetected {
                            completed: *pred,
                            revealed: vec![reveal.id],
                        },
                    )?;
                    self.chain_of.insert(reveal.id, chain);
                }
                preds => {
                    return Err(PolicyError::BranchingDetected {
                        completed: preds[0],
                        revealed: vec![reveal.id],
                    });
                }
            }
        }
        for done in &view.completed {
            self.completed[self.chain_of[done]] += 1;
        }
        Ok(())
    }
}

impl Policy for FollowInput {
    fn name(&self) -> String {
        "follow_input".to_string()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        self.ingest(view)?;
        let mut alive: BTreeMap<usize, JobId> = BTreeMap::new();
        for job in &view.front {
            alive.insert(self.chain_of[&job.id], job.id);
        }
        // Garbage-collect the plan prefix: entries already satisfied by
        // completions, or belonging to chains that ended short of the plan.
        while let Some(entry) = self.plan.get(self.cursor) {
            let satisfied = self.completed[entry.chain] > entry.depth;
            let dead = !alive.contains_key(&entry.chain);
            if satisfied || dead {
                self.cursor += 1;
            } else {
                break;
            }
        }
        // Priority of each alive chain: plan position of its next entry.
        let mut priority: BTreeMap<usize, usize> = BTreeMap::new();
        for (pos, entry) in self.plan.iter().enumerate().skip(self.cursor) {
            if alive.contains_key(&entry.chain)
                && self.completed[entry.chain] <= entry.depth
            {
                priority.entry(entry.chain).or_insert(pos);
            }
        }
        let mut ranked: Vec<(usize, JobId)> = alive
            .iter()
            .map(|(&chain, &job)| {
                let pri = priority
                    .get(&chain)
                    .copied()
                    .unwrap_or(self.plan.len() + self.arrival[&job]);
                (pri, job)
            })
            .collect();
        ranked.sort();
        let mut rates = RateVector::new();
        for &(_, id) in ranked.iter().take(view.machines) {
            rates.set(id, Rat::one());
        }
        Ok(Decision::rates(rates))
    }
}

// ───────────────────────────── tests ─────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::oracle::opt_brute_force;
    use crate::rational::rat_int;

    fn singletons(w: &[i64]) -> Instance {
        Instance::new(
            w.iter().map(|&wi| (rat_int(1), rat_int(wi))).collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn action_list_is_followed_literally() {
        // Optimal runs the weight-2 job first; the prediction says otherwise.
        let inst = singletons(&[1, 2]);
        let mut policy = follow_action(&[0, 1], ActionMode::Static);
        let (result, _) = simulate(&inst, &mut policy, 1).unwrap();
        assert_eq!(result.completion(0), rat_int(1));
        assert_eq!(result.completion(1), rat_int(2));
        // ALG = 5 while OPT = 4: the gap is exactly the inversion error.
        assert_eq!(result.objective, rat_int(5));
        assert_eq!(opt_brute_force(&inst, 1).unwrap().objective, rat_int(4));
    }

    #[test]
    fn predicted_phantom_jobs_are_skipped() {
        // The prediction also lists jobs 5 and 7 which never exist.
        let inst = singletons(&[1, 1]);
        let mut policy = follow_action(&[5, 1, 7, 0], ActionMode::Adaptive);
        let (result, _) = simulate(&inst, &mut policy, 1).unwrap();
        assert_eq!(result.completion(1), rat_int(1));
        assert_eq!(result.completion(0), rat_int(2));
    }

    #[test]
    fn unlisted_actual_jobs_run_after_the_plan() {
        let inst = singletons(&[9, 1, 9]);
        // Only job 1 is predicted; 0 and 2 queue behind it in id order.
        let mut policy = follow_action(&[1], ActionMode::Static);
        let (result, _) = simulate(&inst, &mut policy, 1).unwrap();
        assert_eq!(result.completion(1), rat_int(1));
        assert_eq!(result.completion(0), rat_int(2));
        assert_eq!(result.completion(2), rat_int(3));
    }

    #[test]
    fn action_list_uses_all_machines() {
        let inst = singletons(&[1, 1, 1]);
        let mut policy = follow_action(&[2, 1, 0], ActionMode::Static);
        let (result, trace) = simulate(&inst, &mut policy, 2).unwrap();
        assert_eq!(trace.segments[0].rates.get(2), rat_int(1));
        assert_eq!(trace.segments[0].rates.get(1), rat_int(1));
        assert_eq!(trace.segments[0].rates.get(0), rat_int(0));
        assert_eq!(result.completion(0), rat_int(2));
    }

    #[test]
    fn exact_input_prediction_reproduces_the_optimum() {
        // Chains 0 -> 1 (weights 1, 5) and 2 (weight 3), unit jobs.
        let inst = Instance::new(
            vec![
                (rat_int(1), rat_int(1)),
                (rat_int(1), rat_int(5)),
                (rat_int(1), rat_int(3)),
            ],
            vec![(0, 1)],
        )
        .unwrap();
        let mut policy = follow_input(&inst).unwrap();
        let (result, _) = simulate(&inst, &mut policy, 1).unwrap();
        let opt = opt_brute_force(&inst, 1).unwrap().objective;
        assert_eq!(result.objective, opt);
    }

    #[test]
    fn overpredicted_chain_tail_is_discarded() {
        // Predicted: chain A has 3 jobs whose tail is valuable, so the plan
        // dives deep into A before touching B.  Actually A has only 1 job:
        // the dead entries must be dropped so B still runs promptly.
        let predicted = Instance::new(
            vec![
                (rat_int(1), rat_int(0)),
                (rat_int(1), rat_int(0)),
                (rat_int(1), rat_int(9)),
                (rat_int(1), rat_int(1)),
            ],
            vec![(0, 1), (1, 2)],
        )
        .unwrap();
        let actual = Instance::new(
            vec![(rat_int(1), rat_int(0)), (rat_int(1), rat_int(1))],
            vec![],
        )
        .unwrap();
        let mut policy = follow_input(&predicted).unwrap();
        let (result, _) = simulate(&actual, &mut policy, 1).unwrap();
        // Plan: A, A, A, B.  A dies after one job; B follows immediately.
        assert_eq!(result.completion(0), rat_int(1));
        assert_eq!(result.completion(1), rat_int(2));
    }

    #[test]
    fn underpredicted_chain_tail_runs_after_the_plan() {
        // Predicted: two singletons, B more valuable.  Actually A is a
        // 2-chain: its surprise second job runs after the whole plan.
        let predicted = Instance::new(
            vec![(rat_int(1), rat_int(1)), (rat_int(1), rat_int(5))],
            vec![],
        )
        .unwrap();
        let actual = Instance::new(
            vec![
                (rat_int(1), rat_int(1)),
                (rat_int(1), rat_int(5)),
                (rat_int(1), rat_int(100)),
            ],
            vec![(0, 2)],
        )
        .unwrap();
        let mut policy = follow_input(&predicted).unwrap();
        let (result, _) = simulate(&actual, &mut policy, 1).unwrap();
        // Plan order: B then A; the unpredicted job 2 comes last.
        assert_eq!(result.completion(1), rat_int(1));
        assert_eq!(result.completion(0), rat_int(2));
        assert_eq!(result.completion(2), rat_int(3));
    }

    #[test]
    fn chain_count_mismatch_is_reported() {
        let predicted = singletons(&[1, 1]);
        let actual = singletons(&[1, 1, 1]);
        let mut policy = follow_input(&predicted).unwrap();
        let err = simulate(&actual, &mut policy, 1).unwrap_err();
        assert!(matches!(
            err,
            crate::engine::SimError::Policy(PolicyError::UnmatchedChain {
                expected: 2,
                found: 3
            })
        ));
    }

    #[test]
    fn non_chain_prediction_is_rejected_up_front() {
        let predicted = Instance::new(
            vec![(rat_int(1), rat_int(1)); 3],
            vec![(0, 1), (0, 2)],
        )
        .unwrap();
        assert!(matches!(
            follow_input(&predicted),
            Err(PolicyError::TopologyMismatch { .. })
        ));
    }

    #[test]
    fn branching_actual_instance_is_reported() {
        let predicted = singletons(&[1]);
        let actual = Instance::new(
            vec![(rat_int(1), rat_int(1)); 3],
            vec![(0, 1), (0, 2)],
        )
        .unwrap();
        let mut policy = follow_input(&predicted).unwrap();
        let err = simulate(&actual, &mut policy, 1).unwrap_err();
        assert!(matches!(
            err,
            crate::engine::SimError::Policy(PolicyError::BranchingDetected { .. })
        ));
    }

    #[test]
    fn names_are_stable() {
        assert_eq!(
            follow_action(&[], ActionMode::Static).name(),
            "follow_action_static"
        );
        assert_eq!(
            follow_action(&[], ActionMode::Adaptive).name(),
            "follow_action_adaptive"
        );
        assert_eq!(
            follow_input(&singletons(&[1])).unwrap().name(),
            "follow_input"
        );
    }
}

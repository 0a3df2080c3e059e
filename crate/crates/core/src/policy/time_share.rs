//! Combines two policies by splitting machine time between them.
//!
//! `time_share(A, B, λ)` simulates each sub-policy in its own *virtual world*
//! whose clock advances at its share of real time: `λ` per real unit for `A`,
//! `1 − λ` for `B`.  Every job receives the combined rate
//! `λ·R^A_j + (1 − λ)·R^B_j`, so each virtual world unfolds exactly as if its
//! policy ran alone on a slowed-down machine — any job finishing at virtual
//! time `C` in world `A` finishes in real time by `C/λ`, which bounds every
//! real completion time by the better of the two dilated schedules.
//!
//! The bookkeeping is exact: per world, a ledger accumulates the virtual
//! processing every job has received.  Processing times are never peeked at —
//! a job's `p_j` becomes known the moment it really completes, because the
//! two ledgers then sum to exactly `p_j`.  Virtual completions strictly trail
//! real ones, so each world replays reveals and completions in a valid order,
//! queried with views expressed in its own clock.  Virtual events falling
//! strictly between real events are surfaced to the driving engine as wake
//! requests.

use std::collections::{BTreeMap, BTreeSet};
use std::mem;

use num::{One, Zero};

use crate::engine::{Decision, FrontJob, PolicyView, RateVector, Reveal, ScheduleResult};
use crate::instance::Instance;
use crate::policy::equal_share::equal_share;
use crate::policy::{Policy, PolicyError};
use crate::rational::{format_rat, rat, Rat};
use crate::JobId;

struct World {
    policy: Box<dyn Policy>,
    /// Fraction of real time this world receives.
    lambda: Rat,
    /// Virtual clock: `lambda` × elapsed real time.
    tau: Rat,
    /// Virtual processing received per job (only grows while scheduled here).
    ledger: BTreeMap<JobId, Rat>,
    /// Jobs alive on this world's front.
    front: BTreeSet<JobId>,
    done: BTreeSet<JobId>,
    /// Revealed jobs still waiting for virtual predecessors, with counts.
    blocked: BTreeMap<JobId, usize>,
    pending_completed: Vec<JobId>,
    pending_revealed: Vec<Reveal>,
    rates: RateVector,
    /// Outstanding wake request of the sub-policy, in this world's clock.
    wake: Option<Rat>,
    queried: bool,
    /// Real times at which jobs completed virtually.
    virtual_completion: BTreeMap<JobId, Rat>,
}

impl World {
    fn new(policy: Box<dyn Policy>, lambda: Rat) -> Self {
        World {
            policy,
            lambda,
            tau: Rat::zero(),
            ledger: BTreeMap::new(),
            front: BTreeSet::new(),
            done: BTreeSet::new(),
            blocked: BTreeMap::new(),
            pending_completed: Vec::new(),
            pending_revealed: Vec::new(),
            rates: RateVector::new(),
            wake: None,
            queried: false,
            virtual_completion: BTreeMap::new(),
        }
    }

    fn progress(&self, job: JobId) -> Rat {
        self.ledger.get(&job).cloned().unwrap_or_else(Rat::zero)
    }

    /// Advances the virtual clock and ledger by `dt` real time units.
    fn advance(&mut self, dt: &Rat) {
        if self.lambda.is_zero() {
            return;
        }
        let vdt = &self.lambda * dt;
        self.tau += &vdt;
        for (&job, rate) in self.rates.iter() {
            if !rate.is_zero() {
                *self.ledger.entry(job).or_insert_with(Rat::zero) += rate * &vdt;
            }
        }
    }
}

/// Time-sharing combinator; see [`time_share`] and [`robustify`].
pub struct TimeShare {
    label: String,
    worlds: [World; 2],
    /// Job data learned from the real view stream.
    weight_of: BTreeMap<JobId, Rat>,
    succs_of: BTreeMap<JobId, Vec<JobId>>,
    /// Processing times learned at real completions (exact ledger sums).
    known_p: BTreeMap<JobId, Rat>,
    real_time: Rat,
    machines: usize,
}

/// Builds the policy that gives `a` a `lambda` share of every machine and `b`
/// the rest, each driving its own exactly-simulated virtual world.
///
/// `lambda` must lie in `[0, 1]`; an endpoint freezes the other world
/// entirely, making the combination behave like the remaining policy alone.
///
/// # Panics
/// Panics if `lambda` is outside `[0, 1]`.
pub fn time_share(a: Box<dyn Policy>, b: Box<dyn Policy>, lambda: Rat) -> TimeShare {
    assert!(
        lambda >= Rat::zero() && lambda <= Rat::one(),
        "time share must lie in [0, 1]"
    );
    let label = format!(
        "time_share({}, {}, {})",
        a.name(),
        b.name(),
        format_rat(&lambda)
    );
    TimeShare::with_label(label, a, b, lambda)
}

/// Shorthand for an even time split between `policy` and the uniform
/// baseline: every job finishes within twice its completion time under
/// either constituent run alone.
pub fn robustify(policy: Box<dyn Policy>) -> TimeShare {
    let label = format!("robustify({})", policy.name());
    TimeShare::with_label(label, policy, Box::new(equal_share()), rat(1, 2))
}

impl TimeShare {
    fn with_label(label: String, a: Box<dyn Policy>, b: Box<dyn Policy>, lambda: Rat) -> Self {
        let rest = Rat::one() - &lambda;
        TimeShare {
            label,
            worlds: [World::new(a, lambda), World::new(b, rest)],
            weight_of: BTreeMap::new(),
            succs_of: BTreeMap::new(),
            known_p: BTreeMap::new(),
            real_time: Rat::zero(),
            machines: 1,
        }
    }

    /// Real times at which jobs have completed in the given world (0 or 1).
    /// Populated as the simulation advances; [`TimeShare::finish_virtual`]
    /// extends it to every job after the real run has ended.
    pub fn virtual_completions(&self, world: usize) -> &BTreeMap<JobId, Rat> {
        &self.worlds[world].virtual_completion
    }

    /// Feeds real reveals and completions into both worlds.
    fn ingest(&mut self, completed: &[JobId], revealed: &[Reveal]) {
        for reveal in revealed {
            self.weight_of.insert(reveal.id, reveal.weight.clone());
            for &pred in &reveal.preds {
                self.succs_of.entry(pred).or_default().push(reveal.id);
            }
            for world in &mut self.worlds {
                let missing = reveal
                    .preds
                    .iter()
                    .filter(|p| !world.done.contains(p))
                    .count();
                if missing == 0 {
                    world.front.insert(reveal.id);
                    world.pending_revealed.push(reveal.clone());
                } else {
                    world.blocked.insert(reveal.id, missing);
                }
            }
        }
        for &job in completed {
            let total: Rat = self.worlds.iter().map(|w| w.progress(job)).sum();
            self.known_p.insert(job, total);
        }
    }

    /// Settles due virtual events in world `idx` and re-queries its policy.
    fn settle_world(&mut self, idx: usize) -> Result<(), PolicyError> {
        let world = &mut self.worlds[idx];
        if world.lambda.is_zero() {
            return Ok(());
        }
        let mut changed = false;
        // Cascade due completions (and the reveals they unlock) in id order.
        loop {
            let due = world.front.iter().copied().find(|&j| {
                self.known_p
                    .get(&j)
                    .is_some_and(|p| &world.progress(j) >= p)
            });
            let Some(job) = due else { break };
            changed = true;
            world.front.remove(&job);
            world.done.insert(job);
            world.pending_completed.push(job);
            world.virtual_completion.insert(job, self.real_time.clone());
            for succ in self.succs_of.get(&job).cloned().unwrap_or_default() {
                if let Some(missing) = world.blocked.get_mut(&succ) {
                    *missing -= 1;
                    if *missing == 0 {
                        world.blocked.remove(&succ);
                        world.front.insert(succ);
                        world.pending_revealed.push(Reveal {
                            id: succ,
                            weight: self.weight_of[&succ].clone(),
                            preds: vec![job],
                        });
                    }
                }
            }
        }
        if let Some(wake) = &world.wake {
            if wake <= &world.tau {
                world.wake = None;
                changed = true;
            }
        }
        if !world.queried
            || changed
            || !world.pending_completed.is_empty()
            || !world.pending_revealed.is_empty()
        {
            let front: Vec<FrontJob> = world
                .front
                .iter()
                .map(|&id| FrontJob {
                    id,
                    weight: self.weight_of[&id].clone(),
                })
                .collect();
            let view = PolicyView {
                time: world.tau.clone(),
                machines: self.machines,
                front,
                completed: mem::take(&mut world.pending_completed),
                revealed: mem::take(&mut world.pending_revealed),
            };
            let Decision { rates, wake } = world.policy.decide(&view)?;
            for (job, rate) in rates.iter() {
                if !world.front.contains(job) {
                    return Err(PolicyError::OracleFailure {
                        detail: format!(
                            "constituent policy rated job {job} outside its front"
                        ),
                    });
                }
                if rate < &Rat::zero() || rate > &Rat::one() {
                    return Err(PolicyError::OracleFailure {
                        detail: format!("constituent policy rated job {job} outside [0, 1]"),
                    });
                }
            }
            if let Some(w) = &wake {
                if w <= &world.tau {
                    return Err(PolicyError::OracleFailure {
                        detail: "constituent policy wake does not advance".to_string(),
                    });
                }
            }
            world.queried = true;
            world.rates = rates;
            world.wake = wake;
        }
        Ok(())
    }

    /// Earliest upcoming virtual event of world `idx`, as a real time.
    fn next_event(&self, idx: usize) -> Option<Rat> {
        let world = &self.worlds[idx];
        if world.lambda.is_zero() {
            return None;
        }
        let mut best: Option<Rat> = None;
        let mut offer = |real: Rat| {
            if best.as_ref().is_none_or(|b| &real < b) {
                best = Some(real);
            }
        };
        for (&job, rate) in world.rates.iter() {
            if rate.is_zero() || !world.front.contains(&job) {
                continue;
            }
            if let Some(p) = self.known_p.get(&job) {
                let remaining = p - world.progress(job);
                let vdt = remaining / rate;
                offer(&self.real_time + vdt / &world.lambda);
            }
        }
        if let Some(wake) = &world.wake {
            offer(&self.real_time + (wake - &world.tau) / &world.lambda);
        }
        best
    }

    /// After the real run has ended, plays both virtual worlds to completion
    /// so every job's virtual completion time is known.
    ///
    /// The driving engine stops querying once the last job completes, so the
    /// final event batch was never shown to this policy; it is reconstructed
    /// here from the finished schedule before the worlds are drained.
    pub fn finish_virtual(
        &mut self,
        instance: &Instance,
        result: &ScheduleResult,
    ) -> Result<(), PolicyError> {
        let dt = &result.makespan - &self.real_time;
        if !dt.is_zero() {
            for world in &mut self.worlds {
                world.advance(&dt);
            }
            self.real_time = result.makespan.clone();
        }
        let unseen_reveals: Vec<Reveal> = (0..instance.len())
            .filter(|id| !self.weight_of.contains_key(id))
            .map(|id| Reveal {
                id,
                weight: instance.job(id).w.clone(),
                preds: instance.preds(id).to_vec(),
            })
            .collect();
        let unseen_completions: Vec<JobId> = (0..instance.len())
            .filter(|id| !self.known_p.contains_key(id))
            .collect();
        self.ingest(&unseen_completions, &unseen_reveals);
        for _ in 0..100_000 {
            for idx in 0..2 {
                self.settle_world(idx)?;
            }
            let next = match (self.next_event(0), self.next_event(1)) {
                (Some(a), Some(b)) => {
                    if a < b {
                        a
                    } else {
                        b
                    }
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => return Ok(()),
            };
            let dt = &next - &self.real_time;
            for world in &mut self.worlds {
                world.advance(&dt);
            }
            self.real_time = next;
        }
        Err(PolicyError::OracleFailure {
            detail: "virtual drain did not terminate".to_string(),
        })
    }
}

impl Policy for TimeShare {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn decide(&mut self, view: &PolicyView) -> Result<Decision, PolicyError> {
        self.machines = view.machines;
        let dt = &view.time - &self.real_time;
        if !dt.is_zero() {
            for world in &mut self.worlds {
                world.advance(&dt);
            }
            self.real_time = view.time.clone();
        }
        self.ingest(&view.completed, &view.revealed);
        self.settle_world(0)?;
        self.settle_world(1)?;
        let mut rates = RateVector::new();
        for job in &view.front {
            let combined: Rat = self
                .worlds
                .iter()
                .map(|w| &w.lambda * w.rates.get(job.id))
                .sum();
            if !combined.is_zero() {
                rates.set(job.id, combined);
            }
        }
        let wake = match (self.next_event(0), self.next_event(1)) {
            (Some(a), Some(b)) => Some(if a < b { a } else { b }),
            (a, b) => a.or(b),
        };
        Ok(match wake {
            Some(w) => Decision::with_wake(rates, w),
            None => Decision::rates(rates),
        })
    }
}

// ───────────────────────────── tests ─────────────────────────────

//! Event-driven continuous-time simulation of rate-based preemptive
//! schedules.
//!
//! The engine queries a [`Policy`](crate::policy::Policy) at time zero and
//! after every completion or reveal event, holds the returned rates constant
//! until the next event, and advances time exactly (rationals throughout).
//! Jobs are hidden until all predecessors complete; a policy only ever sees
//! front jobs and their weights, never processing times or successors.
//!
//! Zero-length jobs complete in an id-ordered cascade at the instant they
//! are revealed, before the policy is queried again, so they never appear
//! as front jobs.
//!
//! A decision may carry a `wake` time in addition to rates: the next event
//! is then the earlier of the first completion and the wake. This lets
//! combinator policies reconsider rates at internal virtual events that fall
//! strictly between real completions. A decision with no positive rate and
//! no wake (or a wake that does not advance time) is a stall and aborts the
//! simulation.
//!
//! Besides [`simulate`], the module provides [`realize_mcnaughton`] to turn
//! a rate segment into an explicit per-machine preemptive timetable, and
//! [`min_rho_witness`] to extract the tightest rate-condition factor ρ a
//! trace satisfies.

use crate::instance::{Instance, JobId};
use crate::policy::{Policy, PolicyError};
use crate::rational::{rat_serde, Rat};
use num::{One, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet};

/// A front job as shown to policies: id and weight, nothing else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontJob {
    pub id: JobId,
    pub weight: Rat,
}

/// A job newly revealed since the last query. The predecessor list is
/// historical information (all listed jobs are already complete); successors
/// and processing times remain hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reveal {
    pub id: JobId,
    pub weight: Rat,
    pub preds: Vec<JobId>,
}

/// Everything a policy may observe at an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyView {
    pub time: Rat,
    pub machines: usize,
    /// Current front jobs, ascending id.
    pub front: Vec<FrontJob>,
    /// Ids completed since the last query (possibly at this very instant).
    pub completed: Vec<JobId>,
    /// Jobs revealed since the last query, in reveal order. A zero-length
    /// job can appear here and in `completed` simultaneously.
    pub revealed: Vec<Reveal>,
}

/// Map job id → rate in [0, 1]. Only front jobs may carry entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RateVector {
    rates: BTreeMap<JobId, Rat>,
}

impl RateVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (JobId, Rat)>) -> Self {
        RateVector { rates: pairs.into_iter().collect() }
    }

    /// The same rate for every listed job.
    pub fn uniform(ids: &[JobId], rate: Rat) -> Self {
        RateVector { rates: ids.iter().map(|&id| (id, rate.clone())).collect() }
    }

    pub fn set(&mut self, id: JobId, rate: Rat) {
        self.rates.insert(id, rate);
    }

    /// Rate of `id`, zero when absent.
    pub fn get(&self, id: JobId) -> Rat {
        self.rates.get(&id).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&JobId, &Rat)> {
        self.rates.iter()
    }

    pub fn sum(&self) -> Rat {
        self.rates.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

impl Serialize for RateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.rates.len()))?;
        for (id, rate) in &self.rates {
            map.serialize_entry(&id.to_string(), &crate::rational::format_rat(rate))?;
        }
        map.end()
    }
}

/// A policy's answer at an event: rates to hold until the next event, and an
/// optional wake time at which it wants to be queried again even if nothing
/// completes by then.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub rates: RateVector,
    pub wake: Option<Rat>,
}

impl Decision {
    pub fn rates(rates: RateVector) -> Self {
        Decision { rates, wake: None }
    }

    pub fn with_wake(rates: RateVector, wake: Rat) -> Self {
        Decision { rates, wake: Some(wake) }
    }

    /// No processing at all until `wake`.
    pub fn idle_until(wake: Rat) -> Self {
        Decision { rates: RateVector::new(), wake: Some(wake) }
    }
}

/// One maximal interval with constant rates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Segment {
    #[serde(with = "rat_serde")]
    pub start: Rat,
    #[serde(with = "rat_serde")]
    pub end: Rat,
    /// Front job ids during the segment, ascending.
    pub front: Vec<JobId>,
    /// Total weight of unfinished jobs during the segment.
    #[serde(with = "rat_serde")]
    pub unfinished_weight: Rat,
    pub rates: RateVector,
}

/// Full record of a simulation: abutting segments plus completion events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub machines: usize,
    pub segments: Vec<Segment>,
    /// (job, completion time) in completion order; simultaneous completions
    /// appear in cascade order.
    pub completions: Vec<(JobId, Rat)>,
}

impl Trace {
    /// One JSON document per segment, newline separated.
    pub fn segments_jsonl(&self) -> String {
        self.segments
            .iter()
            .map(|s| serde_json::to_string(s).expect("segment serialization cannot fail"))
            .fold(String::new(), |mut acc, line| {
                acc.push_str(&line);
                acc.push('\n');
                acc
            })
    }
}

/// Completion times and aggregate objective of a finished simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleResult {
    /// Completion time per job, indexed by id.
    pub completions: Vec<Rat>,
    /// Σ wⱼ·Cⱼ.
    pub objective: Rat,
    pub makespan: Rat,
}

impl ScheduleResult {
    pub fn completion(&self, id: JobId) -> Rat {
        self.completions[id].clone()
    }

    /// CSV with columns `job_id,completion_num,completion_den`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("job_id,completion_num,completion_den\n");
        for (id, c) in self.completions.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", id, c.numer(), c.denom()));
        }
        out
    }
}

/// Simulation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("infeasible rates: {detail}")]
    InfeasibleRates { detail: String },
    #[error("rate assigned to job {id}, which is not a front job")]
    RateOnNonFrontJob { id: JobId },
    #[error("policy made no progress at time {time}")]
    PolicyStall { time: Rat },
    #[error("policy failure: {0}")]
    Policy(#[from] PolicyError),
}

struct SimState<'a> {
    inst: &'a Instance,
    remaining: Vec<Rat>,
    done: Vec<bool>,
    completion: Vec<Option<Rat>>,
    pred_left: Vec<usize>,
    front: BTreeSet<JobId>,
    unfinished_weight: Rat,
    pending_completed: Vec<JobId>,
    pending_revealed: Vec<Reveal>,
    events: Vec<(JobId, Rat)>,
    done_count: usize,
}

impl<'a> SimState<'a> {
    fn new(inst: &'a Instance) -> Self {
        let n = inst.len();
        SimState {
            inst,
            remaining: inst.jobs().iter().map(|j| j.p.clone()).collect(),
            done: vec![false; n],
            completion: vec![None; n],
            pred_left: (0..n).map(|v| inst.preds(v).len()).collect(),
            front: BTreeSet::new(),
            unfinished_weight: inst.jobs().iter().map(|j| j.w.clone()).sum(),
            pending_completed: Vec::new(),
            pending_revealed: Vec::new(),
            events: Vec::new(),
            done_count: 0,
        }
    }

    fn reveal(&mut self, id: JobId, cascade: &mut BTreeSet<JobId>) {
        self.pending_revealed.push(Reveal {
            id,
            weight: self.inst.job(id).w.clone(),
            preds: self.inst.preds(id).to_vec(),
        });
        if self.remaining[id].is_zero() {
            cascade.insert(id);
        } else {
            self.front.insert(id);
        }
    }

    fn complete(&mut self, id: JobId, t: &Rat, cascade: &mut BTreeSet<JobId>) {
        self.done[id] = true;
        self.done_count += 1;
        self.completion[id] = Some(t.clone());
        self.front.remove(&id);
        self.unfinished_weight -= &self.inst.job(id).w;
        self.events.push((id, t.clone()));
        self.pending_completed.push(id);
        for &s in self.inst.succs(id) {
            self.pred_left[s] -= 1;
            if self.pred_left[s] == 0 {
                self.reveal(s, cascade);
            }
        }
    }

    /// Completes every job in `work` at time `t`, cascading through
    /// zero-length reveals, always taking the smallest available id first.
    fn settle(&mut self, t: &Rat, mut work: BTreeSet<JobId>) {
        while let Some(j) = work.pop_first() {
            self.complete(j, t, &mut work);
        }
    }

    /// Reveals the initial front and cascades zero-length roots at time 0.
    fn seed(&mut self) {
        let mut cascade = BTreeSet::new();
        for r in self.inst.roots() {
            self.reveal(r, &mut cascade);
        }
        self.settle(&Rat::zero(), cascade);
    }

    fn make_view(&mut self, t: &Rat, m: usize) -> PolicyView {
        PolicyView {
            time: t.clone(),
            machines: m,
            front: self
                .front
                .iter()
                .map(|&id| FrontJob { id, weight: self.inst.job(id).w.clone() })
                .collect(),
            completed: std::mem::take(&mut self.pending_completed),
            revealed: std::mem::take(&mut self.pending_revealed),
        }
    }
}

/// Runs `policy` on `instance` with `m` machines to completion.
///
/// The policy is queried at t = 0 and after every completion/reveal event;
/// between queries the emitted rates are held constant and the next event
/// time is computed exactly as the earliest completion under those rates
/// (or the decision's wake time, whichever is earlier).
pub fn simulate(
    instance: &Instance,
    policy: &mut dyn Policy,
    m: usize,
) -> Result<(ScheduleResult, Trace), SimError> {
    if m == 0 {
        return Err(SimError::InfeasibleRates { detail: "machine count must be at least 1".into() });
    }
    let n = instance.len();
    let m_cap = Rat::from_integer(m.into());
    let mut sim = SimState::new(instance);
    sim.seed();

    let mut t = Rat::zero();
    let mut segments = Vec::new();

    while sim.done_count < n {
        let view = sim.make_view(&t, m);
        let decision = policy.decide(&view)?;

        let mut sum = Rat::zero();
        for (&id, rate) in decision.rates.iter() {
            if !sim.front.contains(&id) {
                return Err(SimError::RateOnNonFrontJob { id });
            }
            if rate < &Rat::zero() || rate > &Rat::one() {
                return Err(SimError::InfeasibleRates {
                    detail: format!("rate {rate} on job {id} lies outside [0, 1]"),
                });
            }
            sum += rate;
        }
        if sum > m_cap {
            return Err(SimError::InfeasibleRates {
                detail: format!("rates sum to {sum}, exceeding {m} machine(s)"),
            });
        }

        let mut earliest: Option<Rat> = None;
        for (&id, rate) in decision.rates.iter() {
            if rate > &Rat::zero() {
                let dt = &sim.remaining[id] / rate;
                if earliest.as_ref().is_none_or(|e| dt < *e) {
                    earliest = Some(dt);
                }
            }
        }
        let completion_at = earliest.map(|dt| &t + dt);
        let wake_at = match decision.wake {
            Some(w) if w <= t => return Err(SimError::PolicyStall { time: t }),
            other => other,
        };
        let next_t = match (completion_at, wake_at) {
            (Some(c), Some(w)) => c.min(w),
            (Some(c), None) => c,
            (None, Some(w)) => w,
            (None, None) => return Err(SimError::PolicyStall { time: t }),
        };

        segments.push(Segment {
            start: t.clone(),
            end: next_t.clone(),
            front: sim.front.iter().copied().collect(),
            unfinished_weight: sim.unfinished_weight.clone(),
            rates: decision.rates.clone(),
        });

        let delta = &next_t - &t;
        let mut finished = BTreeSet::new();
        for (&id, rate) in decision.rates.iter() {
            if rate > &Rat::zero() {
                let used = rate * &delta;
                sim.remaining[id] -= used;
                if sim.remaining[id].is_zero() {
                    finished.insert(id);
                }
            }
        }
        t = next_t;
        sim.settle(&t, finished);
    }

    let completions: Vec<Rat> = sim.completion.into_iter().map(|c| c.expect("all done")).collect();
    let objective = completions
        .iter()
        .zip(instance.jobs())
        .map(|(c, j)| c * &j.w)
        .sum();
    let makespan = completions.iter().cloned().max().unwrap_or_else(Rat::zero);
    Ok((
        ScheduleResult { completions, objective, makespan },
        Trace { machines: m, segments, completions: sim.events },
    ))
}

// ───────────────────────── McNaughton realization ─────────────────────────

/// A contiguous run of one job on one machine, absolute times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub job: JobId,
    #[serde(with = "rat_serde")]
    pub start: Rat,
    #[serde(with = "rat_serde")]
    pub end: Rat,
}

/// Per-machine timetables realizing one segment's rates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct McNaughtonSchedule {
    pub machines: Vec<Vec<Piece>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum McNaughtonError {
    #[error("segment cannot be realized: {detail}")]
    InfeasibleSegment { detail: String },
}

/// Lays the segment's rates out as an explicit preemptive timetable on `m`
/// machines by the wrap-around rule: jobs in id order fill machine timelines
/// of capacity `L = end − start` contiguously, each receiving `rate·L` time,
/// wrapping onto the next machine at the boundary. Because every rate is at
/// most 1, the two pieces of a wrapped job never overlap in time.
pub fn realize_mcnaughton(segment: &Segment, m: usize) -> Result<McNaughtonSchedule, McNaughtonError> {
    let len = &segment.end - &segment.start;
    if len <= Rat::zero() {
        return Err(McNaughtonError::InfeasibleSegment {
            detail: "segment length must be positive".into(),
        });
    }
    let mut total = Rat::zero();
    for (&id, rate) in segment.rates.iter() {
        if rate < &Rat::zero() || rate > &Rat::one() {
            return Err(McNaughtonError::InfeasibleSegment {
                detail: format!("rate {rate} on job {id} lies outside [0, 1]"),
            });
        }
        total += rate;
    }
    if total > Rat::from_integer(m.into()) {
        return Err(McNaughtonError::InfeasibleSegment {
            detail: format!("rates sum to {total}, exceeding {m} machine(s)"),
        });
    }

    let mut machines = vec![Vec::new(); m];
    let mut k = 0usize;
    let mut offset = Rat::zero(); // position within [0, L) on machine k
    for (&id, rate) in segment.rates.iter() {
        if rate.is_zero() {
            continue;
        }
        let a = rate * &len;
        if k >= m {
            return Err(McNaughtonError::InfeasibleSegment {
                detail: "ran out of machines during wrap-around fill".into(),
            });
        }
        if &offset + &a <= len {
            machines[k].push(Piece {
                job: id,
                start: &segment.start + &offset,
                end: &segment.start + &offset + &a,
            });
            offset += &a;
            if offset == len {
                k += 1;
                offset = Rat::zero();
            }
        } else {
            let tail = &len - &offset; // part on machine k, ending at L
            machines[k].push(Piece {
                job: id,
                start: &segment.start + &offset,
                end: &segment.start + &len,
            });
            k += 1;
            let head = &a - &tail; // wrapped part, starting at 0
            if k >= m {
                return Err(McNaughtonError::InfeasibleSegment {
                    detail: "wrap-around spilled past the last machine".into(),
                });
            }
            machines[k].push(Piece {
                job: id,
                start: segment.start.clone(),
                end: &segment.start + &head,
            });
            offset = head;
        }
    }
    Ok(McNaughtonSchedule { machines })
}

// ───────────────────────── rate-condition witness ─────────────────────────

/// Minimal rate-condition factor, or an infinite marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhoStar {
    Finite(Rat),
    Infinite,
}

impl std::fmt::Display for RhoStar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RhoStar::Finite(r) => write!(f, "{}", crate::rational::format_rat(r)),
            RhoStar::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("trace references job {id}, which the instance does not contain")]
    TraceInstanceMismatch { id: JobId },
}

/// The minimal ρ such that every segment and every front job `j` with a
/// positive rate (and, on multiple machines, a rate below 1) satisfies
/// `m·w(S(j)) ≤ ρ·Rⱼ·W(t)`.
///
/// Jobs whose successor set carries no weight impose no constraint. A front
/// job with zero rate but positive successor-set weight makes every finite ρ
/// fail, yielding [`RhoStar::Infinite`]. With no constraints at all the
/// witness is 1.
pub fn min_rho_witness(trace: &Trace, instance: &Instance) -> Result<RhoStar, EvalError> {
    let n = instance.len();
    let m_rat = Rat::from_integer(trace.machines.into());
    let one = Rat::one();
    let mut agg_cache: Vec<Option<Rat>> = vec![None; n];
    let mut best: Option<Rat> = None;
    for seg in &trace.segments {
        for &j in &seg.front {
            if j >= n {
                return Err(EvalError::TraceInstanceMismatch { id: j });
            }
            let ws = agg_cache[j]
                .get_or_insert_with(|| instance.successor_weight(j))
                .clone();
            if ws.is_zero() {
                continue;
            }
            let rate = seg.rates.get(j);
            if trace.machines > 1 && rate == one {
                continue;
            }
            if rate.is_zero() {
                return Ok(RhoStar::Infinite);
            }
            // W(t) ≥ w(S(j)) > 0, so the division is safe.
            let ratio = &m_rat * &ws / (&rate * &seg.unfinished_weight);
            if best.as_ref().is_none_or(|b| ratio > *b) {
                best = Some(ratio);
            }
        }
    }
    Ok(RhoStar::Finite(best.unwrap_or_else(Rat::one)))
}

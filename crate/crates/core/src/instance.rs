//! Validated scheduling instances: jobs with exact processing times and
//! weights plus a precedence DAG.
//!
//! An [`Instance`] is immutable after validation. Job ids are dense integers
//! `0..n-1`; every deterministic tie-break in the crate uses ascending id.
//! The precedence relation is given by direct edges `(from, to)` meaning
//! `from` must complete before `to` is revealed.
//!
//! Key derived structure:
//!
//! * topology class — `Chains` (in- and out-degree ≤ 1), `OutForest`
//!   (in-degree ≤ 1), `InForest` (out-degree ≤ 1), else `GeneralDag`;
//! * width `ω` — the maximum antichain size, computed via Dilworth's theorem
//!   as `n` minus a maximum bipartite matching on the transitive closure;
//! * successor aggregates — for a job `v`, the set `S(v)` of `v` and all its
//!   descendants with its total weight, total processing, and average.

use crate::rational::{rat_serde, Rat};
use num::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Dense job identifier (`0..n-1` within an instance).
pub type JobId = usize;

/// A single job: processing requirement `p ≥ 0` and weight `w ≥ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub id: JobId,
    pub p: Rat,
    pub w: Rat,
}

/// Structural defect found during validation. Each variant names the
/// offending ids so callers can pinpoint the problem.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Defect {
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
    #[error("job ids are not dense 0..n-1: found id {0} with {1} jobs")]
    NonDenseId(JobId, usize),
    #[error("job {id} has negative {field}")]
    NegativeValue { id: JobId, field: &'static str },
    #[error("edge ({0}, {1}) references a nonexistent job")]
    DanglingEdge(JobId, JobId),
    #[error("self-loop on job {0}")]
    SelfLoop(JobId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(JobId, JobId),
    #[error("precedence cycle through jobs {0:?}")]
    Cyclic(Vec<JobId>),
}

/// Errors from queries on a valid instance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("operation requires a non-empty instance")]
    EmptyInstance,
    #[error("unknown job id {0}")]
    UnknownId(JobId),
    #[error("instance is not a union of chains")]
    NotChains,
}

/// Topology class, most restrictive first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyClass {
    Chains,
    OutForest,
    InForest,
    GeneralDag,
}

/// Topology classification: class plus whether the DAG is weakly connected
/// (a single component — the "tree" flag for forest classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub class: TopologyClass,
    pub connected: bool,
}

/// Aggregate over `S(v)` = `v` and all jobs reachable from `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessorAggregate {
    pub root: JobId,
    /// Members of `S(v)` in ascending id order (includes `v`).
    pub members: Vec<JobId>,
    pub total_weight: Rat,
    pub total_processing: Rat,
    /// `total_weight / total_processing`, or `None` when `total_processing`
    /// is zero (the average is undefined).
    pub average: Option<Rat>,
}

/// A validated scheduling instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    jobs: Vec<Job>,
    edges: Vec<(JobId, JobId)>,
    succs: Vec<Vec<JobId>>,
    preds: Vec<Vec<JobId>>,
    /// Transitive-closure rows: bit `v` of `closure[u]` is set iff `u` reaches
    /// `v` through one or more edges.
    closure: Vec<Vec<u64>>,
}

fn bit_get(row: &[u64], v: usize) -> bool {
    row[v / 64] >> (v % 64) & 1 == 1
}

fn bit_set(row: &mut [u64], v: usize) {
    row[v / 64] |= 1 << (v % 64);
}

impl Instance {
    /// Validates raw jobs and edges into an instance. Returns every defect
    /// found, not just the first.
    pub fn validate(jobs: Vec<Job>, edges: Vec<(JobId, JobId)>) -> Result<Instance, Vec<Defect>> {
        let mut defects = Vec::new();
        let n = jobs.len();

        let mut seen = BTreeSet::new();
        for j in &jobs {
            if !seen.insert(j.id) {
                defects.push(Defect::DuplicateId(j.id));
            } else if j.id >= n {
                defects.push(Defect::NonDenseId(j.id, n));
            }
            if j.p < Rat::zero() {
                defects.push(Defect::NegativeValue { id: j.id, field: "processing time" });
            }
            if j.w < Rat::zero() {
                defects.push(Defect::NegativeValue { id: j.id, field: "weight" });
            }
        }

        let mut edge_seen = BTreeSet::new();
        let mut clean_edges = Vec::new();
        for &(a, b) in &edges {
            if !seen.contains(&a) || !seen.contains(&b) {
                defects.push(Defect::DanglingEdge(a, b));
                continue;
            }
            if a == b {
                defects.push(Defect::SelfLoop(a));
                continue;
            }
            if !edge_seen.insert((a, b)) {
                defects.push(Defect::DuplicateEdge(a, b));
                continue;
            }
            clean_edges.push((a, b));
        }

        if !defects.is_empty() {
            return Err(defects);
        }

        let mut jobs = jobs;
        jobs.sort_by_key(|j| j.id);
        clean_edges.sort_unstable();

        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for &(a, b) in &clean_edges {
            succs[a].push(b);
            preds[b].push(a);
        }

        let topo = match topo_order(n, &succs, &preds) {
            Ok(order) => order,
            Err(cycle) => return Err(vec![Defect::Cyclic(cycle)]),
        };

        // Transitive closure, filled in reverse topological order.
        let words = n.div_ceil(64).max(1);
        let mut closure = vec![vec![0u64; words]; n];
        for &u in topo.iter().rev() {
            let mut row = vec![0u64; words];
            for &s in &succs[u] {
                bit_set(&mut row, s);
                for (acc, x) in row.iter_mut().zip(&closure[s]) {
                    *acc |= x;
                }
            }
            closure[u] = row;
        }

        Ok(Instance { jobs, edges: clean_edges, succs, preds, closure })
    }

    /// Convenience constructor assigning dense ids `0..` in order of the
    /// `(p, w)` slice.
    pub fn new(pw: Vec<(Rat, Rat)>, edges: Vec<(JobId, JobId)>) -> Result<Instance, Vec<Defect>> {
        let jobs = pw
            .into_iter()
            .enumerate()
            .map(|(id, (p, w))| Job { id, p, w })
            .collect();
        Instance::validate(jobs, edges)
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, id: JobId) -> &Job {
        &self.jobs[id]
    }

    pub fn edges(&self) -> &[(JobId, JobId)] {
        &self.edges
    }

    pub fn succs(&self, id: JobId) -> &[JobId] {
        &self.succs[id]
    }

    pub fn preds(&self, id: JobId) -> &[JobId] {
        &self.preds[id]
    }

    /// Jobs with no predecessors, ascending id.
    pub fn roots(&self) -> Vec<JobId> {
        (0..self.len()).filter(|&v| self.preds[v].is_empty()).collect()
    }

    /// The front at time zero, ascending id: roots with positive processing
    /// plus everything unlocked by the instantaneous completion cascade of
    /// zero-processing jobs.
    pub fn initial_front(&self) -> Vec<JobId> {
        let mut pred_left: Vec<usize> =
            (0..self.len()).map(|v| self.preds[v].len()).collect();
        let mut front = Vec::new();
        let mut cascade: BTreeSet<JobId> = BTreeSet::new();
        let offer = |v: JobId, front: &mut Vec<JobId>, cascade: &mut BTreeSet<JobId>| {
            if self.jobs[v].p.is_zero() {
                cascade.insert(v);
            } else {
                front.push(v);
            }
        };
        for v in self.roots() {
            offer(v, &mut front, &mut cascade);
        }
        while let Some(v) = cascade.pop_first() {
            for &s in &self.succs[v] {
                pred_left[s] -= 1;
                if pred_left[s] == 0 {
                    offer(s, &mut front, &mut cascade);
                }
            }
        }
        front.sort_unstable();
        front
    }

    /// True iff `u` reaches `v` through one or more edges.
    pub fn reaches(&self, u: JobId, v: JobId) -> bool {
        bit_get(&self.closure[u], v)
    }

    /// Classifies the precedence structure. The most restrictive matching
    /// class wins: chains are also out- and in-forests.
    pub fn classify_topology(&self) -> Topology {
        let n = self.len();
        let in_ok = (0..n).all(|v| self.preds[v].len() <= 1);
        let out_ok = (0..n).all(|v| self.succs[v].len() <= 1);
        let class = match (in_ok, out_ok) {
            (true, true) => TopologyClass::Chains,
            (true, false) => TopologyClass::OutForest,
            (false, true) => TopologyClass::InForest,
            (false, false) => TopologyClass::GeneralDag,
        };
        Topology { class, connected: self.weak_components() == 1 }
    }

    fn weak_components(&self) -> usize {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let r = find(parent, parent[x]);
                parent[x] = r;
            }
            parent[x]
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        (0..n).map(|v| find(&mut parent, v)).collect::<BTreeSet<_>>().len()
    }

    /// Maximum antichain size `ω` via Dilworth's theorem: a minimum chain
    /// cover of the poset equals `n` minus a maximum matching of the
    /// comparability relation viewed as a bipartite graph.
    pub fn width(&self) -> Result<usize, InstanceError> {
        let n = self.len();
        if n == 0 {
            return Err(InstanceError::EmptyInstance);
        }
        // match_to[v] = u means the cover chain links u -> v.
        let mut match_to: Vec<Option<usize>> = vec![None; n];
        let mut match_from: Vec<Option<usize>> = vec![None; n];
        // Greedy seed keeps the augmenting phase cheap on long chains.
        for u in 0..n {
            for v in 0..n {
                if bit_get(&self.closure[u], v) && match_to[v].is_none() {
                    match_to[v] = Some(u);
                    match_from[u] = Some(v);
                    break;
                }
            }
        }
        fn augment(
            inst: &Instance,
            u: usize,
            visited: &mut [bool],
            match_to: &mut [Option<usize>],
            match_from: &mut [Option<usize>],
        ) -> bool {
            for v in 0..inst.len() {
                if bit_get(&inst.closure[u], v) && !visited[v] {
                    visited[v] = true;
                    let free = match match_to[v] {
                        None => true,
                        Some(w) => augment(inst, w, visited, match_to, match_from),
                    };
                    if free {
                        match_to[v] = Some(u);
                        match_from[u] = Some(v);
                        return true;
                    }
                }
            }
            false
        }
        for u in 0..n {
            if match_from[u].is_none() {
                let mut visited = vec![false; n];
                augment(self, u, &mut visited, &mut match_to, &mut match_from);
            }
        }
        let matched = match_to.iter().filter(|m| m.is_some()).count();
        Ok(n - matched)
    }

    /// The aggregate over `S(v)` = `v` plus everything reachable from `v`.
    pub fn successor_aggregate(&self, v: JobId) -> Result<SuccessorAggregate, InstanceError> {
        if v >= self.len() {
            return Err(InstanceError::UnknownId(v));
        }
        let mut members = vec![v];
        for u in 0..self.len() {
            if bit_get(&self.closure[v], u) {
                members.push(u);
            }
        }
        members.sort_unstable();
        let total_weight: Rat = members.iter().map(|&u| self.jobs[u].w.clone()).sum();
        let total_processing: Rat = members.iter().map(|&u| self.jobs[u].p.clone()).sum();
        let average = if total_processing.is_zero() {
            None
        } else {
            Some(&total_weight / &total_processing)
        };
        Ok(SuccessorAggregate { root: v, members, total_weight, total_processing, average })
    }

    /// Total weight of `S(v)` without materializing the member list.
    pub fn successor_weight(&self, v: JobId) -> Rat {
        let mut w = self.jobs[v].w.clone();
        for u in 0..self.len() {
            if bit_get(&self.closure[v], u) {
                w += &self.jobs[u].w;
            }
        }
        w
    }

    /// Decomposes a chains-topology instance into its chains, each a path of
    /// job ids from head to tail, ordered by head id.
    pub fn chains(&self) -> Result<Vec<Vec<JobId>>, InstanceError> {
        if self.classify_topology().class != TopologyClass::Chains {
            return Err(InstanceError::NotChains);
        }
        let mut out = Vec::new();
        for head in self.roots() {
            let mut chain = vec![head];
            let mut cur = head;
            while let Some(&next) = self.succs[cur].first() {
                chain.push(next);
                cur = next;
            }
            out.push(chain);
        }
        Ok(out)
    }

    /// Serializes to the versioned instance JSON document.
    pub fn to_json(&self) -> String {
        let raw = RawInstance {
            version: 1,
            jobs: self
                .jobs
                .iter()
                .map(|j| RawJob { id: j.id, p: j.p.clone(), w: j.w.clone() })
                .collect(),
            edges: self.edges.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("instance serialization cannot fail")
    }

    /// Parses and validates the versioned instance JSON document.
    pub fn from_json(text: &str) -> Result<Instance, JsonError> {
        let raw: RawInstance = serde_json::from_str(text).map_err(|e| JsonError::Parse(e.to_string()))?;
        if raw.version != 1 {
            return Err(JsonError::UnsupportedVersion(raw.version));
        }
        let jobs = raw
            .jobs
            .into_iter()
            .map(|r| Job { id: r.id, p: r.p, w: r.w })
            .collect();
        Instance::validate(jobs, raw.edges).map_err(JsonError::Invalid)
    }
}

/// Errors from instance JSON parsing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JsonError {
    #[error("invalid instance JSON: {0}")]
    Parse(String),
    #[error("unsupported instance schema version {0} (expected 1)")]
    UnsupportedVersion(u64),
    #[error("instance JSON failed validation: {0:?}")]
    Invalid(Vec<Defect>),
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    version: u64,
    jobs: Vec<RawJob>,
    edges: Vec<(JobId, JobId)>,
}

#[derive(Serialize, Deserialize)]
struct RawJob {
    id: JobId,
    #[serde(with = "rat_serde")]
    p: Rat,
    #[serde(with = "rat_serde")]
    w: Rat,
}

/// Kahn topological order with ascending-id tie-break; on a cycle, returns
/// the ids of one cycle found by walking unprocessed predecessors.
fn topo_order(
    n: usize,
    succs: &[Vec<JobId>],
    preds: &[Vec<JobId>],
) -> Result<Vec<JobId>, Vec<JobId>> {
    let mut indeg: Vec<usize> = (0..n).map(|v| preds[v].len()).collect();
    let mut ready: BTreeSet<JobId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &s in &succs[v] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Walk predecessors within the residual graph until a node repeats.
    let in_order: BTreeSet<_> = order.iter().copied().collect();
    let start = (0..n).find(|v| !in_order.contains(v)).expect("residual node exists");
    let mut path = vec![start];
    let mut seen = BTreeSet::from([start]);
    let mut cur = start;
    loop {
        let prev = preds[cur]
            .iter()
            .copied()
            .find(|p| !in_order.contains(p))
            .expect("residual node has a residual predecessor");
        if !seen.insert(prev) {
            let pos = path.iter().position(|&x| x == prev).unwrap();
            let mut cycle: Vec<JobId> = path[pos..].to_vec();
            cycle.reverse();
            return Err(cycle);
        }
        path.push(prev);
        cur = prev;
    }
}

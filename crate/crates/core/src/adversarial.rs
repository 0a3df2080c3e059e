//! Deterministic generators for hard instance families, each packaged with
//! exact reference values.
//!
//! Every generator returns a [`FamilySpec`]: the instance, the parameters
//! that produced it, and closed-form reference values — optimal baselines
//! and the objectives that specific policies are forced into. The families
//! share one theme: a front of indistinguishable jobs hiding where the
//! weight lives, so any policy that splits rates (or trusts the wrong
//! signal) pays a factor that grows with the instance, while a clairvoyant
//! schedule stays cheap. Adversarial placement is explicit — the hidden
//! index or the id order is a parameter — because the policies here are
//! deterministic, so the worst case is reproducible rather than interactive.

use num::integer::lcm;
use num::Zero;
use serde_json::json;

use crate::instance::{Instance, JobId};
use crate::rational::{format_rat, harmonic, rat_int, Rat};

/// A generated lower-bound instance with its exact reference values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilySpec {
    /// Family identifier, e.g. `"hidden_chain"`.
    pub family: &'static str,
    /// Size parameters in a fixed per-family order.
    pub params: Vec<(&'static str, i64)>,
    pub instance: Instance,
    /// Named exact values: optimal baselines and forced policy objectives.
    pub references: Vec<(&'static str, Rat)>,
}

impl FamilySpec {
    /// Looks up a reference value by name.
    pub fn reference(&self, name: &str) -> Option<&Rat> {
        self.references.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// Sidecar JSON with the family, parameters, and reference values (the
    /// instance itself serializes separately via [`Instance::to_json`]).
    pub fn to_json(&self) -> String {
        let doc = json!({
            "version": 1,
            "family": self.family,
            "params": self.params.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "references": self
                .references
                .iter()
                .map(|(k, v)| json!([k, format_rat(v)]))
                .collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("sidecar serialization cannot fail")
    }
}

/// Errors from family generators.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FamilyError {
    #[error("parameter {name} = {value} out of range: requires {constraint}")]
    OutOfRange { name: &'static str, value: i64, constraint: &'static str },
    #[error("chain lengths are not integral: d = {d} must be a positive multiple of {lcm}")]
    NonIntegralLength { d: i64, lcm: i64 },
}

fn out_of_range(name: &'static str, value: i64, constraint: &'static str) -> FamilyError {
    FamilyError::OutOfRange { name, value, constraint }
}

// ───────────────────────── hidden chain ─────────────────────────

/// `n − 1` visible zero-weight unit jobs; the `h`-th of them (1-based)
/// reveals one unit job of weight one at its completion, for `n` jobs total.
///
/// The visible jobs are indistinguishable, so a rate-splitting policy
/// completes them all — and only then the weighted job — near time `n`,
/// while the optimum runs the revealing job first and pays 2.
pub fn gen_hidden_chain(n: usize, h: usize) -> Result<FamilySpec, FamilyError> {
    if n < 2 {
        return Err(out_of_range("n", n as i64, "n ≥ 2"));
    }
    if h == 0 || h > n - 1 {
        return Err(out_of_range("h", h as i64, "1 ≤ h ≤ n − 1"));
    }
    let mut pw = vec![(rat_int(1), rat_int(0)); n - 1];
    pw.push((rat_int(1), rat_int(1)));
    let instance = Instance::new(pw, vec![(h - 1, n - 1)]).expect("hidden chain is valid");
    Ok(FamilySpec {
        family: "hidden_chain",
        params: vec![("n", n as i64), ("h", h as i64)],
        instance,
        references: vec![
            ("opt", rat_int(2)),
            ("alg_equal_share", rat_int(n as i64)),
        ],
    })
}

// ───────────────────────── out-tree with a static front ─────────────────────────

/// A unit root of weight zero fans out to `n − 1` zero-weight unit children;
/// child `h` reveals one unit job of weight one. `n + 1` jobs total.
///
/// The initial front is just the root, so a static weight prediction carries
/// a single number and says nothing about which child hides the weight.
/// Adaptive weight predictions identify the child and finish the weighted
/// job at time 3, matching the optimum.
pub fn gen_outtree_static(n: usize, h: usize) -> Result<FamilySpec, FamilyError> {
    if n < 2 {
        return Err(out_of_range("n", n as i64, "n ≥ 2"));
    }
    if h == 0 || h > n - 1 {
        return Err(out_of_range("h", h as i64, "1 ≤ h ≤ n − 1"));
    }
    let mut pw = vec![(rat_int(1), rat_int(0)); n];
    pw.push((rat_int(1), rat_int(1)));
    let mut edges: Vec<(JobId, JobId)> = (1..n).map(|c| (0, c)).collect();
    edges.push((h, n));
    let instance = Instance::new(pw, edges).expect("out-tree is valid");
    Ok(FamilySpec {
        family: "outtree_static",
        params: vec![("n", n as i64), ("h", h as i64)],
        instance,
        references: vec![
            ("opt", rat_int(3)),
            ("alg_adaptive_truth", rat_int(3)),
            ("alg_equal_share", rat_int(n as i64 + 1)),
        ],
    })
}

// ───────────────────────── in-tree ─────────────────────────

/// An in-tree on which correct adaptive weight predictions are useless:
/// `k` two-chains (zero-weight leaf, unit-weight inner) and a node `v` of
/// weight one fed by `l` zero-weight leaves, all merging into a weightless
/// root. `2k + l + 2` unit jobs.
///
/// Every potential front job has successor weight exactly one, so
/// weight-proportional rates degenerate to equal sharing and every front
/// batch completes simultaneously, forcing objective `(k+1)(2k+l+1)`.
/// Clearing the two-chains first and `v`'s leaves last costs only
/// `k² + 3k + l + 1`.
pub fn gen_intree(k: usize, l: usize) -> Result<FamilySpec, FamilyError> {
    if k < 1 {
        return Err(out_of_range("k", k as i64, "k ≥ 1"));
    }
    if l < 1 {
        return Err(out_of_range("l", l as i64, "l ≥ 1"));
    }
    let n = 2 * k + l + 2;
    let v = l + 2 * k;
    let root = v + 1;
    let mut pw = vec![(rat_int(1), rat_int(0)); n];
    for inner in (l + k)..(l + 2 * k) {
        pw[inner].1 = rat_int(1);
    }
    pw[v].1 = rat_int(1);
    let mut edges = Vec::new();
    for leaf in 0..l {
        edges.push((leaf, v));
    }
    for i in 0..k {
        edges.push((l + i, l + k + i));
        edges.push((l + k + i, root));
    }
    edges.push((v, root));
    let instance = Instance::new(pw, edges).expect("in-tree is valid");
    let (k_i, l_i) = (k as i64, l as i64);
    Ok(FamilySpec {
        family: "intree",
        params: vec![("k", k_i), ("l", l_i)],
        instance,
        references: vec![
            ("alg_adaptive_truth", rat_int((k_i + 1) * (2 * k_i + l_i + 1))),
            ("opt_upper", rat_int(k_i * k_i + 3 * k_i + l_i + 1)),
            ("nodes", rat_int(n as i64)),
        ],
    })
}

// ───────────────────────── equal averages ─────────────────────────

/// `s` chains of unit jobs over `n = s²` jobs, every chain with average
/// weight per processing exactly one: a long chain weighted
/// `[1, n − s, 0, …, 0]` plus `s − 1` singletons of weight one.
///
/// Averages cannot separate the chains, so an adversarial order that runs
/// the long chain last costs `Σ_{i=1..s} i + (s+1)(n−s)`, while starting
/// with the heavy job keeps the objective at most
/// `1 + 2(n−s) + Σ_{i=1..s−1}(3+i)`.
pub fn gen_average_lb(s: usize) -> Result<FamilySpec, FamilyError> {
    if s < 2 {
        return Err(out_of_range("s", s as i64, "s ≥ 2"));
    }
    let n = s * s;
    let long = n - s + 1;
    let mut pw = vec![(rat_int(1), rat_int(0)); long];
    pw[0].1 = rat_int(1);
    pw[1].1 = rat_int((n - s) as i64);
    pw.extend(vec![(rat_int(1), rat_int(1)); s - 1]);
    let edges = (1..long).map(|i| (i - 1, i)).collect();
    let instance = Instance::new(pw, edges).expect("average chains are valid");
    let (n_i, s_i) = (n as i64, s as i64);
    let forced: i64 = (1..=s_i).sum::<i64>() + (s_i + 1) * (n_i - s_i);
    let opt_upper: i64 = 1 + 2 * (n_i - s_i) + (1..s_i).map(|i| 3 + i).sum::<i64>();
    Ok(FamilySpec {
        family: "average_lb",
        params: vec![("s", s_i)],
        instance,
        references: vec![
            ("alg_forced", rat_int(forced)),
            ("opt_upper", rat_int(opt_upper)),
        ],
    })
}

// ───────────────────────── static-order chains ─────────────────────────

/// `ω` chains of unit jobs, each of total weight one, with chain `c` holding
/// `d·H_ω·c` jobs: the first `ω − 1` chains carry their weight on the head,
/// the last chain on its tail. `d` must be a positive multiple of
/// `lcm(1..ω)` so every length is integral.
///
/// Rates frozen from the initial order give chain `c` rate `1/(H_ω·c)`
/// forever, so the back-loaded chain finishes at `d·H_ω²·ω²` while a
/// schedule that simply runs it first pays `ω(ω+1) + ω − 1 + d·H_ω·ω`; the
/// ratio tends to `ω·H_ω` as `d` grows. The frozen rates do *not* finish
/// the chains together — chain `c` ends at `d·H_ω²·c²`.
pub fn gen_static_order_lb(omega: usize, d: usize) -> Result<FamilySpec, FamilyError> {
    if omega < 2 {
        return Err(out_of_range("omega", omega as i64, "ω ≥ 2"));
    }
    let step = (1..=omega as i64).fold(1, lcm);
    if d == 0 || d as i64 % step != 0 {
        return Err(FamilyError::NonIntegralLength { d: d as i64, lcm: step });
    }
    // d·H_ω = Σ_{i=1..ω} d/i is integral because lcm(1..ω) divides d.
    let unit_len: i64 = (1..=omega as i64).map(|i| d as i64 / i).sum();
    let mut pw = Vec::new();
    let mut edges = Vec::new();
    for c in 1..=omega {
        let len = (unit_len * c as i64) as usize;
        let first = pw.len();
        for idx in 0..len {
            let head_weighted = c < omega && idx == 0;
            let tail_weighted = c == omega && idx == len - 1;
            let w = if head_weighted || tail_weighted { rat_int(1) } else { Rat::zero() };
            if idx > 0 {
                edges.push((pw.len() - 1, pw.len()));
            }
            pw.push((rat_int(1), w));
        }
        debug_assert_eq!(pw.len() - first, len);
    }
    let instance = Instance::new(pw, edges).expect("order chains are valid");
    let h = harmonic(omega);
    let (omega_i, d_i) = (rat_int(omega as i64), rat_int(d as i64));
    let opt_ref =
        &omega_i * (&omega_i + rat_int(1)) + &omega_i - rat_int(1) + &d_i * &h * &omega_i;
    let alg_lb = &d_i * &h * &h * &omega_i * &omega_i;
    let head_costs: Rat = (1..omega as i64).map(|c| &h * rat_int(c)).sum();
    let alg_strict = &head_costs + &alg_lb;
    Ok(FamilySpec {
        family: "static_order_lb",
        params: vec![("omega", omega as i64), ("d", d as i64)],
        instance,
        references: vec![
            ("opt_ref", opt_ref),
            ("alg_lb", alg_lb),
            ("alg_strict", alg_strict),
        ],
    })
}

// ───────────────────────── tests ─────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::instance::TopologyClass;
    use crate::oracle::{opt_brute_force, opt_chain_exact};
    use crate::policy::follow::ActionMode;
    use crate::policy::{equal_share, follow_action, order_static, wrr_adaptive, wrr_chains, OrderVariant};
    use crate::prediction::{ground_truth, Model, Payload};
    use crate::rational::rat;
    use std::collections::BTreeMap;

    fn truth_table(inst: &Instance, model: Model) -> BTreeMap<JobId, Rat> {
        match ground_truth(inst, model).unwrap().payload {
            Payload::Weights(t) => t,
            other => panic!("expected weights payload, got {other:?}"),
        }
    }

    // ───────────────────────── hidden chain ─────────────────────────

    #[test]
    fn hidden_chain_places_the_weight_behind_job_h() {
        let spec = gen_hidden_chain(3, 2).unwrap();
        let inst = &spec.instance;
        assert_eq!(inst.len(), 3);
        assert_eq!(inst.classify_topology().class, TopologyClass::Chains);
        assert_eq!(inst.succs(1), &[2]);
        assert_eq!(inst.job(2).w, rat_int(1));
        assert!(inst.job(0).w.is_zero() && inst.job(1).w.is_zero());
        assert_eq!(spec.reference("opt"), Some(&rat_int(2)));

        assert!(matches!(gen_hidden_chain(1, 1), Err(FamilyError::OutOfRange { .. })));
        assert!(matches!(gen_hidden_chain(5, 0), Err(FamilyError::OutOfRange { .. })));
        assert!(matches!(gen_hidden_chain(5, 5), Err(FamilyError::OutOfRange { .. })));
    }

    #[test]
    fn hidden_chain_ruins_equal_share_but_not_informed_chains() {
        let spec = gen_hidden_chain(101, 100).unwrap();
        let inst = &spec.instance;

        let mut blind = equal_share();
        let (result, _) = simulate(inst, &mut blind, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("alg_equal_share").unwrap());
        assert_eq!(result.objective, rat_int(101));

        let opt = opt_chain_exact(inst).unwrap().objective;
        assert_eq!(&opt, spec.reference("opt").unwrap());
        // Ratio n/2 certifies the linear blowup.
        assert_eq!(result.objective / opt, rat(101, 2));

        // Correct per-chain weight predictions rescue the run even when the
        // revealing job is first in id order: the weighted chain gets the
        // whole machine.
        let lucky = gen_hidden_chain(101, 1).unwrap();
        let table = truth_table(&lucky.instance, Model::StaticWeights);
        let mut informed = wrr_chains(table);
        let (result, _) = simulate(&lucky.instance, &mut informed, 1).unwrap();
        assert_eq!(result.objective, rat_int(2));
    }

    // ───────────────────────── out-tree ─────────────────────────

    #[test]
    fn outtree_hides_the_weight_from_the_static_front() {
        let spec = gen_outtree_static(4, 2).unwrap();
        let inst = &spec.instance;
        assert_eq!(inst.len(), 5);
        assert_eq!(inst.classify_topology().class, TopologyClass::OutForest);
        assert!(inst.classify_topology().connected);
        assert_eq!(inst.succs(2), &[4]);

        // The static model sees one front job — the root — and nothing else.
        let static_table = truth_table(inst, Model::StaticWeights);
        assert_eq!(static_table, BTreeMap::from([(0, rat_int(1))]));

        assert!(matches!(gen_outtree_static(4, 4), Err(FamilyError::OutOfRange { .. })));
    }

    #[test]
    fn outtree_adaptive_truth_matches_the_optimum() {
        let spec = gen_outtree_static(4, 2).unwrap();
        let inst = &spec.instance;
        let mut informed = wrr_adaptive(truth_table(inst, Model::AdaptiveWeights));
        let (result, _) = simulate(inst, &mut informed, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("alg_adaptive_truth").unwrap());
        assert_eq!(
            opt_brute_force(inst, 1).unwrap().objective,
            *spec.reference("opt").unwrap()
        );

        let mut blind = equal_share();
        let (result, _) = simulate(inst, &mut blind, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("alg_equal_share").unwrap());
    }

    // ───────────────────────── in-tree ─────────────────────────

    #[test]
    fn intree_counts_nodes_and_width() {
        let spec = gen_intree(4, 7).unwrap();
        let inst = &spec.instance;
        assert_eq!(inst.len(), 17);
        assert_eq!(spec.reference("nodes"), Some(&rat_int(17)));
        assert_eq!(inst.classify_topology().class, TopologyClass::InForest);
        assert_eq!(inst.width().unwrap(), 11);

        assert!(matches!(gen_intree(0, 1), Err(FamilyError::OutOfRange { .. })));
        assert!(matches!(gen_intree(1, 0), Err(FamilyError::OutOfRange { .. })));
    }

    #[test]
    fn intree_truth_degenerates_to_equal_sharing() {
        // Every potential front job has successor weight one, so the
        // weight-proportional policy splits rates evenly, batches finish
        // together, and the objective hits its reference exactly.
        let spec = gen_intree(8, 47).unwrap();
        let inst = &spec.instance;
        let table = truth_table(inst, Model::AdaptiveWeights);
        for v in 0..inst.len() - 1 {
            assert_eq!(table[&v], rat_int(1), "front-reachable job {v}");
        }
        let mut informed = wrr_adaptive(table);
        let (result, _) = simulate(inst, &mut informed, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("alg_adaptive_truth").unwrap());
        assert_eq!(result.objective, rat_int(576));
    }

    #[test]
    fn intree_good_order_stays_linear() {
        let spec = gen_intree(8, 47).unwrap();
        let inst = &spec.instance;
        let (k, l) = (8, 47);
        // Two-chains first, pair by pair, then v's leaves, then v.
        let mut sigma: Vec<JobId> = Vec::new();
        for i in 0..k {
            sigma.push(l + i);
            sigma.push(l + k + i);
        }
        sigma.extend(0..l);
        sigma.push(l + 2 * k);
        let mut good = follow_action(&sigma, ActionMode::Adaptive);
        let (result, _) = simulate(inst, &mut good, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("opt_upper").unwrap());
        assert_eq!(result.objective, rat_int(136));
    }

    // ───────────────────────── equal averages ─────────────────────────

    #[test]
    fn average_lb_chains_all_average_one() {
        let spec = gen_average_lb(3).unwrap();
        let inst = &spec.instance;
        assert_eq!(inst.len(), 9);
        let chains = inst.chains().unwrap();
        assert_eq!(chains.len(), 3);
        let averages = truth_table(inst, Model::Averages);
        for chain in &chains {
            assert_eq!(averages[&chain[0]], rat_int(1), "head of {chain:?}");
        }

        assert!(matches!(gen_average_lb(1), Err(FamilyError::OutOfRange { .. })));
    }

    #[test]
    fn average_lb_order_gap_matches_references() {
        let spec = gen_average_lb(3).unwrap();
        let inst = &spec.instance;

        // Indistinguishable averages let an adversary schedule the heavy
        // chain last: singletons first, then the long chain.
        let sigma: Vec<JobId> = (7..9).chain(0..7).collect();
        let mut duped = follow_action(&sigma, ActionMode::Static);
        let (result, _) = simulate(inst, &mut duped, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("alg_forced").unwrap());
        assert_eq!(result.objective, rat_int(30));

        let opt = opt_chain_exact(inst).unwrap().objective;
        assert_eq!(opt, rat_int(20));
        assert!(&opt <= spec.reference("opt_upper").unwrap());
        assert_eq!(spec.reference("opt_upper"), Some(&rat_int(22)));
    }

    // ───────────────────────── static-order chains ─────────────────────────

    #[test]
    fn static_order_lb_builds_integral_chains() {
        let spec = gen_static_order_lb(2, 2).unwrap();
        let inst = &spec.instance;
        let chains = inst.chains().unwrap();
        let lengths: Vec<usize> = chains.iter().map(|c| c.len()).collect();
        assert_eq!(lengths, [3, 6]);
        // Head-loaded first chain, tail-loaded last chain.
        assert_eq!(inst.job(chains[0][0]).w, rat_int(1));
        assert_eq!(inst.job(chains[1][5]).w, rat_int(1));
        let total: Rat = (0..inst.len()).map(|j| inst.job(j).w.clone()).sum();
        assert_eq!(total, rat_int(2));

        assert_eq!(
            gen_static_order_lb(3, 2),
            Err(FamilyError::NonIntegralLength { d: 2, lcm: 6 })
        );
        assert!(gen_static_order_lb(3, 6).is_ok());
        assert!(matches!(gen_static_order_lb(1, 1), Err(FamilyError::OutOfRange { .. })));
    }

    #[test]
    fn static_order_lb_frozen_rates_pay_the_reference() {
        let spec = gen_static_order_lb(2, 2).unwrap();
        let inst = &spec.instance;
        assert_eq!(spec.reference("opt_ref"), Some(&rat_int(13)));
        assert_eq!(spec.reference("alg_lb"), Some(&rat_int(18)));

        let mut frozen = order_static(&[0, 3], OrderVariant::Strict);
        let (result, _) = simulate(inst, &mut frozen, 1).unwrap();
        assert_eq!(&result.objective, spec.reference("alg_strict").unwrap());
        assert_eq!(result.objective, rat(39, 2));

        // The frozen rates do not finish the chains together: chain c ends
        // at d·H²·c², so the gap between the two finish times is 3/2·9 here.
        assert_eq!(result.completion(2), rat(9, 2));
        assert_eq!(result.completion(8), rat_int(18));

        // The exact optimum undercuts the reference schedule's value.
        let opt = opt_chain_exact(inst).unwrap().objective;
        assert_eq!(opt, rat_int(8));
        assert!(&opt <= spec.reference("opt_ref").unwrap());
    }

    // ───────────────────────── sidecar ─────────────────────────

    #[test]
    fn sidecar_json_carries_params_and_references() {
        let spec = gen_hidden_chain(5, 3).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(doc["family"], "hidden_chain");
        assert_eq!(doc["params"][0][0], "n");
        assert_eq!(doc["params"][0][1], 5);
        assert_eq!(doc["references"][0][0], "opt");
        assert_eq!(doc["references"][0][1], "2/1");
    }
}

//! Sweep execution: spec → cells → result rows → CSV.
//!
//! A cell is one (instance, policy, noise level, seed) combination. Cells
//! are independent jobs over immutable inputs, executed on a bounded rayon
//! pool (size from `PRECSCHED_WORKERS`, default all cores); the output
//! order is the spec's coordinate order regardless of execution order, so
//! re-running an identical spec reproduces the CSV byte for byte apart from
//! the wall-time column. A failed cell becomes an error row, never an
//! aborted sweep — with one exception: an exact oracle reporting ALG < OPT
//! is a bug in the software, and the whole run refuses to emit data.

use std::time::Instant;

use precsched::engine::{min_rho_witness, simulate, Trace};
use precsched::instance::{Instance, TopologyClass};
use precsched::oracle::{opt_brute_force, opt_chain_exact, preemptive_lower_bound};
use precsched::policy::order_adaptive;
use precsched::prediction::{
    distortion_error, eta_inversions, ground_truth, l_eps_error, lambda_error, perturb,
    ErrorReport, Model, Payload, PredictionBundle,
};
use precsched::rational::{decimal_string, format_rat, Rat};
use precsched::{JobId, Policy};
use rayon::prelude::*;

use crate::error::CliError;
use crate::registry;
use crate::spec::{ExperimentSpec, NoiseLevelSpec, OracleChoice, PolicySpec, SourceSpec};

/// One line of results: every spec coordinate plus the measured values.
/// Exact values live here as rationals; CSV rendering adds decimal columns.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub spec_name: String,
    pub source: String,
    pub instance: String,
    pub n: usize,
    pub m: usize,
    pub policy: String,
    pub model: String,
    pub noise: String,
    pub seed: u64,
    /// `ok`, or `error: …` for a failed cell.
    pub status: String,
    pub alg: Option<Rat>,
    pub opt: Option<Rat>,
    /// `exact` when the baseline is a true optimum, `upper_bound` for the
    /// nonpreemptive brute force at m > 1, empty without a baseline.
    pub opt_kind: &'static str,
    /// The m > 1 preemptive lower bound max{chain bound, OPT₁/m}.
    pub lower_bound: Option<Rat>,
    pub ratio: Option<Rat>,
    /// Packed `name=value` error measures, `;`-separated.
    pub errors: String,
    pub rho_star: String,
    pub wall_ms: u128,
}

struct Cell<'a> {
    spec: &'a ExperimentSpec,
    source: &'a str,
    instance_label: &'a str,
    instance: &'a Instance,
    policy: &'a PolicySpec,
    noise: Option<&'a NoiseLevelSpec>,
    seed: u64,
    master: u64,
}

enum CellFailure {
    /// Recorded in the row's status column; the sweep continues.
    Row(String),
    /// Aborts the whole run (sanity violation).
    Fatal(CliError),
}

fn row_err(e: impl std::fmt::Display) -> CellFailure {
    CellFailure::Row(e.to_string())
}

/// Instance labels and payloads for a source. Random sources draw `count`
/// instances with generation seeds `master + index`.
fn materialize(
    source: &SourceSpec,
    master: u64,
) -> Result<Vec<(String, Instance)>, CliError> {
    match source {
        SourceSpec::File { path } => {
            let text = std::fs::read_to_string(path)?;
            let inst = Instance::from_json(&text).map_err(|e| CliError::Data(e.to_string()))?;
            Ok(vec![(path.clone(), inst)])
        }
        SourceSpec::Family { family, params } => {
            let fam = registry::build_family(family, params)?;
            let args: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            Ok(vec![(format!("{family}({})", args.join(",")), fam.instance)])
        }
        SourceSpec::Random { spec, count } => (0..*count)
            .map(|i| {
                let inst = precsched::random::generate(spec, master.wrapping_add(i as u64))?;
                Ok((format!("random[{i}]"), inst))
            })
            .collect(),
    }
}

fn source_label(source: &SourceSpec) -> String {
    match source {
        SourceSpec::File { path } => format!("file:{path}"),
        SourceSpec::Family { family, .. } => format!("family:{family}"),
        SourceSpec::Random { spec, count } => {
            format!("random:{:?}x{count}", spec.model).to_lowercase()
        }
    }
}

/// Runs the whole sweep. Deterministic for fixed (spec, master seed):
/// row order is (instance, policy, noise, seed) in spec order.
pub fn execute(spec: &ExperimentSpec, master: u64) -> Result<Vec<ResultRow>, CliError> {
    spec.validate()?;
    let instances = materialize(&spec.source, master)?;
    let source = source_label(&spec.source);
    let noise_levels: Vec<Option<&NoiseLevelSpec>> = match &spec.prediction {
        None => vec![None],
        Some(p) => p.noise.iter().map(Some).collect(),
    };
    let mut cells = Vec::new();
    for (label, inst) in &instances {
        for policy in &spec.policies {
            for noise in &noise_levels {
                for &seed in &spec.seeds {
                    cells.push(Cell {
                        spec,
                        source: &source,
                        instance_label: label,
                        instance: inst,
                        policy,
                        noise: *noise,
                        seed,
                        master,
                    });
                }
            }
        }
    }
    let workers = std::env::var("PRECSCHED_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    pool.install(|| cells.par_iter().map(run_cell).collect())
}

fn run_cell(cell: &Cell) -> Result<ResultRow, CliError> {
    let start = Instant::now();
    let mut row = ResultRow {
        spec_name: cell.spec.name.clone(),
        source: cell.source.to_string(),
        instance: cell.instance_label.to_string(),
        n: cell.instance.len(),
        m: cell.spec.m,
        policy: cell.policy.name.clone(),
        model: cell.spec.prediction.as_ref().map(|p| p.model.as_str().to_string()).unwrap_or_default(),
        noise: cell.noise.map(|n| n.label()).unwrap_or_default(),
        seed: cell.seed,
        status: "ok".into(),
        alg: None,
        opt: None,
        opt_kind: "",
        lower_bound: None,
        ratio: None,
        errors: String::new(),
        rho_star: String::new(),
        wall_ms: 0,
    };
    match run_cell_inner(cell, &mut row) {
        Ok(()) => {}
        Err(CellFailure::Row(msg)) => row.status = format!("error: {msg}"),
        Err(CellFailure::Fatal(e)) => return Err(e),
    }
    row.wall_ms = start.elapsed().as_millis();
    Ok(row)
}

fn run_cell_inner(cell: &Cell, row: &mut ResultRow) -> Result<(), CellFailure> {
    let inst = cell.instance;

    let bundle: Option<PredictionBundle> = match (&cell.spec.prediction, cell.noise) {
        (Some(pred), Some(level)) => {
            let truth = ground_truth(inst, pred.model).map_err(row_err)?;
            let bundle = match level.to_noise().map_err(row_err)? {
                None => truth,
                Some(noise) => perturb(&truth, &noise, cell.seed.wrapping_add(cell.master))
                    .map_err(row_err)?,
            };
            Some(bundle)
        }
        _ => None,
    };
    let payload = bundle.as_ref().map(|b| &b.payload);

    // The adaptive-order policy is run concretely so its query history is
    // available for the order error measure; everything else goes through
    // the registry as a boxed policy.
    let (result, trace, history): (_, _, Option<Vec<(Rat, Vec<JobId>)>>) =
        if cell.policy.name == "order_adaptive" {
            let sigma = match payload {
                Some(Payload::Order(s)) => s.clone(),
                _ => return Err(CellFailure::Row("order payload missing".into())),
            };
            let mut concrete = order_adaptive(&sigma);
            let (result, trace) = simulate(inst, &mut concrete, cell.spec.m).map_err(row_err)?;
            row.policy = concrete.name();
            let history = concrete.history().to_vec();
            (result, trace, Some(history))
        } else {
            let mut policy = registry::build_policy(cell.policy, payload).map_err(row_err)?;
            let (result, trace) = simulate(inst, policy.as_mut(), cell.spec.m).map_err(row_err)?;
            row.policy = policy.name();
            (result, trace, None)
        };
    row.alg = Some(result.objective.clone());
    row.rho_star = match min_rho_witness(&trace, inst) {
        Ok(rho) => rho.to_string(),
        Err(_) => String::new(),
    };

    if let Some((opt, kind)) = compute_opt(cell.spec.oracle, inst, cell.spec.m).map_err(CellFailure::Row)? {
        row.opt = Some(opt.clone());
        row.opt_kind = kind;
        if opt > Rat::from_integer(0.into()) {
            let ratio = &result.objective / &opt;
            if kind == "exact" && ratio < Rat::from_integer(1.into()) {
                return Err(CellFailure::Fatal(CliError::Sanity(format!(
                    "ALG {} below exact OPT {} on instance '{}' with policy '{}'",
                    format_rat(&result.objective),
                    format_rat(&opt),
                    row.instance,
                    row.policy,
                ))));
            }
            row.ratio = Some(ratio);
        }
    }
    if cell.spec.m > 1 {
        row.lower_bound = preemptive_lower_bound(inst, cell.spec.m).ok();
    }

    if let (Some(pred), Some(bundle)) = (&cell.spec.prediction, &bundle) {
        row.errors = match measure_errors(pred.model, &pred.epsilon, bundle, inst, &trace, history.as_deref()) {
            Ok(packed) => packed,
            Err(msg) => format!("measure_error={msg}"),
        };
    }
    Ok(())
}

fn compute_opt(
    choice: OracleChoice,
    inst: &Instance,
    m: usize,
) -> Result<Option<(Rat, &'static str)>, String> {
    let exact = |r: precsched::oracle::OptResult| Some((r.objective, "exact"));
    match choice {
        OracleChoice::None => Ok(None),
        OracleChoice::ChainExact => opt_chain_exact(inst).map(exact).map_err(|e| e.to_string()),
        OracleChoice::BruteForce => opt_brute_force(inst, m)
            .map(|r| Some((r.objective, if m == 1 { "exact" } else { "upper_bound" })))
            .map_err(|e| e.to_string()),
        OracleChoice::Auto => {
            if m == 1 {
                if inst.classify_topology().class == TopologyClass::Chains {
                    opt_chain_exact(inst).map(exact).map_err(|e| e.to_string())
                } else if inst.len() <= 12 {
                    opt_brute_force(inst, 1).map(exact).map_err(|e| e.to_string())
                } else {
                    Ok(None)
                }
            } else if m == 2 && inst.len() <= 8 {
                opt_brute_force(inst, 2)
                    .map(|r| Some((r.objective, "upper_bound")))
                    .map_err(|e| e.to_string())
            } else {
                Ok(None)
            }
        }
    }
}

fn pack_report(report: ErrorReport) -> String {
    report
        .values
        .iter()
        .map(|(name, value)| format!("{name}={value}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn measure_errors(
    model: Model,
    epsilon: &Rat,
    bundle: &PredictionBundle,
    inst: &Instance,
    trace: &Trace,
    history: Option<&[(Rat, Vec<JobId>)]>,
) -> Result<String, String> {
    let report = match (&bundle.payload, model) {
        (Payload::Order(sigma), Model::ActionsStatic | Model::ActionsAdaptive) => {
            Some(eta_inversions(inst, sigma).map_err(|e| e.to_string())?)
        }
        (Payload::Order(_), Model::StaticOrder | Model::AdaptiveOrder) => match history {
            Some(h) => Some(l_eps_error(trace, h, inst, epsilon).map_err(|e| e.to_string())?),
            None => None,
        },
        (Payload::Weights(table), Model::AdaptiveWeights) => Some(distortion_error(inst, table)),
        (Payload::Instance(predicted), Model::Input) => {
            Some(lambda_error(predicted, inst).map_err(|e| e.to_string())?)
        }
        _ => None,
    };
    Ok(report.map(pack_report).unwrap_or_default())
}

/// Column order of the results CSV.
pub const CSV_COLUMNS: [&str; 21] = [
    "spec", "source", "instance", "n", "m", "policy", "model", "noise", "seed", "status", "alg",
    "alg_dec", "opt", "opt_dec", "opt_kind", "lower_bound", "ratio", "ratio_dec", "errors",
    "rho_star", "wall_ms",
];

/// Renders rows as CSV: exact rationals as `num/den` plus decimal columns
/// at the given precision. Empty input yields a header-only document.
pub fn write_csv(rows: &[ResultRow], precision: usize) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(CSV_COLUMNS).expect("in-memory write");
    for row in rows {
        let fmt = |o: &Option<Rat>| o.as_ref().map(format_rat).unwrap_or_default();
        let dec = |o: &Option<Rat>| {
            o.as_ref().map(|r| decimal_string(r, precision)).unwrap_or_default()
        };
        wtr.write_record([
            row.spec_name.as_str(),
            &row.source,
            &row.instance,
            &row.n.to_string(),
            &row.m.to_string(),
            &row.policy,
            &row.model,
            &row.noise,
            &row.seed.to_string(),
            &row.status,
            &fmt(&row.alg),
            &dec(&row.alg),
            &fmt(&row.opt),
            &dec(&row.opt),
            row.opt_kind,
            &fmt(&row.lower_bound),
            &fmt(&row.ratio),
            &dec(&row.ratio),
            &row.errors,
            &row.rho_star,
            &row.wall_ms.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Drops the wall-time column — the one column excluded from determinism
/// comparisons.
pub fn csv_without_wall(text: &str) -> String {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for record in rdr.records() {
        let record = record.expect("valid csv");
        let kept: Vec<&str> = record.iter().take(record.len().saturating_sub(1)).collect();
        wtr.write_record(kept).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

// ───────────────────────── tests ─────────────────────────

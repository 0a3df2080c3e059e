//! `precsched` — experiment harness binary.
//!
//! Subcommands: `gen` (instances and predictions), `opt` (exact baselines),
//! `run` (spec-driven sweeps to CSV), `eval` (error measures), `report`
//! (group summaries). Failures print `{"error": {"kind", "message"}}` on
//! stderr and exit nonzero.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use precsched::instance::Instance;
use precsched::oracle::{opt_brute_force, opt_chain_exact, preemptive_lower_bound};
use precsched::prediction::{ground_truth, Model, Payload, PredictionBundle};
use precsched::rational::{decimal_string, format_rat, parse_rat, Rat};
use precsched::simulate;

use precsched_cli::error::CliError;
use precsched_cli::registry;
use precsched_cli::report::summarize;
use precsched_cli::run::{execute, write_csv};
use precsched_cli::spec::{ExperimentSpec, NoiseLevelSpec};

#[derive(Parser)]
#[command(name = "precsched", version, about = "Exact scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate instances or prediction bundles.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
    },
    /// Compute an exact baseline for an instance.
    Opt(OptArgs),
    /// Run an experiment spec and write result rows as CSV.
    Run(RunArgs),
    /// Compute prediction error measures for an instance + bundle.
    Eval(EvalArgs),
    /// Summarize a results CSV by group.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum GenCmd {
    /// A family instance (with reference sidecar) or a random draw.
    Instance(GenInstanceArgs),
    /// A prediction bundle: ground truth, optionally perturbed.
    Prediction(GenPredictionArgs),
}

#[derive(Args)]
struct GenInstanceArgs {
    /// Family name (hidden_chain, outtree_static, intree, average_lb,
    /// static_order_lb). Mutually exclusive with --model.
    #[arg(long, conflicts_with = "model")]
    family: Option<String>,
    /// Family parameters as k=v pairs, e.g. --params n=101,h=100.
    #[arg(long, value_delimiter = ',')]
    params: Vec<String>,
    /// Random model (chains, out_forest, general).
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the instance JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sidecar path for family reference values (defaults to
    /// `<out>.refs.json` when --out is given).
    #[arg(long)]
    refs: Option<PathBuf>,
}

#[derive(Args)]
struct GenPredictionArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Prediction model name (static_weights, adaptive_weights,
    /// static_order, adaptive_order, averages, actions_static,
    /// actions_adaptive, input).
    #[arg(long)]
    model: String,
    /// Noise kind (none, weight_factor, adjacent_swaps, input_noise).
    #[arg(long, default_value = "none")]
    noise: String,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    grid: Option<u32>,
    #[arg(long)]
    swaps: Option<u32>,
    #[arg(long)]
    len_delta: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(short, long, default_value_t = 1)]
    m: usize,
    /// auto, chain_exact, or brute_force.
    #[arg(long, default_value = "auto")]
    oracle: String,
    #[arg(long, default_value_t = 6)]
    precision: usize,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed: offsets instance generation and perturbation seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    precision: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// The actual instance.
    #[arg(long)]
    instance: PathBuf,
    /// A prediction bundle JSON file.
    #[arg(long)]
    prediction: PathBuf,
    /// Threshold for the order error measure, as a rational.
    #[arg(long, default_value = "1/10")]
    epsilon: String,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    rows: PathBuf,
    /// Comma-separated column names to group by.
    #[arg(long, default_value = "policy,noise", value_delimiter = ',')]
    group_by: Vec<String>,
    #[arg(long, default_value_t = 4)]
    precision: usize,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            eprintln!("{}", json!({"error": {"kind": "usage", "message": e.to_string()}}));
            std::process::exit(2);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Gen { what } => match what {
            GenCmd::Instance(args) => gen_instance(args),
            GenCmd::Prediction(args) => gen_prediction(args),
        },
        Cmd::Opt(args) => opt_cmd(args),
        Cmd::Run(args) => run_cmd(args),
        Cmd::Eval(args) => eval_cmd(args),
        Cmd::Report(args) => report_cmd(args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path)?;
    Instance::from_json(&text).map_err(|e| CliError::Data(e.to_string()))
}

fn parse_kv_params(pairs: &[String]) -> Result<BTreeMap<String, i64>, CliError> {
    let mut params = BTreeMap::new();
    for pair in pairs {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::InvalidSpec(format!("parameter '{pair}' is not of the form k=v"))
        })?;
        let value: i64 = value.parse().map_err(|_| {
            CliError::InvalidSpec(format!("parameter '{pair}' has a non-integer value"))
        })?;
        params.insert(key.to_string(), value);
    }
    Ok(params)
}

fn gen_instance(args: GenInstanceArgs) -> Result<(), CliError> {
    match (&args.family, &args.model) {
        (Some(family), None) => {
            let params = parse_kv_params(&args.params)?;
            let fam = registry::build_family(family, &params)?;
            emit(args.out.as_deref(), &fam.instance.to_json())?;
            let refs_path = args.refs.clone().or_else(|| {
                args.out.as_ref().map(|out| {
                    let mut name = out.file_stem().unwrap_or_default().to_os_string();
                    name.push(".refs.json");
                    out.with_file_name(name)
                })
            });
            match refs_path {
                Some(path) => std::fs::write(path, fam.to_json())?,
                None => emit(None, &fam.to_json())?,
            }
            Ok(())
        }
        (None, Some(model)) => {
            let spec_json = json!({"model": model, "n_max": args.n_max});
            let spec: precsched::random::RandomSpec = serde_json::from_value(spec_json)
                .map_err(|e| CliError::InvalidSpec(format!("bad random model: {e}")))?;
            let inst = precsched::random::generate(&spec, args.seed)?;
            emit(args.out.as_deref(), &inst.to_json())
        }
        _ => Err(CliError::InvalidSpec(
            "gen instance needs exactly one of --family or --model".into(),
        )),
    }
}

fn gen_prediction(args: GenPredictionArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let model = Model::parse(&args.model)
        .ok_or_else(|| CliError::InvalidSpec(format!("unknown prediction model '{}'", args.model)))?;
    let beta = match &args.beta {
        Some(text) => Some(parse_rat(text).map_err(|e| CliError::Data(e.to_string()))?),
        None => None,
    };
    let level = NoiseLevelSpec {
        kind: args.noise.clone(),
        beta,
        grid: args.grid,
        swaps: args.swaps,
        len_delta: args.len_delta,
    };
    let truth = ground_truth(&inst, model).map_err(|e| CliError::Data(e.to_string()))?;
    let bundle = match level.to_noise()? {
        None => truth,
        Some(noise) => precsched::prediction::perturb(&truth, &noise, args.seed)
            .map_err(|e| CliError::Data(e.to_string()))?,
    };
    emit(args.out.as_deref(), &bundle.to_json())
}

fn opt_cmd(args: OptArgs) -> Result<(), CliError> {
    let inst = read_instance(&args.instance)?;
    let result = match args.oracle.as_str() {
        "chain_exact" => opt_chain_exact(&inst),
        "brute_force" => opt_brute_force(&inst, args.m),
        "auto" => {
            use precsched::instance::TopologyClass;
            if args.m == 1 && inst.classify_topology().class == TopologyClass::Chains {
                opt_chain_exact(&inst)
            } else {
                opt_brute_force(&inst, args.m)
            }
        }
        other => return Err(CliError::InvalidSpec(format!("unknown oracle '{other}'"))),
    }
    .map_err(|e| CliError::Data(e.to_string()))?;
    let mut doc = json!({
        "objective": format_rat(&result.objective),
        "objective_decimal": decimal_string(&result.objective, args.precision),
        "order": result.order,
        "solver": result.solver,
    });
    if args.m > 1 {
        if let Ok(bound) = preemptive_lower_bound(&inst, args.m) {
            doc["lower_bound"] = json!(format_rat(&bound));
        }
    }
    emit(None, &serde_json::to_string_pretty(&doc).expect("json"))
}

fn run_cmd(args: RunArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec)?;
    let spec = ExperimentSpec::from_json(&text)?;
    let rows = execute(&spec, args.seed)?;
    emit(args.out.as_deref(), &write_csv(&rows, args.precision))
}

fn eval_cmd(args: EvalArgs) -> Result<(), CliError> {
    use precsched::prediction::{
        distortion_error, eta_inversions, l_eps_error, lambda_error, ErrorReport,
    };
    let inst = read_instance(&args.instance)?;
    let text = std::fs::read_to_string(&args.prediction)?;
    let bundle = PredictionBundle::from_json(&text).map_err(|e| CliError::Data(e.to_string()))?;
    let epsilon = parse_rat(&args.epsilon).map_err(|e| CliError::Data(e.to_string()))?;
    if epsilon <= Rat::from_integer(0.into()) {
        return Err(CliError::InvalidSpec("epsilon must be positive".into()));
    }
    let data = |e: &dyn std::fmt::Display| CliError::Data(e.to_string());
    let report: ErrorReport = match (&bundle.payload, bundle.model) {
        (Payload::Order(sigma), Model::ActionsStatic | Model::ActionsAdaptive) => {
            eta_inversions(&inst, sigma).map_err(|e| data(&e))?
        }
        (Payload::Order(sigma), Model::StaticOrder | Model::AdaptiveOrder) => {
            // The order error is defined against the fronts an adaptive-order
            // run actually sees, so evaluate by running that policy.
            let mut policy = precsched::policy::order_adaptive(sigma);
            let (_, trace) = simulate(&inst, &mut policy, 1).map_err(|e| data(&e))?;
            l_eps_error(&trace, policy.history(), &inst, &epsilon).map_err(|e| data(&e))?
        }
        (Payload::Weights(table), Model::AdaptiveWeights) => distortion_error(&inst, table),
        (Payload::Instance(predicted), Model::Input) => {
            lambda_error(predicted, &inst).map_err(|e| data(&e))?
        }
        (_, model) => {
            return Err(CliError::InvalidSpec(format!(
                "no error measure defined for model '{}'",
                model.as_str()
            )));
        }
    };
    let doc = json!({
        "model": report.model,
        "values": report.values.iter().map(|(k, v)| json!([k, v.to_string()])).collect::<Vec<_>>(),
        "parameters": report.parameters.iter().map(|(k, v)| json!([k, format_rat(v)])).collect::<Vec<_>>(),
    });
    emit(None, &serde_json::to_string_pretty(&doc).expect("json"))
}

fn report_cmd(args: ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.rows)?;
    emit(None, &summarize(&text, &args.group_by, args.precision)?)
}

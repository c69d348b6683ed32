//! Command-line driver: simulate, infer, evaluate, predict.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gchmm::bgem::{run_bgem, BgemConfig, BgemLink};
use gchmm::data::{
    load_covariates, load_network, load_symptoms, probe_contact_file, probe_symptom_file,
    BetaHyperParams, DynamicNetwork,
};
use gchmm::error::Error as GchmmError;
use gchmm::eval::{classify, metrics, one_step_ahead_accuracy, Metrics};
use gchmm::gbw::{run_gbw, GbwOptions, GbwParams};
use gchmm::gibbs::{run_gibbs, GibbsConfig, ParamUpdate};
use gchmm::io;
use gchmm::sim::{
    mask_missing_seeded, simulate, two_level_theta, BetaInterpretation, InfectionParams,
    LinkCoefficients, ParamSource, SimConfig,
};

#[derive(Parser)]
#[command(
    name = "gchmm",
    about = "SIS epidemic simulation and inference over dynamic contact networks",
    version
)]
struct Cli {
    /// JSON file supplying default flag values for the subcommand
    /// (precedence: command line > config > built-in default).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-simulate hidden states and symptom reports over a network.
    Simulate(SimulateArgs),
    /// Infer hidden states (and parameters) from symptom reports.
    Infer(InferArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// One-step-ahead symptom forecasting from filtered beliefs.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BetaInterpArg {
    Receive,
    Transmit,
}

impl From<BetaInterpArg> for BetaInterpretation {
    fn from(v: BetaInterpArg) -> Self {
        match v {
            BetaInterpArg::Receive => BetaInterpretation::Receive,
            BetaInterpArg::Transmit => BetaInterpretation::Transmit,
        }
    }
}

#[derive(Args)]
struct DimsArgs {
    /// Number of people; inferred from the input files when omitted.
    #[arg(long)]
    people: Option<usize>,
    /// Number of tracked days; inferred when omitted.
    #[arg(long)]
    days: Option<usize>,
    /// Number of symptoms; inferred when omitted.
    #[arg(long)]
    symptoms: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Contact file: day,node_i,node_j[,duration_minutes].
    #[arg(long)]
    network: PathBuf,
    /// Minimum accumulated daily contact duration for an edge.
    #[arg(long, default_value_t = 10.0)]
    duration_threshold: f64,
    /// Fixed ground-truth parameters (JSON). Mutually exclusive with --eta.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Link coefficients JSON; parameters are generated from covariates.
    #[arg(long)]
    eta: Option<PathBuf>,
    /// Covariate file, required with --eta.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Initial infection rate when simulating through a link.
    #[arg(long, default_value_t = 0.15)]
    pi: f64,
    /// Susceptible-state symptom rate when simulating through a link.
    #[arg(long, default_value_t = 0.05)]
    theta0: f64,
    /// Infected-state symptom rate when simulating through a link.
    #[arg(long, default_value_t = 0.75)]
    theta1: f64,
    #[arg(long, value_enum, default_value = "receive")]
    beta_interp: BetaInterpArg,
    /// Probability of masking each observation as missing.
    #[arg(long, default_value_t = 0.0)]
    p_miss: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    dims: DimsArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InferMethod {
    Gbw,
    Gibbs,
    Bgem,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LinkArg {
    Sigmoid,
    BetaExp,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long, value_enum)]
    method: InferMethod,
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    duration_threshold: f64,
    /// Symptom report file: node,day,symptom,value.
    #[arg(long)]
    symptoms_file: PathBuf,
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Freeze parameters at these values (JSON); skips estimation.
    #[arg(long)]
    known_params: Option<PathBuf>,
    /// Total Gibbs sweeps (gibbs).
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    /// Sweeps discarded before averaging; default half (gibbs) or half
    /// the per-E-step samples (bgem).
    #[arg(long)]
    burnin: Option<usize>,
    /// Keep every k-th post-burn-in draw (gibbs).
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Outer EM iterations (gbw default 15, bgem default 10).
    #[arg(long)]
    em_iters: Option<usize>,
    /// Gibbs sweeps per E-step (bgem).
    #[arg(long, default_value_t = 50)]
    samples: usize,
    /// Sum-product sweeps per E-step (gbw).
    #[arg(long, default_value_t = 50)]
    sweeps: usize,
    /// Neutral initialization rate for gbw.
    #[arg(long, default_value_t = 0.1)]
    init_rate: f64,
    #[arg(long, value_enum, default_value = "sigmoid")]
    link: LinkArg,
    #[arg(long, value_enum, default_value = "receive")]
    beta_interp: BetaInterpArg,
    /// Replace the E-step sample average with the majority-vote
    /// pseudo-sample (bgem).
    #[arg(long, default_value_t = false)]
    fast_binary: bool,
    /// Estimate per-person rates with flat priors (gibbs).
    #[arg(long, default_value_t = false)]
    heterogeneous: bool,
    /// Replace the covariate features with their top principal
    /// components (standardized) before fitting.
    #[arg(long)]
    pca: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    dims: DimsArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth states CSV.
    #[arg(long)]
    truth_x: PathBuf,
    /// Predicted hard states CSV. Mutually exclusive with --pred-marginals.
    #[arg(long)]
    pred_x: Option<PathBuf>,
    /// Predicted probabilities CSV, thresholded at --threshold.
    #[arg(long)]
    pred_marginals: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Ground-truth parameters JSON (enables error norms).
    #[arg(long)]
    truth_params: Option<PathBuf>,
    /// Estimated parameters JSON.
    #[arg(long)]
    pred_params: Option<PathBuf>,
    /// Write metrics JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    duration_threshold: f64,
    #[arg(long)]
    symptoms_file: PathBuf,
    #[arg(long)]
    params: PathBuf,
    #[arg(long, value_enum, default_value = "receive")]
    beta_interp: BetaInterpArg,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    dims: DimsArgs,
}

fn main() -> ExitCode {
    let argv = match merge_config_args(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                GchmmError::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

/// Splice config-file entries into argv as flags, after the subcommand,
/// skipping any flag already given on the command line. The seed falls
/// back to the GCHMM_SEED environment variable.
fn merge_config_args(mut argv: Vec<String>) -> Result<Vec<String>, GchmmError> {
    let config_path = argv
        .iter()
        .position(|a| a == "--config")
        .and_then(|i| argv.get(i + 1).cloned());
    let subcommand_pos = argv
        .iter()
        .skip(1)
        .position(|a| ["simulate", "infer", "evaluate", "predict"].contains(&a.as_str()))
        .map(|i| i + 1);
    let Some(sub_pos) = subcommand_pos else {
        return Ok(argv);
    };

    let mut extra = Vec::new();
    if let Some(path) = config_path {
        let text = std::fs::read_to_string(&path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| GchmmError::parse(0, format!("config JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| GchmmError::parse(0, "config must be a JSON object"))?;
        for (key, v) in obj {
            let flag = format!("--{key}");
            if argv.contains(&flag) {
                continue; // command line wins
            }
            match v {
                serde_json::Value::Bool(true) => extra.push(flag),
                serde_json::Value::Bool(false) => {}
                serde_json::Value::String(s) => {
                    extra.push(flag);
                    extra.push(s.clone());
                }
                other => {
                    extra.push(flag);
                    extra.push(other.to_string());
                }
            }
        }
    }
    if !argv.contains(&"--seed".to_string()) && !extra.contains(&"--seed".to_string()) {
        if let Ok(seed) = std::env::var("GCHMM_SEED") {
            extra.push("--seed".to_string());
            extra.push(seed);
        }
    }
    let tail = argv.split_off(sub_pos + 1);
    argv.extend(extra);
    argv.extend(tail);
    Ok(argv)
}

/// Resolve (N, T) from flags or a scan of the contact file.
fn load_network_checked(
    path: &Path,
    threshold: f64,
    people: Option<usize>,
    days: Option<usize>,
) -> Result<DynamicNetwork, GchmmError> {
    let (probe_n, probe_t) = probe_contact_file(path)?;
    let n = people.unwrap_or(probe_n);
    let t = days.unwrap_or(probe_t);
    if n == 0 || t == 0 {
        return Err(GchmmError::domain(
            "could not infer dimensions; pass --people and --days",
        ));
    }
    load_network(path, threshold, n, t)
}

fn read_eta(path: &Path) -> Result<LinkCoefficients, GchmmError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| GchmmError::parse(0, format!("eta JSON: {e}")))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), GchmmError> {
    let network = load_network_checked(
        &args.network,
        args.duration_threshold,
        args.dims.people,
        args.dims.days,
    )?;
    let seed = args.seed.unwrap_or(0);

    let covariates = match &args.covariates {
        Some(path) => Some(load_covariates(path, network.n_people())?),
        None => None,
    };
    let (source, n_symptoms) = match (&args.params, &args.eta) {
        (Some(path), None) => {
            let params = io::read_params(path)?;
            let s = params.n_symptoms();
            (ParamSource::Fixed(params), s)
        }
        (None, Some(path)) => {
            let eta = read_eta(path)?;
            let s = args.dims.symptoms.unwrap_or(6);
            (
                ParamSource::Link {
                    eta,
                    pi: args.pi,
                    theta: two_level_theta(s, args.theta0, args.theta1),
                },
                s,
            )
        }
        _ => {
            return Err(GchmmError::domain(
                "simulate needs exactly one of --params or --eta",
            ))
        }
    };

    let config = SimConfig {
        beta_interp: args.beta_interp.into(),
        p_miss: args.p_miss,
        seed,
    };
    let out = simulate(&network, covariates.as_ref(), &source, &config, n_symptoms)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let observed = if args.p_miss > 0.0 {
        mask_missing_seeded(&out.symptoms, args.p_miss, seed)?
    } else {
        out.symptoms.clone()
    };

    std::fs::create_dir_all(&args.out_dir)?;
    io::write_states(args.out_dir.join("states.csv"), &out.states)?;
    io::write_symptoms(args.out_dir.join("symptoms.csv"), &observed)?;
    io::write_params(args.out_dir.join("params.json"), &out.params)?;
    io::write_id_mapping(args.out_dir.join("mapping.csv"), network.n_people())?;
    Ok(())
}

fn resolve_symptom_count(args: &DimsArgs, path: &Path) -> Result<usize, GchmmError> {
    if let Some(s) = args.symptoms {
        return Ok(s);
    }
    let (_, _, s) = probe_symptom_file(path)?;
    if s == 0 {
        return Err(GchmmError::domain(
            "could not infer the symptom count; pass --symptoms",
        ));
    }
    Ok(s)
}

fn cmd_infer(args: InferArgs) -> Result<(), GchmmError> {
    let network = load_network_checked(
        &args.network,
        args.duration_threshold,
        args.dims.people,
        args.dims.days,
    )?;
    let s_count = resolve_symptom_count(&args.dims, &args.symptoms_file)?;
    let symptoms = load_symptoms(
        &args.symptoms_file,
        network.n_people(),
        network.n_days(),
        s_count,
    )?;
    let seed = args.seed.unwrap_or(0);
    std::fs::create_dir_all(&args.out_dir)?;
    io::write_id_mapping(args.out_dir.join("mapping.csv"), network.n_people())?;

    let load_design = |path: &PathBuf| -> Result<gchmm::data::CovariateMatrix, GchmmError> {
        let z = load_covariates(path, network.n_people())?;
        match args.pca {
            Some(components) => {
                let pca = gchmm::data::pca_reduce(&z, components, true)?;
                let explained: f64 = pca.explained_variance_ratio.iter().sum();
                eprintln!(
                    "pca: kept {components} components explaining {:.1}% of the variance",
                    100.0 * explained
                );
                Ok(pca.reduced)
            }
            None => Ok(z),
        }
    };

    match args.method {
        InferMethod::Gbw => {
            let (init, known) = match &args.known_params {
                Some(path) => {
                    let p = io::read_params(path)?;
                    let init = GbwParams {
                        pi: p.pi,
                        gamma: p.gamma[0],
                        alpha: p.alpha[0],
                        beta: p.beta[0],
                        theta: p.theta.clone(),
                    };
                    (init, true)
                }
                None => (GbwParams::neutral(s_count, args.init_rate), false),
            };
            let options = GbwOptions {
                max_iters: args.em_iters.unwrap_or(15),
                known_params: known,
                bp: gchmm::bp::BpOptions {
                    max_sweeps: args.sweeps,
                    ..Default::default()
                },
                ..Default::default()
            };
            let res = run_gbw(&network, &symptoms, init, &options)?;
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            io::write_marginals(args.out_dir.join("marginals.csv"), &res.p_infected)?;
            io::write_states(args.out_dir.join("states.csv"), &res.hard_states)?;
            let params = res.params.broadcast(network.n_people())?;
            io::write_params(args.out_dir.join("params.json"), &params)?;
        }
        InferMethod::Gibbs => {
            let covariates = match &args.covariates {
                Some(path) => Some(load_covariates(path, network.n_people())?),
                None => None,
            };
            // Flat rate priors; the emission priors lean the infected
            // state toward symptom onset so the labeling is pinned.
            let hyper = BetaHyperParams {
                theta0: (1.0, 3.0),
                theta1: (3.0, 1.0),
                ..BetaHyperParams::flat()
            };
            let update = match (&args.known_params, args.heterogeneous) {
                (Some(path), _) => ParamUpdate::Fixed(io::read_params(path)?),
                (None, true) => {
                    let z = covariates
                        .as_ref()
                        .ok_or_else(|| GchmmError::domain("--heterogeneous needs --covariates"))?;
                    ParamUpdate::Heterogeneous {
                        eta: LinkCoefficients::zero_beta_exp(z.dim()),
                        hyper,
                    }
                }
                (None, false) => ParamUpdate::Homogeneous(hyper),
            };
            let config = GibbsConfig {
                iterations: args.iterations,
                burn_in: args.burnin,
                thin: args.thin,
                beta_interp: args.beta_interp.into(),
                seed,
                ..Default::default()
            };
            let trace = run_gibbs(&network, &symptoms, covariates.as_ref(), update, &config)?;
            io::write_marginals(args.out_dir.join("marginals.csv"), &trace.mean_infected)?;
            let classified = classify(&trace.mean_infected, 0.5)?;
            io::write_states(args.out_dir.join("states.csv"), &classified)?;
            let mean_params = InfectionParams::new(
                trace.mean_gamma.clone(),
                trace.mean_alpha.clone(),
                trace.mean_beta.clone(),
                trace.mean_pi,
                trace.mean_theta.clone(),
            )?;
            io::write_params(args.out_dir.join("params.json"), &mean_params)?;
            io::write_param_draws(args.out_dir.join("param_draws.jsonl"), &trace.param_draws)?;
        }
        InferMethod::Bgem => {
            let z_path = args
                .covariates
                .as_ref()
                .ok_or_else(|| GchmmError::domain("bgem needs --covariates"))?;
            let covariates = load_covariates(z_path, network.n_people())?;
            let config = BgemConfig {
                link: match args.link {
                    LinkArg::Sigmoid => BgemLink::Sigmoid,
                    LinkArg::BetaExp => BgemLink::BetaExp,
                },
                beta_interp: args.beta_interp.into(),
                samples_per_estep: args.samples,
                burn_in: args.burnin.unwrap_or(args.samples / 2),
                max_em_iters: args.em_iters.unwrap_or(10),
                fast_binary: args.fast_binary,
                seed,
                ..Default::default()
            };
            let res = run_bgem(&network, &symptoms, &covariates, &config)?;
            for w in &res.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            io::write_eta(args.out_dir.join("eta.json"), &res.eta, None)?;
            io::write_marginals(args.out_dir.join("marginals.csv"), &res.mean_infected)?;
            let classified = classify(&res.mean_infected, 0.5)?;
            io::write_states(args.out_dir.join("states.csv"), &classified)?;
            let rates = serde_json::json!({
                "gamma": res.gamma,
                "alpha": res.alpha,
                "beta": res.beta,
            });
            std::fs::write(
                args.out_dir.join("implied_rates.json"),
                format!("{}\n", serde_json::to_string_pretty(&rates).unwrap()),
            )?;
            let diag = serde_json::to_string_pretty(&res.diagnostics).unwrap();
            std::fs::write(args.out_dir.join("diagnostics.json"), format!("{diag}\n"))?;
        }
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), GchmmError> {
    let truth = io::read_states(&args.truth_x)?;
    let pred = match (&args.pred_x, &args.pred_marginals) {
        (Some(path), None) => io::read_states(path)?,
        (None, Some(path)) => classify(&io::read_marginals(path)?, args.threshold)?,
        _ => {
            return Err(GchmmError::domain(
                "evaluate needs exactly one of --pred-x or --pred-marginals",
            ))
        }
    };
    let truth_params = match &args.truth_params {
        Some(p) => Some(io::read_params(p)?),
        None => None,
    };
    let pred_params = match &args.pred_params {
        Some(p) => Some(io::read_params(p)?),
        None => None,
    };
    let m = metrics(
        &truth,
        &pred,
        truth_params
            .as_ref()
            .map(|p| [p.gamma.as_slice(), p.alpha.as_slice(), p.beta.as_slice()]),
        pred_params
            .as_ref()
            .map(|p| [p.gamma.as_slice(), p.alpha.as_slice(), p.beta.as_slice()]),
    )?;
    emit_metrics(&m, args.out.as_deref())
}

fn emit_metrics(m: &Metrics, out: Option<&Path>) -> Result<(), GchmmError> {
    match out {
        Some(path) => io::write_metrics(path, m)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(m)
                .map_err(|e| GchmmError::numerical(format!("serialize metrics: {e}")))?
        ),
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), GchmmError> {
    let network = load_network_checked(
        &args.network,
        args.duration_threshold,
        args.dims.people,
        args.dims.days,
    )?;
    let params = io::read_params(&args.params)?;
    let s_count = args.dims.symptoms.unwrap_or(params.n_symptoms());
    let symptoms = load_symptoms(
        &args.symptoms_file,
        network.n_people(),
        network.n_days(),
        s_count,
    )?;
    let interp: BetaInterpretation = args.beta_interp.into();

    std::fs::create_dir_all(&args.out_dir)?;
    io::write_id_mapping(args.out_dir.join("mapping.csv"), network.n_people())?;

    // Per-day forecasts from beliefs filtered through the previous day.
    let filtered = gchmm::eval::filter_forward(&network, &symptoms, &params, interp);
    let mut out = String::from("node,day,symptom,p\n");
    for day in 1..=network.n_days() {
        let p_prev: Vec<f64> = (0..network.n_people())
            .map(|p| filtered[(p, day - 1)])
            .collect();
        let probs = gchmm::eval::one_step_ahead(&p_prev, &params, &network, day, interp);
        for person in 0..network.n_people() {
            for s in 0..s_count {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    person + 1,
                    day,
                    s + 1,
                    probs[(person, s)]
                ));
            }
        }
    }
    std::fs::write(args.out_dir.join("predicted_symptoms.csv"), out)?;

    let accuracy = one_step_ahead_accuracy(&network, &symptoms, &params, interp);
    let body = serde_json::json!({ "y_onestep_accuracy": accuracy });
    std::fs::write(
        args.out_dir.join("metrics.json"),
        format!("{}\n", serde_json::to_string_pretty(&body).unwrap()),
    )?;
    println!("{}", serde_json::to_string(&body).unwrap());
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dperm::harness::{
    build_objective, emit_results, run_experiment, Algorithm, ExperimentSpec, OutputFormat,
    RegularizerKind,
};
use dperm::objective::LossKind;
use dperm::optimizers::{plan_noise, Calibration, QueryPattern};
use dperm::{CalibrationConstants, Error, PrivacyBudget};

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "dperm", version, about = "Differentially private ERM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<out>.json` and `<out>.csv`.
    Run(RunArgs),
    /// Print the per-step noise standard deviation for an algorithm.
    Calibrate(CalibrateArgs),
    /// Print the reference optimum F* of an objective.
    Reference(ReferenceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment spec; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    calibration: Option<Calibration>,
    /// File path or synth:logistic:n=..,p=..,seed=.. / synth:quadratic:...
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    regularizer: Option<RegularizerKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Multi-class label mapped to +1 (others to -1).
    #[arg(long)]
    positive_class: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    algo: Algorithm,
    /// Lipschitz constant of the per-sample loss.
    #[arg(long = "G", default_value_t = 1.0)]
    g: f64,
    #[arg(long = "T")]
    t: usize,
    /// Inner (or base inner) epoch length for the SVRG family.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value = "moments")]
    calibration: Calibration,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    regularizer: Option<RegularizerKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidArgument(_)
            | Error::Infeasible(_)
            | Error::DimensionMismatch { .. } => Failure::Invalid(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn parse_loss(s: &str) -> Result<LossKind, Failure> {
    match s {
        "logistic" => Ok(LossKind::Logistic),
        "squared" => Ok(LossKind::Squared),
        other => Err(Failure::Invalid(format!(
            "unknown loss `{other}` (logistic, squared)"
        ))),
    }
}

fn load_spec(path: Option<&PathBuf>) -> Result<ExperimentSpec, Failure> {
    match path {
        Some(p) => ExperimentSpec::from_file(p).map_err(|e| Failure::Invalid(e.to_string())),
        None => Ok(ExperimentSpec::default()),
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut spec = load_spec(args.spec.as_ref())?;
    if let Some(a) = args.algo {
        spec.algorithm = a;
    }
    if let Some(e) = args.epsilon {
        spec.epsilon = e;
    }
    if let Some(d) = args.delta {
        spec.delta = d;
    }
    if let Some(c) = args.calibration {
        spec.calibration = c;
    }
    if let Some(d) = args.dataset {
        spec.dataset = d;
    }
    if let Some(l) = args.loss {
        spec.loss = parse_loss(&l)?;
    }
    if let Some(r) = args.regularizer {
        spec.regularizer = r;
    }
    if let Some(l) = args.lambda {
        spec.lambda = l;
    }
    if args.t.is_some() {
        spec.t = args.t;
    }
    if args.m.is_some() {
        spec.m = args.m;
    }
    if args.eta.is_some() {
        spec.eta = args.eta;
    }
    if let Some(r) = args.reps {
        spec.repetitions = r;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if args.positive_class.is_some() {
        spec.positive_class = args.positive_class;
    }
    if let Some(o) = args.out {
        spec.out = o;
    }
    spec.validate()?;
    let record = run_experiment(&spec)?;
    let (json, csv) = spec.output_paths();
    emit_results(&record, OutputFormat::Json, &json)?;
    emit_results(&record, OutputFormat::Csv, &csv)?;
    println!(
        "{} on {} (n = {}, p = {}), F* = {}",
        spec.algorithm, record.dataset.source, record.dataset.n, record.dataset.p, record.reference.value
    );
    for a in &record.aggregates {
        println!(
            "eps = {} delta = {}: median excess risk {:e} [q1 {:e}, q3 {:e}] over {} runs{}",
            a.epsilon,
            a.delta,
            a.excess_risk.median,
            a.excess_risk.q1,
            a.excess_risk.q3,
            a.repetitions,
            if a.fell_back > 0 {
                " (advanced calibration fallback)"
            } else {
                ""
            }
        );
    }
    println!("wrote {} and {}", json.display(), csv.display());
    match record.error {
        Some(e) => Err(Failure::Runtime(e)),
        None => Ok(()),
    }
}

fn calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let budget = PrivacyBudget::new(args.epsilon, args.delta)?;
    let pattern = match args.algo {
        Algorithm::DpSvrg => QueryPattern::Svrg {
            epochs: args.t,
            inner_steps: args.m,
        },
        Algorithm::DpSvrgPp => QueryPattern::SvrgPp {
            epochs: args.t,
            base_inner_steps: args.m,
        },
        Algorithm::DpGd | Algorithm::DpAccmd => QueryPattern::FullGradient { iterations: args.t },
    };
    let consts = CalibrationConstants {
        c: args.c,
        c1: args.c1,
        c2: args.c2,
    };
    let plan = plan_noise(pattern, args.calibration, args.g, args.n, &budget, &consts)?;
    println!("sigma = {}", plan.sigma);
    println!("sigma_sq = {}", plan.variance());
    println!("mode = {}", plan.mode.name());
    println!("total_queries = {}", plan.total_queries);
    println!("sampling_ratio = {}", plan.sampling_ratio);
    println!("fell_back = {}", plan.fell_back);
    if let Some(d) = &plan.diagnostic {
        println!("note: {d}");
    }
    Ok(())
}

fn reference(args: ReferenceArgs) -> Result<(), Failure> {
    let mut spec = load_spec(args.spec.as_ref())?;
    if let Some(d) = args.dataset {
        spec.dataset = d;
    }
    if let Some(l) = args.loss {
        spec.loss = parse_loss(&l)?;
    }
    if let Some(r) = args.regularizer {
        spec.regularizer = r;
    }
    if let Some(l) = args.lambda {
        spec.lambda = l;
    }
    if let Some(t) = args.tol {
        spec.reference_tol = t;
    }
    spec.validate()?;
    let obj = build_objective(&spec)?;
    let r = if spec.algorithm == Algorithm::DpAccmd {
        dperm::harness::reference_projected(
            &obj,
            &spec.body_value(obj.dim()),
            spec.reference_tol,
            dperm::harness::reference::REFERENCE_MAX_ITERATIONS,
        )?
    } else {
        dperm::harness::reference_minimizer(&obj, spec.reference_tol)?
    };
    println!("F* = {}", r.value);
    println!("residual = {:e}", r.residual);
    println!("converged = {}", r.converged);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Reference(a) => reference(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

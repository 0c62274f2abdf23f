use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mmdp::bandit::{regret_scan, LikelihoodModel, PolicySource, RegretInstance};
use mmdp::dp::{solve_cadp, solve_mvp, solve_wsu, CadpConfig, CadpInit};
use mmdp::eval::{compare, random_instance, Algorithm, CompareConfig, TableFormat};
use mmdp::gradient::{grad_check, solve_first_order, FirstOrderConfig};
use mmdp::{load_domain, write_domain, LoadError, Mmdp, MmdpError, RandomizedPolicy};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(
    name = "mmdp",
    version,
    about = "Solve and benchmark finite-horizon multi-model MDPs"
)]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a domain bundle and report every problem found.
    Validate {
        #[arg(long)]
        domain: PathBuf,
    },
    /// Compute a policy and print its report as JSON.
    Solve(SolveArgs),
    /// Solve on the training models, evaluate on the test models.
    Compare(CompareArgs),
    /// Check the analytic policy gradient against finite differences.
    GradCheck(GradCheckArgs),
    /// Regret against the oracle bound on the two-model counterexample.
    RegretDemo(RegretArgs),
    /// Write a random domain bundle.
    Gen(GenArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Domain bundle directory; its training set is used.
    #[arg(long, conflicts_with_all = ["states", "actions", "models", "sparsity"])]
    domain: Option<PathBuf>,
    /// Horizon T.
    #[arg(long, value_parser = positive)]
    horizon: usize,
    /// Random instance: number of states (used without --domain).
    #[arg(long, default_value_t = 10, value_parser = positive)]
    states: usize,
    /// Random instance: number of actions.
    #[arg(long, default_value_t = 3, value_parser = positive)]
    actions: usize,
    /// Random instance: number of models.
    #[arg(long, default_value_t = 5, value_parser = positive)]
    models: usize,
    /// Random instance: expected fraction of successors per row.
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    sparsity: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveAlgorithm {
    Mvp,
    Wsu,
    Cadp,
    Mirror,
    Gradient,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Wsu,
    Mvp,
    Random,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    algorithm: SolveAlgorithm,
    /// CADP starting policy.
    #[arg(long, value_enum, default_value = "wsu")]
    init: InitArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CADP: stop once an iteration improves the return by less than this.
    #[arg(long, default_value_t = 1e-9, value_parser = non_negative)]
    tol: f64,
    /// CADP iteration cap.
    #[arg(long, default_value_t = 100, value_parser = positive)]
    max_iters: usize,
    /// First-order step size (default 0.1 for mirror, 0.01 for gradient).
    #[arg(long, value_parser = strictly_positive)]
    step_size: Option<f64>,
    /// First-order iterations.
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write per-iteration returns as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write the policy as CSV (idtime,idstate,idaction).
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    domain: PathBuf,
    #[arg(long, value_parser = positive)]
    horizon: usize,
    /// Comma-separated subset of mvp,wsu,cadp,mirror,gradient,mixts,oracle.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "mvp,wsu,cadp,mirror,gradient,mixts,oracle"
    )]
    algorithms: Vec<Algorithm>,
    /// Monte-Carlo episodes per row.
    #[arg(long, default_value_t = 10_000, value_parser = positive)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "md", value_parser = parse_format)]
    format: TableFormat,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9, value_parser = non_negative)]
    tol: f64,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    max_iters: usize,
    /// Thompson-sampling episodes per test model.
    #[arg(long, default_value_t = 20, value_parser = positive)]
    mixts_episodes: usize,
    #[arg(long, default_value_t = 1e-6, value_parser = floor)]
    likelihood_floor: f64,
    /// rewards or rewards+transitions.
    #[arg(long, default_value = "rewards")]
    likelihood: LikelihoodModel,
}

#[derive(Args)]
struct GradCheckArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Seed for the instance and the interior policy.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5, value_parser = strictly_positive)]
    h: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegretPolicy {
    Markov,
    Mvp,
    Wsu,
    Cadp,
    Mixts,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegretFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct RegretArgs {
    /// Weight of the first model, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',', default_values_t = (2..=20).map(|k| 2 * k).collect::<Vec<usize>>())]
    horizons: Vec<usize>,
    #[arg(long, value_enum, default_value = "markov")]
    policy: RegretPolicy,
    /// Thompson-sampling episodes per true model.
    #[arg(long, default_value_t = 100, value_parser = positive)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: RegretFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = positive)]
    states: usize,
    #[arg(long, value_parser = positive)]
    actions: usize,
    /// Training models.
    #[arg(long, value_parser = positive)]
    models: usize,
    #[arg(long, value_parser = positive)]
    test_models: usize,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    sparsity: f64,
    #[arg(long, default_value_t = 1.0, value_parser = discount)]
    discount: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn real_in(s: &str, ok: impl Fn(f64) -> bool, what: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
    if ok(x) {
        Ok(x)
    } else {
        Err(format!("must be {what}"))
    }
}

fn strictly_positive(s: &str) -> Result<f64, String> {
    real_in(s, |x| x > 0.0 && x.is_finite(), "positive")
}

fn non_negative(s: &str) -> Result<f64, String> {
    real_in(s, |x| x >= 0.0 && x.is_finite(), "non-negative")
}

fn unit_interval(s: &str) -> Result<f64, String> {
    real_in(s, |x| x > 0.0 && x <= 1.0, "in (0, 1]")
}

fn discount(s: &str) -> Result<f64, String> {
    real_in(s, |x| (0.0..=1.0).contains(&x), "in [0, 1]")
}

fn floor(s: &str) -> Result<f64, String> {
    real_in(s, |x| (0.0..1.0).contains(&x), "in [0, 1)")
}

fn parse_format(s: &str) -> Result<TableFormat, String> {
    s.parse()
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<MmdpError> for Failure {
    fn from(e: MmdpError) -> Self {
        let code = match e {
            MmdpError::Invalid(_)
            | MmdpError::Model(_)
            | MmdpError::DimensionMismatch { .. }
            | MmdpError::StaleWeights(_) => EXIT_VALIDATION,
            MmdpError::InvalidArgument(_) | MmdpError::StepSize(_) | MmdpError::Intractable { .. } => EXIT_USAGE,
            MmdpError::NonMonotone { .. } | MmdpError::DegeneratePosterior => EXIT_INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        Self::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, body: &str) -> Result<(), Failure> {
    match path {
        Some(path) => std::fs::write(path, body).map_err(|e| io_failure(path, e)),
        None => io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}"))),
    }
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| io_failure(path, e))
}

fn check_valid(mmdp: &Mmdp) -> Result<(), Failure> {
    let report = mmdp.validate();
    if report.is_empty() {
        Ok(())
    } else {
        Err(MmdpError::Invalid(report).into())
    }
}

fn build_instance(args: &InstanceArgs, seed: u64) -> Result<Mmdp, Failure> {
    let mmdp = match &args.domain {
        Some(dir) => load_domain(dir, args.horizon)?.training.fold_discount(),
        None => random_instance(
            args.states,
            args.actions,
            args.models,
            args.horizon,
            seed,
            args.sparsity,
        ),
    };
    check_valid(&mmdp)?;
    Ok(mmdp)
}

fn validate(domain: &Path) -> Result<(), Failure> {
    let bundle = load_domain(domain, 1)?;
    for warning in &bundle.warnings {
        eprintln!("warning: {warning}");
    }
    let t = &bundle.training;
    println!(
        "ok: {} states, {} actions, {} training models, {} test models, discount {}",
        t.n_states(),
        t.n_actions(),
        t.n_models(),
        bundle.test.n_models(),
        t.discount()
    );
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let mmdp = build_instance(&args.instance, args.seed)?;
    let report = match args.algorithm {
        SolveAlgorithm::Mvp => solve_mvp(&mmdp)?,
        SolveAlgorithm::Wsu => solve_wsu(&mmdp)?,
        SolveAlgorithm::Cadp => {
            let init = match args.init {
                InitArg::Wsu => CadpInit::Wsu,
                InitArg::Mvp => CadpInit::Mvp,
                InitArg::Random => CadpInit::Random(args.seed),
            };
            let config = CadpConfig {
                init,
                max_iters: args.max_iters,
                tol: args.tol,
                check_monotone: true,
            };
            solve_cadp(&mmdp, &config)?
        }
        SolveAlgorithm::Mirror | SolveAlgorithm::Gradient => {
            let mut config = match args.algorithm {
                SolveAlgorithm::Mirror => FirstOrderConfig::mirror(),
                _ => FirstOrderConfig::projected(),
            };
            config.iterations = args.iterations;
            if let Some(step) = args.step_size {
                config.step_size = step;
            }
            solve_first_order(&mmdp, &config)?
        }
    };
    let body = serde_json::to_string_pretty(&report.to_json()).expect("report serializes") + "\n";
    emit(args.output.as_deref(), &body)?;
    if let Some(path) = &args.trace {
        report.write_trace_csv(create(path)?).map_err(|e| io_failure(path, e))?;
    }
    if let Some(path) = &args.policy {
        report
            .policy
            .write_csv(create(path)?)
            .map_err(|e| io_failure(path, e))?;
    }
    Ok(())
}

fn run_compare(args: &CompareArgs) -> Result<(), Failure> {
    let bundle = load_domain(&args.domain, args.horizon)?;
    for warning in &bundle.warnings {
        eprintln!("warning: {warning}");
    }
    let config = CompareConfig {
        algorithms: args.algorithms.clone(),
        episodes: args.episodes,
        seed: args.seed,
        cadp: CadpConfig {
            max_iters: args.max_iters,
            tol: args.tol,
            check_monotone: true,
            ..CadpConfig::default()
        },
        mixts_episodes: args.mixts_episodes,
        likelihood_floor: args.likelihood_floor,
        likelihood: args.likelihood,
        ..CompareConfig::default()
    };
    let table = compare(&bundle, args.horizon, &config)?;
    emit(args.output.as_deref(), &table.render(args.format))
}

fn run_grad_check(args: &GradCheckArgs) -> Result<(), Failure> {
    let mmdp = build_instance(&args.instance, args.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(1);
    let policy = RandomizedPolicy::random_interior(mmdp.horizon(), mmdp.n_states(), mmdp.n_actions(), &mut rng);
    let report = grad_check(&mmdp, &policy, args.h)?;
    emit(
        None,
        &(serde_json::to_string(&report).expect("report serializes") + "\n"),
    )
}

fn regret_demo(args: &RegretArgs) -> Result<(), Failure> {
    let source = match args.policy {
        RegretPolicy::Markov => PolicySource::BestMarkov,
        RegretPolicy::Mvp => PolicySource::Mvp,
        RegretPolicy::Wsu => PolicySource::Wsu,
        RegretPolicy::Cadp => PolicySource::Cadp,
        RegretPolicy::Mixts => PolicySource::Mixts {
            episodes: args.episodes,
            seed: args.seed,
        },
    };
    let report = regret_scan(
        &RegretInstance::Counterexample { lambda: args.lambda },
        &source,
        &args.horizons,
    )?;
    let body = match args.format {
        RegretFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        RegretFormat::Csv => {
            let mut buffer = Vec::new();
            report.write_csv(&mut buffer).expect("writing to memory");
            String::from_utf8(buffer).expect("csv is utf-8")
        }
    };
    emit(args.output.as_deref(), &body)
}

fn generate(args: &GenArgs) -> Result<(), Failure> {
    let training = random_instance(args.states, args.actions, args.models, 1, args.seed, args.sparsity);
    let test = random_instance(
        args.states,
        args.actions,
        args.test_models,
        1,
        args.seed.wrapping_add(1),
        args.sparsity,
    );
    let uniform = |n: usize| vec![1.0 / n as f64; n];
    let training = Mmdp::new(
        1,
        training.models().to_vec(),
        training.initial().to_vec(),
        uniform(args.models),
        args.discount,
    )
    .map_err(MmdpError::from)?;
    let test = Mmdp::new(
        1,
        test.models().to_vec(),
        training.initial().to_vec(),
        uniform(args.test_models),
        args.discount,
    )
    .map_err(MmdpError::from)?;
    write_domain(&args.output, &training, &test)?;
    eprintln!("wrote {}", args.output.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::new(EXIT_USAGE, "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
    }
    match &cli.command {
        Command::Validate { domain } => validate(domain),
        Command::Solve(args) => solve(args),
        Command::Compare(args) => run_compare(args),
        Command::GradCheck(args) => run_grad_check(args),
        Command::RegretDemo(args) => regret_demo(args),
        Command::Gen(args) => generate(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

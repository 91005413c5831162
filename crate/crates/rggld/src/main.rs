//! `rggld` — seeded simulation and rate evaluation for near-intermediate
//! random geometric graphs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rggld::error::{Error, Result};
use rggld::geometry::{BoundaryMode, Kernel, ModelParams};
use rggld::io::{
    kernel_from_json, kernel_to_json, measure_from_json, measure_to_json, parse_count_list,
    parse_probability_vector, rate_value_to_json,
};
use rggld::measures::{consistency_check, h_map, CountableMeasure};
use rggld::montecarlo::{
    coloured_typical_check, estimate_rate_slope, estimate_tail_probability, run_trial_outcomes,
    summarize, TailEstimate,
};
use rggld::rates::{
    eta1, fixed_point_residual, hc_d, rho, solve_a, xi1, DegreeLaw, PoissonLaw,
};
use rggld::verify;

/// Environment variable supplying the default seed when `--seed` is absent.
const SEED_ENV: &str = "RGGLD_SEED";

#[derive(Parser)]
#[command(
    name = "rggld",
    version,
    about = "Simulation and rate-function toolkit for near-intermediate random geometric graphs",
    after_help = "Seeds default to the RGGLD_SEED environment variable, then 0. \
                  All outputs embed the parameters and seed for replay."
)]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: logical cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a graph ensemble and report isolated-vertex / degree statistics
    Simulate(SimulateArgs),
    /// Evaluate a rate function as a JSON record
    Rate(RateArgs),
    /// Estimate P(D(0) >= y) by plain Monte Carlo
    Tail(TailArgs),
    /// Tail estimates across a ladder of graph sizes, against xi1(y)
    Slope(SlopeArgs),
    /// Coloured-ensemble check against the product-Poisson typical law
    Coloured(ColouredArgs),
    /// Run the acceptance criteria; nonzero exit on failure
    Verify,
}

#[derive(Args)]
struct RateArgs {
    #[command(subcommand)]
    which: RateCommand,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dimension of the unit cube
    #[arg(long)]
    d: u32,
    /// Intensity c; the connectivity radius is (c/n)^(1/d)
    #[arg(long)]
    c: f64,
    /// Vertices per graph
    #[arg(long)]
    n: usize,
    /// Independent graphs to build
    #[arg(long)]
    trials: usize,
    /// Boundary mode: cube or torus
    #[arg(long, default_value = "torus")]
    mode: String,
    /// RNG seed (default: $RGGLD_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Per-trial output file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum RateCommand {
    /// Degree-distribution rate eta1(delta)
    Eta1(Eta1Args),
    /// Isolated-vertex rate xi1(y)
    Xi1(Xi1Args),
    /// Pair-measure divergence hc_d(varpi || omega)
    Hcd(HcdArgs),
    /// Joint pair/neighbourhood rate J(varpi, mu)
    J(JArgs),
}

#[derive(Args)]
struct Eta1Args {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    c: f64,
    /// Degree law as a measure JSON file ({"entries": [[k, mass], ...]})
    #[arg(long)]
    delta_file: Option<PathBuf>,
    /// Degree law as inline measure JSON
    #[arg(long)]
    delta: Option<String>,
    /// Shortcut: truncated Poisson degree law with this mean
    #[arg(long)]
    poisson: Option<f64>,
    /// Evaluate the infinite-mean branch
    #[arg(long)]
    infinite_mean: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Xi1Args {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    c: f64,
    /// Isolated-vertex proportion in [0,1]
    #[arg(long)]
    y: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HcdArgs {
    #[arg(long)]
    d: u32,
    /// Kernel JSON: [[...], ...] or {"matrix": ..., "names": ...}
    #[arg(long)]
    kernel_file: PathBuf,
    /// Symmetric pair measure JSON file
    #[arg(long)]
    varpi_file: PathBuf,
    /// Colour probability measure JSON file
    #[arg(long)]
    omega_file: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct JArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    kernel_file: PathBuf,
    #[arg(long)]
    varpi_file: PathBuf,
    /// Neighbourhood measure JSON file (keys [colour, [[b, count], ...]])
    #[arg(long)]
    mu_file: PathBuf,
    /// Colour law as comma-separated probabilities, e.g. 0.5,0.5
    #[arg(long)]
    nu: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    c: f64,
    /// Event threshold: D(0) >= y
    #[arg(long)]
    y: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value = "torus")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SlopeArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    c: f64,
    #[arg(long)]
    y: f64,
    /// Graph sizes, e.g. 50,100
    #[arg(long)]
    n_list: String,
    /// Trials per graph size
    #[arg(long)]
    trials: usize,
    #[arg(long, default_value = "torus")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct ColouredArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    trials: usize,
    /// Colour law as comma-separated probabilities
    #[arg(long)]
    nu: String,
    /// Kernel JSON file (mutually exclusive with --kernel-const)
    #[arg(long)]
    kernel_file: Option<PathBuf>,
    /// Constant kernel value C(a,b) = const for all pairs
    #[arg(long)]
    kernel_const: Option<f64>,
    /// Ladder of graph sizes for the joint-rate trend
    #[arg(long, default_value = "500,2000")]
    n_ladder: String,
    #[arg(long, default_value = "torus")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(1),
                _ => {
                    eprintln!("run `rggld --help` for usage");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Rate(args) => rate(args.which),
        Command::Tail(args) => tail(args),
        Command::Slope(args) => slope(args),
        Command::Coloured(args) => coloured(args),
        Command::Verify => run_verify(),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .parse::<u64>()
            .map_err(|_| Error::invalid_parameter("seed", format!("{SEED_ENV}={raw} not a u64"))),
        Err(_) => Ok(0),
    }
}

fn parse_mode(raw: &str) -> Result<BoundaryMode> {
    raw.parse()
}

/// Parameters echoed into every record so runs can be replayed.
fn params_json(params: &ModelParams) -> Result<Value> {
    let rho_d = rho(params.d)?;
    let mut object = json!({
        "d": params.d,
        "n": params.n,
        "mode": params.mode.to_string(),
        "seed": params.seed,
        "rho_d": rho_d,
    });
    match &params.connectivity {
        rggld::geometry::Connectivity::Scalar { c } => {
            object["c"] = json!(c);
            object["rho_c"] = json!(rho_d * c);
        }
        rggld::geometry::Connectivity::Coloured { kernel, nu } => {
            object["kernel"] = kernel_to_json(kernel);
            object["nu"] = json!(nu);
        }
    }
    Ok(object)
}

fn emit(record: &Value, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(record).expect("serializable record");
    println!("{text}");
    if let Some(path) = out {
        fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn write_file(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed)?;
    let mode = parse_mode(&args.mode)?;
    let params = ModelParams::scalar(args.d, args.n, args.c, mode, seed)?;
    let outcomes = run_trial_outcomes(&params, args.trials)?;
    let summary = summarize(&params, &outcomes);

    if let Some(out) = &args.out {
        match args.format {
            Format::Csv => {
                let mut csv = String::from("n,trial,isolated,edges\n");
                for o in &outcomes {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        params.n, o.trial, o.isolated, o.edges
                    ));
                }
                write_file(out, &csv)?;
            }
            Format::Json => {
                let record = json!({
                    "schema": 1,
                    "command": "simulate",
                    "params": params_json(&params)?,
                    "trials": outcomes.iter().map(|o| json!({
                        "trial": o.trial,
                        "isolated": o.isolated,
                        "edges": o.edges,
                    })).collect::<Vec<_>>(),
                    "summary": summary.to_json(),
                });
                write_file(out, &format!("{}\n", serde_json::to_string_pretty(&record).unwrap()))?;
            }
        }
    }

    let record = json!({
        "schema": 1,
        "command": "simulate",
        "params": params_json(&params)?,
        "summary": summary.to_json(),
    });
    println!("{}", serde_json::to_string_pretty(&record).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn load_json(path: &PathBuf) -> Result<Value> {
    let raw = fs::read_to_string(path)?;
    serde_json::from_str(&raw).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn rate(which: RateCommand) -> Result<ExitCode> {
    match which {
        RateCommand::Eta1(args) => {
            let rho_d = rho(args.d)?;
            let selectors = usize::from(args.delta_file.is_some())
                + usize::from(args.delta.is_some())
                + usize::from(args.poisson.is_some())
                + usize::from(args.infinite_mean);
            if selectors != 1 {
                return Err(Error::invalid_parameter(
                    "delta",
                    "pass exactly one of --delta-file, --delta, --poisson, --infinite-mean",
                ));
            }
            let (delta, truncation_k) = if args.infinite_mean {
                (None, None)
            } else if let Some(rate) = args.poisson {
                let law = PoissonLaw::new(rate)?;
                (Some(law.to_measure()), Some(law.truncation_k()))
            } else {
                let value = match &args.delta_file {
                    Some(path) => load_json(path)?,
                    None => serde_json::from_str(args.delta.as_ref().unwrap())
                        .map_err(|e| Error::Parse(format!("--delta: {e}")))?,
                };
                (Some(measure_from_json::<u32>(&value)?), None)
            };
            let (value, mean) = match &delta {
                Some(measure) => (eta1(measure, args.d, args.c)?, Some(measure.mean())),
                None => (eta1(DegreeLaw::InfiniteMean, args.d, args.c)?, None),
            };
            let mut input = json!({
                "d": args.d,
                "c": args.c,
                "rho_d": rho_d,
                "rho_c": rho_d * args.c,
            });
            if let Some(measure) = &delta {
                input["delta"] = measure_to_json(measure);
            } else {
                input["infinite_mean"] = json!(true);
            }
            let record = json!({
                "schema": 1,
                "command": "rate eta1",
                "input": input,
                "value": rate_value_to_json(&value),
                "aux": {
                    "mean": mean,
                    "truncation_k": truncation_k,
                },
            });
            emit(&record, args.out.as_ref())?;
        }
        RateCommand::Xi1(args) => {
            let rho_d = rho(args.d)?;
            let value = xi1(args.y, args.d, args.c)?;
            let (a, residual) = if args.y < 1.0 {
                let a = solve_a(args.y, args.d, args.c)?;
                (
                    Some(a),
                    Some(fixed_point_residual(a, args.y, args.d, args.c)?),
                )
            } else {
                (None, None)
            };
            let record = json!({
                "schema": 1,
                "command": "rate xi1",
                "input": {
                    "d": args.d,
                    "c": args.c,
                    "y": args.y,
                    "rho_d": rho_d,
                    "rho_c": rho_d * args.c,
                },
                "value": rate_value_to_json(&value),
                "aux": { "a": a, "residual": residual },
            });
            emit(&record, args.out.as_ref())?;
        }
        RateCommand::Hcd(args) => {
            let rho_d = rho(args.d)?;
            let (kernel, _) = kernel_from_json(&load_json(&args.kernel_file)?)?;
            let varpi = measure_from_json(&load_json(&args.varpi_file)?)?;
            let omega = measure_from_json(&load_json(&args.omega_file)?)?;
            let value = hc_d(&varpi, &omega, &kernel, args.d)?;
            let record = json!({
                "schema": 1,
                "command": "rate hcd",
                "input": {
                    "d": args.d,
                    "rho_d": rho_d,
                    "kernel": kernel_to_json(&kernel),
                    "varpi": measure_to_json(&varpi),
                    "omega": measure_to_json(&omega),
                },
                "value": rate_value_to_json(&value),
                "aux": { "varpi_total": varpi.total() },
            });
            emit(&record, args.out.as_ref())?;
        }
        RateCommand::J(args) => {
            let rho_d = rho(args.d)?;
            let (kernel, _) = kernel_from_json(&load_json(&args.kernel_file)?)?;
            let varpi = measure_from_json(&load_json(&args.varpi_file)?)?;
            let mu = measure_from_json(&load_json(&args.mu_file)?)?;
            let nu_vec = parse_probability_vector(&args.nu)?;
            let nu = CountableMeasure::from_entries(
                nu_vec.iter().enumerate().map(|(a, &p)| (a as u32, p)),
            )?;
            let value = rggld::rates::rate_j(&varpi, &mu, &nu, &kernel, args.d)?;
            let consistency = consistency_check(&varpi, &mu, 1e-9);
            let (mu1, _) = h_map(&mu);
            let record = json!({
                "schema": 1,
                "command": "rate j",
                "input": {
                    "d": args.d,
                    "rho_d": rho_d,
                    "kernel": kernel_to_json(&kernel),
                    "varpi": measure_to_json(&varpi),
                    "mu": measure_to_json(&mu),
                    "nu": nu_vec,
                },
                "value": rate_value_to_json(&value),
                "aux": {
                    "consistency": consistency.to_string(),
                    "mu1": measure_to_json(&mu1),
                },
            });
            emit(&record, args.out.as_ref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn tail_csv_row(est: &TailEstimate, xi: Option<f64>) -> String {
    let log_rate = est
        .log_rate
        .map(|r| r.to_string())
        .unwrap_or_default();
    let mut row = format!(
        "{},{},{},{},{},{},{},{}",
        est.y, est.n, est.trials, est.hits, est.p_hat, log_rate, est.wilson_ci.0, est.wilson_ci.1
    );
    if let Some(xi) = xi {
        row.push_str(&format!(",{xi}"));
    }
    row.push('\n');
    row
}

fn tail(args: TailArgs) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed)?;
    let mode = parse_mode(&args.mode)?;
    let params = ModelParams::scalar(args.d, args.n, args.c, mode, seed)?;
    let estimate = estimate_tail_probability(&params, args.y, args.trials)?;

    if let Some(out) = &args.out {
        match args.format {
            Format::Csv => {
                let mut csv =
                    String::from("y,n,trials,hits,p_hat,log_rate,wilson_lo,wilson_hi\n");
                csv.push_str(&tail_csv_row(&estimate, None));
                write_file(out, &csv)?;
            }
            Format::Json => {
                let record = json!({
                    "schema": 1,
                    "command": "tail",
                    "params": params_json(&params)?,
                    "estimate": estimate.to_json(),
                });
                write_file(out, &format!("{}\n", serde_json::to_string_pretty(&record).unwrap()))?;
            }
        }
    }

    let record = json!({
        "schema": 1,
        "command": "tail",
        "params": params_json(&params)?,
        "estimate": estimate.to_json(),
    });
    println!("{}", serde_json::to_string_pretty(&record).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn slope(args: SlopeArgs) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed)?;
    let mode = parse_mode(&args.mode)?;
    let n_list = parse_count_list(&args.n_list)?;
    // n is overridden per ladder entry
    let params = ModelParams::scalar(args.d, n_list[0], args.c, mode, seed)?;
    let report = estimate_rate_slope(&params, args.y, &n_list, args.trials)?;

    if let Some(out) = &args.out {
        match args.format {
            Format::Csv => {
                let mut csv = String::from(
                    "y,n,trials,hits,p_hat,log_rate,wilson_lo,wilson_hi,xi1\n",
                );
                for est in &report.estimates {
                    csv.push_str(&tail_csv_row(est, Some(report.xi1)));
                }
                write_file(out, &csv)?;
            }
            Format::Json => {
                let record = json!({
                    "schema": 1,
                    "command": "slope",
                    "params": params_json(&params)?,
                    "report": report.to_json(),
                });
                write_file(out, &format!("{}\n", serde_json::to_string_pretty(&record).unwrap()))?;
            }
        }
    }

    let record = json!({
        "schema": 1,
        "command": "slope",
        "params": params_json(&params)?,
        "report": report.to_json(),
    });
    println!("{}", serde_json::to_string_pretty(&record).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn coloured(args: ColouredArgs) -> Result<ExitCode> {
    let seed = resolve_seed(args.seed)?;
    let mode = parse_mode(&args.mode)?;
    let nu = parse_probability_vector(&args.nu)?;
    let kernel = match (&args.kernel_file, args.kernel_const) {
        (Some(path), None) => kernel_from_json(&load_json(path)?)?.0,
        (None, Some(value)) => Kernel::constant(nu.len(), value)?,
        _ => {
            return Err(Error::invalid_parameter(
                "kernel",
                "pass exactly one of --kernel-file or --kernel-const",
            ))
        }
    };
    let n_ladder = if args.n_ladder.trim().is_empty() {
        Vec::new()
    } else {
        parse_count_list(&args.n_ladder)?
    };
    let params = ModelParams::coloured(args.d, args.n, kernel, nu, mode, seed)?;
    let report = coloured_typical_check(&params, args.trials, &n_ladder)?;
    let record = json!({
        "schema": 1,
        "command": "coloured",
        "params": params_json(&params)?,
        "report": report.to_json(),
    });
    emit(&record, args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn run_verify() -> Result<ExitCode> {
    let start = std::time::Instant::now();
    let results = verify::run_all();
    for result in &results {
        println!("{}", result.line());
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!(
        "verify: {passed}/{} criteria passed in {:.1}s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if passed == results.len() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

//! `tucker-complete`: generate synthetic instances, run fixed-rank Tucker
//! completion on COO files, and run the benchmark cases.
//!
//! Exit codes:
//!
//! | code | meaning                                                        |
//! |------|----------------------------------------------------------------|
//! | 0    | success (solver converged, hit `max_iter`, or stopped early)    |
//! | 2    | usage or validation error (bad flags, config, ids, shapes)     |
//! | 3    | I/O error (missing/unreadable/malformed input, write failure)  |
//! | 4    | solver error (degenerate core, failed line search, ...)        |

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tucker_completion::bench::{
    case_spec, gen_instance, init_point, load_coo, load_point, run_case, save_coo, save_point, CASE_IDS,
    DEFAULT_SEEDS,
};
use tucker_completion::{solve, CompletionProblem, Error, GeometryKind, Method, SparseTensor3};

use config::{ConfigError, RunConfig};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "TUCKER_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "out";

#[derive(Parser, Debug)]
#[command(name = "tucker-complete", version, about = "Fixed-rank Tucker tensor completion")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: $TUCKER_OUT_DIR, else ./out].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cap on worker threads (1 gives fully serial runs).
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic instance: train/test/validation COO files plus the ground truth.
    Gen {
        /// Instance seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run completion on COO files and write the iteration trace.
    Complete(CompleteArgs),
    /// Run benchmark cases (`all` for every registered case).
    Bench {
        /// Case ids such as S1 or S2, or `all`.
        ids: Vec<String>,
        /// Run a single seed instead of the default five.
        #[arg(long)]
        seed: Option<u64>,
        /// Use the original, much larger problem sizes.
        #[arg(long)]
        full_scale: bool,
    },
}

#[derive(Args, Debug)]
struct CompleteArgs {
    /// Seed of the random starting point.
    #[arg(long)]
    seed: Option<u64>,
    /// Target multilinear rank, e.g. 3,3,3.
    #[arg(long, value_name = "R1,R2,R3", value_parser = parse_triple)]
    ranks: Option<[usize; 3]>,
    #[arg(long, value_enum)]
    geometry: Option<GeometryArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Regularize degenerate cores instead of failing.
    #[arg(long)]
    ridge: bool,
    /// Save the final factors (to `outputs.factors`, else <out>/factors.json).
    #[arg(long)]
    save_factors: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GeometryArg {
    Preconditioned,
    Euclidean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Ncg,
    Sd,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn from_lib(context: &str, e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse { .. } | Error::Json(_) => EXIT_IO,
            Error::InvalidMode(_)
            | Error::DimensionMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::DuplicateIndex { .. }
            | Error::MissingSet(_)
            | Error::Invalid { .. }
            | Error::UnknownCase(_) => EXIT_USAGE,
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: format!("{context}: {e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => Failure::io(e.to_string()),
            ConfigError::Parse { .. } => Failure::usage(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot size thread pool: {e}")))?;
    }
    let out = out_dir(cli.out.as_deref(), &cfg);
    match cli.command {
        Command::Gen { seed } => cmd_gen(&cfg, seed, &out),
        Command::Complete(args) => cmd_complete(&cfg, &args, &out),
        Command::Bench { ids, seed, full_scale } => cmd_bench(&cfg, &ids, seed, full_scale, &out),
    }
}

/// `--out`, then the config, then `$TUCKER_OUT_DIR`, then `./out`.
fn out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn parse_triple(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    parts.try_into().map_err(|v: Vec<usize>| format!("expected three comma-separated values, got {}", v.len()))
}

/// Prints to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

fn print_json(value: &serde_json::Value) {
    emit(&serde_json::to_string_pretty(value).expect("serializable summary"));
}

fn cmd_gen(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let mut spec = cfg
        .instance
        .clone()
        .ok_or_else(|| Failure::usage("gen needs an `instance` section in the config"))?;
    if let Some(s) = seed.or(cfg.seed) {
        spec.seed = s;
    }
    spec.validate().map_err(|e| Failure::from_lib("instance", e))?;
    let inst = gen_instance::<f64>(&spec).map_err(|e| Failure::from_lib("instance", e))?;
    create_dir(out)?;

    let p = &inst.problem;
    let empty = || SparseTensor3::new(spec.dims, Vec::new()).expect("empty set");
    let files = [
        ("train", out.join("train.coo"), p.train().clone()),
        ("test", out.join("test.coo"), p.test().cloned().unwrap_or_else(empty)),
        ("validation", out.join("validation.coo"), p.validation().cloned().unwrap_or_else(empty)),
    ];
    for (name, path, t) in &files {
        save_coo(t, path).map_err(|e| Failure::from_lib(&format!("writing {name} set"), e))?;
    }
    let truth = out.join("truth.json");
    save_point(&inst.truth, &truth).map_err(|e| Failure::from_lib("writing ground truth", e))?;
    let spec_path = out.join("instance.json");
    let spec_json = serde_json::to_string_pretty(&spec).expect("serializable spec");
    std::fs::write(&spec_path, spec_json + "\n")
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", spec_path.display())))?;

    print_json(&json!({
        "instance": spec,
        "sizes": { "train": files[0].2.len(), "test": files[1].2.len(), "validation": files[2].2.len() },
        "files": {
            "train": files[0].1, "test": files[1].1, "validation": files[2].1,
            "truth": truth, "instance": spec_path,
        },
    }));
    Ok(())
}

/// An optional set: the configured path must exist; the default path is
/// used only when present. Empty sets count as absent.
fn optional_set(configured: Option<&PathBuf>, default: PathBuf, name: &str) -> CliResult<Option<SparseTensor3<f64>>> {
    let path = match configured {
        Some(p) => p.clone(),
        None if default.exists() => default,
        None => return Ok(None),
    };
    let t = load_coo::<f64>(&path).map_err(|e| Failure::from_lib(&format!("reading {name} set {}", path.display()), e))?;
    Ok((!t.is_empty()).then_some(t))
}

fn cmd_complete(cfg: &RunConfig, args: &CompleteArgs, out: &Path) -> CliResult<()> {
    let mut solver = cfg.solver.clone();
    if let Some(g) = args.geometry {
        solver.geometry = match g {
            GeometryArg::Preconditioned => GeometryKind::Preconditioned,
            GeometryArg::Euclidean => GeometryKind::Euclidean,
        };
    }
    if let Some(m) = args.method {
        solver.method = match m {
            MethodArg::Ncg => Method::Ncg,
            MethodArg::Sd => Method::Sd,
        };
    }
    solver.ridge |= args.ridge;
    solver.validate().map_err(|e| Failure::from_lib("solver", e))?;

    let train_path = cfg.inputs.train.clone().unwrap_or_else(|| out.join("train.coo"));
    let train = load_coo::<f64>(&train_path)
        .map_err(|e| Failure::from_lib(&format!("reading train set {}", train_path.display()), e))?;
    let test = optional_set(cfg.inputs.test.as_ref(), out.join("test.coo"), "test")?;
    let validation = optional_set(cfg.inputs.validation.as_ref(), out.join("validation.coo"), "validation")?;
    let dims = train.dims();

    let init = match &cfg.inputs.init {
        Some(path) => Some(
            load_point::<f64>(path).map_err(|e| Failure::from_lib(&format!("reading start point {}", path.display()), e))?,
        ),
        None => None,
    };
    let ranks = match &args.ranks {
        Some(r) => *r,
        None => cfg
            .ranks
            .or(cfg.instance.as_ref().map(|i| i.ranks))
            .or(init.as_ref().map(|x| x.ranks()))
            .ok_or_else(|| Failure::usage("no target rank: pass --ranks or set `ranks` in the config"))?,
    };
    let seed = args.seed.or(cfg.seed).or(cfg.instance.as_ref().map(|i| i.seed)).unwrap_or(0);
    let x0 = match init {
        Some(x) => x,
        None => init_point::<f64>(dims, ranks, seed).map_err(|e| Failure::from_lib("starting point", e))?,
    };
    let problem = CompletionProblem::new(ranks, train, test, validation).map_err(|e| Failure::from_lib("problem", e))?;

    let (x, trace) = solve(&problem, &x0, &solver).map_err(|e| Failure::from_lib("solver", e))?;

    create_dir(out)?;
    let trace_path = cfg.outputs.trace.clone().unwrap_or_else(|| out.join("trace.csv"));
    if let Some(parent) = trace_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = std::fs::File::create(&trace_path)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", trace_path.display())))?;
    trace
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", trace_path.display())))?;
    let factors_path = match (&cfg.outputs.factors, args.save_factors) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => Some(out.join("factors.json")),
        (None, false) => None,
    };
    if let Some(p) = &factors_path {
        save_point(&x, p).map_err(|e| Failure::from_lib("writing factors", e))?;
    }

    let last = trace.last();
    print_json(&json!({
        "status": trace.status,
        "iterations": trace.iterations(),
        "final_train_mse": last.map(|r| r.train_mse),
        "final_test_mse": last.and_then(|r| r.test_mse),
        "ranks": ranks,
        "seed": seed,
        "solver": solver,
        "trace": trace_path,
        "factors": factors_path,
    }));
    if let tucker_completion::RunStatus::Error(reason) = &trace.status {
        return Err(Failure {
            code: EXIT_SOLVER,
            message: format!("solver failed: {reason}"),
        });
    }
    Ok(())
}

/// Expands `all` and checks every id before anything runs.
fn resolve_cases(ids: &[String]) -> CliResult<Vec<String>> {
    if ids.is_empty() {
        return Err(Failure::usage(format!(
            "no benchmark case given; choose from {} or `all`",
            CASE_IDS.join(", ")
        )));
    }
    let mut cases = Vec::new();
    for id in ids {
        if id.eq_ignore_ascii_case("all") {
            cases.extend(CASE_IDS.iter().map(|c| c.to_string()));
        } else if let Some(c) = CASE_IDS.iter().find(|c| c.eq_ignore_ascii_case(id)) {
            cases.push(c.to_string());
        } else {
            return Err(Failure::usage(format!(
                "unknown benchmark case {id:?}; choose from {} or `all`",
                CASE_IDS.join(", ")
            )));
        }
    }
    let mut seen = std::collections::HashSet::new();
    cases.retain(|c| seen.insert(c.clone()));
    Ok(cases)
}

fn cmd_bench(cfg: &RunConfig, ids: &[String], seed: Option<u64>, full_scale: bool, out: &Path) -> CliResult<()> {
    let ids = if ids.is_empty() { &cfg.bench.cases } else { ids };
    let cases = resolve_cases(ids)?;
    let seeds = match (seed, &cfg.bench.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(s)) => s.clone(),
        (None, None) => DEFAULT_SEEDS.to_vec(),
    };
    let full_scale = full_scale || cfg.bench.full_scale;
    create_dir(out)?;
    let mut summary = Vec::new();
    for id in &cases {
        let spec = case_spec(id, full_scale).map_err(|e| Failure::from_lib("bench", e))?;
        log::info!("running case {id} ({} runs x {} seeds)", spec.runs.len(), seeds.len());
        let report = run_case(&spec, &seeds, Some(out)).map_err(|e| Failure::from_lib(&format!("case {id}"), e))?;
        for run in &report.runs {
            summary.push(json!({
                "case": report.case,
                "run": run.spec.label,
                "tolerance": run.spec.tolerance,
                "reached": format!("{}/{}", run.summary.reached_count, run.seeds.len()),
                "median_iterations_to_tol": run.summary.median_iterations_to_tol,
                "median_final_test_mse": run.summary.median_final_test_mse,
                "median_noise_ratio": run.summary.median_noise_ratio,
                "wall_time_mean_s": run.summary.wall_time_mean_s,
            }));
        }
        emit(&out.join(&report.case).join("report.json").display().to_string());
    }
    print_json(&serde_json::Value::Array(summary));
    Ok(())
}

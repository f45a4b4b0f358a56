use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use netregime::cutset::CutMode;
use netregime::harness::{
    self, emit_phase_diagram, fit_report, read_fit_points, run_and_write, run_scaling_experiment, ExperimentConfig,
    ExperimentKind, SchemeChoice,
};
use netregime::network::{generate_network, PhysicalParams};
use netregime::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_EXPERIMENT: u8 = 3;

#[derive(Parser)]
#[command(name = "netregime", version, about = "Operating-regime simulator for wireless ad hoc networks")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one network and print it as JSON.
    Gen(GenArgs),
    /// Monte-Carlo cutset bound over an n-sweep.
    Cutset(CutsetArgs),
    /// Throughput of one scheme over an n-sweep.
    Scheme(SchemeArgs),
    /// Simulated hybrid scheme over an n-sweep.
    Hybrid(HybridArgs),
    /// Open-crossing probability of the percolation cut over an n-sweep.
    Percolation(Common),
    /// Regime map over a grid of (alpha, beta).
    PhaseDiagram(PhaseArgs),
    /// Log-log exponent fit of a CSV with n and metric columns.
    Fit(FitArgs),
    /// Run the experiment described by --config.
    Sweep(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Comma-separated list of network sizes (pairs).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// SNR_s = n^beta at every point.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Networks per point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory; without it the summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "k1")]
    k1: Option<f64>,
    #[arg(long = "k2")]
    k2: Option<f64>,
    #[arg(long = "k3")]
    k3: Option<f64>,
    #[arg(long = "k4")]
    k4: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Percolation cell side in nearest-neighbour units.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Idealized,
    Percolation,
}

#[derive(Args)]
struct CutsetArgs {
    #[command(flatten)]
    common: Common,
    /// Phase draws per network.
    #[arg(long)]
    phase_trials: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Multihop,
    Hc,
    BurstyHc,
    Hybrid,
}

#[derive(Args)]
struct SchemeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "multihop")]
    scheme: SchemeArg,
}

#[derive(Args)]
struct HybridArgs {
    #[command(flatten)]
    common: Common,
    /// Fixed nodes per cell instead of SNR_s^(1/(alpha/2 - 1)).
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct PhaseArgs {
    #[command(flatten)]
    common: Common,
    /// alpha_min,alpha_max
    #[arg(long, value_delimiter = ',')]
    alpha_range: Option<Vec<f64>>,
    /// beta_min,beta_max
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    beta_range: Option<Vec<f64>>,
    /// alpha_points,beta_points
    #[arg(long, value_delimiter = ',')]
    resolution: Option<Vec<usize>>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with `n` and `metric` columns.
    input: PathBuf,
    /// Exponent to report alongside the fit.
    #[arg(long, allow_hyphen_values = true)]
    theory: Option<f64>,
}

enum Failure {
    Config(String),
    Experiment(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Json(_) | Error::OutOfRegime(_) => Failure::Config(e.to_string()),
            other => Failure::Experiment(other.to_string()),
        }
    }
}

fn load_config(common: &Common, kind: ExperimentKind) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig {
            kind,
            ..Default::default()
        },
    };
    if let Some(n) = &common.n {
        cfg.n_list = n.clone();
    }
    macro_rules! set {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = common.$field { $target = v; })*
        };
    }
    set!(
        alpha => cfg.alpha,
        beta => cfg.beta,
        seed => cfg.seed,
        trials => cfg.trials,
        k1 => cfg.constants.k1,
        k2 => cfg.constants.k2,
        k3 => cfg.constants.k3,
        k4 => cfg.constants.k4,
        epsilon => cfg.constants.epsilon,
        delta => cfg.constants.delta,
        c => cfg.constants.c,
    );
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn run_experiment(cfg: &ExperimentConfig) -> Result<(), Failure> {
    cfg.validate()?;
    if cfg.kind == ExperimentKind::PhaseDiagram {
        let diagram = harness::build_phase_diagram(cfg)?;
        match &cfg.out {
            Some(dir) => {
                for p in emit_phase_diagram(cfg, dir)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            None => print!("{}", diagram.to_csv()),
        }
        return Ok(());
    }
    let (table, fit) = match &cfg.out {
        Some(dir) => {
            let (table, fit, written) = run_and_write(cfg, dir)?;
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            (table, fit)
        }
        None => {
            let table = run_scaling_experiment(cfg)?;
            let pts = table.fit_points();
            let fit = if pts.len() >= 3 {
                Some(fit_report(&pts, cfg.theory_exponent())?)
            } else {
                None
            };
            (table, fit)
        }
    };
    print!("{}", table.summary_csv());
    for s in &table.skipped {
        eprintln!("skipped n = {}: {} failed trials ({})", s.n, s.failed, s.reason);
    }
    if let Some(fit) = fit {
        eprintln!("slope {:.4} (r^2 {:.4})", fit.full.slope, fit.full.r_squared);
        if let Some(tail) = fit.tail {
            eprintln!("tail slope {:.4} over {} points", tail.slope, tail.points);
        }
        if let Some(e) = fit.full.theory_exponent {
            eprintln!("theory exponent {e:.4}");
        }
    }
    if table.points.is_empty() {
        return Err(Failure::Experiment("every point was skipped".into()));
    }
    Ok(())
}

fn pair<T>(flag: &str, values: Vec<T>) -> Result<[T; 2], Failure> {
    <[T; 2]>::try_from(values).map_err(|v| Failure::Config(format!("{flag} takes two values, got {}", v.len())))
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::Experiment(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Gen(a) => {
            let params = PhysicalParams::unit(a.alpha)?;
            let area = params.area_for_snr(a.n, (a.n as f64).powf(a.beta))?;
            let inst = generate_network(a.n, area, a.seed)?;
            write_or_print(a.out.as_deref(), &inst.to_json()?)
        }
        Command::Cutset(a) => {
            let mut cfg = load_config(&a.common, ExperimentKind::Cutset)?;
            cfg.kind = ExperimentKind::Cutset;
            if let Some(t) = a.phase_trials {
                cfg.phase_trials = t;
            }
            if let Some(m) = a.mode {
                cfg.cut_mode = match m {
                    ModeArg::Idealized => CutMode::Idealized,
                    ModeArg::Percolation => CutMode::Percolation,
                };
            }
            run_experiment(&cfg)
        }
        Command::Scheme(a) => {
            let mut cfg = load_config(&a.common, ExperimentKind::Scheme)?;
            cfg.kind = ExperimentKind::Scheme;
            cfg.scheme = match a.scheme {
                SchemeArg::Multihop => SchemeChoice::Multihop,
                SchemeArg::Hc => SchemeChoice::Hc,
                SchemeArg::BurstyHc => SchemeChoice::BurstyHc,
                SchemeArg::Hybrid => SchemeChoice::Hybrid,
            };
            run_experiment(&cfg)
        }
        Command::Hybrid(a) => {
            let mut cfg = load_config(&a.common, ExperimentKind::Scheme)?;
            cfg.kind = ExperimentKind::Scheme;
            cfg.scheme = SchemeChoice::Hybrid;
            if a.m.is_some() {
                cfg.hybrid_m = a.m;
            }
            run_experiment(&cfg)
        }
        Command::Percolation(common) => {
            let mut cfg = load_config(&common, ExperimentKind::Percolation)?;
            cfg.kind = ExperimentKind::Percolation;
            run_experiment(&cfg)
        }
        Command::PhaseDiagram(a) => {
            let mut cfg = load_config(&a.common, ExperimentKind::PhaseDiagram)?;
            cfg.kind = ExperimentKind::PhaseDiagram;
            if let Some(r) = a.alpha_range {
                let [lo, hi] = pair("--alpha-range", r)?;
                cfg.alpha_range = (lo, hi);
            }
            if let Some(r) = a.beta_range {
                let [lo, hi] = pair("--beta-range", r)?;
                cfg.beta_range = (lo, hi);
            }
            if let Some(r) = a.resolution {
                let [na, nb] = pair("--resolution", r)?;
                cfg.resolution = (na, nb);
            }
            run_experiment(&cfg)
        }
        Command::Fit(a) => {
            let points = read_fit_points(&a.input)?;
            let report = fit_report(&points, a.theory)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            Ok(())
        }
        Command::Sweep(common) => {
            if common.config.is_none() {
                return Err(Failure::Config("sweep needs --config".into()));
            }
            let cfg = load_config(&common, ExperimentKind::Scheme)?;
            run_experiment(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Experiment(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_EXPERIMENT)
        }
    }
}

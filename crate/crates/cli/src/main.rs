//! `monoci`: estimates, confidence bands, limit-distribution quantiles and
//! simulation experiments from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numeric non-convergence.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use monoci::band::{lr_band, lr_band_density, ConfidenceBand};
use monoci::bootstrap::{ci_type1, ci_type2, density_ratio_ci, Bandwidth, BootstrapConfig};
use monoci::grenander::{self, WeightedSample};
use monoci::limit_dist::{LimitProcessConfig, QuantileTable};
use monoci::sim_bench::{
    coverage_experiment, lr_null_distribution_experiment, mu_scaling_experiment, default_grid, CoverageMethod,
    DesignSpec, Model as SimModel, Profile, Truth,
};
use monoci::smle::{asymptotic_bias_truncexp, smle_cdf, smle_density};
use monoci::{current_status, io, Error};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "monoci", version, about = "Confidence intervals for monotone functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// MLE or smoothed MLE of a distribution function or decreasing density.
    Estimate(EstimateArgs),
    /// Pointwise confidence band.
    Ci(CiArgs),
    /// Monte-Carlo quantiles of the LR limit distribution, written as a cache file.
    Quantile(QuantileArgs),
    /// Coverage, μ̂-scaling and null-distribution experiments.
    Simulate(SimulateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    CurrentStatus,
    Density,
    CurrentDuration,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CiMethod {
    Lr,
    SmleBoot,
    SmleBootBiascorr,
    DensityRatio,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    /// Right end `b` of `[0, b]`; defaults to the largest observation.
    #[arg(long)]
    endpoint: Option<f64>,
    /// `auto`, `estimation` (b·n^{-1/5}), `undersmoothed` (b·n^{-1/4}) or a number.
    #[arg(long, default_value = "auto")]
    bandwidth: String,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, conflicts_with = "smle")]
    mle: bool,
    #[arg(long)]
    smle: bool,
}

#[derive(Args, Debug)]
struct CiArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    method: CiMethod,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Critical value for LR inversion.
    #[arg(long, conflicts_with = "quantile_cache")]
    quantile: Option<f64>,
    #[arg(long)]
    quantile_cache: Option<PathBuf>,
    #[arg(long = "B", default_value_t = 1000)]
    b: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Use `α'` instead of `1 − level` for the bootstrap percentiles.
    #[arg(long)]
    tighten: Option<f64>,
    /// Comma-separated evaluation points; defaults to `b·k/100`, k = 1..99.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct QuantileArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95,0.99")]
    levels: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.005)]
    step: f64,
    #[arg(long, default_value_t = 10_000)]
    replications: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Coverage,
    MuScaling,
    LrNull,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TruthArg {
    Uniform,
    Truncexp,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// Preset coverage design for figures 3-8 of the simulation study.
    #[arg(long)]
    figure: Option<u32>,
    #[arg(long, value_enum, default_value = "current-status")]
    model: Model,
    #[arg(long, value_enum, default_value = "uniform")]
    truth: TruthArg,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, conflicts_with = "paper_scale")]
    desk_scale: bool,
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "250,1000,4000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, conflicts_with = "quantile_cache")]
    quantile: Option<f64>,
    #[arg(long)]
    quantile_cache: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated evaluation points for coverage; defaults to `2k/100`, k = 1..99.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = Result<T, CliError>;

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Usage(_) | CliError::Core(Error::Domain(_)) => 2,
        CliError::Core(Error::NonConvergence { .. }) => 4,
        CliError::Core(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Ci(a) => cmd_ci(a),
        Command::Quantile(a) => cmd_quantile(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Core(c) => eprintln!("error: {c}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn header(seed: Option<u64>, notes: &[(&str, String)]) -> String {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut h = String::new();
    let _ = writeln!(h, "# monoci {VERSION}");
    let _ = writeln!(h, "# seed: {}", seed.map_or("none".to_string(), |s| s.to_string()));
    let _ = writeln!(h, "# args: {}", args.join(" "));
    for (k, v) in notes {
        let _ = writeln!(h, "# {k}: {v}");
    }
    h
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CliError::Core(Error::Io(e.error)))?;
    Ok(())
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn check_level(level: f64) -> CliResult<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--level {level} must lie in (0, 1)")))
    }
}

fn parse_bandwidth(spec: &str, auto: Bandwidth) -> CliResult<Bandwidth> {
    match spec {
        "auto" => Ok(auto),
        "estimation" => Ok(Bandwidth::Estimation),
        "undersmoothed" => Ok(Bandwidth::Undersmoothed),
        other => match other.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(CliError::Usage(format!(
                "--bandwidth must be auto, estimation, undersmoothed or a positive number, got {other:?}"
            ))),
        },
    }
}

enum Data {
    Status(current_status::CurrentStatusSample),
    Density { ws: WeightedSample, raw: Option<Vec<f64>> },
}

impl Data {
    fn max_time(&self) -> f64 {
        match self {
            Data::Status(s) => s.times()[s.len() - 1],
            Data::Density { ws, .. } => ws.times()[ws.m() - 1],
        }
    }

    fn n(&self) -> usize {
        match self {
            Data::Status(s) => s.len(),
            Data::Density { ws, .. } => ws.n() as usize,
        }
    }
}

/// Reads the input; current durations beyond `endpoint` are dropped.
fn load(args: &DataArgs) -> CliResult<(Data, f64)> {
    let data = match args.model {
        Model::CurrentStatus => Data::Status(io::read_current_status(open(&args.input)?)?),
        Model::Density => Data::Density {
            ws: io::read_density(open(&args.input)?)?,
            raw: None,
        },
        Model::CurrentDuration => {
            let mut raw = io::read_raw(open(&args.input)?)?;
            if let Some(b) = args.endpoint {
                raw.retain(|&x| x <= b);
            }
            Data::Density {
                ws: WeightedSample::from_raw(&raw)?,
                raw: Some(raw),
            }
        }
    };
    let b = match args.endpoint {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => return Err(CliError::Usage(format!("--endpoint {b} must be positive"))),
        None => data.max_time(),
    };
    Ok((data, b))
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let (data, b) = load(&args.data)?;
    let mut body = String::new();
    let mut notes = vec![("model", format!("{:?}", args.data.model))];
    if args.smle {
        let h = parse_bandwidth(&args.data.bandwidth, Bandwidth::Estimation)?.resolve(b, data.n());
        notes.push(("bandwidth", h.to_string()));
        notes.push(("endpoint", b.to_string()));
        let grid: Vec<f64> = (0..=100).map(|k| (b * k as f64 / 100.0).min(b)).collect();
        let values = match &data {
            Data::Status(s) => smle_cdf(&current_status::mle(s)?, h, b)?.eval_grid(&grid)?,
            Data::Density { ws, .. } => smle_density(&grenander::grenander_mle(ws)?, h, b)?.eval_grid(&grid)?,
        };
        body.push_str("t,value\n");
        for (t, v) in grid.iter().zip(&values) {
            let _ = writeln!(body, "{t},{v}");
        }
    } else {
        let (times, values) = match &data {
            Data::Status(s) => (s.times().to_vec(), current_status::mle_values(s)),
            Data::Density { ws, .. } => (ws.times().to_vec(), grenander::grenander_values(ws)),
        };
        notes.push((
            "convention",
            match data {
                Data::Status(_) => "right-continuous; value holds on [t_i, t_{i+1})".to_string(),
                Data::Density { .. } => "left-continuous; value holds on (t_{i-1}, t_i]".to_string(),
            },
        ));
        body.push_str("t,value\n");
        for (t, v) in times.iter().zip(&values) {
            let _ = writeln!(body, "{t},{v}");
        }
    }
    let out = header(None, &notes) + &body;
    write_atomic(&args.data.output, out.as_bytes())
}

fn critical_value(q: Option<f64>, cache: Option<&Path>, level: f64) -> CliResult<(f64, String)> {
    match (q, cache) {
        (Some(q), _) if q >= 0.0 && q.is_finite() => Ok((q, "--quantile".into())),
        (Some(q), _) => Err(CliError::Usage(format!("--quantile {q} must be finite and ≥ 0"))),
        (None, Some(path)) => {
            let table = QuantileTable::read_cache(path)?;
            let c = table.config;
            Ok((
                table.lookup(level)?,
                format!(
                    "cache {} (c={}, delta={}, R={}, seed={})",
                    path.display(),
                    c.horizon,
                    c.step,
                    c.replications,
                    c.seed
                ),
            ))
        }
        (None, None) => Err(CliError::Usage(
            "LR intervals need a critical value: pass --quantile <q>, or --quantile-cache <file> written by \
             `monoci quantile`"
                .into(),
        )),
    }
}

fn cmd_ci(args: &CiArgs) -> CliResult<()> {
    check_level(args.level)?;
    let (data, b) = load(&args.data)?;
    let grid = args.points.clone().unwrap_or_else(|| default_grid(b));
    let needs_seed = args.method != CiMethod::Lr;
    if needs_seed && args.seed.is_none() {
        return Err(CliError::Usage("bootstrap methods need --seed".into()));
    }
    let mut notes = vec![("model", format!("{:?}", args.data.model)), ("level", args.level.to_string())];
    let boot = |bandwidth: Bandwidth| BootstrapConfig {
        replications: args.b,
        level: args.level,
        tightened_alpha: args.tighten,
        bandwidth,
        endpoint: b,
        seed: args.seed.unwrap_or(0),
    };
    let band: ConfidenceBand = match (args.method, &data) {
        (CiMethod::Lr, _) => {
            let (q, source) = critical_value(args.quantile, args.quantile_cache.as_deref(), args.level)?;
            notes.push(("critical value", format!("{q} from {source}")));
            match &data {
                Data::Status(s) => lr_band(s, &grid, args.level, q)?,
                Data::Density { ws, .. } => lr_band_density(ws, &grid, args.level, q)?,
            }
        }
        (CiMethod::SmleBoot | CiMethod::SmleBootBiascorr, Data::Status(s)) => {
            let cfg = boot(parse_bandwidth(&args.data.bandwidth, Bandwidth::Undersmoothed)?);
            let h = cfg.bandwidth.resolve(b, s.len());
            notes.push(("bandwidth", h.to_string()));
            notes.push(("B", args.b.to_string()));
            if args.method == CiMethod::SmleBoot {
                ci_type1(s, &grid, &cfg)?
            } else {
                if b != 2.0 {
                    return Err(CliError::Usage(
                        "the bias correction is the truncated-exponential bias on [0, 2]; use --endpoint 2".into(),
                    ));
                }
                notes.push(("bias", "truncated exponential on [0, 2]".into()));
                let bias: Vec<f64> = grid
                    .iter()
                    .map(|&t| asymptotic_bias_truncexp(t, h))
                    .collect::<monoci::Result<_>>()?;
                ci_type2(s, &grid, &cfg, |t| {
                    grid.iter().position(|&g| g == t).map_or(0.0, |j| bias[j])
                })?
            }
        }
        (CiMethod::DensityRatio, Data::Density { ws, raw }) => {
            let raw = match raw {
                Some(r) => r.clone(),
                None => ws
                    .times()
                    .iter()
                    .zip(ws.weights())
                    .flat_map(|(&t, &w)| std::iter::repeat_n(t, w as usize))
                    .collect(),
            };
            let cfg = boot(parse_bandwidth(&args.data.bandwidth, Bandwidth::Undersmoothed)?);
            notes.push(("bandwidth", cfg.bandwidth.resolve(b, raw.len()).to_string()));
            notes.push(("B", args.b.to_string()));
            density_ratio_ci(&raw, &grid, &cfg)?
        }
        (m, _) => {
            return Err(CliError::Usage(format!(
                "method {m:?} is not available for model {:?}",
                args.data.model
            )))
        }
    };
    let mut out = header(args.seed.filter(|_| needs_seed), &notes).into_bytes();
    band.write_csv(&mut out)?;
    write_atomic(&args.data.output, &out)
}

fn cmd_quantile(args: &QuantileArgs) -> CliResult<()> {
    if args.levels.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(CliError::Usage(format!("--levels {:?} must lie in (0, 1)", args.levels)));
    }
    let config = LimitProcessConfig {
        horizon: args.horizon,
        step: args.step,
        replications: args.replications,
        seed: args.seed,
    };
    let mut table = QuantileTable::simulate(config, &args.levels)?;
    table.provenance = format!(
        "monoci {VERSION}; seed {}; args: {}",
        args.seed,
        std::env::args().skip(1).collect::<Vec<_>>().join(" ")
    );
    let mut text = table.to_json()?;
    text.push('\n');
    write_atomic(&args.output, text.as_bytes())
}

fn truth(t: TruthArg) -> Truth {
    match t {
        TruthArg::Uniform => Truth::Uniform02,
        TruthArg::Truncexp => Truth::TruncExp02,
    }
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    check_level(args.level)?;
    let profile = if args.paper_scale { Profile::PAPER } else { Profile::DESK };
    let n = args.n.unwrap_or(profile.n);
    let reps = args.reps.unwrap_or(profile.replications);
    let b_reps = args.b.unwrap_or(profile.bootstrap);
    let experiment = match (args.experiment, args.figure) {
        (Some(e), _) => e,
        (None, Some(_)) => Experiment::Coverage,
        (None, None) => return Err(CliError::Usage("pass --experiment or --figure".into())),
    };
    let model = match args.model {
        Model::CurrentStatus => SimModel::CurrentStatus,
        Model::Density => SimModel::MonotoneDensity,
        Model::CurrentDuration => {
            return Err(CliError::Usage("simulations use --model current-status or density".into()))
        }
    };
    let mut notes = vec![
        ("experiment", format!("{experiment:?}")),
        ("n", n.to_string()),
        ("replications", reps.to_string()),
    ];
    let mut out = Vec::new();
    match experiment {
        Experiment::Coverage => {
            let boot = |bandwidth, tightened_alpha| BootstrapConfig {
                replications: b_reps,
                level: args.level,
                tightened_alpha,
                bandwidth,
                endpoint: 2.0,
                seed: 0,
            };
            let lr = || -> CliResult<CoverageMethod> {
                let (q, _) = critical_value(args.quantile, args.quantile_cache.as_deref(), args.level)?;
                Ok(CoverageMethod::Lr { level: args.level, q })
            };
            let (design_truth, methods) = match args.figure {
                Some(3) | Some(4) => (
                    Truth::Uniform02,
                    vec![CoverageMethod::SmleBoot(boot(Bandwidth::Estimation, None)), lr()?],
                ),
                Some(5) => (
                    Truth::TruncExp02,
                    vec![
                        CoverageMethod::SmleBoot(boot(Bandwidth::Estimation, None)),
                        CoverageMethod::SmleBootBiasCorr(boot(Bandwidth::Estimation, None)),
                    ],
                ),
                Some(6) => (
                    Truth::TruncExp02,
                    vec![CoverageMethod::SmleBoot(boot(Bandwidth::Undersmoothed, None))],
                ),
                Some(7) | Some(8) => (
                    Truth::TruncExp02,
                    vec![CoverageMethod::SmleBoot(boot(Bandwidth::Undersmoothed, Some(0.04))), lr()?],
                ),
                Some(f) => {
                    return Err(CliError::Usage(format!(
                        "figure {f} is not a coverage study; figures 3-8 are available"
                    )))
                }
                None => {
                    let mut m = vec![lr()?];
                    if model == SimModel::CurrentStatus {
                        m.push(CoverageMethod::SmleBoot(boot(Bandwidth::Undersmoothed, None)));
                    }
                    (truth(args.truth), m)
                }
            };
            if let Some(f) = args.figure {
                notes.push(("figure", f.to_string()));
                if f == 6 {
                    notes.push(("second panel", "rerun with --figure 7 for α' = 0.04".into()));
                }
            }
            if methods.iter().any(|m| matches!(m, CoverageMethod::Lr { .. })) {
                let (q, source) = critical_value(args.quantile, args.quantile_cache.as_deref(), args.level)?;
                notes.push(("critical value", format!("{q} from {source}")));
            }
            notes.push(("truth", format!("{design_truth:?}")));
            notes.push(("B", b_reps.to_string()));
            let design = DesignSpec::new(if args.figure.is_some() { SimModel::CurrentStatus } else { model }, design_truth, n);
            let grid = args.points.clone().unwrap_or_else(|| default_grid(2.0));
            let report = coverage_experiment(&design, &grid, &methods, reps, args.seed)?;
            out.extend(header(Some(args.seed), &notes).into_bytes());
            report.write_csv(&mut out)?;
        }
        Experiment::MuScaling => {
            let design = DesignSpec::new(model, truth(args.truth), args.n_list[0]);
            notes.push(("truth", format!("{:?}", design.truth)));
            notes.push(("t0", args.t0.to_string()));
            let rows = mu_scaling_experiment(&design, args.t0, &args.n_list, reps, args.seed)?;
            out.extend(header(Some(args.seed), &notes).into_bytes());
            let mut body = String::from("n,median_abs_mu,reps\n");
            for (n, m) in rows {
                let _ = writeln!(body, "{n},{m},{reps}");
            }
            out.extend(body.into_bytes());
        }
        Experiment::LrNull => {
            let design = DesignSpec::new(model, truth(args.truth), n);
            notes.push(("truth", format!("{:?}", design.truth)));
            notes.push(("t0", args.t0.to_string()));
            let draws = lr_null_distribution_experiment(&design, args.t0, reps, args.seed)?;
            out.extend(header(Some(args.seed), &notes).into_bytes());
            let mut body = String::from("replicate,two_log_lr\n");
            for (r, v) in draws.iter().enumerate() {
                let _ = writeln!(body, "{r},{v}");
            }
            out.extend(body.into_bytes());
        }
    }
    write_atomic(&args.output, &out)
}

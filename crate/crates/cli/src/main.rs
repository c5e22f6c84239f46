//! `qmcse`: sampling, quantile reports, error bounds and replication studies.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for data errors.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qmcse_core::bounds::{
    min_sample_size, BlockChoice, BoundKind, BoundSpec, ErgodicityProfile, TargetCdf,
};
use qmcse_core::experiment::{
    quantile_report, run_experiment, write_quantile_report, ExperimentConfig, ExperimentKind, ExperimentReport,
    SamplerKind,
};
use qmcse_core::io::{read_trace_file, write_tour_summary, write_trace, TraceFile};
use qmcse_core::kde::KdeConfig;
use qmcse_core::regen::{run_regenerative_rw, RwRegenParams};
use qmcse_core::rng::child_rng;
use qmcse_core::samplers::{linchpin_lambda, run_rw, LinchpinInit, LinchpinSampler};
use qmcse_core::{Error, Method, Result};

#[derive(Parser)]
#[command(name = "qmcse", version, about = "Quantile estimates with Monte Carlo standard errors for MCMC output")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a reference sampler and write its trace.
    Sample(SampleArgs),
    /// Estimate quantiles, MCSEs and intervals from a trace file.
    QuantileReport(ReportArgs),
    /// Evaluate or invert a finite-sample error bound.
    Bounds(BoundsArgs),
    /// Run a replication study.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_parser = ["rw", "linchpin"])]
    sampler: String,
    /// Target degrees of freedom (random walk only).
    #[arg(long, default_value_t = 30.0)]
    v: f64,
    #[arg(long, default_value_t = 2.5)]
    sigma: f64,
    /// Number of iterations.
    #[arg(long, conflicts_with = "tours", required_unless_present = "tours")]
    n: Option<usize>,
    /// Run the random walk with regeneration until this many tours complete.
    #[arg(long)]
    tours: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "origin")]
    init: String,
    /// Trace CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `tour,length` for regenerative runs.
    #[arg(long)]
    tour_summary: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Trace CSV with `index,value[,regen]`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long = "q", value_delimiter = ',', default_value = "0.5")]
    quantiles: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "BM,SBM")]
    methods: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Fixed kernel bandwidth instead of Silverman's rule.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKindArg {
    Polynomial,
    Uniform,
    UniformImproved,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    kind: BoundKindArg,
    /// Sample size at which to evaluate the bound.
    #[arg(long, required_unless_present = "target")]
    n: Option<u64>,
    /// Blocking parameter; defaults to n/16, or the best over {n/2, n/4, ...} with --a-grid.
    #[arg(long)]
    a: Option<u64>,
    #[arg(long, conflicts_with = "a")]
    a_grid: bool,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.99999)]
    delta: f64,
    /// Degrees of freedom of the t target used for gamma.
    #[arg(long, default_value_t = 4.0)]
    df: f64,
    /// Use this gamma instead of computing it from the t target.
    #[arg(long)]
    gamma: Option<f64>,
    /// Minorization constant; defaults to the linchpin sampler's value.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n0: u64,
    /// Polynomial ergodicity order.
    #[arg(long)]
    m: Option<f64>,
    /// `E_pi M` for the polynomial profile.
    #[arg(long = "epim", alias = "EpiM")]
    epim: Option<f64>,
    /// Report the smallest n whose bound is at most this value.
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Interval coverage of BM, SBM and RS on the t random walk.
    Coverage(ExperimentArgs),
    /// Same study as `coverage`, labelled for half-width summaries.
    #[command(hide = true)]
    Halfwidth(ExperimentArgs),
    /// Linchpin sampler error frequencies against the error bound.
    Linchpin(ExperimentArgs),
    /// Tour lengths and acceptance rates of the regenerative random walk.
    TourStats(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long = "q", value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    tours: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Worker threads; does not affect results.
    #[arg(long)]
    workers: Option<usize>,
    /// Results CSV. The JSON report and any histograms are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names.iter().map(|s| s.trim().parse::<Method>()).collect()
}

fn parse_init(s: &str) -> Result<LinchpinInit> {
    s.parse()
}

fn kde_config(bandwidth: Option<f64>) -> Result<KdeConfig> {
    bandwidth.map_or(Ok(KdeConfig::Silverman), KdeConfig::fixed)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn sample(args: SampleArgs) -> Result<()> {
    let init = parse_init(&args.init)?;
    let mut rng = child_rng(args.seed, 0);
    let sampler: SamplerKind = args.sampler.parse()?;
    let trace = match (sampler, args.n, args.tours) {
        (SamplerKind::Rw, _, Some(tours)) => {
            let params = RwRegenParams::new(args.v, args.sigma)?;
            let trace = run_regenerative_rw(&params, tours, &mut rng)?;
            if let Some(path) = &args.tour_summary {
                write_tour_summary(File::create(path)?, &trace)?;
            }
            TraceFile::from(&trace)
        }
        (SamplerKind::Rw, Some(n), None) => TraceFile { values: run_rw(args.v, args.sigma, n, &mut rng)?.0, regen: None },
        (SamplerKind::Linchpin, Some(n), None) => {
            TraceFile { values: LinchpinSampler::new().run_x(n, init, &mut rng), regen: None }
        }
        (SamplerKind::Linchpin, _, Some(_)) => {
            return Err(Error::Config("regeneration is only available for the random walk".into()))
        }
        (_, None, None) => return Err(Error::Config("one of --n or --tours is required".into())),
    };
    if args.tour_summary.is_some() && trace.regen.is_none() {
        return Err(Error::Config("--tour-summary needs --tours".into()));
    }
    write_trace(output(args.out.as_deref())?, &trace.values, trace.regen.as_deref())
}

fn report(args: ReportArgs) -> Result<()> {
    let methods = parse_methods(&args.methods)?;
    let kde = kde_config(args.bandwidth)?;
    let trace = read_trace_file(&args.trace)?;
    let rows = quantile_report(&trace, &args.quantiles, &methods, args.confidence, kde)?;
    write_quantile_report(output(args.out.as_deref())?, &rows)
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let gamma = match args.gamma {
        Some(g) => g,
        None => qmcse_core::bounds::gamma_eps(&TargetCdf::student_t(args.df, args.q)?, args.q, args.eps, args.delta)?,
    };
    let choice = match (args.a, args.a_grid) {
        (Some(a), _) => BlockChoice::Fixed(a),
        (None, true) => BlockChoice::Grid,
        // Inversion optimizes a jointly with n unless a is pinned.
        (None, false) if args.target.is_some() => BlockChoice::Grid,
        (None, false) => BlockChoice::Fraction(16),
    };
    let lambda = args.lambda.unwrap_or_else(linchpin_lambda);
    let (kind, profile) = match args.kind {
        BoundKindArg::Polynomial => {
            let (Some(m), Some(epim)) = (args.m, args.epim) else {
                return Err(Error::Config("the polynomial bound needs --m and --epim".into()));
            };
            (BoundKind::Polynomial(choice), ErgodicityProfile::polynomial(m, epim)?)
        }
        BoundKindArg::Uniform => (BoundKind::Uniform(choice), ErgodicityProfile::uniform(lambda, args.n0)?),
        BoundKindArg::UniformImproved => (BoundKind::UniformImproved, ErgodicityProfile::uniform(lambda, args.n0)?),
    };
    let spec = BoundSpec { kind, gamma, profile };
    let n = match args.target {
        Some(target) => min_sample_size(&spec, target)?,
        None => args.n.expect("clap requires n without target"),
    };
    let (a, bound) = match spec.evaluate(n) {
        Ok(v) => {
            if v.is_vacuous() {
                log::warn!("bound {} at n = {n} is vacuous", v.bound);
            }
            (v.a, Some(v.bound))
        }
        Err(Error::Domain { threshold }) => {
            log::warn!("n = {n} is outside the validity domain n > {threshold}");
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let mut out = io::stdout().lock();
    writeln!(out, "kind,n,a,gamma,bound,valid")?;
    writeln!(
        out,
        "{},{n},{},{gamma},{},{}",
        kind.name(),
        a.map(|a| a.to_string()).unwrap_or_default(),
        bound.map(|b| b.to_string()).unwrap_or_default(),
        bound.is_some()
    )?;
    Ok(())
}

fn experiment_config(kind: ExperimentKind, args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if !(kind == ExperimentKind::Coverage && config.kind == ExperimentKind::Halfwidth) {
        config.kind = kind;
    }
    if args.v.is_some() {
        config.v = args.v;
    }
    if args.sigma.is_some() {
        config.sigma = args.sigma;
    }
    if let Some(q) = &args.quantiles {
        config.quantiles = q.clone();
    }
    if let Some(m) = &args.methods {
        config.methods = parse_methods(m).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(c) = args.confidence {
        config.confidence = c;
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(t) = &args.tours {
        config.tours = t.clone();
    }
    if let Some(l) = &args.lengths {
        config.lengths = l.clone();
    }
    if let Some(e) = args.eps {
        config.eps = e;
    }
    if let Some(d) = args.delta {
        config.delta = d;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(init) = &args.init {
        config.init = parse_init(init).map_err(|e| Error::Config(e.to_string()))?;
    }
    if args.bandwidth.is_some() {
        config.kde = kde_config(args.bandwidth).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.display().to_string());
    }
    config.resolve()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_outputs(report: &ExperimentReport) -> Result<()> {
    let Some(out) = report.config().output.as_deref().map(PathBuf::from) else {
        return report.write_csv(io::stdout().lock());
    };
    report.write_csv(File::create(&out)?)?;
    fs::write(sibling(&out, ".json"), report.to_json()? + "\n")?;
    let multi_q = report.config().quantiles.len() > 1;
    for hist in report.histograms() {
        let suffix = if multi_q { format!("_hist_n{}_q{}.csv", hist.n, hist.q) } else { format!("_hist_n{}.csv", hist.n) };
        hist.write_csv(File::create(sibling(&out, &suffix))?)?;
    }
    Ok(())
}

fn experiment(command: ExperimentCommand) -> Result<()> {
    let (kind, args) = match command {
        ExperimentCommand::Coverage(a) => (ExperimentKind::Coverage, a),
        ExperimentCommand::Halfwidth(a) => (ExperimentKind::Halfwidth, a),
        ExperimentCommand::Linchpin(a) => (ExperimentKind::LinchpinBound, a),
        ExperimentCommand::TourStats(a) => (ExperimentKind::TourStats, a),
    };
    let config = experiment_config(kind, &args)?;
    let report = run_experiment(&config, args.workers)?;
    write_outputs(&report)
}

fn exit_code(err: &Error) -> u8 {
    if err.is_data_error() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::QuantileReport(a) => report(a),
        Command::Bounds(a) => bounds(a),
        Command::Experiment(c) => experiment(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

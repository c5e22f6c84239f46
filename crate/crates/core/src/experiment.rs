//! Replication studies: interval coverage, the linchpin error-bound check and
//! regeneration tour statistics, plus the single-trace quantile report.
//!
//! Replications run on a rayon pool. Each replication draws from the
//! generator stream `child_rng(seed, cell_stream(cell, replication))` and
//! results are collected by index before aggregation, so a report depends
//! only on its configuration and never on the worker count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm::bm_quantile_ci;
use crate::bounds::{bound_uniform_improved, gamma_eps, ErgodicityProfile, TargetCdf};
use crate::dist::StudentT;
use crate::error::{Error, Result};
use crate::io::TraceFile;
use crate::kde::KdeConfig;
use crate::regen::{rs_quantile_ci, run_regenerative_rw, run_regenerative_rw_with_stats, RwRegenParams};
use crate::rng::{cell_stream, child_rng};
use crate::samplers::{linchpin_lambda, run_rw, LinchpinInit, LinchpinSampler};
use crate::sbm::sbm_quantile_ci;
use crate::trace::{check_confidence, empirical_quantile, Method, QuantileEstimate, QuantileSpec, ScalarTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Coverage,
    LinchpinBound,
    TourStats,
    /// Same study as `Coverage`; the report carries half-width summaries either way.
    Halfwidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Rw,
    Linchpin,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rw" => Ok(Self::Rw),
            "linchpin" => Ok(Self::Linchpin),
            other => Err(Error::Config(format!("unknown sampler {other:?}"))),
        }
    }
}

/// Where the true quantiles come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TruthSource {
    /// Exact quantiles of the `t` target.
    #[default]
    Analytic,
    /// Empirical quantiles of one long run of the configured sampler.
    Reference { iterations: usize, seed: u64 },
}

/// Declarative description of a replication study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Inferred from `kind` when absent.
    pub sampler: Option<SamplerKind>,
    /// Target degrees of freedom; fixed at 4 for the linchpin sampler.
    pub v: Option<f64>,
    /// Random-walk proposal scale.
    pub sigma: Option<f64>,
    pub init: LinchpinInit,
    pub quantiles: Vec<f64>,
    pub methods: Vec<Method>,
    pub confidence: f64,
    pub replications: u32,
    /// Regenerations per replication, one study cell per entry.
    pub tours: Vec<usize>,
    /// Iterations per replication for the linchpin study.
    pub lengths: Vec<usize>,
    /// Error tolerance `eps` and bound parameter `delta` for the linchpin study.
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub truth: TruthSource,
    pub kde: KdeConfig,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Coverage,
            sampler: None,
            v: None,
            sigma: None,
            init: LinchpinInit::Origin,
            quantiles: vec![0.5],
            methods: Method::ALL.to_vec(),
            confidence: 0.95,
            replications: 100,
            tours: vec![500],
            lengths: vec![500, 1000, 4700],
            eps: 0.1,
            delta: 0.99999,
            seed: 0,
            truth: TruthSource::Analytic,
            kde: KdeConfig::Silverman,
            output: None,
        }
    }
}

fn config_err(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(format!("bad experiment config: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills kind-dependent defaults and checks every field.
    pub fn resolve(mut self) -> Result<Self> {
        let wanted = match self.kind {
            ExperimentKind::LinchpinBound => SamplerKind::Linchpin,
            _ => SamplerKind::Rw,
        };
        let sampler = *self.sampler.get_or_insert(wanted);
        if sampler != wanted {
            return Err(config_err(format!("{:?} experiments need the {wanted:?} sampler", self.kind)));
        }
        match sampler {
            SamplerKind::Rw => {
                let v = *self.v.get_or_insert(30.0);
                let sigma = *self.sigma.get_or_insert(2.5);
                if !(v > 2.0 && v.is_finite()) {
                    return Err(config_err(format!("v = {v} must exceed 2 for regeneration")));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(config_err(format!("sigma = {sigma} must be positive")));
                }
            }
            SamplerKind::Linchpin => {
                if self.v.is_some_and(|v| v != 4.0) {
                    return Err(config_err("the linchpin sampler targets t(4); v must be 4 or absent"));
                }
                if self.sigma.is_some() {
                    return Err(config_err("the linchpin sampler has no proposal scale"));
                }
                self.v = Some(4.0);
            }
        }
        if self.quantiles.is_empty() {
            return Err(config_err("no quantiles requested"));
        }
        for &q in &self.quantiles {
            QuantileSpec::new(q).map_err(|_| config_err(format!("quantile {q} is not in (0, 1)")))?;
        }
        let mut seen = Vec::new();
        self.methods.retain(|m| {
            let fresh = !seen.contains(m);
            seen.push(*m);
            fresh
        });
        if self.methods.is_empty() && matches!(self.kind, ExperimentKind::Coverage | ExperimentKind::Halfwidth) {
            return Err(config_err("no methods requested"));
        }
        check_confidence(self.confidence).map_err(|e| config_err(e.to_string()))?;
        match self.kind {
            ExperimentKind::Coverage | ExperimentKind::Halfwidth => {
                if self.tours.is_empty() || self.tours.iter().any(|&r| r < 3) {
                    return Err(config_err("coverage studies need tour counts of at least 3"));
                }
            }
            ExperimentKind::TourStats => {
                if self.tours.is_empty() || self.tours.contains(&0) {
                    return Err(config_err("tour counts must be positive"));
                }
            }
            ExperimentKind::LinchpinBound => {
                if self.lengths.is_empty() || self.lengths.contains(&0) {
                    return Err(config_err("simulation lengths must be positive"));
                }
                if !(self.eps > 0.0 && self.eps.is_finite()) {
                    return Err(config_err(format!("eps = {} must be positive", self.eps)));
                }
                if !(self.delta > 0.0 && self.delta < 1.0) {
                    return Err(config_err(format!("delta = {} is not in (0, 1)", self.delta)));
                }
            }
        }
        if let KdeConfig::Fixed(h) = self.kde {
            KdeConfig::fixed(h).map_err(|e| config_err(e.to_string()))?;
        }
        if let TruthSource::Reference { iterations, .. } = self.truth {
            if iterations == 0 {
                return Err(config_err("reference run needs at least one iteration"));
            }
        }
        Ok(self)
    }

    fn df(&self) -> f64 {
        self.v.expect("resolved config")
    }

    fn rw_params(&self) -> Result<RwRegenParams> {
        RwRegenParams::new(self.df(), self.sigma.expect("resolved config")).map_err(|e| config_err(e.to_string()))
    }

    /// True quantile for each configured `q`.
    pub fn truth_values(&self) -> Result<Vec<f64>> {
        match self.truth {
            TruthSource::Analytic => {
                let t = StudentT::new(self.df()).map_err(|e| config_err(e.to_string()))?;
                self.quantiles.iter().map(|&q| t.quantile(q).map_err(|e| config_err(e.to_string()))).collect()
            }
            TruthSource::Reference { iterations, seed } => {
                let mut rng = child_rng(seed, 0);
                let values = match self.sampler.expect("resolved config") {
                    SamplerKind::Rw => run_rw(self.df(), self.sigma.expect("resolved config"), iterations, &mut rng)?.0,
                    SamplerKind::Linchpin => LinchpinSampler::new().run_x(iterations, self.init, &mut rng),
                };
                let trace = ScalarTrace::new(values)?;
                self.quantiles.iter().map(|&q| empirical_quantile(&trace, QuantileSpec::new(q)?)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Fully resolved configuration; running it again reproduces the report.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub version: String,
}

/// Per `(tours, method, q)` coverage summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub tours: usize,
    pub method: Method,
    pub q: f64,
    pub truth: f64,
    /// Replications that produced an interval.
    pub replications: u32,
    pub failures: u32,
    pub covered: u32,
    pub coverage: Option<f64>,
    /// `sqrt(p (1 - p) / replications)`.
    pub coverage_mcse: Option<f64>,
    pub halfwidth_mean: Option<f64>,
    pub halfwidth_sd: Option<f64>,
    /// Mean retained chain length.
    pub mean_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinchpinRow {
    pub n: usize,
    pub q: f64,
    pub truth: f64,
    pub replications: u32,
    /// Replications with `|xi_hat - xi| > eps`.
    pub exceed: u32,
    pub proportion: Option<f64>,
    pub proportion_mcse: Option<f64>,
    pub gamma: f64,
    /// Improved uniform-ergodicity bound; absent below its validity threshold.
    pub bound: Option<f64>,
    pub bound_valid: bool,
    pub outside_histogram: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub n: usize,
    pub q: f64,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourStatsRow {
    pub v: f64,
    pub sigma: f64,
    pub tours_per_replication: usize,
    pub replications: u32,
    pub total_tours: u64,
    pub mean_length: Option<f64>,
    /// Missing when fewer than two tours were observed.
    pub sd_length: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub mean_burn_in: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportBody {
    Coverage { cells: Vec<CoverageCell> },
    LinchpinBound { rows: Vec<LinchpinRow>, histograms: Vec<Histogram> },
    TourStats { rows: Vec<TourStatsRow> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub warnings: Vec<String>,
    pub body: ReportBody,
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T], header: &[&str]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

const COVERAGE_HEADER: [&str; 12] = [
    "tours",
    "method",
    "q",
    "truth",
    "replications",
    "failures",
    "covered",
    "coverage",
    "coverage_mcse",
    "halfwidth_mean",
    "halfwidth_sd",
    "mean_length",
];
const LINCHPIN_HEADER: [&str; 11] = [
    "n",
    "q",
    "truth",
    "replications",
    "exceed",
    "proportion",
    "proportion_mcse",
    "gamma",
    "bound",
    "bound_valid",
    "outside_histogram",
];
const TOUR_HEADER: [&str; 9] = [
    "v",
    "sigma",
    "tours_per_replication",
    "replications",
    "total_tours",
    "mean_length",
    "sd_length",
    "acceptance_rate",
    "mean_burn_in",
];

impl ExperimentReport {
    pub fn config(&self) -> &ExperimentConfig {
        &self.provenance.config
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Main results table as CSV with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        match &self.body {
            ReportBody::Coverage { cells } => write_rows(out, cells, &COVERAGE_HEADER),
            ReportBody::LinchpinBound { rows, .. } => write_rows(out, rows, &LINCHPIN_HEADER),
            ReportBody::TourStats { rows } => write_rows(out, rows, &TOUR_HEADER),
        }
    }

    pub fn coverage_cells(&self) -> &[CoverageCell] {
        match &self.body {
            ReportBody::Coverage { cells } => cells,
            _ => &[],
        }
    }

    pub fn histograms(&self) -> &[Histogram] {
        match &self.body {
            ReportBody::LinchpinBound { histograms, .. } => histograms,
            _ => &[],
        }
    }
}

impl Histogram {
    /// `bin_left,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.bins, &["bin_left", "count"])
    }
}

/// Histogram bins of width 0.02 covering [-0.6, 0.6].
const HIST_BINS: usize = 60;

fn hist_index(x: f64) -> Option<usize> {
    let k = ((x + 0.6) * 50.0).floor();
    (k >= 0.0 && k < HIST_BINS as f64).then_some(k as usize)
}

fn hist_left(k: usize) -> f64 {
    (k as f64 - 30.0) / 50.0
}

fn par_collect<T: Send>(workers: Option<usize>, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| config_err(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

fn proportion(hits: u32, total: u32) -> (Option<f64>, Option<f64>) {
    if total == 0 {
        return (None, None);
    }
    let p = hits as f64 / total as f64;
    (Some(p), Some((p * (1.0 - p) / total as f64).sqrt()))
}

fn provenance(config: &ExperimentConfig) -> Provenance {
    Provenance { config: config.clone(), seed: config.seed, version: env!("CARGO_PKG_VERSION").to_string() }
}

fn zero_rep_warning(config: &ExperimentConfig, warnings: &mut Vec<String>) -> bool {
    if config.replications == 0 {
        let msg = "zero replications requested; the report is empty".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
        true
    } else {
        false
    }
}

/// Runs whichever study `config.kind` names.
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    match config.kind {
        ExperimentKind::Coverage | ExperimentKind::Halfwidth => run_coverage_experiment(config, workers),
        ExperimentKind::LinchpinBound => run_linchpin_bound_experiment(config, workers),
        ExperimentKind::TourStats => run_tour_stats(config, workers),
    }
}

fn estimate(method: Method, trace: &crate::regen::RegenTrace, spec: QuantileSpec, config: &ExperimentConfig) -> Result<QuantileEstimate> {
    match method {
        Method::BatchMeans => bm_quantile_ci(trace.scalar_trace(), spec, config.confidence, config.kde),
        Method::Subsampling => sbm_quantile_ci(trace.scalar_trace(), spec, config.confidence),
        Method::Regenerative => rs_quantile_ci(trace, spec, config.confidence, config.kde),
    }
}

/// Coverage of BM, SBM and RS intervals built on the same regenerative runs.
pub fn run_coverage_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    let config = config.clone().resolve()?;
    let truth = config.truth_values()?;
    let params = config.rw_params()?;
    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    if zero_rep_warning(&config, &mut warnings) {
        return Ok(ExperimentReport { provenance: provenance(&config), warnings, body: ReportBody::Coverage { cells } });
    }
    let specs: Vec<QuantileSpec> = config.quantiles.iter().map(|&q| QuantileSpec::new(q)).collect::<Result<_>>()?;
    let reps = config.replications as usize;
    for (cell, &tours) in config.tours.iter().enumerate() {
        // outcome[rep] = (chain length, per (method, q) Some((covered, half width)) or None on failure)
        let outcomes = par_collect(workers, reps, |rep| {
            let mut rng = child_rng(config.seed, cell_stream(cell as u32, rep as u32));
            let trace = match run_regenerative_rw(&params, tours, &mut rng) {
                Ok(trace) => trace,
                Err(e) => return (None, vec![Err(e.to_string()); config.methods.len() * specs.len()]),
            };
            let mut scores = Vec::with_capacity(config.methods.len() * specs.len());
            for &method in &config.methods {
                for (spec, &xi) in specs.iter().zip(&truth) {
                    scores.push(
                        estimate(method, &trace, *spec, &config)
                            .map(|est| (est.contains(xi), est.half_width()))
                            .map_err(|e| e.to_string()),
                    );
                }
            }
            (Some(trace.len()), scores)
        })?;
        let lengths: Vec<f64> = outcomes.iter().filter_map(|(len, _)| len.map(|l| l as f64)).collect();
        let mean_length = mean_sd(&lengths).0;
        for (mi, &method) in config.methods.iter().enumerate() {
            for (qi, (&q, &xi)) in config.quantiles.iter().zip(&truth).enumerate() {
                let idx = mi * specs.len() + qi;
                let mut covered = 0;
                let mut failures = 0;
                let mut widths = Vec::with_capacity(reps);
                for (rep, (_, scores)) in outcomes.iter().enumerate() {
                    match &scores[idx] {
                        Ok((hit, width)) => {
                            covered += u32::from(*hit);
                            widths.push(*width);
                        }
                        Err(message) => {
                            failures += 1;
                            log::debug!("tours {tours}, {method}, q {q}, replication {rep}: {message}");
                        }
                    }
                }
                if failures > 0 {
                    warnings.push(format!("tours {tours}, {method}, q {q}: {failures} replications failed"));
                }
                let ok = widths.len() as u32;
                let (coverage, coverage_mcse) = proportion(covered, ok);
                let (halfwidth_mean, halfwidth_sd) = mean_sd(&widths);
                cells.push(CoverageCell {
                    tours,
                    method,
                    q,
                    truth: xi,
                    replications: ok,
                    failures,
                    covered,
                    coverage,
                    coverage_mcse,
                    halfwidth_mean,
                    halfwidth_sd,
                    mean_length,
                });
            }
        }
    }
    Ok(ExperimentReport { provenance: provenance(&config), warnings, body: ReportBody::Coverage { cells } })
}

/// Frequency of `|xi_hat - xi| > eps` for the linchpin sampler, set against
/// the improved uniform-ergodicity bound at each simulation length.
pub fn run_linchpin_bound_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    let config = config.clone().resolve()?;
    let truth = config.truth_values()?;
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut histograms = Vec::new();
    if zero_rep_warning(&config, &mut warnings) {
        return Ok(ExperimentReport {
            provenance: provenance(&config),
            warnings,
            body: ReportBody::LinchpinBound { rows, histograms },
        });
    }
    let target_df = config.df();
    let profile = ErgodicityProfile::uniform(linchpin_lambda(), 1)?;
    let sampler = LinchpinSampler::new();
    let specs: Vec<QuantileSpec> = config.quantiles.iter().map(|&q| QuantileSpec::new(q)).collect::<Result<_>>()?;
    for (cell, &n) in config.lengths.iter().enumerate() {
        let estimates = par_collect(workers, config.replications as usize, |rep| {
            let mut rng = child_rng(config.seed, cell_stream(cell as u32, rep as u32));
            let trace = ScalarTrace::new(sampler.run_x(n, config.init, &mut rng))?;
            specs.iter().map(|&spec| empirical_quantile(&trace, spec)).collect::<Result<Vec<f64>>>()
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (qi, (&q, &xi)) in config.quantiles.iter().zip(&truth).enumerate() {
            let target = TargetCdf::student_t(target_df, q)?;
            let gamma = gamma_eps(&target, q, config.eps, config.delta).map_err(|e| config_err(e.to_string()))?;
            let bound = match bound_uniform_improved(n as u64, gamma, &profile) {
                Ok(b) => Some(b),
                Err(Error::Domain { .. }) => None,
                Err(e) => return Err(e),
            };
            let mut exceed = 0;
            let mut outside = 0;
            let mut bins = vec![0u32; HIST_BINS];
            for est in &estimates {
                let err = est[qi] - xi;
                exceed += u32::from(err.abs() > config.eps);
                match hist_index(est[qi]) {
                    Some(k) => bins[k] += 1,
                    None => outside += 1,
                }
            }
            let (p, mcse) = proportion(exceed, config.replications);
            rows.push(LinchpinRow {
                n,
                q,
                truth: xi,
                replications: config.replications,
                exceed,
                proportion: p,
                proportion_mcse: mcse,
                gamma,
                bound,
                bound_valid: bound.is_some(),
                outside_histogram: outside,
            });
            histograms.push(Histogram {
                n,
                q,
                bins: bins.into_iter().enumerate().map(|(k, count)| HistogramBin { bin_left: hist_left(k), count }).collect(),
            });
        }
    }
    Ok(ExperimentReport { provenance: provenance(&config), warnings, body: ReportBody::LinchpinBound { rows, histograms } })
}

/// Tour-length and acceptance statistics of the regenerative random walk.
pub fn run_tour_stats(config: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentReport> {
    let config = config.clone().resolve()?;
    let params = config.rw_params()?;
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    if zero_rep_warning(&config, &mut warnings) {
        return Ok(ExperimentReport { provenance: provenance(&config), warnings, body: ReportBody::TourStats { rows } });
    }
    for (cell, &tours) in config.tours.iter().enumerate() {
        let runs = par_collect(workers, config.replications as usize, |rep| {
            let mut rng = child_rng(config.seed, cell_stream(cell as u32, rep as u32));
            run_regenerative_rw_with_stats(&params, tours, &mut rng).map(|(trace, stats)| {
                let lengths = trace.tour_lengths();
                let sum: u128 = lengths.iter().map(|&l| l as u128).sum();
                let sum_sq: u128 = lengths.iter().map(|&l| (l as u128) * (l as u128)).sum();
                (lengths.len() as u128, sum, sum_sq, stats)
            })
        })?;
        let (mut count, mut sum, mut sum_sq) = (0u128, 0u128, 0u128);
        let (mut proposals, mut accepted, mut burn_in) = (0u64, 0u64, 0u64);
        for run in runs {
            let (c, s, ss, stats) = run?;
            count += c;
            sum += s;
            sum_sq += ss;
            proposals += stats.proposals;
            accepted += stats.accepted;
            burn_in += stats.burn_in;
        }
        let mean_length = (count > 0).then(|| sum as f64 / count as f64);
        // Exact integer numerator for the sample variance.
        let sd_length = (count >= 2).then(|| (((count * sum_sq - sum * sum) as f64) / ((count * (count - 1)) as f64)).sqrt());
        rows.push(TourStatsRow {
            v: config.df(),
            sigma: params.sigma,
            tours_per_replication: tours,
            replications: config.replications,
            total_tours: count as u64,
            mean_length,
            sd_length,
            acceptance_rate: (proposals > 0).then(|| accepted as f64 / proposals as f64),
            mean_burn_in: Some(burn_in as f64 / config.replications as f64),
        });
    }
    Ok(ExperimentReport { provenance: provenance(&config), warnings, body: ReportBody::TourStats { rows } })
}

/// One row of [`quantile_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileReportRow {
    pub q: f64,
    pub method: Method,
    pub n: usize,
    pub tours: Option<usize>,
    pub point: f64,
    pub avar: f64,
    pub mcse: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub multiplier: f64,
    pub bandwidth: Option<f64>,
    pub batch_count: Option<usize>,
    pub batch_size: Option<usize>,
    pub block_length: Option<usize>,
}

pub const QUANTILE_REPORT_HEADER: [&str; 15] = [
    "q",
    "method",
    "n",
    "tours",
    "point",
    "avar",
    "mcse",
    "ci_low",
    "ci_high",
    "confidence",
    "multiplier",
    "bandwidth",
    "batch_count",
    "batch_size",
    "block_length",
];

/// Point estimate, MCSE and interval for every `(q, method)` pair on one trace.
pub fn quantile_report(
    trace: &TraceFile,
    quantiles: &[f64],
    methods: &[Method],
    confidence: f64,
    kde: KdeConfig,
) -> Result<Vec<QuantileReportRow>> {
    check_confidence(confidence)?;
    let scalar = trace.scalar_trace()?;
    let regen = if methods.contains(&Method::Regenerative) { Some(trace.regen_trace()?) } else { None };
    let mut rows = Vec::with_capacity(quantiles.len() * methods.len());
    for &q in quantiles {
        let spec = QuantileSpec::new(q)?;
        for &method in methods {
            let est = match method {
                Method::BatchMeans => bm_quantile_ci(&scalar, spec, confidence, kde)?,
                Method::Subsampling => sbm_quantile_ci(&scalar, spec, confidence)?,
                Method::Regenerative => rs_quantile_ci(regen.as_ref().expect("checked above"), spec, confidence, kde)?,
            };
            rows.push(QuantileReportRow {
                q,
                method,
                n: scalar.len(),
                tours: regen.as_ref().filter(|_| method == Method::Regenerative).map(|r| r.tours()),
                point: est.point,
                avar: est.avar,
                mcse: est.mcse,
                ci_low: est.ci_low,
                ci_high: est.ci_high,
                confidence: est.confidence,
                multiplier: est.multiplier,
                bandwidth: est.bandwidth,
                batch_count: est.batch_count,
                batch_size: est.batch_size,
                block_length: est.block_length,
            });
        }
    }
    Ok(rows)
}

pub fn write_quantile_report<W: Write>(out: W, rows: &[QuantileReportRow]) -> Result<()> {
    write_rows(out, rows, &QUANTILE_REPORT_HEADER)
}

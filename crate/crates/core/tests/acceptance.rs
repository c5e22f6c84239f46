//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qmcse_core::bm::{batch_means, bm_sigma2, BatchLayout};
use qmcse_core::bounds::{
    bound_polynomial, bound_uniform, bound_uniform_improved, gamma_eps, ErgodicityProfile, TargetCdf,
};
use qmcse_core::dist::normal_pdf;
use qmcse_core::experiment::{
    run_coverage_experiment, run_experiment, run_linchpin_bound_experiment, run_tour_stats, CoverageCell,
    ExperimentConfig, ExperimentKind, ReportBody,
};
use qmcse_core::regen::{regen_prob_accepted, rs_gamma_hat, RegenTrace, RwRegenParams};
use qmcse_core::samplers::{linchpin_lambda, LinchpinInit};
use qmcse_core::sbm::{block_quantiles, sbm_gamma2, SubsampleLayout};
use qmcse_core::{ecdf, empirical_quantile, Method, QuantileSpec, ScalarTrace};

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, id: u32, name: &str, start: Instant, outcome: Result<String, String>) {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {id}. {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {id}. {name} ({secs:.1}s): {detail}");
            }
        }
    }
}

/// Collects sub-check results into one criterion outcome.
#[derive(Default)]
struct Checks {
    lines: Vec<String>,
    failed: bool,
}

impl Checks {
    fn check(&mut self, ok: bool, line: String) {
        self.failed |= !ok;
        self.lines.push(if ok { line } else { format!("[x] {line}") });
    }

    fn finish(self) -> Result<String, String> {
        let text = self.lines.join("; ");
        if self.failed {
            Err(text)
        } else {
            Ok(text)
        }
    }
}

fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    got == want || (got - want).abs() <= tol * want.abs()
}

fn normal_trace(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_regen(rng: &mut ChaCha8Rng, n: usize) -> RegenTrace {
    let values = normal_trace(rng, n);
    let mut flags: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.25).collect();
    flags[n - 1] = true;
    RegenTrace::new(values, flags).unwrap()
}

fn criterion_bounds() -> Result<String, String> {
    let mut c = Checks::default();
    let target = TargetCdf::student_t(4.0, 0.5).map_err(|e| e.to_string())?;
    let gamma = gamma_eps(&target, 0.5, 0.1, 0.99999).map_err(|e| e.to_string())?;
    c.check((gamma - 0.037422).abs() <= 5e-7, format!("gamma = {gamma:.9} (0.037422 +- 5e-7)"));
    let profile = ErgodicityProfile::uniform(linchpin_lambda(), 1).map_err(|e| e.to_string())?;
    let improved = bound_uniform_improved(4700, gamma, &profile).map_err(|e| e.to_string())?;
    c.check((improved - 0.101).abs() <= 1e-3, format!("improved(4700) = {improved:.6} (0.101 +- 0.001)"));
    let n = 400_000;
    let uniform = bound_uniform(n, n / 16, gamma, &profile).map_err(|e| e.to_string())?;
    c.check((uniform - 0.101).abs() <= 1e-3, format!("uniform(4e5, n/16) = {uniform:.6} (0.101 +- 0.001)"));
    c.finish()
}

fn criterion_linchpin() -> Result<String, String> {
    let config = ExperimentConfig {
        kind: ExperimentKind::LinchpinBound,
        replications: 500,
        lengths: vec![500, 1000, 4700],
        // The bound assumes a stationary start.
        init: LinchpinInit::Stationary,
        seed: 20_260_001,
        ..Default::default()
    };
    let report = run_linchpin_bound_experiment(&config, None).map_err(|e| e.to_string())?;
    let ReportBody::LinchpinBound { rows, .. } = &report.body else { return Err("wrong report body".into()) };
    let mut c = Checks::default();
    for row in rows {
        let p = row.proportion.unwrap_or(f64::NAN);
        if row.n == 4700 {
            c.check(p <= 0.01, format!("n={}: {}/500 = {p:.3} (<= 0.01)", row.n, row.exceed));
        } else {
            let reference = if row.n == 500 { 0.12 } else { 0.018 };
            let se = (reference * (1.0 - reference) / 500.0f64).sqrt();
            c.check(
                (p - reference).abs() <= 3.0 * se,
                format!("n={}: {}/500 = {p:.3} (ref {reference} +- {:.4})", row.n, row.exceed, 3.0 * se),
            );
        }
        let bound = row.bound.unwrap_or(f64::INFINITY);
        c.check(p <= bound, format!("bound {bound:.4}"));
    }
    c.finish()
}

fn criterion_tours() -> Result<String, String> {
    let mut c = Checks::default();
    let mut rates = Vec::new();
    for (v, sigma, mean_ref, rate_ref) in [(30.0, 2.5, 3.58, Some(0.40)), (6.0, 3.5, 4.21, None), (3.0, 5.5, 5.60, Some(0.25))] {
        let config = ExperimentConfig {
            kind: ExperimentKind::TourStats,
            v: Some(v),
            sigma: Some(sigma),
            replications: 1,
            tours: vec![100_000],
            seed: 20_260_003,
            ..Default::default()
        };
        let report = run_tour_stats(&config, None).map_err(|e| e.to_string())?;
        let ReportBody::TourStats { rows } = &report.body else { return Err("wrong report body".into()) };
        let mean = rows[0].mean_length.unwrap_or(f64::NAN);
        let rate = rows[0].acceptance_rate.unwrap_or(f64::NAN);
        c.check((mean - mean_ref).abs() <= 0.05 * mean_ref, format!("t{v}: mean tour {mean:.3} (ref {mean_ref} +- 5%)"));
        if let Some(r) = rate_ref {
            c.check((rate - r).abs() <= 0.05, format!("t{v}: acceptance {rate:.3} (ref {r} +- 0.05)"));
        }
        rates.push(rate);
    }
    let (hi, mid, lo) = (rates[0], rates[1], rates[2]);
    c.check(lo < mid && mid < hi, format!("t6 acceptance {mid:.3} between {lo:.3} and {hi:.3}"));
    c.finish()
}

fn coverage_reference(tours: usize, q: f64, method: Method) -> f64 {
    match (tours, q == 0.5, method) {
        (500, true, Method::BatchMeans) => 0.941,
        (500, true, Method::Subsampling) => 0.946,
        (500, true, Method::Regenerative) => 0.952,
        (500, false, Method::BatchMeans) => 0.935,
        (500, false, Method::Subsampling) => 0.944,
        (500, false, Method::Regenerative) => 0.947,
        (_, true, Method::BatchMeans) => 0.946,
        (_, true, Method::Subsampling) => 0.948,
        (_, true, Method::Regenerative) => 0.951,
        (_, false, Method::BatchMeans) => 0.946,
        (_, false, Method::Subsampling) => 0.948,
        (_, false, Method::Regenerative) => 0.951,
    }
}

fn coverage_cells() -> Result<Vec<CoverageCell>, String> {
    let config = ExperimentConfig {
        kind: ExperimentKind::Coverage,
        v: Some(30.0),
        sigma: Some(2.5),
        quantiles: vec![0.5, 0.75],
        tours: vec![500, 2000],
        replications: 1000,
        seed: 20_260_004,
        ..Default::default()
    };
    let report = run_coverage_experiment(&config, Some(4)).map_err(|e| e.to_string())?;
    Ok(report.coverage_cells().to_vec())
}

fn criterion_coverage(cells: &[CoverageCell]) -> Result<String, String> {
    let mut c = Checks::default();
    for cell in cells {
        let reference = coverage_reference(cell.tours, cell.q, cell.method);
        let p = cell.coverage.unwrap_or(f64::NAN);
        c.check(
            (p - reference).abs() <= 0.025 && cell.failures == 0,
            format!("R={} q={} {}: {p:.3} (ref {reference})", cell.tours, cell.q, cell.method),
        );
    }
    c.finish()
}

fn criterion_halfwidth(cells: &[CoverageCell]) -> Result<String, String> {
    let mut c = Checks::default();
    for (method, reference) in [(Method::BatchMeans, 0.120), (Method::Subsampling, 0.121), (Method::Regenerative, 0.124)] {
        let cell = cells
            .iter()
            .find(|c| c.tours == 500 && c.q == 0.5 && c.method == method)
            .ok_or("missing coverage cell")?;
        let hw = cell.halfwidth_mean.unwrap_or(f64::NAN);
        c.check((hw - reference).abs() <= 0.1 * reference, format!("{method}: {hw:.4} (ref {reference} +- 10%)"));
    }
    c.finish()
}

fn naive_blocks(values: &[f64], q: f64, b: usize) -> Vec<f64> {
    let nq = b as f64 * q;
    let j = if (nq - nq.round()).abs() <= 4.0 * f64::EPSILON * nq { nq.round() } else { nq.ceil() } as usize;
    let j = j.clamp(1, b);
    values
        .windows(b)
        .map(|w| {
            let mut s = w.to_vec();
            s.sort_by(|x, y| x.partial_cmp(y).unwrap());
            s[j - 1]
        })
        .collect()
}

fn bm_oracle(values: &[f64], y: f64, a: usize, b: usize) -> f64 {
    let means: Vec<f64> = (0..a)
        .map(|k| values[k * b..(k + 1) * b].iter().filter(|&&v| v <= y).count() as f64 / b as f64)
        .collect();
    let fbar = means.iter().sum::<f64>() / a as f64;
    b as f64 / (a as f64 - 1.0) * means.iter().map(|u| (u - fbar) * (u - fbar)).sum::<f64>()
}

fn sbm_oracle(values: &[f64], q: f64, b: usize) -> f64 {
    let xs = naive_blocks(values, q, b);
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    b as f64 / m * xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
}

fn rs_oracle(values: &[f64], flags: &[bool], y: f64) -> f64 {
    let (mut s, mut n) = (vec![0.0], vec![0.0]);
    for (i, (&v, &f)) in values.iter().zip(flags).enumerate() {
        *n.last_mut().unwrap() += 1.0;
        if v <= y {
            *s.last_mut().unwrap() += 1.0;
        }
        if f && i + 1 < values.len() {
            s.push(0.0);
            n.push(0.0);
        }
    }
    let r = n.len() as f64;
    let fhat = s.iter().sum::<f64>() / n.iter().sum::<f64>();
    let nbar = n.iter().sum::<f64>() / r;
    s.iter().zip(&n).map(|(s, n)| (s - fhat * n).powi(2)).sum::<f64>() / (r * nbar * nbar)
}

/// Regeneration probability as `s'(x) nu'(y) / (q(x, y) alpha(x, y))`.
fn factorization_oracle(x: f64, y: f64, p: &RwRegenParams) -> f64 {
    let v = p.df;
    let target = |z: f64| (1.0 + z * z / v).powf(-(v + 1.0) / 2.0);
    let q = |from: f64, to: f64| normal_pdf((to - from) / p.sigma) / p.sigma;
    let c_density = (p.c / v).powf(-(v + 1.0) / 2.0);
    let ratio = |z: f64| q(x, z) / q(p.center, z);
    let inf = ratio(p.center - p.half_width).min(ratio(p.center + p.half_width));
    let s_prime = inf * (c_density / target(x)).min(1.0);
    let in_d = if (y - p.center).abs() <= p.half_width { 1.0 } else { 0.0 };
    let nu_prime = q(p.center, y) * in_d * (target(y) / c_density).min(1.0);
    let alpha = (target(y) / target(x)).min(1.0);
    s_prime * nu_prime / (q(x, y) * alpha)
}

fn criterion_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_006);
    let mut c = Checks::default();

    let mut window_ok = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..2000);
        let b = rng.random_range(2..n);
        let q = rng.random_range(0.01..0.99);
        // Coarse values force ties.
        let values: Vec<f64> = (0..n).map(|_| (rng.sample::<f64, _>(StandardNormal) * 4.0).round()).collect();
        let trace = ScalarTrace::new(values.clone()).unwrap();
        let got = block_quantiles(&trace, QuantileSpec::new(q).unwrap(), SubsampleLayout::new(b).unwrap()).unwrap();
        window_ok += usize::from(got == naive_blocks(&values, q, b));
    }
    c.check(window_ok == 200, format!("sliding window {window_ok}/200"));

    let (mut bm_ok, mut sbm_ok, mut rs_ok) = (0, 0, 0);
    for _ in 0..100 {
        let n = rng.random_range(20..3000);
        let values = normal_trace(&mut rng, n);
        let trace = ScalarTrace::new(values.clone()).unwrap();
        let y = rng.random_range(-1.5..1.5);
        let b = rng.random_range(1..n / 2);
        let a = rng.random_range(2..=n / b);
        let got = bm_sigma2(&trace, y, BatchLayout::new(a, b, n).unwrap()).unwrap();
        bm_ok += usize::from(rel_close(got, bm_oracle(&values, y, a, b), 1e-12));

        let q = rng.random_range(0.05..0.95);
        let b = rng.random_range(2..n);
        let got = sbm_gamma2(&trace, QuantileSpec::new(q).unwrap(), SubsampleLayout::new(b).unwrap()).unwrap();
        sbm_ok += usize::from(rel_close(got, sbm_oracle(&values, q, b), 1e-12));

        let regen = loop {
            let t = random_regen(&mut rng, n);
            if t.tours() >= 2 {
                break t;
            }
        };
        let got = rs_gamma_hat(&regen, y).unwrap();
        rs_ok += usize::from(rel_close(got, rs_oracle(regen.values(), regen.flags(), y), 1e-12));
    }
    c.check(bm_ok == 100, format!("bm_sigma2 {bm_ok}/100"));
    c.check(sbm_ok == 100, format!("sbm_gamma2 {sbm_ok}/100"));
    c.check(rs_ok == 100, format!("rs_gamma_hat {rs_ok}/100"));

    let mut regen_ok = 0;
    for _ in 0..1000 {
        let v = rng.random_range(2.1..60.0);
        let sigma = rng.random_range(0.5..8.0);
        let p = RwRegenParams::new(v, sigma).unwrap();
        let x = rng.random_range(-8.0..8.0);
        let y = rng.random_range(-6.0..6.0);
        let got = regen_prob_accepted(x, y, &p);
        let want = factorization_oracle(x, y, &p);
        regen_ok += usize::from((0.0..=1.0).contains(&got) && (got - want).abs() <= 1e-9 * want.max(f64::MIN_POSITIVE));
    }
    c.check(regen_ok == 1000, format!("regeneration probability {regen_ok}/1000"));
    c.finish()
}

fn criterion_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_007);
    let mut c = Checks::default();

    let mut galois = true;
    for _ in 0..300 {
        let n = rng.random_range(1..400);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-5i32..5) as f64).collect();
        let trace = ScalarTrace::new(values.clone()).unwrap();
        for k in 1..100 {
            let q = k as f64 / 100.0;
            let xi = empirical_quantile(&trace, QuantileSpec::new(q).unwrap()).unwrap();
            let below = values.iter().copied().filter(|&v| v < xi).fold(f64::NEG_INFINITY, f64::max);
            galois &= ecdf(&trace, xi).unwrap() >= q;
            if below.is_finite() {
                galois &= ecdf(&trace, below).unwrap() < q;
            }
        }
    }
    c.check(galois, "quantile/ECDF Galois property".into());

    let mut centered = true;
    let mut tours_ok = true;
    for _ in 0..300 {
        let n = rng.random_range(8..1500);
        let values = normal_trace(&mut rng, n);
        let trace = ScalarTrace::new(values).unwrap();
        let y = rng.random_range(-2.0..2.0);
        let layout = BatchLayout::default_for(n).unwrap();
        let means = batch_means(&trace, y, layout).unwrap();
        let fbar = means.iter().sum::<f64>() / means.len() as f64;
        centered &= means.iter().map(|u| u - fbar).sum::<f64>().abs() <= 1e-12 * means.len() as f64;

        let regen = random_regen(&mut rng, n);
        let stats = regen.tour_stats(y);
        tours_ok &= stats.sums.iter().zip(&stats.lengths).all(|(s, l)| s <= l);
        tours_ok &= stats.residuals().iter().sum::<f64>().abs() <= 1e-9 * n as f64;
    }
    c.check(centered, "sum(U_k - F) = 0".into());
    c.check(tours_ok, "0 <= S_t <= N_t and sum(S_t - F N_t) = 0".into());

    let mut monotone = true;
    let gamma = 0.037_421_705;
    let uniform = ErgodicityProfile::uniform(linchpin_lambda(), 1).unwrap();
    let poly = ErgodicityProfile::polynomial(2.0, 1.0).unwrap();
    let mut prev = f64::INFINITY;
    for n in 56..50_000 {
        let b = bound_uniform_improved(n, gamma, &uniform).unwrap();
        monotone &= b >= 0.0 && b < prev;
        prev = b;
    }
    for (n, a) in [(1000u64, 50u64), (40_000, 2500), (400_000, 25_000)] {
        let (mut pp, mut pu) = (f64::INFINITY, f64::INFINITY);
        for k in 1..400 {
            let g = k as f64 * 0.0025;
            let (bp, bu) = (bound_polynomial(n, a, g, &poly).unwrap(), bound_uniform(n, a, g, &uniform).unwrap());
            monotone &= bp < pp && bu < pu && bp >= 0.0 && bu >= 0.0;
            pp = bp;
            pu = bu;
        }
    }
    c.check(monotone, "bounds monotone".into());

    let mut deterministic = true;
    for kind in [ExperimentKind::Coverage, ExperimentKind::LinchpinBound, ExperimentKind::TourStats] {
        let config = ExperimentConfig { kind, replications: 24, tours: vec![80], lengths: vec![300], seed: 77, ..Default::default() };
        let one = run_experiment(&config, Some(1)).map_err(|e| e.to_string())?;
        let many = run_experiment(&config, Some(4)).map_err(|e| e.to_string())?;
        deterministic &= one == many && one.to_json().unwrap() == many.to_json().unwrap();
    }
    c.check(deterministic, "reports identical for 1 and 4 workers".into());
    c.finish()
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let t = Instant::now();
    suite.report(1, "bound arithmetic", t, criterion_bounds());
    let t = Instant::now();
    suite.report(2, "linchpin replication", t, criterion_linchpin());
    let t = Instant::now();
    suite.report(3, "tour statistics", t, criterion_tours());
    let t = Instant::now();
    match coverage_cells() {
        Ok(cells) => {
            suite.report(4, "coverage at desk scale", t, criterion_coverage(&cells));
            suite.report(5, "half-widths", t, criterion_halfwidth(&cells));
        }
        Err(e) => {
            suite.report(4, "coverage at desk scale", t, Err(e.clone()));
            suite.report(5, "half-widths", t, Err(e));
        }
    }
    let t = Instant::now();
    suite.report(6, "oracle equivalences", t, criterion_oracles());
    let t = Instant::now();
    suite.report(7, "property suites", t, criterion_properties());
    println!("acceptance: {} of 7 criteria failed", suite.failures);
    if suite.failures > 0 {
        std::process::exit(1);
    }
}

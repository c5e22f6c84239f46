//! Split-chain regenerative simulation for quantiles.
//!
//! A [`RegenTrace`] carries chain values together with the regeneration flags
//! `delta_i`; tour `t` covers indices `tau_{t-1} .. tau_t` where
//! `tau_{t+1} = min{ i > tau_t : delta_{i-1} = 1 }`. The ratio estimator of the
//! CDF and the tour-based variance `Gamma_R(y)` give the RS interval.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{t_multiplier, StudentT};
use crate::error::{Error, Result};
use crate::kde::{kde_with_bandwidth, KdeConfig};
use crate::samplers::metropolis_rw_step;
use crate::trace::{check_confidence, empirical_quantile, Method, QuantileEstimate, QuantileSpec, ScalarTrace};

/// Chain values with per-step regeneration flags, ending at a regeneration.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenTrace {
    values: ScalarTrace,
    flags: Vec<bool>,
    /// `tau_1, ..., tau_R`; `tau_0 = 0` is implicit.
    boundaries: Vec<usize>,
}

impl RegenTrace {
    pub fn new(values: Vec<f64>, flags: Vec<bool>) -> Result<Self> {
        if values.len() != flags.len() {
            return Err(Error::InvalidInput(format!(
                "{} values but {} regeneration flags",
                values.len(),
                flags.len()
            )));
        }
        let values = ScalarTrace::new(values)?;
        if !flags.last().copied().unwrap_or(false) {
            return Err(Error::InvalidInput("trace must end at a regeneration (last flag 1)".into()));
        }
        let boundaries = flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i + 1).collect();
        Ok(Self { values, flags, boundaries })
    }

    pub fn values(&self) -> &[f64] {
        self.values.values()
    }

    pub fn scalar_trace(&self) -> &ScalarTrace {
        &self.values
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of complete tours `R`.
    pub fn tours(&self) -> usize {
        self.boundaries.len()
    }

    /// Regeneration times `tau_1 .. tau_R`.
    pub fn regeneration_times(&self) -> &[usize] {
        &self.boundaries
    }

    /// Tour lengths `N_t`.
    pub fn tour_lengths(&self) -> Vec<usize> {
        let mut prev = 0;
        self.boundaries
            .iter()
            .map(|&tau| {
                let n = tau - prev;
                prev = tau;
                n
            })
            .collect()
    }

    pub fn tour_stats(&self, y: f64) -> TourStats {
        TourStats::new(self, y)
    }
}

/// Tour lengths `N_t` and indicator sums `S_t(y)` at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TourStats {
    pub threshold: f64,
    pub lengths: Vec<u64>,
    pub sums: Vec<u64>,
}

impl TourStats {
    pub fn new(trace: &RegenTrace, y: f64) -> Self {
        let values = trace.values();
        let mut prev = 0;
        let mut lengths = Vec::with_capacity(trace.tours());
        let mut sums = Vec::with_capacity(trace.tours());
        for &tau in trace.regeneration_times() {
            lengths.push((tau - prev) as u64);
            sums.push(values[prev..tau].iter().filter(|&&v| v <= y).count() as u64);
            prev = tau;
        }
        Self { threshold: y, lengths, sums }
    }

    pub fn total_length(&self) -> u64 {
        self.lengths.iter().sum()
    }

    pub fn cdf(&self) -> f64 {
        self.sums.iter().sum::<u64>() as f64 / self.total_length() as f64
    }

    /// Residuals `S_t(y) - F_R(y) N_t`.
    pub fn residuals(&self) -> Vec<f64> {
        let f = self.cdf();
        self.sums.iter().zip(&self.lengths).map(|(&s, &n)| s as f64 - f * n as f64).collect()
    }
}

/// Ratio estimator `sum_t S_t(y) / sum_t N_t`.
pub fn rs_cdf_at(trace: &RegenTrace, y: f64) -> f64 {
    TourStats::new(trace, y).cdf()
}

/// `(1 / (R Nbar^2)) sum_t (S_t(y) - F_R(y) N_t)^2`.
pub fn rs_gamma_hat(trace: &RegenTrace, y: f64) -> Result<f64> {
    let r = trace.tours();
    if r < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 tours, got {r}")));
    }
    let stats = TourStats::new(trace, y);
    let total = stats.total_length();
    let sum_s: u64 = stats.sums.iter().sum();
    // With F = C / T the residual is (T S_t - C N_t) / T; keep numerators in integers.
    let ss: f64 = stats
        .sums
        .iter()
        .zip(&stats.lengths)
        .map(|(&s, &n)| {
            let e = total as i128 * s as i128 - sum_s as i128 * n as i128;
            (e as f64).powi(2)
        })
        .sum();
    let t = total as f64;
    // R Nbar^2 = T^2 / R, and each residual carries a factor 1 / T.
    Ok(ss * r as f64 / (t * t * t * t))
}

/// Quantile estimate with the regenerative MCSE and Student-t (`R - 1` df) interval.
pub fn rs_quantile_ci(
    trace: &RegenTrace,
    spec: QuantileSpec,
    confidence: f64,
    kde: KdeConfig,
) -> Result<QuantileEstimate> {
    check_confidence(confidence)?;
    let r = trace.tours();
    if r < 3 {
        return Err(Error::InvalidInput(format!("regenerative interval needs at least 3 tours, got {r}")));
    }
    let point = empirical_quantile(trace.scalar_trace(), spec)?;
    let gamma = rs_gamma_hat(trace, point)?;
    let (avar, bandwidth) = if gamma == 0.0 {
        (0.0, None)
    } else {
        let h = kde.bandwidth(trace.values())?;
        let density = kde_with_bandwidth(trace.values(), point, h)?;
        (gamma / (density * density), Some(h))
    };
    let t = t_multiplier((r - 1) as f64, confidence)?;
    let mut est = QuantileEstimate::assemble(spec, Method::Regenerative, point, avar, r, t, confidence);
    est.bandwidth = bandwidth;
    Ok(est)
}

/// Minorization settings for retrospective regeneration of the Normal-proposal
/// random walk on a `t(v)` target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwRegenParams {
    pub df: f64,
    pub sigma: f64,
    /// Center `x~` of the window `D = [x~ - d, x~ + d]`.
    pub center: f64,
    pub half_width: f64,
    /// Threshold constant `c` on the `v + x^2` scale.
    pub c: f64,
}

impl RwRegenParams {
    /// Defaults: `x~ = 0`, `d = 2 sqrt(v / (v - 2))`, `c` the median of `v + X^2`
    /// under `t(v)`, i.e. `v + Q(0.75)^2`.
    pub fn new(df: f64, sigma: f64) -> Result<Self> {
        if !(df > 2.0 && df.is_finite()) {
            return Err(Error::InvalidParameter(format!("degrees of freedom {df} must exceed 2")));
        }
        let q75 = StudentT::new(df)?.quantile(0.75)?;
        Self::with_window(df, sigma, 0.0, 2.0 * (df / (df - 2.0)).sqrt(), df + q75 * q75)
    }

    pub fn with_window(df: f64, sigma: f64, center: f64, half_width: f64, c: f64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::InvalidParameter(format!("degrees of freedom {df} must be positive")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("proposal scale {sigma} must be positive")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!("window half-width {half_width} must be positive")));
        }
        if !(c > df && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("threshold constant {c} must exceed v = {df}")));
        }
        if !center.is_finite() {
            return Err(Error::InvalidParameter("window center must be finite".into()));
        }
        Ok(Self { df, sigma, center, half_width, c })
    }
}

/// Probability of regeneration on an accepted random-walk move from `x` to `y`.
pub fn regen_prob_accepted(x: f64, y: f64, params: &RwRegenParams) -> f64 {
    let RwRegenParams { df: v, sigma, center, half_width: d, c } = *params;
    if (y - center).abs() > d {
        return 0.0;
    }
    let dx = x - center;
    let proposal_part = (-(dx * (y - center) + d * dx.abs()) / (sigma * sigma)).exp();
    let a = v + x * x;
    let b = v + y * y;
    let target_part = (a.min(c) / a.min(b) * (b / b.max(c))).powf(0.5 * (v + 1.0));
    let r = proposal_part * target_part;
    debug_assert!((0.0..=1.0 + 1e-12).contains(&r), "regeneration probability {r}");
    r
}

/// Sampler bookkeeping for a regenerative run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainStats {
    /// Steps taken before the first regeneration (discarded).
    pub burn_in: u64,
    /// Proposals made while recording the retained trace.
    pub proposals: u64,
    pub accepted: u64,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposals as f64
    }
}

/// Runs the random walk from `x = 0`, discards everything before the first
/// regeneration and stops at the `tours`-th regeneration.
pub fn run_regenerative_rw<R: Rng + ?Sized>(
    params: &RwRegenParams,
    tours: usize,
    rng: &mut R,
) -> Result<RegenTrace> {
    run_regenerative_rw_with_stats(params, tours, rng).map(|(trace, _)| trace)
}

pub fn run_regenerative_rw_with_stats<R: Rng + ?Sized>(
    params: &RwRegenParams,
    tours: usize,
    rng: &mut R,
) -> Result<(RegenTrace, ChainStats)> {
    if params.df <= 2.0 {
        return Err(Error::InvalidParameter(format!("degrees of freedom {} must exceed 2", params.df)));
    }
    if tours < 1 {
        return Err(Error::InvalidParameter("need at least one tour".into()));
    }
    let mut stats = ChainStats::default();
    let mut x = 0.0;
    // Burn to the first regeneration; the state after it is distributed as Q.
    loop {
        stats.burn_in += 1;
        let step = metropolis_rw_step(x, params.df, params.sigma, rng);
        let regenerated = step.accepted && rng.random::<f64>() < regen_prob_accepted(x, step.next, params);
        x = step.next;
        if regenerated {
            break;
        }
    }
    let mut values = Vec::new();
    let mut flags = Vec::new();
    let mut completed = 0;
    while completed < tours {
        let step = metropolis_rw_step(x, params.df, params.sigma, rng);
        stats.proposals += 1;
        let regenerated = if step.accepted {
            stats.accepted += 1;
            rng.random::<f64>() < regen_prob_accepted(x, step.next, params)
        } else {
            false
        };
        values.push(x);
        flags.push(regenerated);
        completed += regenerated as usize;
        x = step.next;
    }
    Ok((RegenTrace::new(values, flags)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::normal_pdf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn regen(values: Vec<f64>, flags: &[u8]) -> RegenTrace {
        RegenTrace::new(values, flags.iter().map(|&f| f == 1).collect()).unwrap()
    }

    fn random_regen(rng: &mut ChaCha8Rng, n: usize) -> RegenTrace {
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let mut flags: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.3).collect();
        flags[n - 1] = true;
        flags[0] = true;
        RegenTrace::new(values, flags).unwrap()
    }

    fn gamma_oracle(values: &[f64], flags: &[bool], y: f64) -> f64 {
        let mut tours: Vec<(f64, f64)> = Vec::new();
        let (mut n, mut s) = (0.0, 0.0);
        for (v, f) in values.iter().zip(flags) {
            n += 1.0;
            if *v <= y {
                s += 1.0;
            }
            if *f {
                tours.push((n, s));
                n = 0.0;
                s = 0.0;
            }
        }
        let r = tours.len() as f64;
        let nbar = tours.iter().map(|t| t.0).sum::<f64>() / r;
        let f = tours.iter().map(|t| t.1).sum::<f64>() / tours.iter().map(|t| t.0).sum::<f64>();
        tours.iter().map(|(n, s)| (s - f * n).powi(2)).sum::<f64>() / (r * nbar * nbar)
    }

    #[test]
    fn tour_bookkeeping() {
        let t = regen(vec![0.1, 0.2, 0.3, 0.4, 0.5], &[0, 1, 0, 0, 1]);
        assert_eq!(t.tours(), 2);
        assert_eq!(t.regeneration_times(), &[2, 5]);
        assert_eq!(t.tour_lengths(), vec![2, 3]);
        let stats = t.tour_stats(0.3);
        assert_eq!(stats.sums, vec![2, 1]);
        assert!(RegenTrace::new(vec![1.0, 2.0], vec![true, false]).is_err());
        assert!(RegenTrace::new(vec![1.0], vec![true, false]).is_err());
    }

    #[test]
    fn hand_evaluated_gamma() {
        // N = [1, 3], S(y) = [1, 1].
        let t = regen(vec![0.0, 0.0, 5.0, 5.0], &[1, 0, 0, 1]);
        assert!((rs_gamma_hat(&t, 1.0).unwrap() - 0.0625).abs() < 1e-15);
        assert!(rs_gamma_hat(&regen(vec![1.0, 2.0], &[0, 1]), 1.0).is_err());
    }

    #[test]
    fn identical_tours_have_zero_gamma() {
        let t = regen(vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0], &[0, 1, 0, 1, 0, 1]);
        assert_eq!(rs_gamma_hat(&t, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn cdf_extremes() {
        let t = regen(vec![1.0, 3.0, 2.0], &[1, 0, 1]);
        assert_eq!(rs_cdf_at(&t, 3.0), 1.0);
        assert_eq!(rs_cdf_at(&t, 0.5), 0.0);
    }

    #[test]
    fn constant_tours_zero_width() {
        let t = regen(vec![2.0; 9], &[0, 0, 1, 1, 0, 1, 0, 0, 1]);
        let est = rs_quantile_ci(&t, QuantileSpec::new(0.5).unwrap(), 0.95, KdeConfig::Silverman).unwrap();
        assert_eq!((est.ci_low, est.point, est.ci_high), (2.0, 2.0, 2.0));
        assert_eq!(est.denominator, 4);
    }

    #[test]
    fn rs_interval_uses_student_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = RwRegenParams::new(30.0, 2.5).unwrap();
        let t = run_regenerative_rw(&params, 50, &mut rng).unwrap();
        let est = rs_quantile_ci(&t, QuantileSpec::new(0.5).unwrap(), 0.95, KdeConfig::Silverman).unwrap();
        let t49 = StudentT::new(49.0).unwrap().quantile(0.975).unwrap();
        assert_eq!(est.multiplier, t49);
        assert_eq!(est.denominator, 50);
        assert!((est.mcse - (est.avar / 50.0).sqrt()).abs() < 1e-15);
        let too_few = regen(vec![1.0, 2.0, 3.0], &[0, 1, 1]);
        assert!(rs_quantile_ci(&too_few, QuantileSpec::new(0.5).unwrap(), 0.95, KdeConfig::Silverman).is_err());
    }

    #[test]
    fn default_params() {
        let p = RwRegenParams::new(30.0, 2.5).unwrap();
        assert_eq!(p.center, 0.0);
        assert!((p.half_width - 2.0 * (30.0f64 / 28.0).sqrt()).abs() < 1e-15);
        // c is the median of v + X^2: P(v + X^2 <= c) = 1/2.
        let t = StudentT::new(30.0).unwrap();
        let x = (p.c - 30.0).sqrt();
        assert!((t.cdf(x) - t.cdf(-x) - 0.5).abs() < 1e-12);
        assert!(RwRegenParams::new(2.0, 1.0).is_err());
        assert!(RwRegenParams::new(3.0, 0.0).is_err());
        assert!(RwRegenParams::with_window(3.0, 1.0, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn regen_prob_examples() {
        let p = RwRegenParams::new(5.0, 2.0).unwrap();
        assert_eq!(regen_prob_accepted(0.3, p.half_width + 1e-9, &p), 0.0);
        assert_eq!(regen_prob_accepted(0.3, -p.half_width - 1e-9, &p), 0.0);
        // x at the center and v + y^2 >= c.
        let y = (p.c - 5.0).sqrt() + 0.01;
        assert!(y < p.half_width);
        assert_eq!(regen_prob_accepted(0.0, y, &p), 1.0);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let p = RwRegenParams::new(3.0, 5.5).unwrap();
        let a = run_regenerative_rw(&p, 200, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = run_regenerative_rw(&p, 200, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tours(), 200);
        assert!(a.flags().last().copied().unwrap());
    }

    /// `s'(x) nu'(y) / (q(x, y) alpha(x, y))` built from explicit densities.
    fn factorization_oracle(x: f64, y: f64, p: &RwRegenParams) -> f64 {
        let v = p.df;
        let target = |z: f64| (1.0 + z * z / v).powf(-(v + 1.0) / 2.0);
        let q = |from: f64, to: f64| normal_pdf((to - from) / p.sigma) / p.sigma;
        // pi(x) = c* on the density scale corresponds to v + x^2 = c.
        let c_density = (p.c / v).powf(-(v + 1.0) / 2.0);
        let ratio = |z: f64| q(x, z) / q(p.center, z);
        // The ratio is log-linear in z, so its infimum over D sits at an endpoint.
        let inf = ratio(p.center - p.half_width).min(ratio(p.center + p.half_width));
        let s_prime = inf * (c_density / target(x)).min(1.0);
        let in_d = ((y - p.center).abs() <= p.half_width) as u8 as f64;
        let nu_prime = q(p.center, y) * in_d * (target(y) / c_density).min(1.0);
        let alpha = (target(y) / target(x)).min(1.0);
        s_prime * nu_prime / (q(x, y) * alpha)
    }

    proptest! {
        #[test]
        fn regen_prob_matches_factorization(x in -8f64..8.0, y in -6f64..6.0, v in 2.1f64..60.0, sigma in 1f64..8.0) {
            let p = RwRegenParams::new(v, sigma).unwrap();
            let got = regen_prob_accepted(x, y, &p);
            let want = factorization_oracle(x, y, &p);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
            prop_assert!((got - want).abs() <= 1e-9 * want.max(1e-300) + 1e-300, "{} vs {}", got, want);
        }

        #[test]
        fn gamma_matches_direct_formula(seed in 0u64..10_000, n in 5usize..400, y in -2.5f64..2.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_regen(&mut rng, n);
            prop_assume!(t.tours() >= 2);
            let got = rs_gamma_hat(&t, y).unwrap();
            let want = gamma_oracle(t.values(), t.flags(), y);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1e-300));
        }

        #[test]
        fn tour_identities(seed in 0u64..10_000, n in 2usize..300, y in -2.5f64..2.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_regen(&mut rng, n);
            let stats = t.tour_stats(y);
            prop_assert_eq!(stats.total_length() as usize, t.len());
            for (s, n) in stats.sums.iter().zip(&stats.lengths) {
                prop_assert!(*n >= 1 && s <= n);
            }
            prop_assert!(stats.residuals().iter().sum::<f64>().abs() < 1e-9);
            let ecdf = crate::trace::ecdf(t.scalar_trace(), y).unwrap();
            prop_assert!((rs_cdf_at(&t, y) - ecdf).abs() <= 1e-15);
        }
    }

    #[test]
    fn gamma_vanishes_in_the_tails() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = random_regen(&mut rng, 500);
        assert_eq!(rs_gamma_hat(&t, 10.0).unwrap(), 0.0);
        assert_eq!(rs_gamma_hat(&t, -10.0).unwrap(), 0.0);
    }

    #[test]
    fn gamma_has_no_large_jumps_near_the_quantile() {
        let p = RwRegenParams::new(6.0, 3.5).unwrap();
        let t = run_regenerative_rw(&p, 300, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let xi = empirical_quantile(t.scalar_trace(), QuantileSpec::new(0.5).unwrap()).unwrap();
        let lengths = t.tour_lengths();
        let max_n = *lengths.iter().max().unwrap() as f64;
        let r = t.tours() as f64;
        let nbar = t.len() as f64 / r;
        let grid: Vec<f64> = (-200..=200).map(|k| xi + k as f64 * 1e-3).collect();
        for w in grid.windows(2) {
            let crossings = t.values().iter().filter(|&&v| v > w[0] && v <= w[1]).count() as f64;
            let jump = (rs_gamma_hat(&t, w[1]).unwrap() - rs_gamma_hat(&t, w[0]).unwrap()).abs();
            assert!(jump <= 4.0 * max_n * max_n * crossings / (r * nbar * nbar) + 1e-15);
        }
    }
}

//! Finite-sample bounds on `P(|xi_hat - xi_q| > eps)` for stationary chains,
//! and inversion of those bounds to a required sample size.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dist::StudentT;
use crate::error::{Error, Result};

/// Declared convergence regime of the chain in total variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErgodicityProfile {
    /// `||P^n(x, .) - pi|| <= M(x) n^(-m)`, with `E_pi M = moment`.
    Polynomial { order: f64, moment: f64 },
    /// `P^{n0}(x, .) >= lambda phi(.)` for all `x`.
    Uniform { lambda: f64, n0: u64 },
}

impl ErgodicityProfile {
    pub fn polynomial(order: f64, moment: f64) -> Result<Self> {
        if !(order > 0.0 && order.is_finite()) || !(moment > 0.0 && moment.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "polynomial profile needs m > 0 and E_pi M > 0, got m = {order}, E_pi M = {moment}"
            )));
        }
        Ok(Self::Polynomial { order, moment })
    }

    pub fn uniform(lambda: f64, n0: u64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) || n0 == 0 {
            return Err(Error::InvalidParameter(format!(
                "uniform profile needs lambda in (0, 1] and n0 >= 1, got lambda = {lambda}, n0 = {n0}"
            )));
        }
        Ok(Self::Uniform { lambda, n0 })
    }
}

/// Distribution function of the functional together with the true quantile.
pub struct TargetCdf {
    cdf: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    quantile: f64,
}

impl fmt::Debug for TargetCdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetCdf").field("quantile", &self.quantile).finish_non_exhaustive()
    }
}

impl TargetCdf {
    pub fn new(cdf: impl Fn(f64) -> f64 + Send + Sync + 'static, quantile: f64) -> Self {
        Self { cdf: Box::new(cdf), quantile }
    }

    /// `t(df)` with the exact `q`-quantile.
    pub fn student_t(df: f64, q: f64) -> Result<Self> {
        let t = StudentT::new(df)?;
        let quantile = t.quantile(q)?;
        Ok(Self::new(move |x| t.cdf(x), quantile))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    pub fn quantile(&self) -> f64 {
        self.quantile
    }
}

/// `min{ F(xi_q + eps) - q, delta (q - F(xi_q - eps)) }`.
pub fn gamma_eps(target: &TargetCdf, q: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInput(format!("q = {q} is not in (0, 1)")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta = {delta} is not in (0, 1)")));
    }
    let xi = target.quantile();
    if target.cdf(xi) < q {
        return Err(Error::InvalidInput(format!("F(xi_q) = {} is below q = {q}", target.cdf(xi))));
    }
    let upper = target.cdf(xi + eps) - q;
    let lower = delta * (q - target.cdf(xi - eps));
    let gamma = upper.min(lower);
    if gamma > 0.0 {
        Ok(gamma)
    } else {
        Err(Error::InvalidInput(format!("gamma = {gamma} is not positive; eps is too small for a flat CDF")))
    }
}

fn check_a(n: u64, a: u64) -> Result<()> {
    if a == 0 || a.saturating_mul(2) > n {
        Err(Error::InvalidInput(format!("a = {a} is outside [1, n/2] for n = {n}")))
    } else {
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma = {gamma} must be positive")))
    }
}

fn blocking_terms(a: u64, gamma: f64) -> (f64, f64) {
    let a = a as f64;
    (8.0 * (-a * gamma * gamma / 8.0).exp(), 22.0 * a * (1.0 + 4.0 / gamma).sqrt())
}

/// `8 exp(-a gamma^2 / 8) + 22 a (1 + 4/gamma)^(1/2) psi(floor(n / 2a)) E_pi M`.
pub fn bound_polynomial(n: u64, a: u64, gamma: f64, profile: &ErgodicityProfile) -> Result<f64> {
    let ErgodicityProfile::Polynomial { order, moment } = *profile else {
        return Err(Error::InvalidParameter("bound_polynomial needs a polynomial profile".into()));
    };
    check_a(n, a)?;
    check_gamma(gamma)?;
    let (head, scale) = blocking_terms(a, gamma);
    let k = (n / (2 * a)) as f64;
    Ok(head + scale * k.powf(-order) * moment)
}

/// `8 exp(-a gamma^2 / 8) + 22 a (1 + 4/gamma)^(1/2) (1 - lambda)^floor(n / (2 a n0))`.
pub fn bound_uniform(n: u64, a: u64, gamma: f64, profile: &ErgodicityProfile) -> Result<f64> {
    let ErgodicityProfile::Uniform { lambda, n0 } = *profile else {
        return Err(Error::InvalidParameter("bound_uniform needs a uniform profile".into()));
    };
    check_a(n, a)?;
    check_gamma(gamma)?;
    let (head, scale) = blocking_terms(a, gamma);
    let k = n / (2 * a * n0);
    let mixing = if lambda >= 1.0 {
        if k == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - lambda).powf(k as f64)
    };
    Ok(head + scale * mixing)
}

/// Smallest `n` for which [`bound_uniform_improved`] is defined is `threshold + 1`
/// rounded down; the bound needs `n > 2 n0 / (lambda gamma)`.
pub fn improved_threshold(gamma: f64, profile: &ErgodicityProfile) -> Result<f64> {
    let ErgodicityProfile::Uniform { lambda, n0 } = *profile else {
        return Err(Error::InvalidParameter("improved bound needs a uniform profile".into()));
    };
    check_gamma(gamma)?;
    Ok(2.0 * n0 as f64 / (lambda * gamma))
}

/// `2 exp(-lambda^2 (n gamma - 2 n0 / lambda)^2 / (2 n n0^2))` for `n > 2 n0 / (lambda gamma)`.
pub fn bound_uniform_improved(n: u64, gamma: f64, profile: &ErgodicityProfile) -> Result<f64> {
    let threshold = improved_threshold(gamma, profile)?;
    let ErgodicityProfile::Uniform { lambda, n0 } = *profile else { unreachable!() };
    if (n as f64) <= threshold {
        return Err(Error::Domain { threshold });
    }
    let n = n as f64;
    let n0 = n0 as f64;
    let excess = n * gamma - 2.0 * n0 / lambda;
    Ok(2.0 * (-lambda * lambda * excess * excess / (2.0 * n * n0 * n0)).exp())
}

/// `{floor(n/2), floor(n/4), ..., 1}`.
pub fn a_grid(n: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut a = n / 2;
    while a >= 1 {
        grid.push(a);
        a /= 2;
    }
    grid
}

/// How the blocking parameter `a` is chosen for a given `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockChoice {
    Fixed(u64),
    /// `a = floor(n / divisor)`.
    Fraction(u64),
    /// Best value over [`a_grid`].
    Grid,
}

impl BlockChoice {
    /// Candidate values of `a` at `n`; empty when none is admissible.
    pub fn candidates(&self, n: u64) -> Vec<u64> {
        match *self {
            BlockChoice::Fixed(a) => vec![a],
            BlockChoice::Fraction(d) => vec![n / d.max(1)],
            BlockChoice::Grid => a_grid(n),
        }
    }
}

/// Which bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Polynomial(BlockChoice),
    Uniform(BlockChoice),
    UniformImproved,
}

impl BoundKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Polynomial(_) => "polynomial",
            BoundKind::Uniform(_) => "uniform",
            BoundKind::UniformImproved => "uniform-improved",
        }
    }
}

/// A bound with everything but `n` fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    pub gamma: f64,
    pub profile: ErgodicityProfile,
}

/// Bound value at one `n`, with the `a` that attained it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub n: u64,
    pub a: Option<u64>,
    pub bound: f64,
}

impl BoundValue {
    /// Bounds at or above one carry no information but are reported as computed.
    pub fn is_vacuous(&self) -> bool {
        self.bound >= 1.0
    }
}

impl BoundSpec {
    pub fn evaluate(&self, n: u64) -> Result<BoundValue> {
        let blocked = |choice: &BlockChoice, f: &dyn Fn(u64) -> Result<f64>| -> Result<BoundValue> {
            let mut best: Option<BoundValue> = None;
            let mut last_err = None;
            for a in choice.candidates(n) {
                match f(a) {
                    Ok(bound) if best.is_none_or(|b| bound < b.bound) => best = Some(BoundValue { n, a: Some(a), bound }),
                    Ok(_) => {}
                    Err(e) => last_err = Some(e),
                }
            }
            best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidInput(format!("no admissible a for n = {n}"))))
        };
        match &self.kind {
            BoundKind::Polynomial(choice) => blocked(choice, &|a| bound_polynomial(n, a, self.gamma, &self.profile)),
            BoundKind::Uniform(choice) => blocked(choice, &|a| bound_uniform(n, a, self.gamma, &self.profile)),
            BoundKind::UniformImproved => {
                bound_uniform_improved(n, self.gamma, &self.profile).map(|bound| BoundValue { n, a: None, bound })
            }
        }
    }

    fn satisfied(&self, n: u64, target: f64) -> bool {
        self.evaluate(n).is_ok_and(|v| v.bound <= target)
    }
}

const MAX_N: u64 = 1 << 62;

/// Smallest `n` whose bound is at most `target`, by doubling then bisection.
///
/// Bisection keeps `bound(lo) > target` (or undefined) and `bound(hi) <= target`,
/// so the result always satisfies the target and its predecessor does not.
pub fn min_sample_size(spec: &BoundSpec, target: f64) -> Result<u64> {
    if !(target > 0.0) {
        return Err(Error::InvalidInput(format!("target {target} must be positive")));
    }
    check_gamma(spec.gamma)?;
    let start = match spec.kind {
        BoundKind::UniformImproved => improved_threshold(spec.gamma, &spec.profile)?.floor() as u64,
        _ => 1,
    };
    if spec.satisfied(start, target) {
        return Ok(start);
    }
    let mut lo = start;
    let mut hi = start.max(1);
    loop {
        let next = hi.saturating_mul(2).max(hi + 1);
        if next > MAX_N {
            return Err(Error::Unattainable { target });
        }
        if spec.satisfied(next, target) {
            hi = next;
            break;
        }
        lo = next;
        hi = next;
    }
    // Probe just past lo, which matters for the improved bound's domain edge.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if spec.satisfied(mid, target) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

//! Chain output, order statistics and the empirical quantile estimator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued functional evaluations `Y_i = g(X_i)` from one chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrace {
    values: Vec<f64>,
}

impl ScalarTrace {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("trace is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {} at index {i}", values[i])));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for ScalarTrace {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Probability level `q` of the quantile under study, `0 < q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct QuantileSpec(pub(crate) f64);

impl QuantileSpec {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::InvalidInput(format!("quantile level {q} is not in (0, 1)")))
        }
    }

    pub fn q(self) -> f64 {
        self.0
    }

    /// Rank `j` with `j - 1 < n q <= j`.
    ///
    /// Products within a few ulps of an integer are treated as integral, so
    /// decimal levels such as `0.1` behave as written rather than as their
    /// binary approximation.
    pub fn rank(self, n: usize) -> usize {
        let nq = n as f64 * self.0;
        let nearest = nq.round();
        let j = if (nq - nearest).abs() <= 4.0 * f64::EPSILON * nq { nearest } else { nq.ceil() };
        (j as usize).clamp(1, n)
    }
}

impl TryFrom<f64> for QuantileSpec {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

impl From<QuantileSpec> for f64 {
    fn from(spec: QuantileSpec) -> f64 {
        spec.0
    }
}

/// Variance estimation method behind a [`QuantileEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "BM")]
    BatchMeans,
    #[serde(rename = "SBM")]
    Subsampling,
    #[serde(rename = "RS")]
    Regenerative,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::BatchMeans, Method::Subsampling, Method::Regenerative];

    pub fn tag(self) -> &'static str {
        match self {
            Method::BatchMeans => "BM",
            Method::Subsampling => "SBM",
            Method::Regenerative => "RS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BM" => Ok(Method::BatchMeans),
            "SBM" => Ok(Method::Subsampling),
            "RS" => Ok(Method::Regenerative),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

/// Point estimate, asymptotic variance, MCSE and interval for one quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub q: f64,
    pub point: f64,
    pub method: Method,
    /// Estimated asymptotic variance of the scaled estimator.
    pub avar: f64,
    pub mcse: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    /// `n` for BM and SBM, the number of tours for RS.
    pub denominator: usize,
    /// Normal or Student-t multiplier applied to the MCSE.
    pub multiplier: f64,
    /// Kernel bandwidth, `None` when no density estimate was needed.
    pub bandwidth: Option<f64>,
    pub batch_count: Option<usize>,
    pub batch_size: Option<usize>,
    pub block_length: Option<usize>,
}

impl QuantileEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    /// Fills point, MCSE and interval from an asymptotic variance.
    pub(crate) fn assemble(
        spec: QuantileSpec,
        method: Method,
        point: f64,
        avar: f64,
        denominator: usize,
        multiplier: f64,
        confidence: f64,
    ) -> Self {
        let mcse = (avar / denominator as f64).sqrt();
        let half = multiplier * mcse;
        Self {
            q: spec.q(),
            point,
            method,
            avar,
            mcse,
            ci_low: point - half,
            ci_high: point + half,
            confidence,
            denominator,
            multiplier,
            bandwidth: None,
            batch_count: None,
            batch_size: None,
            block_length: None,
        }
    }
}

pub(crate) fn check_confidence(confidence: f64) -> Result<()> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("confidence {confidence} is not in (0, 1)")))
    }
}

/// Value of rank `j` (1-based) under ascending order, by expected-linear selection.
pub fn order_statistic(trace: &ScalarTrace, j: usize) -> Result<f64> {
    select_rank(trace.values(), j)
}

pub(crate) fn select_rank(values: &[f64], j: usize) -> Result<f64> {
    if j == 0 || j > values.len() {
        return Err(Error::InvalidInput(format!("rank {j} outside 1..={}", values.len())));
    }
    let mut scratch = values.to_vec();
    let (_, v, _) = scratch.select_nth_unstable_by(j - 1, f64::total_cmp);
    Ok(*v)
}

/// The `j`-th order statistic with `j - 1 < nq <= j`.
pub fn empirical_quantile(trace: &ScalarTrace, spec: QuantileSpec) -> Result<f64> {
    order_statistic(trace, spec.rank(trace.len()))
}

/// Empirical distribution function `#{Y_i <= y} / n`.
pub fn ecdf(trace: &ScalarTrace, y: f64) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidInput("trace is empty".into()));
    }
    Ok(count_le(trace.values(), y) as f64 / trace.len() as f64)
}

pub(crate) fn count_le(values: &[f64], y: f64) -> usize {
    values.iter().filter(|&&v| v <= y).count()
}

/// Sample mean and (n - 1)-denominator standard deviation.
pub(crate) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

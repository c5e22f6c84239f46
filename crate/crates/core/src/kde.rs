//! Gaussian kernel density estimate at a single point.

use serde::{Deserialize, Serialize};

use crate::dist::normal_pdf;
use crate::error::{Error, Result};
use crate::trace::{mean_sd, select_rank, QuantileSpec, ScalarTrace};

/// Bandwidth choice for [`kde_at`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdeConfig {
    /// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
    #[default]
    Silverman,
    Fixed(f64),
}

impl KdeConfig {
    pub fn fixed(h: f64) -> Result<Self> {
        if h > 0.0 && h.is_finite() {
            Ok(Self::Fixed(h))
        } else {
            Err(Error::InvalidParameter(format!("bandwidth {h} must be positive")))
        }
    }

    /// Resolves the bandwidth for `values`.
    pub fn bandwidth(&self, values: &[f64]) -> Result<f64> {
        match *self {
            KdeConfig::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
            KdeConfig::Fixed(h) => Err(Error::DegenerateData(format!("bandwidth {h} is not positive"))),
            KdeConfig::Silverman => silverman_bandwidth(values),
        }
    }
}

pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateData("bandwidth rule needs at least two values".into()));
    }
    let (_, sd) = mean_sd(values);
    let q1 = select_rank(values, QuantileSpec(0.25).rank(n))?;
    let q3 = select_rank(values, QuantileSpec(0.75).rank(n))?;
    let iqr_scale = (q3 - q1) / 1.34;
    // A zero IQR with nonzero spread falls back to the standard deviation.
    let spread = match (sd > 0.0, iqr_scale > 0.0) {
        (true, true) => sd.min(iqr_scale),
        (true, false) => sd,
        (false, true) => iqr_scale,
        (false, false) => 0.0,
    };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::DegenerateData("trace has no spread; bandwidth resolves to zero".into()))
    }
}

/// `(1 / (n h)) sum_i phi((x - Y_i) / h)` with the resolved bandwidth `h`.
pub fn kde_at(trace: &ScalarTrace, x: f64, config: KdeConfig) -> Result<f64> {
    let h = config.bandwidth(trace.values())?;
    kde_with_bandwidth(trace.values(), x, h)
}

pub(crate) fn kde_with_bandwidth(values: &[f64], x: f64, h: f64) -> Result<f64> {
    let sum: f64 = values.iter().map(|&y| normal_pdf((x - y) / h)).sum();
    let density = sum / (values.len() as f64 * h);
    if density > 0.0 && density.is_finite() {
        Ok(density)
    } else {
        Err(Error::DegenerateData(format!("density estimate at {x} is {density}")))
    }
}

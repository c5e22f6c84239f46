//! Batch-means variance of the indicator process and the BM quantile interval.

use serde::{Deserialize, Serialize};

use crate::dist::normal_multiplier;
use crate::error::{Error, Result};
use crate::kde::{kde_with_bandwidth, KdeConfig};
use crate::trace::{check_confidence, empirical_quantile, Method, QuantileEstimate, QuantileSpec, ScalarTrace};

/// `batch_count` consecutive, non-overlapping batches of `batch_size` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchLayout {
    batch_count: usize,
    batch_size: usize,
}

impl BatchLayout {
    pub fn new(batch_count: usize, batch_size: usize, n: usize) -> Result<Self> {
        if batch_count < 2 {
            return Err(Error::InvalidLayout(format!("need at least 2 batches, got {batch_count}")));
        }
        if batch_size == 0 {
            return Err(Error::InvalidLayout("batch size must be positive".into()));
        }
        if batch_count.saturating_mul(batch_size) > n {
            return Err(Error::InvalidLayout(format!(
                "{batch_count} batches of {batch_size} exceed trace length {n}"
            )));
        }
        Ok(Self { batch_count, batch_size })
    }

    /// `b = floor(sqrt(n))`, `a = floor(n / b)`; the last `n - a b` values are dropped.
    pub fn default_for(n: usize) -> Result<Self> {
        let b = n.isqrt().max(1);
        Self::new(n / b, b, n)
    }

    pub fn batch_count(&self) -> usize {
        self.batch_count
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn used_length(&self) -> usize {
        self.batch_count * self.batch_size
    }
}

fn batch_counts(values: &[f64], threshold: f64, layout: BatchLayout) -> Vec<u64> {
    values[..layout.used_length()]
        .chunks_exact(layout.batch_size)
        .map(|batch| batch.iter().filter(|&&v| v <= threshold).count() as u64)
        .collect()
}

fn check_layout(trace: &ScalarTrace, layout: BatchLayout) -> Result<()> {
    BatchLayout::new(layout.batch_count, layout.batch_size, trace.len()).map(|_| ())
}

/// Batch means `U_k(threshold)` of the indicator `I(Y_i <= threshold)`.
pub fn batch_means(trace: &ScalarTrace, threshold: f64, layout: BatchLayout) -> Result<Vec<f64>> {
    check_layout(trace, layout)?;
    let b = layout.batch_size as f64;
    Ok(batch_counts(trace.values(), threshold, layout).into_iter().map(|c| c as f64 / b).collect())
}

/// `b / (a - 1) * sum_k (U_k - F)^2` with `F` the ECDF over the used prefix.
pub fn bm_sigma2(trace: &ScalarTrace, threshold: f64, layout: BatchLayout) -> Result<f64> {
    check_layout(trace, layout)?;
    let counts = batch_counts(trace.values(), threshold, layout);
    let a = layout.batch_count as i128;
    let b = layout.batch_size as i128;
    let total: i128 = counts.iter().map(|&c| c as i128).sum();
    // (U_k - F) = (a c_k - C) / (a b); accumulate the numerators exactly.
    let ss: i128 = counts.iter().map(|&c| (a * c as i128 - total).pow(2)).sum();
    Ok(ss as f64 / ((a - 1) * a * a * b) as f64)
}

/// Quantile estimate with a batch-means MCSE and Normal-multiplier interval.
pub fn bm_quantile_ci(
    trace: &ScalarTrace,
    spec: QuantileSpec,
    confidence: f64,
    kde: KdeConfig,
) -> Result<QuantileEstimate> {
    check_confidence(confidence)?;
    let n = trace.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!("batch means needs at least 4 values, got {n}")));
    }
    let layout = BatchLayout::default_for(n)?;
    let point = empirical_quantile(trace, spec)?;
    let sigma2 = bm_sigma2(trace, point, layout)?;
    // No indicator variability means no density is needed for a zero variance.
    let (avar, bandwidth) = if sigma2 == 0.0 {
        (0.0, None)
    } else {
        let h = kde.bandwidth(trace.values())?;
        let density = kde_with_bandwidth(trace.values(), point, h)?;
        (sigma2 / (density * density), Some(h))
    };
    let z = normal_multiplier(confidence)?;
    let mut est = QuantileEstimate::assemble(spec, Method::BatchMeans, point, avar, n, z, confidence);
    est.bandwidth = bandwidth;
    est.batch_count = Some(layout.batch_count);
    est.batch_size = Some(layout.batch_size);
    Ok(est)
}

//! Subsampling bootstrap (overlapping-block) variance of the quantile estimator.

use serde::{Deserialize, Serialize};

use crate::dist::normal_multiplier;
use crate::error::{Error, Result};
use crate::trace::{check_confidence, empirical_quantile, Method, QuantileEstimate, QuantileSpec, ScalarTrace};
use crate::window::SlidingQuantileWindow;

/// Overlapping blocks of length `block_length` over a trace of length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleLayout {
    block_length: usize,
}

impl SubsampleLayout {
    pub fn new(block_length: usize) -> Result<Self> {
        if block_length < 2 {
            return Err(Error::InvalidLayout(format!("block length {block_length} is below 2")));
        }
        Ok(Self { block_length })
    }

    /// `b = floor(sqrt(n))`.
    pub fn default_for(n: usize) -> Result<Self> {
        let layout = Self::new(n.isqrt())?;
        layout.check(n)?;
        Ok(layout)
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn block_count(&self, n: usize) -> usize {
        n + 1 - self.block_length
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.block_length < 2 || self.block_length >= n {
            Err(Error::InvalidLayout(format!(
                "block length {} must satisfy 2 <= b < n = {n}",
                self.block_length
            )))
        } else {
            Ok(())
        }
    }
}

/// Quantile of every overlapping block, in block order, in `O(n log b)`.
pub fn block_quantiles(trace: &ScalarTrace, spec: QuantileSpec, layout: SubsampleLayout) -> Result<Vec<f64>> {
    let values = trace.values();
    let n = values.len();
    layout.check(n)?;
    let b = layout.block_length;
    let j = spec.rank(b);
    let mut window = SlidingQuantileWindow::with_capacity(b);
    for (i, &v) in values[..b].iter().enumerate() {
        window.insert(v, i as u64);
    }
    let mut out = Vec::with_capacity(layout.block_count(n));
    out.push(window.select(j).expect("window holds b values"));
    for start in 1..=n - b {
        window.remove(values[start - 1], (start - 1) as u64);
        let end = start + b - 1;
        window.insert(values[end], end as u64);
        out.push(window.select(j).expect("window holds b values"));
    }
    Ok(out)
}

/// `b / (n - b + 1) * sum_i (xi*_i - mean(xi*))^2`.
pub fn sbm_gamma2(trace: &ScalarTrace, spec: QuantileSpec, layout: SubsampleLayout) -> Result<f64> {
    let blocks = block_quantiles(trace, spec, layout)?;
    let m = blocks.len() as f64;
    let mean = blocks.iter().sum::<f64>() / m;
    let ss: f64 = blocks.iter().map(|x| (x - mean).powi(2)).sum();
    Ok(layout.block_length as f64 * ss / m)
}

/// Quantile estimate with a subsampling-bootstrap MCSE and Normal-multiplier interval.
pub fn sbm_quantile_ci(trace: &ScalarTrace, spec: QuantileSpec, confidence: f64) -> Result<QuantileEstimate> {
    check_confidence(confidence)?;
    let n = trace.len();
    if n < 9 {
        return Err(Error::InvalidInput(format!("subsampling needs at least 9 values, got {n}")));
    }
    let layout = SubsampleLayout::default_for(n)?;
    let point = empirical_quantile(trace, spec)?;
    let gamma2 = sbm_gamma2(trace, spec, layout)?;
    let z = normal_multiplier(confidence)?;
    let mut est = QuantileEstimate::assemble(spec, Method::Subsampling, point, gamma2, n, z, confidence);
    est.block_length = Some(layout.block_length);
    Ok(est)
}

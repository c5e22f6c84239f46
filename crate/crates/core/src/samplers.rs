//! Reference samplers: a Normal-proposal Metropolis random walk on `t(v)` and
//! the two-block linchpin sampler whose `x`-marginal is `t(4)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT as StudentTDistr};
use serde::{Deserialize, Serialize};

use crate::dist::StudentT;
use crate::error::{Error, Result};

/// Outcome of one random-walk proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwStep {
    pub next: f64,
    pub accepted: bool,
    pub proposal: f64,
}

/// Acceptance probability `min{1, ((v + x^2) / (v + y^2))^((v + 1) / 2)}`.
pub fn rw_acceptance(x: f64, y: f64, df: f64) -> f64 {
    ((df + x * x) / (df + y * y)).powf(0.5 * (df + 1.0)).min(1.0)
}

pub fn metropolis_rw_step<R: Rng + ?Sized>(x: f64, df: f64, sigma: f64, rng: &mut R) -> RwStep {
    let z: f64 = StandardNormal.sample(rng);
    let proposal = x + sigma * z;
    let alpha = rw_acceptance(x, proposal, df);
    let accepted = alpha >= 1.0 || rng.random::<f64>() < alpha;
    RwStep { next: if accepted { proposal } else { x }, accepted, proposal }
}

/// Runs the random walk for `n` states starting from `x = 0`.
pub fn run_rw<R: Rng + ?Sized>(df: f64, sigma: f64, n: usize, rng: &mut R) -> Result<(Vec<f64>, u64)> {
    if !(df > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("need v > 0 and sigma > 0, got v = {df}, sigma = {sigma}")));
    }
    let mut x = 0.0;
    let mut accepted = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x);
        let step = metropolis_rw_step(x, df, sigma, rng);
        accepted += step.accepted as u64;
        x = step.next;
    }
    Ok((out, accepted))
}

/// Exact Gamma draw with the given shape and rate.
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidInput(format!("Gamma rate {rate} must be positive")));
    }
    let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidInput(format!("Gamma({shape}, {rate}): {e}")))?;
    Ok(gamma.sample(rng))
}

/// State `(x, y)` of the linchpin sampler; `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinchpinState {
    pub x: f64,
    pub y: f64,
}

/// Starting point for the linchpin sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinchpinInit {
    /// `x = 0`, `y` from its conditional at `x = 0`.
    #[default]
    Origin,
    /// `x ~ t(4)`, `y` from its conditional, so the chain starts in stationarity.
    Stationary,
}

impl std::str::FromStr for LinchpinInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "origin" | "zero" => Ok(Self::Origin),
            "stationary" => Ok(Self::Stationary),
            other => Err(Error::InvalidInput(format!("unknown linchpin init {other:?}"))),
        }
    }
}

const SHAPE: f64 = 2.5;

fn conditional_rate(x: f64) -> f64 {
    2.0 + 0.5 * x * x
}

/// Independence Metropolis-Hastings for `x` with a `t(3)` proposal and `t(4)`
/// target, followed by an exact draw `y ~ Gamma(5/2, 2 + x^2/2)`.
#[derive(Debug, Clone)]
pub struct LinchpinSampler {
    target: StudentT,
    proposal_density: StudentT,
    proposal: StudentTDistr<f64>,
}

impl Default for LinchpinSampler {
    fn default() -> Self {
        Self::new()
    }
}

impl LinchpinSampler {
    pub fn new() -> Self {
        Self {
            target: StudentT::new(4.0).expect("valid df"),
            proposal_density: StudentT::new(3.0).expect("valid df"),
            proposal: StudentTDistr::new(3.0).expect("valid df"),
        }
    }

    /// Log importance weight `log f4(x) - log q3(x)`.
    fn log_weight(&self, x: f64) -> f64 {
        self.target.ln_pdf(x) - self.proposal_density.ln_pdf(x)
    }

    /// `min{1, f4(x') q3(x) / (f4(x) q3(x'))}`.
    pub fn acceptance(&self, x: f64, proposal: f64) -> f64 {
        (self.log_weight(proposal) - self.log_weight(x)).exp().min(1.0)
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, init: LinchpinInit, rng: &mut R) -> LinchpinState {
        let x = match init {
            LinchpinInit::Origin => 0.0,
            LinchpinInit::Stationary => StudentTDistr::new(4.0).expect("valid df").sample(rng),
        };
        let y = gamma_sample(SHAPE, conditional_rate(x), rng).expect("positive rate");
        LinchpinState { x, y }
    }

    pub fn step<R: Rng + ?Sized>(&self, state: LinchpinState, rng: &mut R) -> LinchpinState {
        let proposal = self.proposal.sample(rng);
        let alpha = self.acceptance(state.x, proposal);
        let x = if alpha >= 1.0 || rng.random::<f64>() < alpha { proposal } else { state.x };
        let y = gamma_sample(SHAPE, conditional_rate(x), rng).expect("positive rate");
        LinchpinState { x, y }
    }

    /// `x`-coordinates of `n` consecutive states, the first being the initial state.
    pub fn run_x<R: Rng + ?Sized>(&self, n: usize, init: LinchpinInit, rng: &mut R) -> Vec<f64> {
        let mut state = self.initial_state(init, rng);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(state.x);
            if i + 1 < n {
                state = self.step(state, rng);
            }
        }
        out
    }
}

/// One linchpin transition; see [`LinchpinSampler::step`].
pub fn linchpin_step<R: Rng + ?Sized>(state: LinchpinState, rng: &mut R) -> LinchpinState {
    LinchpinSampler::new().step(state, rng)
}

/// Uniform minorization constant of the linchpin kernel, `sqrt(9375) / (32 pi)`.
pub fn linchpin_lambda() -> f64 {
    9375f64.sqrt() / (32.0 * std::f64::consts::PI)
}

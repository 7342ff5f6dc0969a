//! Sequential sampling runtime.
//!
//! [`run_truncated_ibs`] drives the rectangular random walk: the point
//! `(n, S_n)` moves right on every trial and up on every success, and the run
//! stops the first time it leaves the box `[0, L] × [0, W]`. Fixed-size
//! sampling ([`run_fixed_size`]) and inverse binomial sampling
//! ([`run_inverse_binomial`]) are the two degenerate shapes of that box.

pub mod rng;
pub mod source;

use serde::Serialize;
use thiserror::Error;

use crate::bounds::{first_integer_above, inverse_binomial_threshold, BoundVariant, BoundsError, Plan};

pub use rng::{replication_seed, SplitMix64};
pub use source::{
    external_source, synthetic_source, ConstantSource, ExternalSource, Outcome, SourceError, SyntheticSource,
    TrialSource,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("{0}")]
    InvalidArgument(String),
}

impl EngineError {
    pub fn trials_consumed(&self) -> Option<u64> {
        match self {
            EngineError::Source(e) => e.trials_consumed(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The trial budget ran out (`n` passed the right edge).
    LengthExit,
    /// The success count crossed the top edge before the last trial.
    HeightExit,
}

/// The rule a run followed, with the integer thresholds it used.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SamplingRule {
    Truncated {
        variant: BoundVariant,
        length: f64,
        width: f64,
        n_max: u64,
        k_threshold: u64,
        overridden: bool,
    },
    Fixed {
        n: u64,
    },
    InverseBinomial {
        beta: f64,
        delta: f64,
        threshold: f64,
        k_threshold: u64,
        cap: u64,
    },
}

impl SamplingRule {
    fn from_plan(plan: &Plan) -> Self {
        SamplingRule::Truncated {
            variant: plan.variant(),
            length: plan.length(),
            width: plan.width(),
            n_max: plan.n_max(),
            k_threshold: plan.k_threshold(),
            overridden: plan.is_overridden(),
        }
    }
}

/// Outcome of one sequential run.
///
/// The estimate is carried exactly as the pair `(successes, m)`;
/// [`EstimationResult::p_hat`] is the convenience ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    m: u64,
    successes: u64,
    p_hat: f64,
    stop_reason: StopReason,
    truncated: bool,
    seed: Option<u64>,
    source: String,
    #[serde(flatten)]
    rule: SamplingRule,
}

impl EstimationResult {
    /// Stopping time: trials consumed.
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    pub fn p_hat(&self) -> f64 {
        self.p_hat
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    /// Inverse binomial run that hit its safety cap before the threshold.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn rule(&self) -> &SamplingRule {
        &self.rule
    }
}

/// Walk until `n = n_max` or `S_n = k_threshold`, whichever comes first.
///
/// A run that reaches both on the same trial (only possible at `n = n_max`)
/// is reported as a length exit.
fn walk(
    source: &mut dyn TrialSource,
    n_max: u64,
    k_threshold: u64,
) -> Result<(u64, u64, StopReason), SourceError> {
    debug_assert!(n_max >= 1 && k_threshold >= 1);
    let mut successes = 0u64;
    let mut n = 0u64;
    let reason = loop {
        if source.next_trial()?.is_success() {
            successes += 1;
        }
        n += 1;
        if n >= n_max {
            break StopReason::LengthExit;
        }
        if successes >= k_threshold {
            break StopReason::HeightExit;
        }
    };
    source.finish()?;
    Ok((n, successes, reason))
}

fn finish_result(
    source: &dyn TrialSource,
    (m, successes, stop_reason): (u64, u64, StopReason),
    truncated: bool,
    rule: SamplingRule,
) -> EstimationResult {
    EstimationResult {
        m,
        successes,
        p_hat: successes as f64 / m as f64,
        stop_reason,
        truncated,
        seed: source.seed(),
        source: source.descriptor(),
        rule,
    }
}

/// Truncated inverse binomial sampling under `plan`.
pub fn run_truncated_ibs(source: &mut dyn TrialSource, plan: &Plan) -> Result<EstimationResult, EngineError> {
    let exit = walk(source, plan.n_max(), plan.k_threshold())?;
    Ok(finish_result(source, exit, false, SamplingRule::from_plan(plan)))
}

/// Exactly `n` trials.
pub fn run_fixed_size(source: &mut dyn TrialSource, n: u64) -> Result<EstimationResult, EngineError> {
    if n == 0 {
        return Err(EngineError::InvalidArgument("fixed sample size must be at least 1".into()));
    }
    // a height threshold above n can never fire
    let exit = walk(source, n, n + 1)?;
    Ok(finish_result(source, exit, false, SamplingRule::Fixed { n }))
}

/// Sample until the success count exceeds the inverse-binomial threshold.
///
/// The untruncated rule may need arbitrarily many trials when `p` is small,
/// so the run is capped at `cap` trials. A capped run returns normally with
/// [`EstimationResult::truncated`] set and a length exit.
pub fn run_inverse_binomial(
    source: &mut dyn TrialSource,
    beta: f64,
    delta: f64,
    cap: u64,
) -> Result<EstimationResult, EngineError> {
    if cap == 0 {
        return Err(EngineError::InvalidArgument("inverse binomial cap must be at least 1".into()));
    }
    let threshold = inverse_binomial_threshold(beta, delta)?;
    let k_threshold = first_integer_above(threshold, "inverse binomial threshold")?;
    let (m, successes, _) = walk(source, cap, k_threshold)?;
    let reached = successes >= k_threshold;
    let stop_reason = if reached { StopReason::HeightExit } else { StopReason::LengthExit };
    Ok(finish_result(
        source,
        (m, successes, stop_reason),
        !reached,
        SamplingRule::InverseBinomial { beta, delta, threshold, k_threshold, cap },
    ))
}

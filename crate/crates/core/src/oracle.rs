//! Verification oracles.
//!
//! * [`exact_walk_coverage`] computes the full exit distribution of the
//!   rectangular walk by dynamic programming over the alive states and
//!   reports the exact probability that the error criterion holds.
//! * [`exact_fixed_coverage`] does the same for a fixed sample size from the
//!   binomial distribution.
//! * [`empirical_coverage`] replicates seeded runs of the engine and reports
//!   a hit fraction with a Wilson interval.
//!
//! Criterion checks work on the integer pair `(successes, m)` and never
//! divide. Comparisons that fall within `1e-12·m` of a boundary are settled
//! in exact rational arithmetic on the decimal values of `p`, `α`, `β`, and
//! counted as boundary-ambiguous in the report.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{first_integer_above, inverse_binomial_threshold, BoundsError, Plan};
use crate::engine::{
    replication_seed, run_inverse_binomial, run_truncated_ibs, EngineError, EstimationResult, SyntheticSource,
};
use crate::numeric::{decimal_rational, normal_quantile};

/// Default cap on `n_max × k_threshold` for the exact walk.
pub const DEFAULT_STATE_BUDGET: u64 = 100_000_000;

/// Largest fixed sample size handled by [`exact_fixed_coverage`].
pub const MAX_FIXED_N: u64 = 10_000_000;

/// Relative width of the band in which comparisons go to exact arithmetic.
const BOUNDARY_BAND: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("true probability must lie in (0, 1), got {0}")]
    ProbabilityRange(f64),
    #[error("walk needs {needed} states, over the budget of {budget}")]
    StateBudget { needed: u128, budget: u64 },
    #[error("fixed sample size {0} outside 1..={MAX_FIXED_N}")]
    SampleSize(u64),
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("invalid criterion: {0}")]
    Criterion(String),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionMode {
    /// `|p̂ − p| < α`
    Absolute,
    /// `|p̂ − p| < β·p`
    Relative,
    /// either of the above
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionSpec {
    alpha: f64,
    beta: f64,
    mode: CriterionMode,
}

impl CriterionSpec {
    pub fn absolute(alpha: f64) -> Result<Self, OracleError> {
        check_margin("alpha", alpha)?;
        Ok(Self { alpha, beta: f64::NAN, mode: CriterionMode::Absolute })
    }

    pub fn relative(beta: f64) -> Result<Self, OracleError> {
        check_margin("beta", beta)?;
        Ok(Self { alpha: f64::NAN, beta, mode: CriterionMode::Relative })
    }

    pub fn mixed(alpha: f64, beta: f64) -> Result<Self, OracleError> {
        check_margin("alpha", alpha)?;
        check_margin("beta", beta)?;
        Ok(Self { alpha, beta, mode: CriterionMode::Mixed })
    }

    pub fn mode(&self) -> CriterionMode {
        self.mode
    }

    pub fn alpha(&self) -> Option<f64> {
        (self.mode != CriterionMode::Relative).then_some(self.alpha)
    }

    pub fn beta(&self) -> Option<f64> {
        (self.mode != CriterionMode::Absolute).then_some(self.beta)
    }
}

fn check_margin(name: &str, value: f64) -> Result<(), OracleError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(OracleError::Criterion(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Result of one criterion evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriterionCheck {
    pub holds: bool,
    /// A comparison landed within the floating-point band and was decided
    /// exactly.
    pub ambiguous: bool,
}

/// Whether `(successes, m)` satisfies `crit` for true probability `p_true`.
pub fn criterion_holds(successes: u64, m: u64, p_true: f64, crit: &CriterionSpec) -> bool {
    evaluate_criterion(successes, m, p_true, crit).holds
}

/// [`criterion_holds`] with the boundary flag.
pub fn evaluate_criterion(successes: u64, m: u64, p_true: f64, crit: &CriterionSpec) -> CriterionCheck {
    debug_assert!(m >= 1 && successes <= m);
    let mf = m as f64;
    let pm = p_true * mf;
    let dev = (successes as f64 - pm).abs();
    let band = BOUNDARY_BAND * mf;
    let mut ambiguous = false;
    let mut exact = |limit: f64, margin: f64, relative: bool| -> bool {
        if (dev - limit).abs() > band {
            return dev < limit;
        }
        ambiguous = true;
        exact_below(successes, m, p_true, margin, relative)
    };
    let absolute = || (crit.alpha * mf, crit.alpha);
    let relative = || (crit.beta * pm, crit.beta);
    let holds = match crit.mode {
        CriterionMode::Absolute => {
            let (limit, margin) = absolute();
            exact(limit, margin, false)
        }
        CriterionMode::Relative => {
            let (limit, margin) = relative();
            exact(limit, margin, true)
        }
        CriterionMode::Mixed => {
            let (la, ma) = absolute();
            let (lr, mr) = relative();
            exact(la, ma, false) || exact(lr, mr, true)
        }
    };
    CriterionCheck { holds, ambiguous }
}

/// `|S − p·m| < margin·m` (or `< margin·p·m`) in exact rationals.
fn exact_below(successes: u64, m: u64, p_true: f64, margin: f64, relative: bool) -> bool {
    let p = decimal_rational(p_true);
    let m = BigRational::from_integer(BigInt::from(m));
    let s = BigRational::from_integer(BigInt::from(successes));
    let dev = (s - &p * &m).abs();
    let mut limit = decimal_rational(margin) * &m;
    if relative {
        limit *= p;
    }
    dev < limit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageMethod {
    ExactDp,
    ExactBinomial,
    Empirical,
}

/// One terminal state of a run and its probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitState {
    pub m: u64,
    pub successes: u64,
    pub probability: f64,
    pub covered: bool,
}

/// Replication statistics attached to empirical reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalSummary {
    pub replications: u64,
    pub hits: u64,
    pub master_seed: u64,
    /// Confidence level of the Wilson interval.
    pub confidence: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Standard error of the mean stopping time.
    pub m_std_error: f64,
    /// Runs stopped by a safety cap rather than their rule.
    pub truncated: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub p_true: f64,
    pub coverage: f64,
    pub expected_m: f64,
    pub method: CoverageMethod,
    pub n_max: u64,
    pub k_threshold: u64,
    pub criterion: CriterionSpec,
    pub boundary_ambiguous: u64,
    pub exit_distribution: Vec<ExitState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EmpiricalSummary>,
}

impl CoverageReport {
    pub fn total_mass(&self) -> f64 {
        self.exit_distribution.iter().map(|s| s.probability).sum()
    }

    /// Exit probabilities keyed by `(m, successes)`.
    pub fn exit_map(&self) -> BTreeMap<(u64, u64), f64> {
        self.exit_distribution.iter().map(|s| ((s.m, s.successes), s.probability)).collect()
    }

    /// JSON record; exit distribution included only when requested.
    pub fn to_json(&self, with_distribution: bool) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if !with_distribution {
            value.as_object_mut().expect("object").remove("exit_distribution");
        }
        value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactOptions {
    pub state_budget: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { state_budget: DEFAULT_STATE_BUDGET }
    }
}

impl ExactOptions {
    /// Defaults, with `TIBS_STATE_BUDGET` overriding the state budget when
    /// it parses as an integer.
    pub fn from_env() -> Self {
        let state_budget = std::env::var("TIBS_STATE_BUDGET")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_STATE_BUDGET);
        Self { state_budget }
    }
}

fn check_probability(p: f64) -> Result<(), OracleError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(OracleError::ProbabilityRange(p))
    }
}

/// Exit distribution of the walk stopped at `n = n_max` or `S_n = k_threshold`.
///
/// `alive[s]` holds `Pr{still inside after n trials, S_n = s}` for
/// `s < k_threshold`; one step is
/// `alive'[s] = alive[s]·(1−p) + alive[s−1]·p`. The mass `alive[k−1]·p`
/// leaves through the top at trial `n`; at `n = n_max` everything left,
/// including that top mass, leaves through the right edge.
/// States of probability zero are omitted.
pub fn walk_exit_distribution(
    n_max: u64,
    k_threshold: u64,
    p_true: f64,
    opts: &ExactOptions,
) -> Result<Vec<(u64, u64, f64)>, OracleError> {
    check_probability(p_true)?;
    let height = k_threshold.min(n_max + 1);
    let needed = n_max as u128 * height as u128;
    if needed > opts.state_budget as u128 {
        return Err(OracleError::StateBudget { needed, budget: opts.state_budget });
    }
    let k = k_threshold as usize;
    let q = 1.0 - p_true;
    let mut alive = vec![0.0f64; height as usize];
    alive[0] = 1.0;
    let mut exits = Vec::new();
    for n in 1..=n_max {
        let top = if k <= alive.len() { alive[k - 1] * p_true } else { 0.0 };
        let reach = (n as usize).min(alive.len() - 1);
        for s in (1..=reach).rev() {
            alive[s] = alive[s] * q + alive[s - 1] * p_true;
        }
        alive[0] *= q;
        if n == n_max {
            for (s, &mass) in alive.iter().enumerate().take(reach + 1) {
                if mass > 0.0 {
                    exits.push((n, s as u64, mass));
                }
            }
            if top > 0.0 {
                exits.push((n, k_threshold, top));
            }
        } else if top > 0.0 {
            exits.push((n, k_threshold, top));
        }
    }
    Ok(exits)
}

fn build_report(
    exits: impl IntoIterator<Item = (u64, u64, f64)>,
    p_true: f64,
    crit: &CriterionSpec,
    method: CoverageMethod,
    n_max: u64,
    k_threshold: u64,
) -> CoverageReport {
    // the miss mass is summed directly: it is the quantity compared with δ,
    // and 1 − miss can never exceed 1
    let mut miss = 0.0;
    let mut expected_m = 0.0;
    let mut boundary_ambiguous = 0;
    let exit_distribution = exits
        .into_iter()
        .map(|(m, successes, probability)| {
            let check = evaluate_criterion(successes, m, p_true, crit);
            if !check.holds {
                miss += probability;
            }
            boundary_ambiguous += check.ambiguous as u64;
            expected_m += m as f64 * probability;
            ExitState { m, successes, probability, covered: check.holds }
        })
        .collect();
    CoverageReport {
        p_true,
        coverage: (1.0 - miss).max(0.0),
        expected_m,
        method,
        n_max,
        k_threshold,
        criterion: *crit,
        boundary_ambiguous,
        exit_distribution,
        empirical: None,
    }
}

/// Exact coverage and exit distribution of the truncated walk under `plan`.
pub fn exact_walk_coverage(
    plan: &Plan,
    p_true: f64,
    crit: &CriterionSpec,
    opts: &ExactOptions,
) -> Result<CoverageReport, OracleError> {
    exact_box_coverage(plan.n_max(), plan.k_threshold(), p_true, crit, opts)
}

/// [`exact_walk_coverage`] for raw integer thresholds.
pub fn exact_box_coverage(
    n_max: u64,
    k_threshold: u64,
    p_true: f64,
    crit: &CriterionSpec,
    opts: &ExactOptions,
) -> Result<CoverageReport, OracleError> {
    let exits = walk_exit_distribution(n_max, k_threshold, p_true, opts)?;
    Ok(build_report(exits, p_true, crit, CoverageMethod::ExactDp, n_max, k_threshold))
}

/// Binomial(n, p) probabilities, omitting underflowed terms.
///
/// The mode term is computed in log space through `ln Γ`; the rest follow
/// by the ratio recurrence outward from the mode, and the whole vector is
/// renormalized so the log-gamma rounding at the mode cancels.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<(u64, f64)> {
    use statrs::function::gamma::ln_gamma;
    let q = 1.0 - p;
    let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
    let (nf, kf) = (n as f64, mode as f64);
    let log_mode = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0) + kf * p.ln() + (nf - kf) * q.ln();
    let head = log_mode.exp();
    let odds = p / q;
    let mut upper = Vec::new();
    let mut term = head;
    for k in mode..n {
        term *= (n - k) as f64 / (k + 1) as f64 * odds;
        if term == 0.0 {
            break;
        }
        upper.push((k + 1, term));
    }
    let mut lower = Vec::new();
    let mut term = head;
    for k in (1..=mode).rev() {
        term *= k as f64 / (n - k + 1) as f64 / odds;
        if term == 0.0 {
            break;
        }
        lower.push((k - 1, term));
    }
    let mut pmf: Vec<(u64, f64)> = lower.into_iter().rev().collect();
    pmf.push((mode, head));
    pmf.extend(upper);
    let total: f64 = pmf.iter().map(|&(_, w)| w).sum();
    for entry in &mut pmf {
        entry.1 /= total;
    }
    pmf
}

/// Exact coverage of the fixed-size estimator `S_n / n`.
pub fn exact_fixed_coverage(n: u64, p_true: f64, crit: &CriterionSpec) -> Result<CoverageReport, OracleError> {
    check_probability(p_true)?;
    if n == 0 || n > MAX_FIXED_N {
        return Err(OracleError::SampleSize(n));
    }
    let exits = binomial_pmf(n, p_true).into_iter().map(|(k, w)| (n, k, w));
    Ok(build_report(exits, p_true, crit, CoverageMethod::ExactBinomial, n, n + 1))
}

/// Wilson score interval for `hits` out of `trials` at the given confidence.
pub fn wilson_interval(hits: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && hits <= trials);
    let z = normal_quantile(0.5 + confidence / 2.0);
    let n = trials as f64;
    let x = hits as f64;
    let z2 = z * z;
    let center = (x + z2 / 2.0) / (n + z2);
    let half = z / (n + z2) * (x * (n - x) / n + z2 / 4.0).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Confidence level of the intervals in empirical reports.
pub const EMPIRICAL_CONFIDENCE: f64 = 0.99;

fn replicate<F>(
    replications: u64,
    master_seed: u64,
    p_true: f64,
    crit: &CriterionSpec,
    n_max: u64,
    k_threshold: u64,
    run: F,
) -> Result<CoverageReport, OracleError>
where
    F: Fn(&mut SyntheticSource) -> Result<EstimationResult, EngineError> + Sync,
{
    check_probability(p_true)?;
    if replications == 0 {
        return Err(OracleError::NoReplications);
    }
    let outcomes: Vec<(u64, u64, bool)> = (0..replications)
        .into_par_iter()
        .map(|i| {
            let mut source =
                SyntheticSource::new(p_true, replication_seed(master_seed, i)).expect("probability checked above");
            run(&mut source).map(|r| (r.m(), r.successes(), r.truncated()))
        })
        .collect::<Result<_, _>>()?;

    let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    let mut truncated = 0;
    let (mut sum_m, mut sum_m2) = (0.0f64, 0.0f64);
    for &(m, s, t) in &outcomes {
        *counts.entry((m, s)).or_default() += 1;
        truncated += t as u64;
        sum_m += m as f64;
        sum_m2 += (m as f64) * (m as f64);
    }
    let r = replications as f64;
    let exits = counts.iter().map(|(&(m, s), &c)| (m, s, c as f64 / r));
    let mut report = build_report(exits, p_true, crit, CoverageMethod::Empirical, n_max, k_threshold);
    let hits: u64 = report
        .exit_distribution
        .iter()
        .filter(|e| e.covered)
        .map(|e| counts[&(e.m, e.successes)])
        .sum();
    report.coverage = hits as f64 / r;
    report.expected_m = sum_m / r;
    let variance = if replications > 1 { (sum_m2 - sum_m * sum_m / r) / (r - 1.0) } else { 0.0 };
    let (wilson_low, wilson_high) = wilson_interval(hits, replications, EMPIRICAL_CONFIDENCE);
    report.empirical = Some(EmpiricalSummary {
        replications,
        hits,
        master_seed,
        confidence: EMPIRICAL_CONFIDENCE,
        wilson_low,
        wilson_high,
        m_std_error: (variance.max(0.0) / r).sqrt(),
        truncated,
    });
    Ok(report)
}

/// Coverage of the truncated walk estimated from `replications` seeded runs.
///
/// Replication `i` uses seed [`replication_seed`]`(master_seed, i)`, so the
/// report does not depend on how the runs are scheduled across threads.
pub fn empirical_coverage(
    plan: &Plan,
    p_true: f64,
    crit: &CriterionSpec,
    replications: u64,
    master_seed: u64,
) -> Result<CoverageReport, OracleError> {
    replicate(replications, master_seed, p_true, crit, plan.n_max(), plan.k_threshold(), |src| {
        run_truncated_ibs(src, plan)
    })
}

/// Empirical relative-error coverage of capped inverse binomial sampling.
pub fn empirical_inverse_binomial_coverage(
    beta: f64,
    delta: f64,
    cap: u64,
    p_true: f64,
    replications: u64,
    master_seed: u64,
) -> Result<CoverageReport, OracleError> {
    let crit = CriterionSpec::relative(beta)?;
    let k_threshold = first_integer_above(inverse_binomial_threshold(beta, delta)?, "inverse binomial threshold")?;
    replicate(replications, master_seed, p_true, &crit, cap, k_threshold, |src| {
        run_inverse_binomial(src, beta, delta, cap)
    })
}

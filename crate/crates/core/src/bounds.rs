//! Closed-form planning: sample-size bounds, the rectangular budget, and the
//! classical baselines they are compared against.
//!
//! Every function here is pure. Real-valued bounds are evaluated in double
//! precision through [`xlog1p_minus`], which keeps them accurate in the
//! small-margin regime where the naive formulas cancel. The Chernoff-Hoeffding
//! count is the exception: it is computed in big fixed point so that its
//! integer value is exact.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::{decimal_rational, fixed_floor_u128, ln_rational_fixed, normal_quantile, xlog1p_minus};

/// Fractional bits used for the exact sample-size ceilings.
const FIXED_BITS: u64 = 128;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("alpha must lie in (0, 1), got {0}")]
    AlphaRange(f64),
    #[error("beta must be a positive finite number, got {0}")]
    BetaRange(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    DeltaRange(f64),
    #[error("alpha must be strictly less than beta (alpha = {alpha}, beta = {beta})")]
    AlphaNotBelowBeta { alpha: f64, beta: f64 },
    #[error("alpha/beta + alpha/2 must not exceed 1/2 (alpha = {alpha}, beta = {beta}, value = {value})")]
    MarginConstraint { alpha: f64, beta: f64, value: f64 },
    #[error("the loose bound requires beta < 1, got {0}")]
    LooseNeedsBetaBelowOne(f64),
    #[error("relative entropy needs both arguments in (0, 1), got u = {u}, v = {v}")]
    EntropyDomain { u: f64, v: f64 },
    #[error("{what} = {value} is not a usable budget")]
    Budget { what: &'static str, value: f64 },
    #[error("{0} does not fit in a 64-bit count")]
    Overflow(&'static str),
}

/// The accuracy contract: absolute margin `alpha`, relative margin `beta`,
/// confidence parameter `delta` (target coverage `1 − delta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorSpec {
    alpha: f64,
    beta: f64,
    delta: f64,
}

impl ErrorSpec {
    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self, BoundsError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(BoundsError::AlphaRange(alpha));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(BoundsError::BetaRange(beta));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(BoundsError::DeltaRange(delta));
        }
        if alpha >= beta {
            return Err(BoundsError::AlphaNotBelowBeta { alpha, beta });
        }
        let value = alpha / beta + alpha / 2.0;
        if value > 0.5 {
            return Err(BoundsError::MarginConstraint { alpha, beta, value });
        }
        Ok(Self { alpha, beta, delta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `α/β + α`, the slope of the box diagonal (`W = slope · L`).
    pub fn slope(&self) -> f64 {
        self.alpha / self.beta + self.alpha
    }

    fn log_two_over_delta(&self) -> f64 {
        (2.0 / self.delta).ln()
    }
}

/// Which closed form supplies the horizontal budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BoundVariant {
    /// Relative-entropy bound; the smallest of the three.
    Exact,
    /// The default: `β / ((1+β)ln(1+β) − β) · ln(2/δ)/α`.
    Simplified,
    /// `ln(2/δ) / ((ln 4 − 1)·α·β)`; only for `β < 1`.
    Loose,
}

impl BoundVariant {
    pub const ALL: [BoundVariant; 3] = [BoundVariant::Exact, BoundVariant::Simplified, BoundVariant::Loose];

    pub fn bound(self, spec: &ErrorSpec) -> Result<f64, BoundsError> {
        match self {
            BoundVariant::Exact => Ok(bound_exact(spec)),
            BoundVariant::Simplified => Ok(bound_simplified(spec)),
            BoundVariant::Loose => bound_loose(spec),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundVariant::Exact => "exact",
            BoundVariant::Simplified => "simplified",
            BoundVariant::Loose => "loose",
        }
    }
}

impl std::fmt::Display for BoundVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bernoulli relative entropy `u·ln(u/v) + (1−u)·ln((1−u)/(1−v))`.
///
/// Written as `v·g(u/v − 1) + (1−v)·g((v−u)/(1−v))` with
/// `g(x) = (1+x)ln(1+x) − x ≥ 0`, so both terms are nonnegative and the
/// result keeps full relative precision when `u` and `v` are close.
pub fn relative_entropy(u: f64, v: f64) -> Result<f64, BoundsError> {
    if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
        return Err(BoundsError::EntropyDomain { u, v });
    }
    let diff = u - v;
    Ok(v * xlog1p_minus(diff / v) + (1.0 - v) * xlog1p_minus(-diff / (1.0 - v)))
}

/// Horizontal budget from the relative-entropy bound:
///
/// `A = β·ln(2/δ) / [α(1+β)ln(1+β) + (β−α−αβ)·ln(1 − αβ/(β−α))]`.
///
/// The denominator equals `α·g(β) + (β−α)·g(−x)` with `x = αβ/(β−α)`, a sum
/// of two nonnegative terms, and is evaluated in that form.
pub fn bound_exact(spec: &ErrorSpec) -> f64 {
    let (alpha, beta) = (spec.alpha, spec.beta);
    let x = alpha * beta / (beta - alpha);
    let denom = alpha * xlog1p_minus(beta) + (beta - alpha) * xlog1p_minus(-x);
    beta * spec.log_two_over_delta() / denom
}

/// `A = β / ((1+β)ln(1+β) − β) · ln(2/δ)/α`. Never below [`bound_exact`].
pub fn bound_simplified(spec: &ErrorSpec) -> f64 {
    beta_numerator(spec) / (spec.alpha * xlog1p_minus(spec.beta))
}

// Shared with bound_exact so the two divisions see the same numerator and
// the ordering between them survives rounding.
fn beta_numerator(spec: &ErrorSpec) -> f64 {
    spec.beta * spec.log_two_over_delta()
}

/// `A = ln(2/δ) / ((ln 4 − 1)·α·β)`. Requires `β < 1`.
pub fn bound_loose(spec: &ErrorSpec) -> Result<f64, BoundsError> {
    if spec.beta >= 1.0 {
        return Err(BoundsError::LooseNeedsBetaBelowOne(spec.beta));
    }
    Ok(loose_constant() * spec.log_two_over_delta() / (spec.alpha * spec.beta))
}

/// `1 / (ln 4 − 1)`, the supremum of [`relative_margin_factor`] on `(0, 1)`.
pub fn loose_constant() -> f64 {
    1.0 / (4f64.ln() - 1.0)
}

/// `β² / ((1+β)ln(1+β) − β)`: increasing in `β`, tends to 2 as `β → 0`.
pub fn relative_margin_factor(beta: f64) -> f64 {
    beta * beta / xlog1p_minus(beta)
}

/// First integer strictly greater than a nonnegative real threshold.
///
/// Realizes strict inequalities such as `n > L` as an integer comparison
/// `n ≥ first_integer_above(L)`. When `x` is itself an integer the result is
/// `x + 1`.
pub fn first_integer_above(x: f64, what: &'static str) -> Result<u64, BoundsError> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(BoundsError::Budget { what, value: x });
    }
    let floor = x.floor();
    if floor >= u64::MAX as f64 {
        return Err(BoundsError::Overflow(what));
    }
    Ok(floor as u64 + 1)
}

/// The rectangular budget driving one truncated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plan {
    spec: ErrorSpec,
    variant: BoundVariant,
    a_bound: f64,
    b_bound: f64,
    length: f64,
    width: f64,
    n_max: u64,
    k_threshold: u64,
    overridden: bool,
}

impl Plan {
    /// `L = A`, `W = (α/β + α)·L` for the chosen bound.
    pub fn new(spec: ErrorSpec, variant: BoundVariant) -> Result<Self, BoundsError> {
        let a_bound = variant.bound(&spec)?;
        let b_bound = spec.slope() * a_bound;
        Self::assemble(spec, variant, a_bound, b_bound, a_bound, b_bound, false)
    }

    /// A plan with a larger box. The coverage guarantee holds for any
    /// `length ≥ A` and `width ≥ B`; smaller values are rejected.
    pub fn with_budget(spec: ErrorSpec, variant: BoundVariant, length: f64, width: f64) -> Result<Self, BoundsError> {
        let base = Self::new(spec, variant)?;
        if !(length >= base.a_bound) {
            return Err(BoundsError::Budget { what: "length", value: length });
        }
        if !(width >= base.b_bound) {
            return Err(BoundsError::Budget { what: "width", value: width });
        }
        Self::assemble(spec, variant, base.a_bound, base.b_bound, length, width, false)
    }

    /// Replace the box dimensions without any check against the bounds.
    ///
    /// The result carries no coverage guarantee and is flagged as
    /// overridden; it exists for negative testing of the verifiers.
    pub fn with_overrides(
        spec: ErrorSpec,
        variant: BoundVariant,
        length: Option<f64>,
        width: Option<f64>,
    ) -> Result<Self, BoundsError> {
        let base = Self::new(spec, variant)?;
        let overridden = length.is_some() || width.is_some();
        Self::assemble(
            spec,
            variant,
            base.a_bound,
            base.b_bound,
            length.unwrap_or(base.length),
            width.unwrap_or(base.width),
            overridden,
        )
    }

    fn assemble(
        spec: ErrorSpec,
        variant: BoundVariant,
        a_bound: f64,
        b_bound: f64,
        length: f64,
        width: f64,
        overridden: bool,
    ) -> Result<Self, BoundsError> {
        let n_max = first_integer_above(length, "length")?;
        let k_threshold = first_integer_above(width, "width")?;
        Ok(Self { spec, variant, a_bound, b_bound, length, width, n_max, k_threshold, overridden })
    }

    pub fn spec(&self) -> &ErrorSpec {
        &self.spec
    }

    pub fn variant(&self) -> BoundVariant {
        self.variant
    }

    /// `A` of the chosen bound.
    pub fn a_bound(&self) -> f64 {
        self.a_bound
    }

    /// `B = (α/β + α)·A`.
    pub fn b_bound(&self) -> f64 {
        self.b_bound
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Trial count at which the walk leaves through the right edge.
    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// Success count at which the walk leaves through the top edge.
    pub fn k_threshold(&self) -> u64 {
        self.k_threshold
    }

    pub fn is_overridden(&self) -> bool {
        self.overridden
    }
}

/// Build the plan for `spec` with the given bound.
pub fn make_plan(spec: ErrorSpec, variant: BoundVariant) -> Result<Plan, BoundsError> {
    Plan::new(spec, variant)
}

/// Smallest `n` with `n > ln(2/δ)/(2α²)`, exact in integer arithmetic.
///
/// `alpha` and `delta` are taken at their shortest decimal value, `ln(2/δ)`
/// is computed to 128 fractional bits, and the floor is taken on the exact
/// rational scaling by `1/(2α²)`.
pub fn chernoff_hoeffding_n(alpha: f64, delta: f64) -> Result<u64, BoundsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BoundsError::AlphaRange(alpha));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::DeltaRange(delta));
    }
    let two = BigRational::from_integer(BigInt::from(2u32));
    let ratio = &two / decimal_rational(delta);
    let log = ln_rational_fixed(&ratio, FIXED_BITS);
    let alpha = decimal_rational(alpha);
    let scale = &alpha * &alpha * &two;
    let scaled = log * scale.denom() / scale.numer();
    let floor = fixed_floor_u128(&scaled, FIXED_BITS).ok_or(BoundsError::Overflow("Chernoff-Hoeffding count"))?;
    u64::try_from(floor + 1).map_err(|_| BoundsError::Overflow("Chernoff-Hoeffding count"))
}

/// Normal-approximation sample size `round(Z² / (4α²))`, `Z` the upper
/// `δ/2` quantile of the standard normal. Not a rigorous guarantee.
pub fn clt_approx_n(alpha: f64, delta: f64) -> Result<u64, BoundsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BoundsError::AlphaRange(alpha));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::DeltaRange(delta));
    }
    let z = upper_normal_quantile(delta / 2.0);
    let n = (z * z / (4.0 * alpha * alpha)).round();
    if n >= u64::MAX as f64 {
        return Err(BoundsError::Overflow("normal-approximation count"));
    }
    Ok(n as u64)
}

/// `Z` with `∫_Z^∞ φ(x) dx = tail`.
pub fn upper_normal_quantile(tail: f64) -> f64 {
    -normal_quantile(tail)
}

/// Success-count threshold of untruncated inverse binomial sampling:
/// `(1+β)·ln(2/δ) / ((1+β)ln(1+β) − β)`.
pub fn inverse_binomial_threshold(beta: f64, delta: f64) -> Result<f64, BoundsError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(BoundsError::BetaRange(beta));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::DeltaRange(delta));
    }
    Ok((1.0 + beta) * (2.0 / delta).ln() / xlog1p_minus(beta))
}

/// Worst-case saving over the Chernoff-Hoeffding sample size:
/// `N_CH / n_max` of the simplified plan. Close to `β/(4α)` for small `β`.
pub fn gain_ratio(spec: &ErrorSpec) -> Result<f64, BoundsError> {
    let n_ch = chernoff_hoeffding_n(spec.alpha, spec.delta)?;
    let plan = Plan::new(*spec, BoundVariant::Simplified)?;
    Ok(n_ch as f64 / plan.n_max() as f64)
}

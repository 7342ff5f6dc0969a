//! Probability estimation by truncated inverse binomial sampling.
//!
//! An unknown event probability `p` is estimated from Bernoulli trials under
//! a mixed criterion: with probability above `1 − δ`, either the absolute
//! error is below `α` or the relative error is below `β`. Trials are drawn
//! until the path `(n, S_n)` leaves a rectangle of length `L` and width
//! `W = (α/β + α)·L`; the estimate is `S_m / m`. The worst-case trial count
//! `⌊L⌋ + 1` is roughly `β/(4α)` times smaller than the Chernoff-Hoeffding
//! sample size for the absolute criterion alone.
//!
//! * [`bounds`]: closed-form budgets and baselines.
//! * [`engine`]: trial sources and the stopping rules.
//! * [`oracle`]: exact and empirical coverage checks.
//! * [`cli`]: the `tibs` command-line front end.
//!
//! ```
//! use tibs::bounds::{BoundVariant, ErrorSpec, Plan};
//! use tibs::engine::{run_truncated_ibs, SyntheticSource};
//!
//! let spec = ErrorSpec::new(0.1, 0.5, 0.1).unwrap();
//! let plan = Plan::new(spec, BoundVariant::Simplified).unwrap();
//! assert_eq!((plan.n_max(), plan.k_threshold()), (139, 42));
//!
//! let mut source = SyntheticSource::new(0.3, 42).unwrap();
//! let result = run_truncated_ibs(&mut source, &plan).unwrap();
//! assert!(result.m() <= plan.n_max());
//! ```

pub mod bounds;
pub mod cli;
pub mod engine;
pub mod numeric;
pub mod oracle;

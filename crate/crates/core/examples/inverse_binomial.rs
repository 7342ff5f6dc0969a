//! Untruncated inverse binomial sampling for a relative margin, and how the
//! truncated box approaches it as the absolute margin shrinks.
//!
//!     cargo run --example inverse_binomial

use tibs::bounds::{inverse_binomial_threshold, BoundVariant, ErrorSpec, Plan};
use tibs::engine::{run_inverse_binomial, synthetic_source};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (beta, delta) = (0.1, 0.05);
    let threshold = inverse_binomial_threshold(beta, delta)?;
    println!("successes needed for beta={beta}, delta={delta}: {threshold:.3}");
    for p in [0.5, 0.05, 0.001] {
        let r = run_inverse_binomial(&mut synthetic_source(p, 11).unwrap(), beta, delta, 100_000_000)?;
        println!("p={p:<6} m={:>9} p_hat={:.6} rel err={:+.4}", r.m(), r.p_hat(), r.p_hat() / p - 1.0);
    }
    // a cap that is too small truncates the run; the result says so
    let r = run_inverse_binomial(&mut synthetic_source(0.001, 11).unwrap(), beta, delta, 10_000)?;
    println!("capped at 10,000: successes={} truncated={}", r.successes(), r.truncated());

    println!("exact-bound box width as alpha shrinks:");
    for k in 2..=8 {
        let alpha = 10f64.powi(-k);
        let plan = Plan::new(ErrorSpec::new(alpha, beta, delta)?, BoundVariant::Exact)?;
        println!("  alpha=1e-{k}: W={:.7} (gap {:.2e})", plan.width(), plan.width() - threshold);
    }
    Ok(())
}

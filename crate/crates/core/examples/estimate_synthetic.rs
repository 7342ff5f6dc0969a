//! Truncated inverse binomial runs against seeded Bernoulli sources.
//!
//!     cargo run --example estimate_synthetic

use tibs::bounds::{BoundVariant, ErrorSpec, Plan};
use tibs::engine::{run_truncated_ibs, synthetic_source};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = Plan::new(ErrorSpec::new(0.01, 0.1, 0.05)?, BoundVariant::Simplified)?;
    println!("box: n_max={} k_threshold={}", plan.n_max(), plan.k_threshold());
    println!("{:>8} {:>8} {:>10} {:>10} {:>12}", "p", "m", "successes", "p_hat", "stop");
    for (i, p) in [0.001, 0.01, 0.05, 0.1, 0.3, 0.7].into_iter().enumerate() {
        let mut source = synthetic_source(p, 1000 + i as u64).expect("p in (0, 1)");
        let r = run_truncated_ibs(&mut source, &plan)?;
        println!(
            "{:>8} {:>8} {:>10} {:>10.5} {:>12}",
            p,
            r.m(),
            r.successes(),
            r.p_hat(),
            format!("{:?}", r.stop_reason())
        );
    }
    // same seed, same run
    let a = run_truncated_ibs(&mut synthetic_source(0.3, 9).unwrap(), &plan)?;
    let b = run_truncated_ibs(&mut synthetic_source(0.3, 9).unwrap(), &plan)?;
    assert_eq!(a, b);
    println!("{}", serde_json::to_string(&a)?);
    Ok(())
}

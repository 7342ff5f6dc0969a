//! Monte Carlo coverage with Wilson intervals, checked against the exact
//! oracle. Replications run in parallel; results do not depend on the
//! thread count.
//!
//!     cargo run --release --example empirical_crosscheck

use tibs::bounds::{BoundVariant, ErrorSpec, Plan};
use tibs::oracle::{empirical_coverage, exact_walk_coverage, CriterionSpec, ExactOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = Plan::new(ErrorSpec::new(0.1, 0.5, 0.1)?, BoundVariant::Simplified)?;
    let crit = CriterionSpec::mixed(0.1, 0.5)?;
    let replications = 50_000;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "p", "exact", "mc", "low", "high", "mean m");
    for p in [0.1, 0.2, 0.3, 0.5, 0.7, 0.9] {
        let exact = exact_walk_coverage(&plan, p, &crit, &ExactOptions::default())?;
        let mc = empirical_coverage(&plan, p, &crit, replications, 1)?;
        let e = mc.empirical.expect("empirical summary");
        let flag = if e.wilson_low <= exact.coverage && exact.coverage <= e.wilson_high { "" } else { "  outside" };
        println!(
            "{p:>5} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.2}{flag}",
            exact.coverage, mc.coverage, e.wilson_low, e.wilson_high, mc.expected_m
        );
    }
    Ok(())
}

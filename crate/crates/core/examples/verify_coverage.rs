//! Exact coverage of the stopping rule over a grid of true probabilities,
//! for each bound and for a deliberately undersized box.
//!
//!     cargo run --release --example verify_coverage

use tibs::bounds::{BoundVariant, ErrorSpec, Plan};
use tibs::oracle::{exact_fixed_coverage, exact_walk_coverage, CriterionSpec, ExactOptions};

fn min_coverage(plan: &Plan, crit: &CriterionSpec) -> (f64, f64) {
    (1..=99)
        .map(|i| {
            let p = i as f64 / 100.0;
            (exact_walk_coverage(plan, p, crit, &ExactOptions::default()).unwrap().coverage, p)
        })
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ErrorSpec::new(0.1, 0.5, 0.1)?;
    let crit = CriterionSpec::mixed(0.1, 0.5)?;
    for variant in BoundVariant::ALL {
        let plan = Plan::new(spec, variant)?;
        let (c, p) = min_coverage(&plan, &crit);
        println!("{:<11} n_max={:>4} k={:>3}  min coverage {c:.5} at p={p}", variant.name(), plan.n_max(), plan.k_threshold());
    }

    let full = Plan::new(spec, BoundVariant::Simplified)?;
    for fraction in [0.5, 0.3, 0.2] {
        let plan = Plan::with_overrides(spec, BoundVariant::Simplified, Some(fraction * full.length()), None)?;
        let (c, p) = min_coverage(&plan, &crit);
        let verdict = if c > 1.0 - spec.delta() { "meets" } else { "MISSES" };
        println!("{fraction:.1} x length (n_max={:>3}): min coverage {c:.5} at p={p}, {verdict} 1 - delta", plan.n_max());
    }

    let r = exact_walk_coverage(&full, 0.3, &crit, &ExactOptions::default())?;
    println!("p=0.3: E[m]={:.2}, {} exit states, mass {:.15}", r.expected_m, r.exit_distribution.len(), r.total_mass());
    let fixed = exact_fixed_coverage(full.n_max(), 0.3, &crit)?;
    println!("fixed n={} at p=0.3: coverage {:.5}", full.n_max(), fixed.coverage);
    Ok(())
}

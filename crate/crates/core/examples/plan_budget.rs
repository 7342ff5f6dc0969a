//! Size a run: box dimensions under each bound, next to the fixed-size
//! alternatives.
//!
//!     cargo run --example plan_budget -- 0.01 0.1 0.05

use tibs::bounds::{chernoff_hoeffding_n, clt_approx_n, gain_ratio, BoundVariant, ErrorSpec, Plan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let (alpha, beta, delta) = match args[..] {
        [a, b, d] => (a, b, d),
        [] => (0.01, 0.1, 0.05),
        _ => return Err("usage: plan_budget [alpha beta delta]".into()),
    };
    let spec = ErrorSpec::new(alpha, beta, delta)?;
    println!("alpha={alpha} beta={beta} delta={delta}");
    println!("{:<11} {:>14} {:>14} {:>10} {:>8}", "variant", "L", "W", "n_max", "k");
    for variant in BoundVariant::ALL {
        match Plan::new(spec, variant) {
            Ok(p) => println!(
                "{:<11} {:>14.4} {:>14.4} {:>10} {:>8}",
                variant.name(),
                p.length(),
                p.width(),
                p.n_max(),
                p.k_threshold()
            ),
            Err(e) => println!("{:<11} unavailable: {e}", variant.name()),
        }
    }
    println!("Chernoff-Hoeffding fixed size: {}", chernoff_hoeffding_n(alpha, delta)?);
    println!("normal-approximation size:     {} (no guarantee)", clt_approx_n(alpha, delta)?);
    println!("gain over Chernoff-Hoeffding:  {:.1}x", gain_ratio(&spec)?);

    // a budget larger than the bound is accepted; a smaller one is refused
    let roomy = Plan::with_budget(spec, BoundVariant::Simplified, 1.2 * Plan::new(spec, BoundVariant::Simplified)?.length(), 1e9);
    println!("20% larger budget: n_max={}", roomy?.n_max());
    if let Err(e) = Plan::with_budget(spec, BoundVariant::Simplified, 10.0, 10.0) {
        println!("10x10 budget refused: {e}");
    }
    Ok(())
}

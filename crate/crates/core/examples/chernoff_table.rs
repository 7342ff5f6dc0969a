//! Fixed-size sample counts needed by the Chernoff-Hoeffding bound for very
//! small absolute margins, and what the truncated scheme needs instead.
//!
//!     cargo run --example chernoff_table

use tibs::bounds::{chernoff_hoeffding_n, gain_ratio, BoundVariant, ErrorSpec, Plan};
use tibs::cli::group_thousands;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta = 1e-3;
    println!("{:<8} {:>26} {:>26} {:>26}", "alpha", "N_CH", "n_max (beta=0.01)", "n_max (beta=0.1)");
    for k in 3..=7 {
        let alpha = 10f64.powi(-k);
        let n_ch = chernoff_hoeffding_n(alpha, delta)?;
        let n_max = |beta: f64| -> Result<u64, Box<dyn std::error::Error>> {
            Ok(Plan::new(ErrorSpec::new(alpha, beta, delta)?, BoundVariant::Simplified)?.n_max())
        };
        println!(
            "{:<8} {:>26} {:>26} {:>26}",
            format!("{alpha:e}"),
            group_thousands(n_ch),
            group_thousands(n_max(0.01)?),
            group_thousands(n_max(0.1)?)
        );
    }
    for beta in [0.01, 0.1] {
        let g = gain_ratio(&ErrorSpec::new(1e-6, beta, delta)?)?;
        println!("gain at alpha=1e-6, beta={beta}: {g:.0} (beta/4alpha = {:.0})", beta / 4e-6);
    }
    Ok(())
}

//! Drive an external simulator over stdin/stdout. Each trial is one line,
//! `0` or `1`; the child is closed and reaped when the run ends.
//!
//!     cargo run --example external_simulator
//!     cargo run --example external_simulator -- python3 my_model.py

use tibs::bounds::{BoundVariant, ErrorSpec, Plan};
use tibs::engine::{external_source, run_truncated_ibs, TrialSource};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    // default: an awk "model" with success probability 0.2
    let (program, rest) = match args.split_first() {
        Some((p, rest)) => (p.clone(), rest.to_vec()),
        None => ("awk".into(), vec!["BEGIN { srand(7); while (1) print (rand() < 0.2) ? 1 : 0 }".into()]),
    };
    let plan = Plan::new(ErrorSpec::new(0.02, 0.2, 0.05)?, BoundVariant::Simplified)?;
    let mut source = external_source(&program, &rest)?;
    let result = run_truncated_ibs(&mut source, &plan);
    println!("source: {}", source.descriptor());
    source.finish()?;
    match result {
        Ok(r) => println!("m={} successes={} p_hat={:.5} ({:?})", r.m(), r.successes(), r.p_hat(), r.stop_reason()),
        Err(e) => println!("run failed after {:?} trials: {e}", e.trials_consumed()),
    }

    // a simulator that dies early is reported, not silently padded
    let mut short = external_source("printf", &["1\\n0\\n1\\n"])?;
    let err = run_truncated_ibs(&mut short, &plan).unwrap_err();
    println!("short stream: {err}");
    Ok(())
}

use std::collections::BTreeMap;

use proptest::prelude::*;
use tibs::bounds::{BoundVariant, ErrorSpec, Plan};
use tibs::oracle::*;

fn plan(alpha: f64, beta: f64, delta: f64, variant: BoundVariant) -> Plan {
    Plan::new(ErrorSpec::new(alpha, beta, delta).unwrap(), variant).unwrap()
}

fn grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Exit distribution by enumerating every outcome sequence of length n_max.
fn enumerate_exits(n_max: u64, k: u64, p: f64) -> BTreeMap<(u64, u64), f64> {
    let mut out = BTreeMap::new();
    for bits in 0u32..(1 << n_max) {
        let (mut s, mut m, mut prob) = (0u64, 0u64, 1.0f64);
        for i in 0..n_max {
            let success = bits >> i & 1 == 1;
            prob *= if success { p } else { 1.0 - p };
            s += success as u64;
            m = i + 1;
            if m >= n_max || s >= k {
                break;
            }
        }
        // every sequence sharing this prefix maps to the same exit; weight once per prefix
        let tail = n_max - m;
        if bits >> m == 0 || tail == 0 {
            *out.entry((m, s)).or_insert(0.0) += prob;
        }
    }
    out
}

#[test]
fn dp_matches_path_enumeration() {
    for &(n_max, k) in &[(1u64, 1u64), (5, 2), (8, 3), (12, 5), (10, 10), (6, 9)] {
        for &p in &[0.05, 0.3, 0.5, 0.77] {
            let brute = enumerate_exits(n_max, k, p);
            let dp: BTreeMap<_, _> = walk_exit_distribution(n_max, k, p, &ExactOptions::default())
                .unwrap()
                .into_iter()
                .map(|(m, s, w)| ((m, s), w))
                .collect();
            assert_eq!(brute.keys().collect::<Vec<_>>(), dp.keys().collect::<Vec<_>>(), "n_max={n_max} k={k}");
            for (key, w) in &brute {
                assert!((w - dp[key]).abs() < 1e-14, "n_max={n_max} k={k} p={p} {key:?}");
            }
        }
    }
}

#[test]
fn mixed_equals_absolute_below_ratio() {
    for &(alpha, beta) in &[(0.1, 0.5), (0.05, 0.4), (0.02, 0.1), (0.2, 0.9)] {
        let mixed = CriterionSpec::mixed(alpha, beta).unwrap();
        let abs = CriterionSpec::absolute(alpha).unwrap();
        let ratio = alpha / beta;
        for i in 1..20 {
            let p = ratio * i as f64 / 20.0;
            for m in 1..=200u64 {
                for s in 0..=m {
                    assert_eq!(criterion_holds(s, m, p, &mixed), criterion_holds(s, m, p, &abs), "p={p} {s}/{m}");
                }
            }
        }
    }
}

#[test]
fn boundary_instances_stay_strict() {
    // each case sits exactly on the boundary in decimal arithmetic
    let cases = [
        (4u64, 10u64, 0.5, CriterionSpec::absolute(0.1).unwrap()),
        (7, 10, 0.4, CriterionSpec::absolute(0.3).unwrap()),
        (13, 100, 0.1, CriterionSpec::absolute(0.03).unwrap()),
        (6, 10, 0.3, CriterionSpec::relative(1.0).unwrap()),
        (33, 100, 0.3, CriterionSpec::relative(0.1).unwrap()),
        (27, 100, 0.3, CriterionSpec::relative(0.1).unwrap()),
        (6, 10, 0.5, CriterionSpec::mixed(0.1, 0.2).unwrap()),
    ];
    for (s, m, p, crit) in cases {
        let check = evaluate_criterion(s, m, p, &crit);
        assert!(!check.holds, "{s}/{m} p={p} {crit:?}");
        assert!(check.ambiguous);
    }
    // one step inside each boundary holds
    assert!(criterion_holds(5, 10, 0.5, &CriterionSpec::absolute(0.1).unwrap()));
    assert!(criterion_holds(32, 100, 0.3, &CriterionSpec::relative(0.1).unwrap()));
}

#[test]
fn conservation_on_random_pairs() {
    let mut rng = tibs::engine::SplitMix64::new(2024);
    for _ in 0..50 {
        let alpha = 0.02 + 0.13 * rng.next_unit();
        let beta = (alpha * (2.5 + 10.0 * rng.next_unit())).min(0.95);
        let delta = 0.01 + 0.3 * rng.next_unit();
        let Ok(spec) = ErrorSpec::new(alpha, beta, delta) else { continue };
        let variant = BoundVariant::ALL[(rng.next_u64() % 3) as usize];
        let plan = Plan::new(spec, variant).unwrap();
        let p = 0.001 + 0.998 * rng.next_unit();
        let crit = CriterionSpec::mixed(alpha, beta).unwrap();
        let r = exact_walk_coverage(&plan, p, &crit, &ExactOptions::default()).unwrap();
        assert!((r.total_mass() - 1.0).abs() < 1e-12, "mass {}", r.total_mass());
        let em: f64 = r.exit_distribution.iter().map(|e| e.m as f64 * e.probability).sum();
        assert!((em - r.expected_m).abs() < 1e-12 * r.expected_m.max(1.0));
        assert!(r.expected_m <= plan.n_max() as f64 * (1.0 + 1e-12));
        let covered: f64 = r.exit_distribution.iter().filter(|e| e.covered).map(|e| e.probability).sum();
        assert!((covered - r.coverage).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.coverage));
        for e in &r.exit_distribution {
            assert!(e.m == plan.n_max() || e.successes == plan.k_threshold());
        }
    }
}

#[test]
fn near_certain_success_exits_at_top() {
    let plan = plan(0.1, 0.5, 0.1, BoundVariant::Simplified);
    let crit = CriterionSpec::mixed(0.1, 0.5).unwrap();
    let p = 0.999_999;
    let r = exact_walk_coverage(&plan, p, &crit, &ExactOptions::default()).unwrap();
    let k = plan.k_threshold();
    let top = r.exit_map()[&(k, k)];
    assert!(top > 0.9999);
    assert!((r.coverage - top).abs() < 1e-4);
    assert!(criterion_holds(k, k, p, &crit));
}

#[test]
fn walk_coverage_exceeds_target_for_every_variant() {
    for &(alpha, beta, delta) in &[(0.1, 0.5, 0.1), (0.05, 0.4, 0.05), (0.08, 0.3, 0.2), (0.1, 0.9, 0.05)] {
        let crit = CriterionSpec::mixed(alpha, beta).unwrap();
        for variant in BoundVariant::ALL {
            let plan = plan(alpha, beta, delta, variant);
            for p in grid() {
                let r = exact_walk_coverage(&plan, p, &crit, &ExactOptions::default()).unwrap();
                assert!(r.coverage > 1.0 - delta, "{variant} ({alpha},{beta},{delta}) p={p}: {}", r.coverage);
            }
        }
    }
}

#[test]
fn flat_box_reduces_to_fixed_size() {
    let spec = ErrorSpec::new(0.1, 0.5, 0.1).unwrap();
    let plan = Plan::with_overrides(spec, BoundVariant::Exact, Some(106.35), Some(500.0)).unwrap();
    assert!(plan.k_threshold() > plan.n_max());
    let crit = CriterionSpec::mixed(0.1, 0.5).unwrap();
    for p in grid() {
        let walk = exact_walk_coverage(&plan, p, &crit, &ExactOptions::default()).unwrap();
        let fixed = exact_fixed_coverage(plan.n_max(), p, &crit).unwrap();
        assert!((walk.coverage - fixed.coverage).abs() < 1e-12, "p={p}");
        assert!((walk.expected_m - plan.n_max() as f64).abs() < 1e-12 * plan.n_max() as f64);
    }
}

#[test]
fn expected_run_length_falls_with_p() {
    let plan = plan(0.1, 0.5, 0.1, BoundVariant::Simplified);
    let crit = CriterionSpec::mixed(0.1, 0.5).unwrap();
    let lengths: Vec<f64> = (1..=19)
        .map(|i| exact_walk_coverage(&plan, i as f64 * 0.05, &crit, &ExactOptions::default()).unwrap().expected_m)
        .collect();
    assert!(lengths.windows(2).all(|w| w[1] <= w[0]), "{lengths:?}");
}

#[test]
fn fixed_size_guarantees() {
    let mixed = CriterionSpec::mixed(0.1, 0.5).unwrap();
    let abs = CriterionSpec::absolute(0.1).unwrap();
    let n_exact = plan(0.1, 0.5, 0.1, BoundVariant::Exact).n_max();
    assert_eq!(n_exact, 107);
    let n_ch = tibs::bounds::chernoff_hoeffding_n(0.1, 0.1).unwrap();
    assert_eq!(n_ch, 150);
    for p in grid() {
        assert!(exact_fixed_coverage(n_exact, p, &mixed).unwrap().coverage > 0.9, "mixed p={p}");
        assert!(exact_fixed_coverage(n_ch, p, &abs).unwrap().coverage > 0.9, "absolute p={p}");
    }
}

#[test]
fn fixed_coverage_large_n_is_normalized() {
    let r = exact_fixed_coverage(MAX_FIXED_N, 0.3, &CriterionSpec::absolute(0.002).unwrap()).unwrap();
    assert!((r.total_mass() - 1.0).abs() < 1e-12);
    // ±0.002 is ~13.8 standard deviations at n = 1e7; the miss mass is far below rounding
    assert!(r.coverage > 1.0 - 1e-12);
    // ±0.0003 is ~2.07 sd: two-sided normal tail 0.0384 (continuity is negligible here)
    let r = exact_fixed_coverage(MAX_FIXED_N, 0.3, &CriterionSpec::absolute(0.0003).unwrap()).unwrap();
    let z = 0.0003 / (0.3f64 * 0.7 / 1e7).sqrt();
    let normal = 1.0 - 2.0 * (1.0 - statrs::function::erf::erf(z / 2f64.sqrt())) / 2.0;
    assert!((r.coverage - normal).abs() < 1e-3, "{} vs {normal}", r.coverage);
}

#[test]
fn empirical_single_replication() {
    let plan = plan(0.1, 0.5, 0.1, BoundVariant::Simplified);
    let crit = CriterionSpec::mixed(0.1, 0.5).unwrap();
    let r = empirical_coverage(&plan, 0.3, &crit, 1, 17).unwrap();
    assert!(r.coverage == 0.0 || r.coverage == 1.0);
    assert_eq!(r.method, CoverageMethod::Empirical);
    assert!(empirical_coverage(&plan, 0.3, &crit, 0, 17).is_err());
}

#[test]
fn empirical_is_schedule_independent() {
    let plan = plan(0.1, 0.5, 0.1, BoundVariant::Simplified);
    let crit = CriterionSpec::mixed(0.1, 0.5).unwrap();
    let a = empirical_coverage(&plan, 0.3, &crit, 5_000, 8).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| empirical_coverage(&plan, 0.3, &crit, 5_000, 8).unwrap());
    assert_eq!(a, b);
}

#[test]
fn report_json_keys() {
    let plan = plan(0.1, 0.5, 0.1, BoundVariant::Simplified);
    let crit = CriterionSpec::mixed(0.1, 0.5).unwrap();
    let r = exact_walk_coverage(&plan, 0.3, &crit, &ExactOptions::default()).unwrap();
    let v = r.to_json(false);
    for key in ["p_true", "coverage", "expected_m", "method", "n_max", "k_threshold", "criterion"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["method"], "exact_dp");
    assert_eq!(v["criterion"]["mode"], "mixed");
    assert!(v.get("exit_distribution").is_none());
    assert!(r.to_json(true)["exit_distribution"].as_array().unwrap().len() > 10);
    let text = serde_json::to_string(&v).unwrap();
    let back: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(back["coverage"].as_f64().unwrap(), r.coverage);
    assert_eq!(back["expected_m"].as_f64().unwrap(), r.expected_m);
}

proptest! {
    #[test]
    fn criterion_agrees_with_exact_rationals(s in 0u64..=60, extra in 0u64..60, pi in 1u32..100, ai in 1u32..60, bi in 1u32..200) {
        // p, alpha, beta on a decimal lattice so exact evaluation is easy to state
        let m = s.max(1) + extra;
        let (p, alpha, beta) = (pi as f64 / 100.0, ai as f64 / 100.0, bi as f64 / 100.0);
        let dev = (100 * s as i64 - pi as i64 * m as i64).abs();
        let abs_ok = dev < ai as i64 * m as i64;
        let rel_ok = dev * 100 < bi as i64 * pi as i64 * m as i64;
        prop_assert_eq!(criterion_holds(s, m, p, &CriterionSpec::absolute(alpha).unwrap()), abs_ok);
        prop_assert_eq!(criterion_holds(s, m, p, &CriterionSpec::relative(beta).unwrap()), rel_ok);
        prop_assert_eq!(criterion_holds(s, m, p, &CriterionSpec::mixed(alpha, beta).unwrap()), abs_ok || rel_ok);
    }
}

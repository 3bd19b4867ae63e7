use bsde_core::catalog::{build, self_test, Params};
use bsde_core::conditions::{check_h1, SamplerConfig, Verdict};

#[test]
fn documented_verdicts_reproduce_with_default_sampler() {
    let lines = self_test(&SamplerConfig::default()).unwrap();
    let mut mismatches = Vec::new();
    for l in &lines {
        println!(
            "{:<10} {:<4} expected {:<12} observed {}",
            l.generator, l.assumption, l.expected, l.observed
        );
        if l.expected != l.observed {
            mismatches.push(l.clone());
        }
    }
    assert!(mismatches.is_empty(), "{mismatches:?}");
}

#[test]
fn example1_extreme_draws_are_finite_or_skipped() {
    let g = build("example1", &Params::new()).unwrap().generator;
    let r = check_h1(&g, &SamplerConfig::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
    assert!(r.checks[0].skipped > 0);
}

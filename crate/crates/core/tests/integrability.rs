use bsde_core::catalog::{self, make_example1};
use bsde_core::conditions::{check_h4, Verdict};
use bsde_core::{simulate_paths, BSDEProblem, Dimensions, TerminalSpec, TimeGrid};

fn run(
    terminal: TerminalSpec,
    generator: bsde_core::GeneratorSpec,
    paths: usize,
) -> bsde_core::conditions::ConditionReport {
    let dims = Dimensions::new(1, 1).unwrap();
    let problem = BSDEProblem::new(terminal, 1.0, generator, dims).unwrap();
    let bundle = simulate_paths(&TimeGrid::uniform(1.0, 20).unwrap(), dims, paths, 3).unwrap();
    check_h4(&problem, &bundle).unwrap()
}

// E exp(Z²/4) = √2 and ξ log ξ is integrable, so Doob's L log L inequality
// bounds E sup_t E[ξ | F_t].
#[test]
fn exp_quarter_square_is_integrable() {
    let zero = catalog::build("zero", &Default::default()).unwrap().generator;
    let r = run(TerminalSpec::ExpSquare { c: 0.25 }, zero, 100_000);
    assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
}

#[test]
fn example1_with_brownian_norm_is_integrable() {
    let g = make_example1(catalog::default_delta(), 1).unwrap();
    let r = run(TerminalSpec::AbsBrownian { cap: None }, g, 10_000);
    assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
}

#[test]
fn pareto_tail_one_half_is_not() {
    let zero = catalog::build("zero", &Default::default()).unwrap().generator;
    let r = run(TerminalSpec::Pareto { tail: 0.5 }, zero, 100_000);
    assert_eq!(r.verdict, Verdict::Fail, "{}", r.to_text());
}

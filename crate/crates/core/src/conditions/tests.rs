use super::*;
use crate::generator::{Declared, FnGenerator, OffsetGenerator};
use crate::types::{Dimensions, TerminalSpec};

fn declared(rho: Modulus, lambda: f64) -> Declared {
    Declared {
        lambda,
        gamma: 1.0,
        alpha: 0.5,
        rho,
        pbar: None,
        mao: None,
        g_process: GProcess::Zero,
    }
}

fn scalar(name: &str, rho: Modulus, lambda: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> GeneratorSpec {
    FnGenerator::new(
        name,
        Dimensions::new(1, 1).unwrap(),
        declared(rho, lambda),
        false,
        move |_, y, z, _, out| out[0] = f(y[0], z[0]),
    )
}

fn cfg() -> SamplerConfig {
    SamplerConfig {
        samples: 20_000,
        ..SamplerConfig::default()
    }
}

fn assert_self_certifying(gen: &GeneratorSpec, report: &ConditionReport) {
    let c = report
        .checks
        .iter()
        .find(|c| c.verdict == Verdict::Fail)
        .expect("failing check");
    let w = c.worst.as_ref().expect("witness");
    assert!(w.violates());
    if let Some(ineq) = &c.inequality {
        let s = ineq.sides(gen.as_ref(), &w.point).unwrap();
        assert_eq!(s.rhs - s.lhs, w.slack);
    }
}

#[test]
fn negative_cube_is_one_sided_with_zero_modulus() {
    let g = scalar("neg_cube", Modulus::linear(0.0), 0.0, |y, _| -y * y * y);
    let r = check_h1(&g, &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
}

#[test]
fn linear_equality_case_passes() {
    let g = scalar("two_y", Modulus::linear(2.0), 0.0, |y, _| 2.0 * y);
    assert_eq!(check_h1(&g, &cfg()).unwrap().verdict, Verdict::Pass);
}

#[test]
fn square_root_fails_with_small_difference() {
    let g = scalar("sqrt_sign", Modulus::linear(1.0), 0.0, |y, _| {
        y.abs().sqrt() * y.signum()
    });
    let r = check_h1(&g, &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    let w = r.failing_witness().unwrap();
    assert!((w.point.y1[0] - w.point.y2[0]).abs() < 1.0);
    assert_self_certifying(&g, &r);
}

#[test]
fn reports_are_deterministic() {
    let g = scalar("sqrt_sign", Modulus::linear(1.0), 0.0, |y, _| {
        y.abs().sqrt() * y.signum()
    });
    assert_eq!(check_h1(&g, &cfg()).unwrap(), check_h1(&g, &cfg()).unwrap());
}

#[test]
fn zero_generator_has_zero_growth() {
    let g = scalar("zero", Modulus::linear(0.0), 0.0, |_, _| 0.0);
    let r = check_h2(&g, &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.check("growth").unwrap().note.as_ref().unwrap().contains("0.000000e0"));
}

#[test]
fn step_function_jump_is_found() {
    let g = scalar(
        "step",
        Modulus::linear(1.0),
        0.0,
        |y, _| if y >= 0.0 { 1.0 } else { 0.0 },
    );
    let r = check_h2(&g, &cfg()).unwrap();
    assert_eq!(r.check("continuity").unwrap().verdict, Verdict::Fail);
    let w = r.failing_witness().unwrap();
    let (a, b) = (w.point.y1[0], w.point.y2[0]);
    assert!(a.min(b) < 0.0 && a.max(b) >= 0.0);
    assert!((a - b).abs() < 1e-9);
    assert_self_certifying(&g, &r);
}

#[test]
fn sine_of_norm_is_lipschitz() {
    let g = scalar("sin_abs_z", Modulus::linear(0.0), 1.0, |_, z| z.abs().sin());
    assert_eq!(check_h3(&g, &cfg()).unwrap().verdict, Verdict::Pass);
}

#[test]
fn quadratic_in_z_fails_lipschitz() {
    let g = scalar("z_squared", Modulus::linear(0.0), 50.0, |_, z| z * z);
    let r = check_h3(&g, &cfg()).unwrap();
    assert_eq!(r.check("lipschitz_z").unwrap().verdict, Verdict::Fail);
    let w = r.check("lipschitz_z").unwrap().worst.clone().unwrap();
    assert!((w.point.z1[0] - w.point.z2[0]).abs() > 1.0);
    assert_self_certifying(&g, &r);
}

#[test]
fn negative_identity_is_weakly_monotone() {
    let g = scalar("neg_y", Modulus::linear(0.0), 0.0, |y, _| -y);
    for p in [1.5, 2.0, 4.0] {
        let r = check_h1a_h1b(&g, p, MonotoneVariant::A, Some(Modulus::linear(0.0)), &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }
}

#[test]
fn square_violates_concave_weak_modulus() {
    let g = scalar("y_squared", Modulus::linear(1.0), 0.0, |y, _| y * y);
    let r = check_h1a_h1b(&g, 2.0, MonotoneVariant::A, Some(Modulus::linear(10.0)), &cfg()).unwrap();
    assert_eq!(r.check("inequality").unwrap().verdict, Verdict::Fail);
    assert_self_certifying(&g, &r);
}

#[test]
fn one_sided_pass_carries_to_p_near_one() {
    let p = 1.0 + 1e-9;
    for (g, h1) in [
        (
            scalar("two_y", Modulus::linear(2.0), 0.0, |y, _| 2.0 * y),
            Verdict::Pass,
        ),
        (
            scalar("neg_cube", Modulus::linear(0.5), 0.0, |y, _| -y * y * y),
            Verdict::Pass,
        ),
        (
            scalar("sqrt_sign", Modulus::linear(1.0), 0.0, |y, _| {
                y.abs().sqrt() * y.signum()
            }),
            Verdict::Fail,
        ),
    ] {
        let a = check_h1(&g, &cfg()).unwrap();
        let b = check_h1a_h1b(&g, p, MonotoneVariant::A, None, &cfg()).unwrap();
        assert_eq!(a.check("one_sided").unwrap().verdict, h1);
        assert_eq!(b.check("inequality").unwrap().verdict, h1, "{}", g.name());
        assert_eq!(b.check("implication").unwrap().verdict, Verdict::Pass);
    }
}

#[test]
fn mao_variant_needs_a_modulus() {
    let g = scalar("neg_y", Modulus::linear(0.0), 0.0, |y, _| -y);
    assert!(matches!(
        check_h1a_h1b(&g, 2.0, MonotoneVariant::B, None, &cfg()),
        Err(Error::Precondition(_))
    ));
    let r = check_h1a_h1b(&g, 2.0, MonotoneVariant::B, Some(Modulus::linear(0.0)), &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn a_family_examples() {
    let g = scalar("lin", Modulus::linear(1.0), 1.0, |y, z| -y + z);
    let a = AParams {
        mu: 1.0,
        nu: 1.0,
        ..AParams::default()
    };
    assert_eq!(
        check_a_family(&g, Assumption::A1, &a, &cfg()).unwrap().verdict,
        Verdict::Pass
    );

    let zero = scalar("zero", Modulus::linear(0.0), 0.0, |_, _| 0.0);
    for which in [Assumption::A1, Assumption::A2, Assumption::A3] {
        let r = check_a_family(&zero, which, &AParams::default(), &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{which}");
    }

    let abs = scalar("abs_y", Modulus::linear(1.0), 0.0, |y, _| y.abs());
    let r = check_a_family(&abs, Assumption::A1, &AParams::default(), &cfg()).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(r.failing_witness().unwrap().point.y1[0] > 0.0);
    assert_self_certifying(&abs, &r);
    assert!(check_a_family(&abs, Assumption::H1, &AParams::default(), &cfg()).is_err());
}

#[test]
fn perturbation_distances() {
    let g0 = scalar("neg_cube", Modulus::linear(0.0), 0.0, |y, _| -y * y * y);
    assert_eq!(perturbation_distance(&g0, &g0, &cfg()).unwrap().sup, 0.0);
    let lin = scalar("lin", Modulus::linear(1.0), 1.0, |y, z| -y + z);
    for m in [1.0, 10.0, 1000.0] {
        let shifted = OffsetGenerator::constant(lin.clone(), vec![1.0 / m]);
        let d = perturbation_distance(&shifted, &lin, &cfg()).unwrap();
        assert!((d.sup_resolved - 1.0 / m).abs() <= 1e-12, "{m}: {d:?}");
        let wave = OffsetGenerator::sine(lin.clone(), 0, 1.0 / m);
        let d = perturbation_distance(&wave, &lin, &cfg()).unwrap();
        assert!(d.sup_resolved <= 1.0 / m && d.sup > 0.8 / m, "{m}: {d:?}");
    }
}

#[test]
fn bounded_data_pass_integrability() {
    let dims = Dimensions::new(1, 1).unwrap();
    let zero = scalar("zero", Modulus::linear(0.0), 0.0, |_, _| 0.0);
    let problem = BSDEProblem::new(TerminalSpec::AbsBrownian { cap: Some(1.0) }, 1.0, zero, dims).unwrap();
    let bundle = simulate_paths(&TimeGrid::uniform(1.0, 10).unwrap(), dims, 10_000, 1).unwrap();
    let r = check_h4(&problem, &bundle).unwrap();
    assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_text());
    let w = r.checks[0].worst.as_ref().unwrap();
    assert!(w.lhs <= 1.0 + 1e-9);
}

#[test]
fn infinite_mean_terminal_fails_integrability() {
    let dims = Dimensions::new(1, 1).unwrap();
    let zero = scalar("zero", Modulus::linear(0.0), 0.0, |_, _| 0.0);
    let problem = BSDEProblem::new(TerminalSpec::Pareto { tail: 0.5 }, 1.0, zero, dims).unwrap();
    let bundle = simulate_paths(&TimeGrid::uniform(1.0, 10).unwrap(), dims, 10_000, 1).unwrap();
    let r = check_h4(&problem, &bundle).unwrap();
    assert_eq!(r.verdict, Verdict::Fail, "{}", r.to_text());
    assert!(r.failing_witness().unwrap().violates());
}

#[test]
fn integrability_ladder_needs_paths() {
    let dims = Dimensions::new(1, 1).unwrap();
    let zero = scalar("zero", Modulus::linear(0.0), 0.0, |_, _| 0.0);
    let problem = BSDEProblem::new(TerminalSpec::Brownian, 1.0, zero, dims).unwrap();
    let bundle = simulate_paths(&TimeGrid::uniform(1.0, 4).unwrap(), dims, 300, 1).unwrap();
    assert!(matches!(check_h4(&problem, &bundle), Err(Error::Precondition(_))));
    let other = simulate_paths(&TimeGrid::uniform(2.0, 4).unwrap(), dims, 1000, 1).unwrap();
    assert!(matches!(check_h4(&problem, &other), Err(Error::Precondition(_))));
}

#[test]
fn contaminated_generator_is_an_error() {
    let g = scalar("log", Modulus::linear(1.0), 0.0, |y, _| y.ln());
    assert!(matches!(check_h1(&g, &cfg()), Err(Error::NumericContamination { .. })));
}

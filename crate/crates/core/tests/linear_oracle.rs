use bsde_core::catalog::make_linear;
use bsde_core::solver::{picard_solve, SolveConfig};
use bsde_core::{simulate_paths, BSDEProblem, Dimensions, TerminalSpec, TimeGrid};

/// `y_0` error relative to `1e-2 + 3 SE`, and the mean absolute `z` error.
fn errors(a: f64, b: Vec<f64>, c: f64, dims: Dimensions, terminal: TerminalSpec) -> (f64, f64) {
    let (gen, oracle) = make_linear(a, b, c, dims).unwrap();
    let problem = BSDEProblem::new(terminal.clone(), 1.0, gen, dims).unwrap();
    let cfg = SolveConfig {
        steps: 50,
        paths: 5000,
        ..Default::default()
    };
    let bundle = simulate_paths(&TimeGrid::uniform(1.0, 50).unwrap(), dims, 5000, 11).unwrap();
    let (field, trace) = picard_solve(&problem, &cfg, &bundle).unwrap();
    assert!(trace.converged.iter().all(|c| *c));
    let e = oracle.errors(&terminal, &field, &bundle).unwrap();
    (
        e.y0 / (0.01 + 3.0 * terminal_se(&terminal, &bundle, dims.k)),
        e.z_mean_abs,
    )
}

/// Standard error of the sample mean of the terminal value, the irreducible
/// part of the `y_0` error.
fn terminal_se(terminal: &TerminalSpec, bundle: &bsde_core::PathBundle, k: usize) -> f64 {
    let xi = terminal.sample(bundle, k);
    (0..k)
        .map(|j| {
            let col: Vec<f64> = xi.iter().skip(j).step_by(k).copied().collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (col.len() - 1) as f64;
            (var / col.len() as f64).sqrt()
        })
        .fold(0.0, f64::max)
}

#[test]
fn constant_terminal_with_drift_and_source() {
    let dims = Dimensions::new(1, 1).unwrap();
    let (y0, z) = errors(-0.5, vec![0.3], 0.7, dims, TerminalSpec::Constant { value: vec![2.0] });
    // Implicit Euler bias is O(dt).
    assert!(y0 < 1.0, "{y0}");
    assert!(z < 1e-10, "{z}");
}

#[test]
fn brownian_terminal_with_girsanov_drift() {
    let dims = Dimensions::new(1, 1).unwrap();
    let (y0, z) = errors(0.0, vec![0.5], 0.0, dims, TerminalSpec::Brownian);
    assert!(y0 < 1.0, "{y0}");
    assert!(z < 0.05, "{z}");
}

#[test]
fn two_dimensional_brownian_terminal() {
    let dims = Dimensions::new(2, 2).unwrap();
    let (y0, z) = errors(-1.0, vec![0.2, -0.4], 0.1, dims, TerminalSpec::Brownian);
    assert!(y0 < 1.0, "{y0}");
    assert!(z < 0.05, "{z}");
}

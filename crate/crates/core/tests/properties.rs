use std::sync::Arc;

use proptest::prelude::*;

use pencil_maslov::frameflow::IntegratorOptions;
use pencil_maslov::linalg::HermitianMatrix;
use pencil_maslov::maslov::{spectral_count, spectral_count_truncated};
use pencil_maslov::oracle::{self, oracle_count};
use pencil_maslov::pencil::{BumpCoefficients, CoefficientField, Domain, Limits, PencilProblem};

fn scalar_bump(v_inf: f64, amplitude: f64, width: f64, f1: f64, f2: f64) -> PencilProblem {
    let s = HermitianMatrix::scalar;
    let limits = Limits { v: s(v_inf), f1: s(f1), f2: s(f2) };
    let source = BumpCoefficients { v_limit: s(v_inf), amplitude: s(amplitude), center: 0.0, width, f1: s(f1), f2: s(f2) };
    let field = CoefficientField { source: Arc::new(source), minus: limits.clone(), plus: Some(limits), delta: f2 };
    PencilProblem::new("bump", field, Domain::WholeLine).unwrap()
}

/// Eigenvalues of the discretized problem in `[-eps, eps]`, from the inertia of `Q`.
fn oracle_eigs_near_zero(p: &PencilProblem, eps: f64) -> usize {
    let (a, b) = oracle::oracle_interval(p).unwrap();
    let hi = eps.max(1.0);
    let dp = oracle::discretize(p, a, b, oracle::default_intervals(p, a, b, hi).unwrap()).unwrap();
    oracle::evaluate(&dp, -eps).negative - oracle::evaluate(&dp, eps).negative
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn maslov_count_matches_oracle_for_scalar_bumps(
        v_inf in -2.0f64..-0.5,
        amplitude in 0.0f64..4.0,
        width in 1.0f64..4.0,
        f1 in 0.5f64..2.0,
        f2 in 0.5f64..2.0,
    ) {
        let p = scalar_bump(v_inf, amplitude, width, f1, f2);
        prop_assume!(oracle_eigs_near_zero(&p, 1e-2) == 0);
        let n = spectral_count(&p, 0.0, &IntegratorOptions::default()).unwrap().n;
        let oc = oracle_count(&p, 0.0, 1).unwrap();
        prop_assert_eq!(n, oc.count);
    }
}

#[test]
fn truncated_counts_stabilize_at_whole_line_value() {
    let opts = IntegratorOptions::default();
    let p = PencilProblem::builtin("example4").unwrap();
    let whole = spectral_count(&p, 0.0, &opts).unwrap();
    let mut prev = 0;
    let mut seen = Vec::new();
    for l in [-20.0, -5.0, 0.0, 5.0, 20.0, 60.0, whole.x_right] {
        let n = spectral_count_truncated(&p, l, 0.0, &opts).unwrap().n;
        assert!(n >= prev, "count dropped at L = {l}: {seen:?} then {n}");
        seen.push(n);
        prev = n;
    }
    assert_eq!(prev, 5);
    assert!(seen[0] < 5);
}

#[test]
fn counts_decrease_with_lambda() {
    let opts = IntegratorOptions::default();
    let p = PencilProblem::builtin("example2").unwrap();
    let roots = oracle_count(&p, 0.0, 1).unwrap().roots;
    assert_eq!(roots.len(), 3);
    // Between consecutive eigenvalues the count drops by one.
    let mut probes = vec![0.5 * roots[0]];
    probes.extend(roots.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    probes.push(roots[2] + 0.05);
    let counts: Vec<usize> = probes.iter().map(|&l| spectral_count(&p, l, &opts).unwrap().n).collect();
    assert_eq!(counts, vec![3, 2, 1, 0]);
}

//! Seeded random problems: negative definite `V₋`, constant positive `f₁`,
//! `f₂`, and a Gaussian bump in `V`.

use std::sync::Arc;

use rand::Rng;

use super::{BoundaryData, BumpCoefficients, CoefficientField, Domain, Limits, PencilProblem, PhiKind};
use crate::error::Result;
use crate::linalg::{herm_eig, CMat, HermitianMatrix, C64};

fn random_unitary(rng: &mut impl Rng, n: usize) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    herm_eig(&HermitianMatrix::symmetrized(&m)).map(|e| e.vectors).unwrap_or_else(|_| CMat::identity(n, n))
}

/// `Q diag(d) Q*` for a random unitary `Q` and eigenvalues drawn from `range`.
pub fn random_hermitian_with_spectrum(rng: &mut impl Rng, n: usize, range: std::ops::Range<f64>) -> HermitianMatrix {
    let q = random_unitary(rng, n);
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(range.clone())).collect();
    let dm = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, d.iter().map(|&v| C64::new(v, 0.0))));
    HermitianMatrix::symmetrized(&(&q * dm * q.adjoint()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RandomDomain {
    Half,
    Whole,
}

pub fn random_problem(rng: &mut impl Rng, n: usize, domain: RandomDomain, label: &str) -> Result<PencilProblem> {
    let v_limit = random_hermitian_with_spectrum(rng, n, -2.0..-0.5);
    let f1 = random_hermitian_with_spectrum(rng, n, 0.5..2.0);
    let f2 = random_hermitian_with_spectrum(rng, n, 0.5..2.0);
    let delta = f2.min_eigenvalue()?;
    let amplitude = random_hermitian_with_spectrum(rng, n, -2.0..5.0);
    let width = rng.gen_range(1.5..4.0);
    let center = match domain {
        RandomDomain::Half => rng.gen_range(-6.0..-1.0),
        RandomDomain::Whole => rng.gen_range(-3.0..3.0),
    };
    let source = BumpCoefficients {
        v_limit: v_limit.clone(),
        amplitude,
        center,
        width,
        f1: f1.clone(),
        f2: f2.clone(),
    };
    let limits = Limits { v: v_limit, f1, f2 };
    let (plus, dom) = match domain {
        RandomDomain::Whole => (Some(limits.clone()), Domain::WholeLine),
        RandomDomain::Half => {
            let c = random_hermitian_with_spectrum(rng, n, -2.0..4.0);
            let c2 = random_hermitian_with_spectrum(rng, n, -3.0..-0.5);
            (None, Domain::HalfLine { boundary: BoundaryData { c, phi: PhiKind::Linear(c2) } })
        }
    };
    let field = CoefficientField { source: Arc::new(source), minus: limits, plus, delta };
    PencilProblem::new(label, field, dom)
}

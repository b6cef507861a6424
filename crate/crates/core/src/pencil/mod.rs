//! Problem model for the quadratic pencil `y'' + V y = λ f₁ y + λ² f₂ y`:
//! coefficients with their limits, boundary data, assumption checks, the
//! a priori bound on real eigenvalues and the asymptotic unstable frame.

mod assumptions;
mod coefficients;
pub mod random;

pub use assumptions::{
    check_boundary_assumptions, check_coefficients, check_hyperbolicity, check_problem, default_mu_grid, polynomial_roots,
    AssumptionCheck, AssumptionReport, CheckStatus, GAP_TOL,
};
pub use coefficients::{BumpCoefficients, Builtin, CoeffValues, CoefficientSource, TableCoefficients};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lagrangian::LagrangianFrame;
use crate::linalg::{c, herm_eig, sqrt_pd, CMat, HermitianMatrix, C64, PD_TOL};

/// Largest coefficient deviation from the limit accepted at the truncation point.
pub const LIMIT_TOL: f64 = 1e-8;
/// Factor applied to the analytic bound on real eigenvalues.
pub const LAMBDA_SAFETY: f64 = 1.25;

/// Limits `(V, f₁, f₂)` at one end of the line.
#[derive(Clone, Debug)]
pub struct Limits {
    pub v: HermitianMatrix,
    pub f1: HermitianMatrix,
    pub f2: HermitianMatrix,
}

impl Limits {
    pub fn n(&self) -> usize {
        self.v.dim()
    }

    /// `λ f₁ + λ² f₂ - V`
    pub fn a_matrix(&self, lambda: f64) -> HermitianMatrix {
        self.f1.scale(lambda).axpy(lambda * lambda, &self.f2).sub(&self.v)
    }
}

/// Coefficients together with their asymptotic data.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub source: Arc<dyn CoefficientSource>,
    pub minus: Limits,
    pub plus: Option<Limits>,
    /// Lower bound `f₂ ≥ δ I`.
    pub delta: f64,
}

impl CoefficientField {
    pub fn n(&self) -> usize {
        self.minus.n()
    }

    pub fn eval(&self, x: f64) -> Result<CoeffValues> {
        self.source.eval(x)
    }

    /// `‖V(x) - V∓‖ + ‖f₁(x) - f₁∓‖ + ‖f₂(x) - f₂∓‖` (Frobenius norms).
    pub fn deviation(&self, x: f64, side: Side) -> Result<f64> {
        let lim = match side {
            Side::Minus => &self.minus,
            Side::Plus => self.plus.as_ref().ok_or_else(|| Error::Config("no limits at +∞".into()))?,
        };
        let e = self.eval(x)?;
        Ok((e.v - lim.v.matrix()).norm() + (e.f1 - lim.f1.matrix()).norm() + (e.f2 - lim.f2.matrix()).norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// The boundary map `φ(λ)`.
#[derive(Clone, Debug)]
pub enum PhiKind {
    /// `φ(λ) = λ C₂`
    Linear(HermitianMatrix),
    /// `φ(λ) = Σ_k λ^k P_k`, coefficients listed from `k = 0`.
    Polynomial(Vec<HermitianMatrix>),
}

/// Boundary condition `(c + φ(λ)) y(0) - y'(0) = 0`.
#[derive(Clone, Debug)]
pub struct BoundaryData {
    pub c: HermitianMatrix,
    pub phi: PhiKind,
}

impl BoundaryData {
    pub fn n(&self) -> usize {
        self.c.dim()
    }

    pub fn phi(&self, lambda: C64) -> CMat {
        let n = self.n();
        match &self.phi {
            PhiKind::Linear(c2) => c2.matrix() * lambda,
            PhiKind::Polynomial(coeffs) => {
                let mut acc = CMat::zeros(n, n);
                for p in coeffs.iter().rev() {
                    acc = acc * lambda + p.matrix();
                }
                acc
            }
        }
    }

    /// `c + φ(λ)` at real `λ`.
    pub fn robin_matrix(&self, lambda: f64) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.c.matrix() + self.phi(c(lambda)))
    }

    /// `C₂` when `φ` is linear (a polynomial with only a linear term counts).
    pub fn linear_part(&self) -> Option<HermitianMatrix> {
        match &self.phi {
            PhiKind::Linear(c2) => Some(c2.clone()),
            PhiKind::Polynomial(coeffs) => {
                let zero = |m: &HermitianMatrix| m.matrix().norm() == 0.0;
                let n = self.n();
                let higher_zero = coeffs.iter().skip(2).all(zero);
                let const_zero = coeffs.first().map_or(true, zero);
                if higher_zero && const_zero {
                    Some(coeffs.get(1).cloned().unwrap_or_else(|| HermitianMatrix::zeros(n)))
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Domain {
    /// `x ≤ 0` with a λ-dependent Robin condition at `0`.
    HalfLine { boundary: BoundaryData },
    /// The whole line.
    WholeLine,
    /// `x ≤ L` with a Dirichlet condition at `L`.
    Truncated { l: f64 },
}

impl Domain {
    pub fn kind(&self) -> &'static str {
        match self {
            Domain::HalfLine { .. } => "half",
            Domain::WholeLine => "whole",
            Domain::Truncated { .. } => "truncated",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PencilProblem {
    pub name: String,
    pub coeffs: CoefficientField,
    pub domain: Domain,
}

impl PencilProblem {
    pub fn new(name: impl Into<String>, coeffs: CoefficientField, domain: Domain) -> Result<Self> {
        let n = coeffs.n();
        if coeffs.source.n() != n || coeffs.minus.f1.dim() != n || coeffs.minus.f2.dim() != n {
            return Err(Error::Dimension("coefficients and limits have different sizes".into()));
        }
        if let Some(p) = &coeffs.plus {
            if p.n() != n || p.f1.dim() != n || p.f2.dim() != n {
                return Err(Error::Dimension("limits at +∞ have the wrong size".into()));
            }
        }
        if !(coeffs.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", coeffs.delta)));
        }
        match &domain {
            Domain::HalfLine { boundary } => {
                if boundary.n() != n {
                    return Err(Error::Dimension("boundary matrix c has the wrong size".into()));
                }
                let dims_ok = match &boundary.phi {
                    PhiKind::Linear(c2) => c2.dim() == n,
                    PhiKind::Polynomial(ps) => ps.iter().all(|p| p.dim() == n),
                };
                if !dims_ok {
                    return Err(Error::Dimension("φ coefficients have the wrong size".into()));
                }
            }
            Domain::WholeLine => {
                if coeffs.plus.is_none() {
                    return Err(Error::Config("a whole-line problem needs limits at +∞".into()));
                }
            }
            Domain::Truncated { l } => {
                if !l.is_finite() {
                    return Err(Error::Config("truncation point L must be finite".into()));
                }
            }
        }
        Ok(Self { name: name.into(), coeffs, domain })
    }

    pub fn n(&self) -> usize {
        self.coeffs.n()
    }

    /// `λ f₁(x) + λ² f₂(x) - V(x)`; the first-order system is `y' = [[0, I], [K, 0]] y`.
    pub fn k_matrix(&self, x: f64, lambda: f64) -> Result<CMat> {
        let e = self.coeffs.eval(x)?;
        Ok(e.f1 * c(lambda) + e.f2 * c(lambda * lambda) - e.v)
    }

    pub fn boundary(&self) -> Option<&BoundaryData> {
        match &self.domain {
            Domain::HalfLine { boundary } => Some(boundary),
            _ => None,
        }
    }

    /// Right end of the integration interval: `0`, `L`, or the `+∞` probe.
    pub fn right_end(&self) -> Result<f64> {
        match &self.domain {
            Domain::HalfLine { .. } => Ok(0.0),
            Domain::Truncated { l } => Ok(*l),
            Domain::WholeLine => x_max(self),
        }
    }

    /// Built-in problems by name.
    pub fn builtin(name: &str) -> Result<Self> {
        let scalar = |v: f64| HermitianMatrix::scalar(v);
        let field = |b: Builtin, minus: Limits, plus: Option<Limits>, delta: f64| CoefficientField {
            source: Arc::new(b),
            minus,
            plus,
            delta,
        };
        let lim1 = || Limits { v: scalar(-1.0), f1: scalar(1.0), f2: scalar(2.0) };
        match name {
            "example1" => Self::new(
                name,
                field(Builtin::Example1, lim1(), None, 2.0),
                Domain::HalfLine { boundary: BoundaryData { c: scalar(18.0), phi: PhiKind::Linear(scalar(-9.0)) } },
            ),
            "example2" => Self::new(name, field(Builtin::Example2, lim1(), Some(lim1()), 2.0), Domain::WholeLine),
            "example3" => {
                let lim = Limits {
                    v: HermitianMatrix::identity(2).scale(-1.0),
                    f1: HermitianMatrix::identity(2),
                    f2: HermitianMatrix::identity(2).scale(2.0),
                };
                let c = HermitianMatrix::from_real_rows(&[&[18.0, 2.0], &[2.0, 25.0]])?;
                Self::new(
                    name,
                    field(Builtin::Example3, lim, None, 2.0),
                    Domain::HalfLine {
                        boundary: BoundaryData { c, phi: PhiKind::Linear(HermitianMatrix::identity(2).scale(-9.0)) },
                    },
                )
            }
            "example4" => {
                let lim = Limits {
                    v: HermitianMatrix::from_real_rows(&[&[-1.0, 0.5], &[0.5, -1.0]])?,
                    f1: HermitianMatrix::identity(2),
                    f2: HermitianMatrix::identity(2).scale(2.0),
                };
                Self::new(name, field(Builtin::Example4, lim.clone(), Some(lim), 2.0), Domain::WholeLine)
            }
            "constant" => {
                let lim = Limits { v: scalar(-1.0), f1: scalar(1.0), f2: scalar(1.0) };
                Self::new(name, field(Builtin::Constant, lim.clone(), Some(lim), 1.0), Domain::WholeLine)
            }
            "unstable-limit" => {
                let lim = Limits { v: scalar(1.0), f1: scalar(1.0), f2: scalar(1.0) };
                Self::new(name, field(Builtin::UnstableLimit, lim.clone(), Some(lim), 1.0), Domain::WholeLine)
            }
            other => Err(Error::Config(format!(
                "unknown built-in problem `{other}` (known: {})",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }
}

pub const BUILTIN_NAMES: [&str; 6] = ["example1", "example2", "example3", "example4", "constant", "unstable-limit"];

/// `ν_j(λ)`, `μ_j = √ν_j` and eigenvectors `r_j` of `λ f₁∓ + λ² f₂∓ - V∓`.
#[derive(Clone, Debug)]
pub struct AsymptoticDecomposition {
    pub lambda: f64,
    pub nus: Vec<f64>,
    pub mus: Vec<f64>,
    pub r_vectors: CMat,
}

pub fn asymptotic_decomposition(p: &PencilProblem, side: Side, lambda: f64) -> Result<AsymptoticDecomposition> {
    let lim = match side {
        Side::Minus => &p.coeffs.minus,
        Side::Plus => p.coeffs.plus.as_ref().ok_or_else(|| Error::Config("no limits at +∞".into()))?,
    };
    let e = herm_eig(&lim.a_matrix(lambda))?;
    if e.values[0] <= PD_TOL {
        return Err(Error::HyperbolicityLost { lambda, nu: e.values[0] });
    }
    let mus = e.values.iter().map(|v| v.sqrt()).collect();
    Ok(AsymptoticDecomposition { lambda, nus: e.values, mus, r_vectors: e.vectors })
}

/// The plane of solutions decaying at `-∞` for the limiting system:
/// columns `(r_j; μ_j r_j)`.
pub fn unstable_frame_at_minus_infinity(p: &PencilProblem, lambda: f64) -> Result<LagrangianFrame> {
    let d = asymptotic_decomposition(p, Side::Minus, lambda)?;
    let n = p.n();
    let mut y = d.r_vectors.clone();
    for k in 0..n {
        for j in 0..n {
            y[(j, k)] *= c(d.mus[k]);
        }
    }
    LagrangianFrame::new(d.r_vectors, y)
}

/// `√(λ f₁₋ + λ² f₂₋ - V₋) - c - φ(λ)`, whose inertia gives the bottom-shelf count.
pub fn morse_matrix(p: &PencilProblem, lambda: f64) -> Result<HermitianMatrix> {
    let b = p.boundary().ok_or_else(|| Error::Config("Morse matrix needs a half-line problem".into()))?;
    let a = p.coeffs.minus.a_matrix(lambda);
    let root = sqrt_pd(&a).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eigenvalue } => Error::HyperbolicityLost { lambda, nu: min_eigenvalue },
        other => other,
    })?;
    Ok(root.sub(&b.robin_matrix(lambda)?))
}

const PROBE_LIMIT: f64 = 1048576.0;

fn probe(p: &PencilProblem, side: Side) -> Result<f64> {
    let sign = match side {
        Side::Minus => -1.0,
        Side::Plus => 1.0,
    };
    let mut x = 1.0;
    while x <= PROBE_LIMIT {
        // Every point of [x, 2x] must be limit-close, not just the endpoint.
        let ok = (0..=16).try_fold(true, |acc, k| -> Result<bool> {
            let t = sign * x * (1.0 + k as f64 / 16.0);
            Ok(acc && p.coeffs.deviation(t, side)? <= LIMIT_TOL)
        })?;
        if ok {
            return Ok(sign * x);
        }
        x *= 2.0;
    }
    Err(Error::Assumption(format!(
        "coefficients do not reach their limits at {}∞ within |x| ≤ {PROBE_LIMIT}",
        if sign < 0.0 { "-" } else { "+" }
    )))
}

/// Left truncation point standing in for `-∞`: `-2^k` with coefficients within
/// `LIMIT_TOL` of their limits on `[2x, x]`.
pub fn x_min(p: &PencilProblem) -> Result<f64> {
    probe(p, Side::Minus)
}

/// Right truncation point standing in for `+∞` on whole-line problems.
pub fn x_max(p: &PencilProblem) -> Result<f64> {
    probe(p, Side::Plus)
}

/// Evenly spaced sample points over the effective domain, for sup-norm estimates.
pub fn default_sample_grid(p: &PencilProblem) -> Result<Vec<f64>> {
    let a = x_min(p)?;
    let b = match &p.domain {
        Domain::HalfLine { .. } => 0.0,
        Domain::Truncated { l } => *l,
        Domain::WholeLine => x_max(p)?,
    };
    let m = 4000;
    Ok((0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect())
}

fn sup_norm(p: &PencilProblem, grid: &[f64], pick: impl Fn(&CoeffValues) -> &CMat) -> Result<f64> {
    let mut s = 0.0_f64;
    for &x in grid {
        let e = p.coeffs.eval(x)?;
        s = s.max(HermitianMatrix::symmetrized(pick(&e)).norm());
    }
    Ok(s)
}

/// Upper bound `λ∞` on real eigenvalues, with the safety factor applied.
pub fn lambda_max(p: &PencilProblem, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Config("empty sample grid for the λ bound".into()));
    }
    let lim = &p.coeffs.minus;
    let mut v_sup = sup_norm(p, grid, |e| &e.v)?.max(lim.v.norm());
    let mut f2_sup = sup_norm(p, grid, |e| &e.f2)?.max(lim.f2.norm());
    if let Some(plus) = &p.coeffs.plus {
        v_sup = v_sup.max(plus.v.norm());
        f2_sup = f2_sup.max(plus.f2.norm());
    }
    let delta = p.coeffs.delta;
    let bound = match p.boundary() {
        Some(b) => {
            let c_norm = b.c.norm();
            let beta = 2.0 * (c_norm + 1.0);
            let nu = v_sup + c_norm * beta;
            let nu_const = lim.v.norm() + c_norm * beta;
            ((f2_sup * nu).sqrt() / delta).max((lim.f2.norm() * nu_const).sqrt() / delta)
        }
        None => (f2_sup * v_sup).sqrt() / delta,
    };
    Ok(LAMBDA_SAFETY * bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_whole(v: f64, f1: f64, f2: f64) -> PencilProblem {
        let lim = Limits {
            v: HermitianMatrix::scalar(v),
            f1: HermitianMatrix::scalar(f1),
            f2: HermitianMatrix::scalar(f2),
        };
        let src = BumpCoefficients {
            v_limit: lim.v.clone(),
            amplitude: HermitianMatrix::scalar(0.0),
            center: 0.0,
            width: 1.0,
            f1: lim.f1.clone(),
            f2: lim.f2.clone(),
        };
        let field = CoefficientField { source: Arc::new(src), minus: lim.clone(), plus: Some(lim), delta: f2 };
        PencilProblem::new("scalar", field, Domain::WholeLine).unwrap()
    }

    #[test]
    fn asymptotic_scalar_cases() {
        let p = scalar_whole(-1.0, 1.0, 2.0);
        let d = asymptotic_decomposition(&p, Side::Minus, 0.0).unwrap();
        assert!((d.nus[0] - 1.0).abs() < 1e-15 && (d.mus[0] - 1.0).abs() < 1e-15);
        assert!((d.r_vectors[(0, 0)].norm() - 1.0).abs() < 1e-15);
        let d = asymptotic_decomposition(&p, Side::Minus, 1.0).unwrap();
        assert!((d.nus[0] - 4.0).abs() < 1e-14 && (d.mus[0] - 2.0).abs() < 1e-14);
        let f = unstable_frame_at_minus_infinity(&p, 0.0).unwrap();
        assert!((f.y()[(0, 0)] - f.x()[(0, 0)]).norm() < 1e-15);
    }

    #[test]
    fn asymptotic_identity_multiple() {
        let p = PencilProblem::builtin("example3").unwrap();
        let d = asymptotic_decomposition(&p, Side::Minus, 0.0).unwrap();
        assert_eq!(d.nus, vec![1.0, 1.0]);
        let f = unstable_frame_at_minus_infinity(&p, 0.0).unwrap();
        assert!((f.x() - CMat::identity(2, 2)).norm() < 1e-15);
        assert!((f.y() - CMat::identity(2, 2)).norm() < 1e-15);
        assert!(f.lagrangian_defect() < 1e-15);
    }

    #[test]
    fn asymptotic_reconstructs_and_is_monotone() {
        let p = PencilProblem::builtin("example4").unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let lambda = 0.1 * k as f64;
            let d = asymptotic_decomposition(&p, Side::Minus, lambda).unwrap();
            let dd = CMat::from_diagonal(&nalgebra::DVector::from_iterator(2, d.nus.iter().map(|&v| c(v))));
            let rec = &d.r_vectors * dd * d.r_vectors.adjoint();
            assert!((rec - p.coeffs.minus.a_matrix(lambda).matrix()).norm() < 1e-10);
            assert!(d.nus[0] > prev);
            prev = d.nus[0];
        }
    }

    #[test]
    fn hyperbolicity_loss_is_reported() {
        let p = scalar_whole(1.0, 1.0, 1.0);
        assert!(matches!(asymptotic_decomposition(&p, Side::Minus, 0.0), Err(Error::HyperbolicityLost { .. })));
    }

    #[test]
    fn whole_line_lambda_bound() {
        let p = PencilProblem::builtin("example2").unwrap();
        let grid = default_sample_grid(&p).unwrap();
        let l = lambda_max(&p, &grid).unwrap();
        assert!((l - 1.25 * 2f64.sqrt() / 2.0).abs() < 1e-6, "{l}");
        // f₂ and δ scaled by 4 halve the bound.
        let a = lambda_max(&scalar_whole(-1.0, 1.0, 1.0), &[0.0]).unwrap();
        let b = lambda_max(&scalar_whole(-1.0, 1.0, 4.0), &[0.0]).unwrap();
        assert!((b - a / 2.0).abs() < 1e-14);
        // translation of the grid does not matter for constant coefficients
        let t = lambda_max(&scalar_whole(-1.0, 1.0, 1.0), &[100.0, 200.0]).unwrap();
        assert_eq!(a, t);
        assert!(lambda_max(&p, &[]).is_err());
    }

    #[test]
    fn half_line_lambda_bound() {
        let p = PencilProblem::builtin("example1").unwrap();
        let grid = default_sample_grid(&p).unwrap();
        let l = lambda_max(&p, &grid).unwrap();
        let nu = 1035.0 + 18.0 * 38.0;
        let want = 1.25 * (2.0 * nu as f64).sqrt() / 2.0;
        assert!((l - want).abs() < 1e-6, "{l} vs {want}");
    }

    #[test]
    fn half_line_bound_without_c_uses_sup_norm_only() {
        let mut p = PencilProblem::builtin("example1").unwrap();
        if let Domain::HalfLine { boundary } = &mut p.domain {
            boundary.c = HermitianMatrix::scalar(0.0);
        }
        let l = lambda_max(&p, &[0.0]).unwrap();
        assert!((l - 1.25 * (2.0f64 * 1035.0).sqrt() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn truncation_probes() {
        let p1 = PencilProblem::builtin("example1").unwrap();
        assert_eq!(x_min(&p1).unwrap(), -256.0);
        let p2 = PencilProblem::builtin("example2").unwrap();
        assert_eq!(x_min(&p2).unwrap(), -512.0);
        assert_eq!(x_max(&p2).unwrap(), 512.0);
        let p4 = PencilProblem::builtin("example4").unwrap();
        assert_eq!(x_max(&p4).unwrap(), 256.0);
    }

    #[test]
    fn morse_matrix_examples() {
        use crate::linalg::{morse_index, ZERO_TOL};
        let p1 = PencilProblem::builtin("example1").unwrap();
        assert_eq!(morse_index(&morse_matrix(&p1, 0.0).unwrap(), ZERO_TOL).unwrap(), (1, 0));
        let p3 = PencilProblem::builtin("example3").unwrap();
        assert_eq!(morse_index(&morse_matrix(&p3, 0.0).unwrap(), ZERO_TOL).unwrap(), (2, 0));
        let grid = default_sample_grid(&p1).unwrap();
        let lmax = lambda_max(&p1, &grid).unwrap();
        assert_eq!(morse_index(&morse_matrix(&p1, lmax).unwrap(), ZERO_TOL).unwrap(), (0, 0));
    }

    #[test]
    fn polynomial_phi_evaluation() {
        let b = BoundaryData {
            c: HermitianMatrix::scalar(1.0),
            phi: PhiKind::Polynomial(vec![
                HermitianMatrix::scalar(0.0),
                HermitianMatrix::scalar(-2.0),
                HermitianMatrix::scalar(-0.5),
            ]),
        };
        assert!((b.phi(c(2.0))[(0, 0)] - c(-6.0)).norm() < 1e-15);
        assert!(b.linear_part().is_none());
        let lin = BoundaryData {
            c: HermitianMatrix::scalar(1.0),
            phi: PhiKind::Polynomial(vec![HermitianMatrix::scalar(0.0), HermitianMatrix::scalar(-3.0)]),
        };
        assert_eq!(lin.linear_part().unwrap().get(0, 0), c(-3.0));
    }
}

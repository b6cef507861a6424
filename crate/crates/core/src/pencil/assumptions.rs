use std::f64::consts::PI;

use serde::Serialize;

use super::{BoundaryData, Limits, PencilProblem, PhiKind};
use crate::error::{Error, Result};
use crate::linalg::{c, det_complex, herm_eig, CMat, HermitianMatrix, C64};

/// Required margin `γ ≤ -GAP_TOL` for the essential-spectrum gap.
pub const GAP_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Ok,
    Violated,
    Unverified,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub gamma_estimate: Option<f64>,
}

impl AssumptionReport {
    /// No check is violated (unverified checks do not count against).
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Violated)
    }

    pub fn status_of(&self, name: &str) -> Option<CheckStatus> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck { name: name.into(), status, detail: detail.into() });
    }

    pub fn merge(mut self, other: AssumptionReport) -> Self {
        self.checks.extend(other.checks);
        self.gamma_estimate = match (self.gamma_estimate, other.gamma_estimate) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self
    }
}

/// `μ` grid on `[0, 2√(‖V‖ + λ∞‖f₁‖ + λ∞²‖f₂‖)]` with 200 points.
pub fn default_mu_grid(limits: &Limits, lambda_inf: f64) -> Vec<f64> {
    let top = 2.0
        * (limits.v.norm() + lambda_inf * limits.f1.norm() + lambda_inf * lambda_inf * limits.f2.norm()).sqrt();
    let m = 200;
    (0..m).map(|k| top * k as f64 / (m - 1) as f64).collect()
}

/// For each `μ`, the largest real part among the `2n` roots `λ` of
/// `det(λ² f₂ + λ f₁ + μ² I - V) = 0`; the limits are hyperbolic when the
/// maximum over the grid is at most `-GAP_TOL`.
pub fn check_hyperbolicity(limits: &Limits, mu_grid: &[f64], label: &str) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    let name = format!("hyperbolicity{label}");
    if mu_grid.is_empty() {
        report.push(&name, CheckStatus::Violated, "empty μ grid");
        return report;
    }
    let n = limits.n();
    let mut gamma = f64::NEG_INFINITY;
    let mut worst_mu = 0.0;
    for &mu in mu_grid {
        let k = CMat::identity(n, n) * c(mu * mu) - limits.v.matrix();
        let char_det = |lambda: C64| {
            let m = limits.f2.matrix() * (lambda * lambda) + limits.f1.matrix() * lambda + &k;
            det_complex(&m)
        };
        let scale = ((mu * mu + limits.v.norm()) / limits.f2.min_eigenvalue().unwrap_or(1.0).max(1e-300))
            .sqrt()
            .max(1.0);
        let coeffs = interpolate_polynomial(char_det, 2 * n, scale);
        match polynomial_roots(&coeffs) {
            Some(roots) => {
                let m = roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                if m > gamma {
                    gamma = m;
                    worst_mu = mu;
                }
            }
            None => {
                report.push(&name, CheckStatus::Violated, format!("root finder did not converge at μ = {mu}"));
                return report;
            }
        }
    }
    report.gamma_estimate = Some(gamma);
    if gamma <= -GAP_TOL {
        report.push(&name, CheckStatus::Ok, format!("max Re λ = {gamma:.6} over the μ grid"));
    } else {
        report.push(
            &name,
            CheckStatus::Violated,
            format!("a root with Re λ = {gamma:.6} ≥ -{GAP_TOL} at μ = {worst_mu:.4}"),
        );
    }
    report
}

/// Coefficients (ascending) of the degree-`deg` polynomial `p`, from its
/// values at `deg + 1` points on the circle of radius `scale`.
fn interpolate_polynomial(p: impl Fn(C64) -> C64, deg: usize, scale: f64) -> Vec<C64> {
    let m = deg + 1;
    let values: Vec<C64> = (0..m)
        .map(|j| p(C64::from_polar(scale, 2.0 * PI * j as f64 / m as f64)))
        .collect();
    (0..m)
        .map(|k| {
            let s: C64 = (0..m)
                .map(|j| values[j] * C64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / m as f64))
                .sum();
            s / (m as f64) / scale.powi(k as i32)
        })
        .collect()
}

/// All roots of a polynomial with ascending coefficients, by Aberth iteration.
/// `None` if the leading coefficient vanishes or the iteration stalls.
pub fn polynomial_roots(coeffs: &[C64]) -> Option<Vec<C64>> {
    let deg = coeffs.len().checked_sub(1)?;
    let lead = coeffs[deg];
    if deg == 0 {
        return Some(Vec::new());
    }
    if lead.norm() == 0.0 {
        return None;
    }
    let monic: Vec<C64> = coeffs.iter().map(|&a| a / lead).collect();
    // Cauchy bound on root moduli for the starting circle.
    let radius = 1.0 + monic[..deg].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let start = radius.min(
        monic[..deg].iter().enumerate().map(|(k, a)| a.norm().powf(1.0 / (deg - k) as f64)).fold(0.0, f64::max) * 2.0
            + 1e-3,
    );
    let mut z: Vec<C64> =
        (0..deg).map(|k| C64::from_polar(start, 2.0 * PI * k as f64 / deg as f64 + 0.4)).collect();
    let eval = |x: C64| {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for a in monic.iter().rev() {
            dp = dp * x + p;
            p = p * x + a;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for k in 0..deg {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            if !w.re.is_finite() || !w.im.is_finite() {
                continue;
            }
            z[k] -= w;
            moved = moved.max(w.norm() / z[k].norm().max(1.0));
        }
        if moved < 1e-14 {
            return Some(z);
        }
    }
    // Accept if residuals are small even without strict convergence.
    let ok = z.iter().all(|&x| eval(x).0.norm() <= 1e-8 * (1.0 + x.norm()).powi(deg as i32));
    ok.then_some(z)
}

/// `φ(0) = 0`, `φ'(λ) < 0` on the grid (central differences), and the sign
/// condition on `Im φ`, certified for linear `φ` with `C₂ < 0`.
pub fn check_boundary_assumptions(b: &BoundaryData, lambda_grid: &[f64]) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    let n = b.n();
    let phi0 = b.phi(C64::new(0.0, 0.0)).norm();
    if phi0 <= 1e-12 {
        report.push("phi(0)=0", CheckStatus::Ok, "φ(0) = 0");
    } else {
        report.push("phi(0)=0", CheckStatus::Violated, format!("‖φ(0)‖ = {phi0:.3e}"));
    }

    let h = 1e-4;
    let mut worst: Option<(f64, f64)> = None;
    let mut herm_fail = None;
    for &lambda in lambda_grid {
        let at = |l: f64| b.phi(c(l));
        if HermitianMatrix::new(at(lambda)).is_err() {
            herm_fail = Some(lambda);
        }
        let d = (at(lambda + h) - at(lambda - h)) * c(0.5 / h);
        match herm_eig(&HermitianMatrix::symmetrized(&d)) {
            Ok(e) => {
                let top = e.values[n - 1];
                if worst.map_or(true, |(w, _)| top > w) {
                    worst = Some((top, lambda));
                }
            }
            Err(_) => herm_fail = Some(lambda),
        }
    }
    match (herm_fail, worst) {
        (Some(l), _) => report.push("phi'<0", CheckStatus::Violated, format!("φ(λ) not Hermitian at λ = {l}")),
        (None, Some((top, l))) if top < 0.0 => {
            report.push("phi'<0", CheckStatus::Ok, format!("largest eigenvalue of φ' is {top:.4e} (at λ = {l})"))
        }
        (None, Some((top, l))) => {
            report.push("phi'<0", CheckStatus::Violated, format!("φ'({l}) has eigenvalue {top:.4e} ≥ 0"))
        }
        (None, None) => report.push("phi'<0", CheckStatus::Unverified, "empty λ grid"),
    }

    match (&b.phi, b.linear_part()) {
        (_, Some(c2)) => match c2.min_eigenvalue().and_then(|_| herm_eig(&c2)) {
            Ok(e) if e.values[n - 1] < 0.0 => {
                report.push("Im-sign", CheckStatus::Ok, "φ linear with C₂ negative definite")
            }
            Ok(e) => report.push(
                "Im-sign",
                CheckStatus::Violated,
                format!("C₂ has eigenvalue {:.4e} ≥ 0", e.values[n - 1]),
            ),
            Err(err) => report.push("Im-sign", CheckStatus::Violated, err.to_string()),
        },
        (PhiKind::Polynomial(_), None) => report.push(
            "Im-sign",
            CheckStatus::Unverified,
            "sign of Im λ·Im φ(λ) is not certified for non-linear φ",
        ),
        (PhiKind::Linear(_), None) => unreachable!("linear φ always has a linear part"),
    }
    report
}

/// `f₁(x) > 0` and `f₂(x) ≥ δ` on a sample grid.
pub fn check_coefficients(p: &PencilProblem, grid: &[f64]) -> Result<AssumptionReport> {
    let mut report = AssumptionReport::default();
    let delta = p.coeffs.delta;
    let mut f1_min = (f64::INFINITY, 0.0);
    let mut f2_min = (f64::INFINITY, 0.0);
    for &x in grid {
        let e = p.coeffs.eval(x)?;
        for (m, slot) in [(&e.f1, &mut f1_min), (&e.f2, &mut f2_min)] {
            let h = HermitianMatrix::new(m.clone())?;
            let v = h.min_eigenvalue()?;
            if v < slot.0 {
                *slot = (v, x);
            }
        }
        HermitianMatrix::new(e.v).map_err(|err| Error::Assumption(format!("V({x}) is not Hermitian: {err}")))?;
    }
    if f1_min.0 > 0.0 {
        report.push("f1>0", CheckStatus::Ok, format!("min eigenvalue {:.4e}", f1_min.0));
    } else {
        report.push("f1>0", CheckStatus::Violated, format!("f₁({}) has eigenvalue {:.4e}", f1_min.1, f1_min.0));
    }
    if f2_min.0 >= delta * (1.0 - 1e-12) {
        report.push("f2>=delta", CheckStatus::Ok, format!("min eigenvalue {:.4e} ≥ δ = {delta}", f2_min.0));
    } else {
        report.push(
            "f2>=delta",
            CheckStatus::Violated,
            format!("f₂({}) has eigenvalue {:.4e} < δ = {delta}", f2_min.1, f2_min.0),
        );
    }
    Ok(report)
}

/// Every check that applies to the problem's domain: hyperbolicity of the
/// limits, positivity of `f₁`, `f₂ ≥ δ`, and the boundary conditions on `φ`.
pub fn check_problem(p: &PencilProblem) -> Result<AssumptionReport> {
    let grid = match super::default_sample_grid(p) {
        Ok(g) => g,
        Err(Error::Assumption(msg)) => {
            let mut r = AssumptionReport::default();
            r.push("limits", CheckStatus::Violated, msg);
            return Ok(r);
        }
        Err(e) => return Err(e),
    };
    let lambda_inf = super::lambda_max(p, &grid)?;
    let minus = &p.coeffs.minus;
    let mut report = check_hyperbolicity(minus, &default_mu_grid(minus, lambda_inf), "(-)");
    if let (super::Domain::WholeLine, Some(plus)) = (&p.domain, &p.coeffs.plus) {
        report = report.merge(check_hyperbolicity(plus, &default_mu_grid(plus, lambda_inf), "(+)"));
    }
    report = report.merge(check_coefficients(p, &grid)?);
    if let Some(b) = p.boundary() {
        let m = 50;
        let lambdas: Vec<f64> = (0..=m).map(|k| lambda_inf * k as f64 / m as f64).collect();
        report = report.merge(check_boundary_assumptions(b, &lambdas));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_limits(v: f64, f1: f64, f2: f64) -> Limits {
        Limits { v: HermitianMatrix::scalar(v), f1: HermitianMatrix::scalar(f1), f2: HermitianMatrix::scalar(f2) }
    }

    #[test]
    fn aberth_quadratic_and_quartic() {
        // 2λ² + λ + 2 = 0 → λ = (-1 ± i√15)/4
        let r = polynomial_roots(&[c(2.0), c(1.0), c(2.0)]).unwrap();
        for z in r {
            assert!((z.re + 0.25).abs() < 1e-12);
            assert!((z.im.abs() - 15f64.sqrt() / 4.0).abs() < 1e-12);
        }
        // (λ-1)(λ+2)(λ-3)(λ+4) = λ⁴ + 2λ³ - 13λ² - 14λ + 24
        let mut r = polynomial_roots(&[c(24.0), c(-14.0), c(-13.0), c(2.0), c(1.0)]).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (z, want) in r.iter().zip([-4.0, -2.0, 1.0, 3.0]) {
            assert!((z - c(want)).norm() < 1e-10);
        }
    }

    #[test]
    fn interpolation_recovers_coefficients() {
        let p = |z: C64| z * z * z * c(2.0) - z * c(5.0) + c(1.5);
        let a = interpolate_polynomial(p, 3, 3.0);
        for (got, want) in a.iter().zip([1.5, -5.0, 0.0, 2.0]) {
            assert!((got - c(want)).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_stable_limits() {
        let lim = scalar_limits(-1.0, 1.0, 2.0);
        let grid: Vec<f64> = (0..50).map(|k| 0.2 * k as f64).collect();
        let r = check_hyperbolicity(&lim, &grid, "");
        assert!(r.ok());
        assert!((r.gamma_estimate.unwrap() + 0.25).abs() < 1e-10);
    }

    #[test]
    fn scalar_unstable_limits() {
        let lim = scalar_limits(1.0, 1.0, 1.0);
        let r = check_hyperbolicity(&lim, &[0.0], "");
        assert!(!r.ok());
        assert!((r.gamma_estimate.unwrap() - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_system_is_conjunction_of_scalars() {
        let grid: Vec<f64> = (0..40).map(|k| 0.25 * k as f64).collect();
        for (a, b) in [(-1.0, -3.0), (-1.0, 0.5), (0.2, -2.0)] {
            let lim = Limits {
                v: HermitianMatrix::diagonal(&[a, b]),
                f1: HermitianMatrix::identity(2),
                f2: HermitianMatrix::identity(2).scale(2.0),
            };
            let both = check_hyperbolicity(&lim, &grid, "");
            let ra = check_hyperbolicity(&scalar_limits(a, 1.0, 2.0), &grid, "");
            let rb = check_hyperbolicity(&scalar_limits(b, 1.0, 2.0), &grid, "");
            assert_eq!(both.ok(), ra.ok() && rb.ok());
            let g = ra.gamma_estimate.unwrap().max(rb.gamma_estimate.unwrap());
            assert!((both.gamma_estimate.unwrap() - g).abs() < 1e-8);
        }
    }

    #[test]
    fn examples_have_a_gap() {
        for name in ["example1", "example2", "example3", "example4"] {
            let p = PencilProblem::builtin(name).unwrap();
            let grid = default_mu_grid(&p.coeffs.minus, 5.0);
            let r = check_hyperbolicity(&p.coeffs.minus, &grid, "");
            assert!(r.ok() && r.gamma_estimate.unwrap() <= -0.2, "{name}: {r:?}");
        }
    }

    #[test]
    fn boundary_checks() {
        let grid: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let b = BoundaryData { c: HermitianMatrix::scalar(18.0), phi: PhiKind::Linear(HermitianMatrix::scalar(-9.0)) };
        assert!(check_boundary_assumptions(&b, &grid).checks.iter().all(|c| c.status == CheckStatus::Ok));
        let b2 = BoundaryData {
            c: HermitianMatrix::from_real_rows(&[&[18.0, 2.0], &[2.0, 25.0]]).unwrap(),
            phi: PhiKind::Linear(HermitianMatrix::identity(2).scale(-9.0)),
        };
        assert!(check_boundary_assumptions(&b2, &grid).checks.iter().all(|c| c.status == CheckStatus::Ok));
        let bad = BoundaryData { c: HermitianMatrix::scalar(1.0), phi: PhiKind::Linear(HermitianMatrix::scalar(1.0)) };
        let r = check_boundary_assumptions(&bad, &grid);
        assert_eq!(r.status_of("phi'<0"), Some(CheckStatus::Violated));
        assert!(!r.ok());
    }

    #[test]
    fn nonlinear_phi_is_unverified_not_failed() {
        let b = BoundaryData {
            c: HermitianMatrix::scalar(1.0),
            phi: PhiKind::Polynomial(vec![
                HermitianMatrix::scalar(0.0),
                HermitianMatrix::scalar(-1.0),
                HermitianMatrix::scalar(-1.0),
            ]),
        };
        let r = check_boundary_assumptions(&b, &[0.0, 1.0, 2.0]);
        assert_eq!(r.status_of("Im-sign"), Some(CheckStatus::Unverified));
        assert!(r.ok());
    }

    #[test]
    fn coefficient_checks_on_examples() {
        for name in ["example1", "example2", "example3", "example4"] {
            let p = PencilProblem::builtin(name).unwrap();
            let grid = super::super::default_sample_grid(&p).unwrap();
            assert!(check_coefficients(&p, &grid).unwrap().ok());
        }
    }
}

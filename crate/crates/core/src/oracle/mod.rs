//! Finite-difference check of the spectral counts.
//!
//! The pencil is discretized as `Q(λ) = λ² A₂ + λ A₁ + A₀`, a Hermitian block
//! tridiagonal matrix, and real eigenvalues are located from sign changes of
//! `det Q(λ)`. Inertia comes out of the same block factorization: `Q` is
//! increasing in `λ ≥ 0` and positive definite for large `λ`, so the number of
//! negative eigenvalues of `Q(λ)` is the number of discrete eigenvalues above `λ`.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::pencil::{lambda_max, default_sample_grid, x_max, x_min, Domain, PencilProblem};

/// Roots closer than this are flagged as a possible touching pair.
pub const CLUSTER_TOL: f64 = 1e-6;
pub const MIN_SCAN_STEPS: usize = 100;
pub const DEFAULT_SCAN_STEPS: usize = 200;

/// `Q(λ) = λ² A₂ + λ A₁ + A₀` on the unknown nodes. Diagonal blocks are
/// stored per node; every off-diagonal block of `A₀` is `-I/h²` and those of
/// `A₁`, `A₂` vanish.
#[derive(Clone, Debug)]
pub struct DiscretizedPencil {
    pub grid: Vec<f64>,
    pub h: f64,
    pub n: usize,
    pub a2: Vec<CMat>,
    pub a1: Vec<CMat>,
    pub a0: Vec<CMat>,
}

impl DiscretizedPencil {
    pub fn unknowns(&self) -> usize {
        self.a0.len()
    }

    pub fn off_diagonal(&self) -> f64 {
        -1.0 / (self.h * self.h)
    }

    /// Diagonal block `k` of `Q(λ)`.
    pub fn block(&self, k: usize, lambda: f64) -> CMat {
        &self.a0[k] + &self.a1[k] * C64::new(lambda, 0.0) + &self.a2[k] * C64::new(lambda * lambda, 0.0)
    }

    /// Assemble `Q(λ)` densely; for tests on small grids.
    pub fn dense(&self, lambda: f64) -> CMat {
        let (m, n) = (self.unknowns(), self.n);
        let mut q = CMat::zeros(m * n, m * n);
        for k in 0..m {
            q.view_mut((k * n, k * n), (n, n)).copy_from(&self.block(k, lambda));
            if k + 1 < m {
                for i in 0..n {
                    q[(k * n + i, (k + 1) * n + i)] = C64::new(self.off_diagonal(), 0.0);
                    q[((k + 1) * n + i, k * n + i)] = C64::new(self.off_diagonal(), 0.0);
                }
            }
        }
        q
    }
}

/// Interval the oracle discretizes: the same truncation points as the
/// Maslov computation.
pub fn oracle_interval(p: &PencilProblem) -> Result<(f64, f64)> {
    let a = x_min(p)?;
    let b = match &p.domain {
        Domain::HalfLine { .. } => 0.0,
        Domain::WholeLine => x_max(p)?,
        Domain::Truncated { l } => *l,
    };
    if !(b > a) {
        return Err(Error::Config(format!("empty oracle interval [{a}, {b}]")));
    }
    Ok((a, b))
}

/// Central differences on `N` intervals of `[a, b]`, Dirichlet at `a` and,
/// except on the half-line, at `b`. The half-line Robin row uses a ghost
/// node, `y_{N+1} = y_{N-1} + 2h (c + λ C₂) y_N`, and is halved so the
/// matrices stay Hermitian.
pub fn discretize(p: &PencilProblem, a: f64, b: f64, intervals: usize) -> Result<DiscretizedPencil> {
    if intervals < 50 {
        return Err(Error::Config(format!("at least 50 grid intervals required, got {intervals}")));
    }
    if !(b > a) {
        return Err(Error::Config(format!("empty interval [{a}, {b}]")));
    }
    let robin = match &p.domain {
        Domain::HalfLine { boundary } => {
            let c2 = boundary.linear_part().ok_or_else(|| {
                Error::UnsupportedBoundary("finite differences need φ linear in λ".into())
            })?;
            Some((boundary.c.matrix().clone(), c2.matrix().clone()))
        }
        _ => None,
    };
    let n = p.n();
    let h = (b - a) / intervals as f64;
    let grid: Vec<f64> = (0..=intervals).map(|k| a + h * k as f64).collect();
    let last = if robin.is_some() { intervals } else { intervals - 1 };
    let inv_h2 = 1.0 / (h * h);
    let nodes: Vec<usize> = (1..=last).collect();
    let rows: Vec<(CMat, CMat, CMat)> = nodes
        .par_iter()
        .map(|&k| -> Result<(CMat, CMat, CMat)> {
            let e = p.coeffs.eval(grid[k])?;
            let eye = CMat::identity(n, n);
            let mut a0 = &eye * C64::new(2.0 * inv_h2, 0.0) - &e.v;
            let mut a1 = e.f1.clone();
            let mut a2 = e.f2.clone();
            if k == intervals {
                let (c, c2) = robin.as_ref().expect("Robin row only on the half-line");
                let half = C64::new(0.5, 0.0);
                let inv_h = C64::new(1.0 / h, 0.0);
                a0 = &eye * C64::new(inv_h2, 0.0) - c * inv_h - &e.v * half;
                a1 = &e.f1 * half - c2 * inv_h;
                a2 = &e.f2 * half;
            }
            Ok((symmetrize(&a2), symmetrize(&a1), symmetrize(&a0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut a2, mut a1, mut a0) = (Vec::new(), Vec::new(), Vec::new());
    for (x2, x1, x0) in rows {
        a2.push(x2);
        a1.push(x1);
        a0.push(x0);
    }
    Ok(DiscretizedPencil { grid, h, n, a2, a1, a0 })
}

fn symmetrize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Grid size giving `h ≈ 0.15 / √(1 + ‖V‖ + λ‖f₁‖ + λ²‖f₂‖)` at the top of
/// the scanned range.
pub fn default_intervals(p: &PencilProblem, a: f64, b: f64, lambda_hi: f64) -> Result<usize> {
    let mut scale: f64 = 0.0;
    let m = 2000;
    for k in 0..=m {
        let x = a + (b - a) * k as f64 / m as f64;
        let e = p.coeffs.eval(x)?;
        scale = scale.max(e.v.norm() + lambda_hi * e.f1.norm() + lambda_hi * lambda_hi * e.f2.norm());
    }
    let h = 0.15 / (1.0 + scale).sqrt();
    Ok((((b - a) / h).ceil() as usize).max(100))
}

/// Sign, magnitude and inertia of `Q(λ)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DetEval {
    pub lambda: f64,
    pub sign: i8,
    pub log_abs_det: f64,
    pub negative: usize,
}

/// Block `LDL*` of `Q(λ)` without pivoting; the inertia and the determinant
/// are those of the pivots. A pivot that vanishes to rounding is nudged to a
/// tiny positive value, which happens only when `λ` is a root to machine
/// precision.
pub fn evaluate(dp: &DiscretizedPencil, lambda: f64) -> DetEval {
    let n = dp.n;
    let s2 = dp.off_diagonal() * dp.off_diagonal();
    let mut prev_inv: Option<CMat> = None;
    let mut negative = 0;
    let mut sign = 1i8;
    let mut log_abs_det = 0.0;
    let mut l = vec![C64::new(0.0, 0.0); n * n];
    let mut d = vec![0.0; n];
    for k in 0..dp.unknowns() {
        let mut blk = dp.block(k, lambda);
        if let Some(inv) = &prev_inv {
            blk -= inv * C64::new(s2, 0.0);
        }
        let scale = blk.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        // Scalar LDL* of the n×n block.
        for j in 0..n {
            let mut dj = blk[(j, j)].re;
            for m in 0..j {
                dj -= l[j * n + m].norm_sqr() * d[m];
            }
            if dj.abs() <= 1e-15 * scale {
                dj = 1e-15 * scale;
            }
            d[j] = dj;
            l[j * n + j] = C64::new(1.0, 0.0);
            for i in j + 1..n {
                let mut v = blk[(i, j)];
                for m in 0..j {
                    v -= l[i * n + m] * l[j * n + m].conj() * d[m];
                }
                l[i * n + j] = v / dj;
            }
        }
        for &dj in d.iter() {
            if dj < 0.0 {
                negative += 1;
                sign = -sign;
            }
            log_abs_det += dj.abs().ln();
        }
        prev_inv = Some(ldl_inverse(&l, &d, n));
    }
    DetEval { lambda, sign, log_abs_det, negative }
}

/// `(L D L*)⁻¹` from the unit lower factor (row-major) and pivots.
fn ldl_inverse(l: &[C64], d: &[f64], n: usize) -> CMat {
    let mut inv = CMat::zeros(n, n);
    for col in 0..n {
        // Solve L y = e_col, then D z = y, then L* x = z.
        let mut y = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut v = if i == col { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            for m in 0..i {
                v -= l[i * n + m] * y[m];
            }
            y[i] = v;
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for m in i + 1..n {
                v -= l[m * n + i].conj() * inv[(m, col)];
            }
            inv[(i, col)] = v;
        }
    }
    inv
}

/// Interval on which `det Q` changes sign.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Eigenvalues inside according to the inertia difference.
    pub inertia_count: usize,
}

/// Uniform scan of `sign det Q(λ)` on `[lambda_lo, lambda_hi]`.
pub fn det_scan(dp: &DiscretizedPencil, lambda_lo: f64, lambda_hi: f64, steps: usize) -> Result<Vec<Bracket>> {
    Ok(scan(dp, lambda_lo, lambda_hi, steps)?.0)
}

fn scan(dp: &DiscretizedPencil, lambda_lo: f64, lambda_hi: f64, steps: usize) -> Result<(Vec<Bracket>, Vec<DetEval>)> {
    if steps < MIN_SCAN_STEPS {
        return Err(Error::Config(format!("det_scan needs at least {MIN_SCAN_STEPS} steps, got {steps}")));
    }
    if !(lambda_hi > lambda_lo) {
        return Ok((Vec::new(), vec![evaluate(dp, lambda_lo)]));
    }
    let evals: Vec<DetEval> = (0..=steps)
        .into_par_iter()
        .map(|k| evaluate(dp, lambda_lo + (lambda_hi - lambda_lo) * k as f64 / steps as f64))
        .collect();
    let brackets = evals
        .windows(2)
        .filter(|w| w[0].sign != w[1].sign)
        .map(|w| Bracket { lo: w[0].lambda, hi: w[1].lambda, inertia_count: w[0].negative.saturating_sub(w[1].negative) })
        .collect();
    Ok((brackets, evals))
}

/// Bisection on the sign of `det Q` to width `tol`.
pub fn refine_root(dp: &DiscretizedPencil, bracket: &Bracket, tol: f64) -> f64 {
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let s_lo = evaluate(dp, lo).sign;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if evaluate(dp, mid).sign == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCount {
    pub method: &'static str,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub intervals: usize,
    pub h: f64,
    pub steps: usize,
    /// Number of refined roots in `(lambda_lo, lambda_hi]`.
    pub count: usize,
    pub roots: Vec<f64>,
    /// `neg Q(lambda_lo) - neg Q(lambda_hi)`.
    pub inertia_count: usize,
    /// `neg Q(lambda_hi)`: eigenvalues above the scanned range.
    pub above_range: usize,
    /// Two roots closer than `CLUSTER_TOL`.
    pub clustered: bool,
}

impl OracleCount {
    pub fn consistent(&self) -> bool {
        self.count == self.inertia_count
    }
}

/// Real eigenvalues of the discretized pencil in `(lambda_lo, lambda_hi]`.
/// The scan is doubled (up to 16×) while root and inertia counts disagree,
/// which is what an even number of roots inside one step looks like.
pub fn count_real_eigs(dp: &DiscretizedPencil, lambda_lo: f64, lambda_hi: f64) -> Result<OracleCount> {
    let tol = 1e-10 * lambda_hi.abs().max(1.0);
    let mut steps = DEFAULT_SCAN_STEPS;
    loop {
        let (brackets, evals) = scan(dp, lambda_lo, lambda_hi, steps)?;
        let first = evals.first().expect("scan has points");
        let last = evals.last().expect("scan has points");
        let inertia_count = first.negative.saturating_sub(last.negative);
        if brackets.len() != inertia_count && steps < 16 * DEFAULT_SCAN_STEPS {
            steps *= 2;
            continue;
        }
        let mut roots: Vec<f64> = brackets.par_iter().map(|b| refine_root(dp, b, tol)).collect();
        roots.sort_by(f64::total_cmp);
        let clustered = roots.windows(2).any(|w| w[1] - w[0] < CLUSTER_TOL);
        return Ok(OracleCount {
            method: "fd-scan",
            lambda_lo,
            lambda_hi,
            intervals: dp.grid.len() - 1,
            h: dp.h,
            steps,
            count: roots.len(),
            roots,
            inertia_count,
            above_range: last.negative,
            clustered,
        });
    }
}

/// Number of real eigenvalues above `lambda`, scanning up to `λ∞`, on the
/// default grid scaled by `refine`.
pub fn oracle_count(p: &PencilProblem, lambda: f64, refine: usize) -> Result<OracleCount> {
    let (a, b) = oracle_interval(p)?;
    let hi = lambda_max(p, &default_sample_grid(p)?)?.max(lambda);
    let intervals = default_intervals(p, a, b, hi)? * refine.max(1);
    let dp = discretize(p, a, b, intervals)?;
    count_real_eigs(&dp, lambda, hi)
}

/// Write `lambda, sign, log_abs_det` (natural log of `|det Q(λ)|`).
pub fn write_scan_csv(dp: &DiscretizedPencil, lambda_lo: f64, lambda_hi: f64, steps: usize, path: &Path) -> Result<()> {
    let (_, evals) = scan(dp, lambda_lo, lambda_hi, steps)?;
    crate::cli::write_atomically(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["lambda", "sign", "log_abs_det"])?;
        for e in &evals {
            out.write_record([
                format!("{:.12e}", e.lambda),
                e.sign.to_string(),
                format!("{:.9e}", e.log_abs_det),
            ])?;
        }
        out.flush()?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{det_complex, herm_eig, HermitianMatrix};

    fn constant_halfline(c: f64) -> PencilProblem {
        use crate::pencil::{BoundaryData, Builtin, CoefficientField, Limits, PhiKind};
        use std::sync::Arc;
        // Reuse the constant whole-line coefficients (V = -1, f₁ = f₂ = 1) on x ≤ 0.
        let lim = Limits { v: HermitianMatrix::scalar(-1.0), f1: HermitianMatrix::scalar(1.0), f2: HermitianMatrix::scalar(1.0) };
        let field = CoefficientField { source: Arc::new(Builtin::Constant), minus: lim, plus: None, delta: 1.0 };
        let boundary = BoundaryData { c: HermitianMatrix::scalar(c), phi: PhiKind::Linear(HermitianMatrix::scalar(-1.0)) };
        PencilProblem::new("constant-half", field, Domain::HalfLine { boundary }).unwrap()
    }

    #[test]
    fn assembly_is_hermitian_with_expected_entries() {
        let p = constant_halfline(0.0);
        let dp = discretize(&p, -20.0, 0.0, 100).unwrap();
        let h = dp.h;
        assert_eq!(dp.unknowns(), 100);
        let q = dp.dense(0.0);
        assert!((&q - q.adjoint()).norm() == 0.0);
        // Interior rows: 2/h² + 1 on the diagonal (A₀ = -D₂ - V with V = -1).
        assert!((q[(10, 10)].re - (2.0 / (h * h) + 1.0)).abs() < 1e-9);
        assert!((q[(10, 11)].re + 1.0 / (h * h)).abs() < 1e-9);
        // Robin row, halved.
        assert!((q[(99, 99)].re - (1.0 / (h * h) + 0.5)).abs() < 1e-9);
        assert!((dp.a1[99][(0, 0)].re - (0.5 + 1.0 / h)).abs() < 1e-9);
        assert!((dp.a2[99][(0, 0)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_gives_block_tridiagonal() {
        let p = PencilProblem::builtin("example4").unwrap();
        let dp = discretize(&p, -10.0, 10.0, 60).unwrap();
        let q = dp.dense(0.2);
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                if (i / 2).abs_diff(j / 2) > 1 {
                    assert_eq!(q[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
        assert!((&q - q.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn factorization_matches_dense_determinant_and_inertia() {
        let p = PencilProblem::builtin("example4").unwrap();
        let dp = discretize(&p, -3.0, 3.0, 50).unwrap();
        for lambda in [0.0, 0.13, 0.5] {
            let e = evaluate(&dp, lambda);
            let q = dp.dense(lambda);
            let det = det_complex(&q);
            assert!(det.im.abs() <= 1e-10 * det.norm());
            assert_eq!(e.sign as f64, det.re.signum());
            assert!((e.log_abs_det - det.norm().ln()).abs() < 1e-8 * e.log_abs_det.abs().max(1.0));
            let eig = herm_eig(&HermitianMatrix::new(q).unwrap()).unwrap();
            assert_eq!(e.negative, eig.values.iter().filter(|&&v| v < 0.0).count());
        }
    }

    // V ≡ 50, f₁ = f₂ = 1 on [0, 1] with Dirichlet ends: the discrete
    // eigenvalues solve λ² + λ = 50 - (2 - 2cos(kπh))/h², computed here
    // directly from that characteristic equation.
    #[test]
    fn scalar_roots_match_characteristic_equation() {
        use crate::pencil::{BumpCoefficients, CoefficientField, Limits};
        use std::sync::Arc;
        let s = HermitianMatrix::scalar;
        let source = BumpCoefficients { v_limit: s(50.0), amplitude: s(0.0), center: 0.0, width: 1.0, f1: s(1.0), f2: s(1.0) };
        let lim = Limits { v: s(50.0), f1: s(1.0), f2: s(1.0) };
        let field = CoefficientField { source: Arc::new(source), minus: lim, plus: None, delta: 1.0 };
        let p = PencilProblem::new("box", field, Domain::Truncated { l: 1.0 }).unwrap();
        let m = 50;
        let dp = discretize(&p, 0.0, 1.0, m).unwrap();
        let h = dp.h;
        let mut want: Vec<f64> = (1..m)
            .map(|k| 50.0 - (2.0 - 2.0 * (k as f64 * std::f64::consts::PI * h).cos()) / (h * h))
            .filter(|&r| r > 0.0)
            .map(|r| (-1.0 + (1.0 + 4.0 * r).sqrt()) / 2.0)
            .collect();
        want.sort_by(f64::total_cmp);
        assert_eq!(want.len(), 2);
        let got = count_real_eigs(&dp, 0.0, 10.0).unwrap();
        assert_eq!(got.count, want.len());
        assert!(got.consistent());
        for (g, w) in got.roots.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn narrow_bracket_returns_midpoint() {
        let p = PencilProblem::builtin("constant").unwrap();
        let dp = discretize(&p, 0.0, 1.0, 50).unwrap();
        let b = Bracket { lo: 1.0, hi: 1.0 + 1e-12, inertia_count: 0 };
        assert_eq!(refine_root(&dp, &b, 1e-10), 0.5 * (b.lo + b.hi));
    }

    #[test]
    fn empty_range_above_all_eigenvalues() {
        let p = PencilProblem::builtin("example2").unwrap();
        let r = oracle_count(&p, 0.8, 1).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.inertia_count, 0);
    }

    #[test]
    fn example_counts() {
        for (name, want) in [("example1", 0), ("example2", 3), ("example3", 1), ("example4", 5)] {
            let p = PencilProblem::builtin(name).unwrap();
            let r = oracle_count(&p, 0.0, 1).unwrap();
            assert_eq!((r.count, r.inertia_count, r.above_range), (want, want, 0), "{name}");
            assert!(!r.clustered);
        }
    }

    #[test]
    fn convergence_is_second_order() {
        let p = PencilProblem::builtin("example2").unwrap();
        let (a, b) = (-60.0, 60.0);
        let root = |m: usize| {
            let dp = discretize(&p, a, b, m).unwrap();
            count_real_eigs(&dp, 0.0, 0.9).unwrap().roots
        };
        let (r1, r2, r3) = (root(1200), root(2400), root(4800));
        for k in 0..r1.len() {
            let ratio = (r1[k] - r2[k]).abs() / (r2[k] - r3[k]).abs();
            assert!((3.0..5.0).contains(&ratio), "root {k}: ratio {ratio}");
        }
    }

    #[test]
    fn nonlinear_phi_is_unsupported() {
        use crate::pencil::{BoundaryData, PhiKind};
        let mut p = PencilProblem::builtin("example1").unwrap();
        p.domain = Domain::HalfLine {
            boundary: BoundaryData {
                c: HermitianMatrix::scalar(18.0),
                phi: PhiKind::Polynomial(vec![
                    HermitianMatrix::scalar(0.0),
                    HermitianMatrix::scalar(-9.0),
                    HermitianMatrix::scalar(-1.0),
                ]),
            },
        };
        assert!(matches!(discretize(&p, -10.0, 0.0, 100), Err(Error::UnsupportedBoundary(_))));
    }
}

//! Lagrangian frames `[X; Y]` in C^{2n}, their unitary representatives
//! `W = (X + iY)(X - iY)⁻¹`, and intersection/crossing data between planes.
//!
//! The symplectic form is `J = [[0, -I], [I, 0]]`, so two frames pair as
//! `X₁*JX₂ = Y₁*X₂ - X₁*Y₂`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, herm_eig, min_singular_value, right_divide, solve, CMat, HermitianMatrix, C64, I};
use crate::pencil::BoundaryData;

/// Relative Lagrangian defect accepted when constructing a frame.
pub const LAG_TOL: f64 = 1e-8;
/// Smallest relative singular value of `[X; Y]` accepted as full rank.
pub const RANK_TOL: f64 = 1e-12;
/// Accepted deviation `‖W*W - I‖` of a unitary representative.
pub const UNITARY_TOL: f64 = 1e-9;
/// Angular distance from `π` treated as an intersection.
pub const ANGLE_TOL: f64 = 1e-6;

/// A basis `[X; Y]` of a Lagrangian plane.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianFrame {
    x: CMat,
    y: CMat,
}

impl LagrangianFrame {
    pub fn new(x: CMat, y: CMat) -> Result<Self> {
        let f = Self::new_unchecked(x, y)?;
        let scale = f.scale()?;
        if scale == 0.0 || min_singular_value(&f.stacked())? <= RANK_TOL * scale {
            return Err(Error::InvalidFrame("columns are rank deficient".into()));
        }
        let defect = f.lagrangian_defect();
        if defect > LAG_TOL {
            return Err(Error::InvalidFrame(format!("Lagrangian defect {defect:.3e} exceeds {LAG_TOL:.0e}")));
        }
        Ok(f)
    }

    /// Shape check only. Used inside integrators where the invariants are
    /// monitored separately.
    pub fn new_unchecked(x: CMat, y: CMat) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || x.ncols() != n || y.nrows() != n || y.ncols() != n {
            return Err(Error::Dimension(format!(
                "frame blocks must be n×n, got X {}x{} and Y {}x{}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn from_stacked(s: &CMat) -> Result<Self> {
        let n = s.ncols();
        if s.nrows() != 2 * n {
            return Err(Error::Dimension(format!("stacked frame must be 2n×n, got {}x{}", s.nrows(), n)));
        }
        Self::new_unchecked(s.rows(0, n).into_owned(), s.rows(n, n).into_owned())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &CMat {
        &self.x
    }

    pub fn y(&self) -> &CMat {
        &self.y
    }

    pub fn stacked(&self) -> CMat {
        let n = self.n();
        let mut s = CMat::zeros(2 * n, n);
        s.rows_mut(0, n).copy_from(&self.x);
        s.rows_mut(n, n).copy_from(&self.y);
        s
    }

    fn scale(&self) -> Result<f64> {
        crate::linalg::max_singular_value(&self.stacked())
    }

    /// `‖X*Y - Y*X‖ / ‖[X; Y]‖²`, zero exactly on Lagrangian planes.
    pub fn lagrangian_defect(&self) -> f64 {
        let raw = (self.x.adjoint() * &self.y - self.y.adjoint() * &self.x).norm();
        let s = self.scale().unwrap_or_else(|_| self.stacked().norm());
        if s == 0.0 {
            f64::INFINITY
        } else {
            raw / (s * s)
        }
    }

    /// Same plane with orthonormal columns (thin QR, right multiplication only).
    pub fn orthonormalized(&self) -> Self {
        let n = self.n();
        let q = self.stacked().qr().q();
        Self { x: q.rows(0, n).into_owned(), y: q.rows(n, n).into_owned() }
    }
}

/// The Dirichlet plane `(0; I)`.
pub fn dirichlet_frame(n: usize) -> LagrangianFrame {
    LagrangianFrame { x: CMat::zeros(n, n), y: CMat::identity(n, n) }
}

/// The boundary plane `(I; c + φ(λ))` at real `λ`.
pub fn phi_frame(b: &BoundaryData, lambda: f64) -> Result<LagrangianFrame> {
    let y = b.c.matrix() + b.phi(C64::new(lambda, 0.0));
    let y = HermitianMatrix::new(y)?.into_matrix();
    let n = y.nrows();
    Ok(LagrangianFrame { x: CMat::identity(n, n), y })
}

/// `W = (X + iY)(X - iY)⁻¹`.
pub fn w_of(frame: &LagrangianFrame) -> Result<CMat> {
    let plus = frame.x() + frame.y() * I;
    let minus = frame.x() - frame.y() * I;
    right_divide(&plus, &minus).ok_or_else(|| Error::InvalidFrame("X - iY is singular".into()))
}

/// `W̃ = -(X₁+iY₁)(X₁-iY₁)⁻¹(X₂-iY₂)(X₂+iY₂)⁻¹`, which has `-1` as an
/// eigenvalue exactly when the planes intersect.
pub fn w_relative(f1: &LagrangianFrame, f2: &LagrangianFrame) -> Result<CMat> {
    let w1 = w_of(f1)?;
    let minus2 = f2.x() - f2.y() * I;
    let plus2 = f2.x() + f2.y() * I;
    let w2_inv = right_divide(&minus2, &plus2).ok_or_else(|| Error::InvalidFrame("X₂ + iY₂ is singular".into()))?;
    Ok(-(w1 * w2_inv))
}

pub fn unitarity_defect(w: &CMat) -> f64 {
    let n = w.nrows();
    (w.adjoint() * w - CMat::identity(n, n)).norm()
}

/// Eigenphases of a unitary matrix in (-π, π], ascending, with eigenvectors.
///
/// The matrix is rotated by `e^{-iα}` so that `-1` is far from its spectrum,
/// then mapped to the Hermitian matrix `i(I - U)(I + U)⁻¹` whose eigenvalues
/// `t` give the phases `α + 2 atan(t)`.
pub fn unitary_eig(w: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = w.nrows();
    let id = CMat::identity(n, n);
    let candidates = 2 * n + 1;
    let accept = 1.9 * (PI / (2.0 * candidates as f64)).sin();
    let mut best: Option<(f64, f64)> = None;
    for k in 0..candidates {
        let alpha = 2.0 * PI * k as f64 / candidates as f64;
        let u = w * C64::from_polar(1.0, -alpha);
        let gram = HermitianMatrix::symmetrized(&(&id * c(2.0) + &u + u.adjoint()));
        let sigma = herm_eig(&gram)?.values[0].max(0.0).sqrt();
        if best.map_or(true, |(s, _)| sigma > s) {
            best = Some((sigma, alpha));
        }
        if sigma >= accept {
            break;
        }
    }
    let (_, alpha) = best.expect("at least one candidate");
    let u = w * C64::from_polar(1.0, -alpha);
    let cayley = solve(&(&id + &u).transpose(), &((&id - &u) * I).transpose())
        .ok_or_else(|| Error::InvalidFrame("rotated Cayley transform is singular".into()))?
        .transpose();
    let e = herm_eig(&HermitianMatrix::symmetrized(&cayley))?;
    let mut pairs: Vec<(f64, usize)> =
        e.values.iter().enumerate().map(|(k, &t)| (wrap_angle(alpha + 2.0 * t.atan()), k)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let phases = pairs.iter().map(|p| p.0).collect();
    let vectors = CMat::from_fn(n, n, |r, k| e.vectors[(r, pairs[k].1)]);
    Ok((phases, vectors))
}

pub fn unitary_phases(w: &CMat) -> Result<Vec<f64>> {
    Ok(unitary_eig(w)?.0)
}

/// Angle reduced to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Distance from `a` to the nearest odd multiple of `π`.
pub fn distance_to_pi(a: f64) -> f64 {
    (PI - wrap_angle(a).abs()).abs()
}

/// Continue unwrapped phases `prev` to a new set of wrapped phases.
///
/// The new phases are matched to the old ones by the cyclic shift of sorted
/// order that minimizes the largest move. Returns `None` when that move
/// exceeds `max_step`, in which case the caller must sample more finely.
pub fn track_phases(prev: &[f64], next_wrapped: &[f64], max_step: f64) -> Option<Vec<f64>> {
    let n = prev.len();
    assert_eq!(n, next_wrapped.len());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| wrap_angle(prev[a]).total_cmp(&wrap_angle(prev[b])));
    let mut next: Vec<f64> = next_wrapped.to_vec();
    next.sort_by(f64::total_cmp);

    let mut best: Option<(f64, usize)> = None;
    for shift in 0..n {
        let worst = (0..n)
            .map(|k| wrap_angle(next[(k + shift) % n] - prev[order[k]]).abs())
            .fold(0.0, f64::max);
        if best.map_or(true, |(w, _)| worst < w) {
            best = Some((worst, shift));
        }
    }
    let (worst, shift) = best?;
    if worst > max_step {
        return None;
    }
    let mut out = vec![0.0; n];
    for k in 0..n {
        let j = order[k];
        out[j] = prev[j] + wrap_angle(next[(k + shift) % n] - prev[j]);
    }
    Some(out)
}

/// Number of eigenvalues of `W̃(f1, f2)` within `angle_tol` of `-1`.
pub fn intersection_dim(f1: &LagrangianFrame, f2: &LagrangianFrame, angle_tol: f64) -> Result<usize> {
    let phases = unitary_phases(&w_relative(f1, f2)?)?;
    Ok(phases.iter().filter(|&&p| distance_to_pi(p) <= angle_tol).count())
}

/// `Ω = X*Y' - Y*X'` for a frame and its parameter derivative (stacked 2n×n).
pub fn omega(frame: &LagrangianFrame, rate: &CMat) -> CMat {
    let n = frame.n();
    let xd = rate.rows(0, n);
    let yd = rate.rows(n, n);
    frame.x().adjoint() * yd - frame.y().adjoint() * xd
}

/// Phase velocity of the eigenvalue of `W̃(frame, reference)` with unit
/// eigenvector `v` (assumed in `ker(W̃ + I)`). Positive means counterclockwise.
///
/// With `z = W₂⁻¹v` and `u_k = (X_k - iY_k)⁻¹z` this is
/// `2 u₁*Ω₁u₁ - 2 u₂*Ω₂u₂`; the second term drops when the reference is fixed.
pub fn crossing_form_general(
    frame: &LagrangianFrame,
    rate: &CMat,
    reference: &LagrangianFrame,
    reference_rate: Option<&CMat>,
    v: &CMat,
) -> Result<f64> {
    let w_rel = w_relative(frame, reference)?;
    let n = frame.n();
    let resid = (&w_rel * v + v).norm();
    let vn = v.norm();
    if vn == 0.0 || resid > 1e-6 * vn.max(1.0) {
        return Err(Error::InvalidFrame(format!("vector is not in ker(W̃ + I) (residual {resid:.3e})")));
    }
    debug_assert_eq!(v.nrows(), n);
    phase_velocity(frame, rate, reference, reference_rate, v)
}

/// `2 u₁*Ω₁u₁ - 2 u₂*Ω₂u₂` for a unit eigenvector `v` of `W̃` with any
/// eigenvalue; this is the velocity of that eigenphase.
pub fn phase_velocity(
    frame: &LagrangianFrame,
    rate: &CMat,
    reference: &LagrangianFrame,
    reference_rate: Option<&CMat>,
    v: &CMat,
) -> Result<f64> {
    let w2 = w_of(reference)?;
    let z = w2.adjoint() * v;
    let part = |f: &LagrangianFrame, r: &CMat| -> Result<f64> {
        let m = f.x() - f.y() * I;
        let u = solve(&m, &z).ok_or_else(|| Error::InvalidFrame("X - iY is singular".into()))?;
        let q = u.adjoint() * omega(f, r) * &u;
        Ok(2.0 * q[(0, 0)].re)
    };
    let mut q = part(frame, rate)?;
    if let Some(rr) = reference_rate {
        q -= part(reference, rr)?;
    }
    Ok(q)
}

/// Crossing form against the fixed Dirichlet plane:
/// `2⟨((X - iY)⁻¹)*(X*Y' - Y*X')(X - iY)⁻¹ w, w⟩`.
pub fn crossing_form(frame: &LagrangianFrame, rate: &CMat, w: &CMat) -> Result<f64> {
    crossing_form_general(frame, rate, &dirichlet_frame(frame.n()), None, w)
}

/// One sample of a unitary path: parameter, `W̃`, and unwrapped phases.
#[derive(Clone, Debug)]
pub struct UnitaryTrace {
    pub param: f64,
    pub w: CMat,
    pub phases: Vec<f64>,
}

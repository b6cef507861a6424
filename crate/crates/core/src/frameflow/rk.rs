//! Dormand–Prince 5(4) steps for `Φ' = A(x, λ) Φ`, `A = [[0, I], [K, 0]]`.

use crate::error::{Error, Result};
use crate::linalg::{c, right_divide, CMat};
use crate::pencil::PencilProblem;

use super::IntegratorOptions;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// `A Φ = [Y; K X]` for a stacked frame.
pub(crate) fn apply_a(k: &CMat, phi: &CMat) -> CMat {
    let n = k.nrows();
    let mut out = CMat::zeros(2 * n, phi.ncols());
    out.rows_mut(0, n).copy_from(&phi.rows(n, n));
    out.rows_mut(n, n).copy_from(&(k * phi.rows(0, n)));
    out
}

pub(crate) fn rhs(p: &PencilProblem, lambda: f64, x: f64, phi: &CMat) -> Result<CMat> {
    Ok(apply_a(&p.k_matrix(x, lambda)?, phi))
}

/// One trial step. Returns the fifth-order solution and the error of the
/// spanned plane, measured as `‖(I - QQ*)(Φ₅ - Φ₄) R⁻¹‖` with `Φ₅ = QR`.
pub(crate) fn dp_step(p: &PencilProblem, lambda: f64, x: f64, phi: &CMat, h: f64) -> Result<(CMat, f64)> {
    let f = |t: f64, y: &CMat| rhs(p, lambda, t, y);
    let k1 = f(x, phi)?;
    let k2 = f(x + h / 5.0, &(phi + &k1 * c(h * A21)))?;
    let k3 = f(x + 3.0 * h / 10.0, &(phi + (&k1 * c(A31) + &k2 * c(A32)) * c(h)))?;
    let k4 = f(x + 4.0 * h / 5.0, &(phi + (&k1 * c(A41) + &k2 * c(A42) + &k3 * c(A43)) * c(h)))?;
    let k5 = f(
        x + 8.0 * h / 9.0,
        &(phi + (&k1 * c(A51) + &k2 * c(A52) + &k3 * c(A53) + &k4 * c(A54)) * c(h)),
    )?;
    let k6 = f(
        x + h,
        &(phi + (&k1 * c(A61) + &k2 * c(A62) + &k3 * c(A63) + &k4 * c(A64) + &k5 * c(A65)) * c(h)),
    )?;
    let y5 = phi + (&k1 * c(B1) + &k3 * c(B3) + &k4 * c(B4) + &k5 * c(B5) + &k6 * c(B6)) * c(h);
    let k7 = f(x + h, &y5)?;
    let diff = (&k1 * c(E1) + &k3 * c(E3) + &k4 * c(E4) + &k5 * c(E5) + &k6 * c(E6) + &k7 * c(E7)) * c(h);

    let qr = y5.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let projected = &diff - &q * (q.adjoint() * &diff);
    let err = match right_divide(&projected, &r) {
        Some(m) => m.norm(),
        None => f64::INFINITY,
    };
    if !y5.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Integration { param: x, reason: "non-finite frame".into() });
    }
    Ok((y5, err))
}

/// Step cap from the size of `K`: beyond `~3/√‖K‖` the decaying directions
/// are no longer damped by the explicit scheme.
pub(crate) fn stability_cap(p: &PencilProblem, lambda: f64, x: f64) -> Result<f64> {
    let k = p.k_matrix(x, lambda)?;
    Ok(3.0 / (k.norm() + 1.0).sqrt())
}

pub(crate) fn orthonormalize(phi: &CMat) -> CMat {
    phi.clone().qr().q()
}

/// Orthonormalize, then move to the nearest Lagrangian plane: replace
/// `W = (X+iY)(X-iY)⁻¹` by its unitary polar factor and return the frame
/// `((W+I)/2; (W-I)/2i)`, which has orthonormal columns and spans that plane.
/// The explicit Runge–Kutta steps are not symplectic, so without this the
/// isotropy defect grows with path length.
pub(crate) fn renormalize(phi: &CMat) -> CMat {
    let q = orthonormalize(phi);
    let n = q.ncols();
    let x = q.rows(0, n);
    let y = q.rows(n, n);
    let i = crate::linalg::I;
    let (plus, minus) = (&x + &y * i, &x - &y * i);
    let Some(w) = right_divide(&plus, &minus) else {
        return q;
    };
    let svd = w.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return q;
    };
    let w = u * v_t;
    let id = CMat::identity(n, n);
    let mut out = CMat::zeros(2 * n, n);
    out.rows_mut(0, n).copy_from(&((&w + &id) * c(0.5)));
    out.rows_mut(n, n).copy_from(&((&w - &id) * (-i * 0.5)));
    out
}

/// Adaptive integration from `x0` to `x1 > x0` without recording samples.
pub fn integrate_to(
    p: &PencilProblem,
    lambda: f64,
    x0: f64,
    phi0: &CMat,
    x1: f64,
    opts: &IntegratorOptions,
) -> Result<CMat> {
    let mut x = x0;
    let mut phi = phi0.clone();
    if x1 <= x0 {
        return Ok(phi);
    }
    let mut h = opts.initial_step.min(x1 - x0);
    let mut since_renorm = 0;
    while x < x1 {
        let cap = opts.max_step.min(stability_cap(p, lambda, x)?);
        h = h.min(cap);
        let last = x + h >= x1 - 1e-14 * x1.abs().max(1.0);
        let step = if last { x1 - x } else { h };
        let (y, err) = dp_step(p, lambda, x, &phi, step)?;
        let ratio = err / opts.tol();
        if ratio <= 1.0 {
            x = if last { x1 } else { x + step };
            phi = y;
            since_renorm += 1;
            if since_renorm >= opts.renorm_every || phi.norm() > 1e6 {
                phi = renormalize(&phi);
                since_renorm = 0;
            }
            h = step * grow_factor(ratio);
        } else {
            h = step * grow_factor(ratio);
            if h < opts.min_step {
                return Err(Error::Integration { param: x, reason: format!("step size underflow (h = {h:.3e})") });
            }
        }
    }
    Ok(renormalize(&phi))
}

pub(crate) fn grow_factor(ratio: f64) -> f64 {
    if ratio == 0.0 {
        5.0
    } else {
        (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
    }
}

use nalgebra::DMatrix;

use super::{c, herm_eig, CMat, HermitianMatrix};
use crate::error::{Error, Result};

/// Relative distance below which two Löwner nodes are treated as coincident.
pub const NODE_TOL: f64 = 1e-10;

/// A real scalar function with a known derivative, applied to spectra.
pub trait ScalarFunction {
    fn name(&self) -> &str;
    fn eval(&self, t: f64) -> Result<f64>;
    fn deriv(&self, t: f64) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sqrt;

impl ScalarFunction for Sqrt {
    fn name(&self) -> &str {
        "sqrt"
    }
    fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::Evaluation { name: "sqrt".into(), at: t });
        }
        Ok(t.sqrt())
    }
    fn deriv(&self, t: f64) -> Result<f64> {
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::Evaluation { name: "sqrt'".into(), at: t });
        }
        Ok(0.5 / t.sqrt())
    }
}

/// `t ↦ t^p` on `t > 0`.
#[derive(Clone, Copy, Debug)]
pub struct Power(pub f64);

impl ScalarFunction for Power {
    fn name(&self) -> &str {
        "power"
    }
    fn eval(&self, t: f64) -> Result<f64> {
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::Evaluation { name: format!("t^{}", self.0), at: t });
        }
        Ok(t.powf(self.0))
    }
    fn deriv(&self, t: f64) -> Result<f64> {
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::Evaluation { name: format!("d/dt t^{}", self.0), at: t });
        }
        Ok(self.0 * t.powf(self.0 - 1.0))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl ScalarFunction for Identity {
    fn name(&self) -> &str {
        "identity"
    }
    fn eval(&self, t: f64) -> Result<f64> {
        Ok(t)
    }
    fn deriv(&self, _t: f64) -> Result<f64> {
        Ok(1.0)
    }
}

/// First divided differences of `f` on a set of nodes.
#[derive(Clone, Debug)]
pub struct LoewnerData {
    pub nodes: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

pub fn loewner(f: &dyn ScalarFunction, nodes: &[f64]) -> Result<LoewnerData> {
    let n = nodes.len();
    let values = nodes.iter().map(|&d| f.eval(d)).collect::<Result<Vec<_>>>()?;
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = f.deriv(nodes[j])?;
        for k in 0..j {
            let (dj, dk) = (nodes[j], nodes[k]);
            let entry = if (dj - dk).abs() <= NODE_TOL * dj.abs().max(1.0) {
                f.deriv(0.5 * (dj + dk))?
            } else {
                (values[j] - values[k]) / (dj - dk)
            };
            m[(j, k)] = entry;
            m[(k, j)] = entry;
        }
    }
    Ok(LoewnerData { nodes: nodes.to_vec(), matrix: m })
}

/// Fréchet derivative of the matrix function `f` at `a` in direction `adot`.
pub fn matfun_derivative(
    f: &dyn ScalarFunction,
    a: &HermitianMatrix,
    adot: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    if a.dim() != adot.dim() {
        return Err(Error::Dimension(format!("{} vs {}", a.dim(), adot.dim())));
    }
    let e = herm_eig(a)?;
    let l = loewner(f, &e.values)?;
    let r = &e.vectors;
    let mut inner: CMat = r.adjoint() * adot.matrix() * r;
    for j in 0..a.dim() {
        for k in 0..a.dim() {
            inner[(j, k)] *= c(l.matrix[(j, k)]);
        }
    }
    Ok(HermitianMatrix::symmetrized(&(r * inner * r.adjoint())))
}

/// Both sides of the conjectured closed form for `det [1/(√d_j + √d_k)]`.
///
/// The matrix is a Cauchy matrix and becomes ill-conditioned quickly, so both
/// sides are evaluated in double-double arithmetic and rounded at the end.
pub fn cauchy_det_check(nodes: &[f64]) -> (f64, f64) {
    let n = nodes.len();
    let one = Dd::from(1.0);
    let s: Vec<Dd> = nodes.iter().map(|&d| Dd::from(d).sqrt()).collect();
    let mut a: Vec<Vec<Dd>> = (0..n).map(|j| (0..n).map(|k| one.div(s[j].add(s[k]))).collect()).collect();
    let mut lhs = one;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&r, &q| a[r][k].hi.abs().total_cmp(&a[q][k].hi.abs()))
            .unwrap_or(k);
        if piv != k {
            a.swap(piv, k);
            lhs = lhs.neg();
        }
        let p = a[k][k];
        lhs = lhs.mul(p);
        for r in k + 1..n {
            let f = a[r][k].div(p);
            for col in k + 1..n {
                let v = a[k][col];
                a[r][col] = a[r][col].sub(f.mul(v));
            }
        }
    }
    let mut num = one;
    let mut den = one;
    for j in 0..n {
        for k in 0..j {
            let d = s[j].sub(s[k]);
            let p = s[j].add(s[k]);
            num = num.mul(d).mul(d);
            den = den.mul(p).mul(p);
        }
        den = den.mul(s[j].add(s[j]));
    }
    (lhs.to_f64(), num.div(den).to_f64())
}

/// Unevaluated sum `hi + lo` with |lo| ≤ ulp(hi)/2.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let v = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(v.hi, v.lo + t.lo)
    }
    fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }
    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }
    fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::from(0.0);
        }
        // One Newton step from the double estimate doubles the precision.
        let x = Dd::from(self.hi.sqrt());
        x.add(self.sub(x.mul(x)).div(x.add(x)))
    }
}

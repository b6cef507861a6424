use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat, HermitianMatrix, C64};

/// `V(x)`, `f₁(x)`, `f₂(x)` at one point.
#[derive(Clone, Debug)]
pub struct CoeffValues {
    pub v: CMat,
    pub f1: CMat,
    pub f2: CMat,
}

/// A pointwise evaluator of the pencil coefficients.
pub trait CoefficientSource: Debug + Send + Sync {
    fn n(&self) -> usize;
    fn eval(&self, x: f64) -> Result<CoeffValues>;
}

/// Closed-form coefficient families registered by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    /// Scalar, `V = -1 - (815 + 219 cos 1.8x) e^{0.1x}`, `f₁ = 1`, `f₂ = 2`.
    Example1,
    /// Scalar, `V = -1 + 1.8 e^{-0.06|x|}`, `f₁ = 1`, `f₂ = 2`.
    Example2,
    /// Diagonal 2×2 with the `Example1` entry and `-1 - (255 + 0.1 cos 0.5x) e^{0.15x}`.
    Example3,
    /// 2×2 with diagonal `-1 + 1.93 e^{-0.141|x|}` and constant off-diagonal `0.5`.
    Example4,
    /// Scalar constant `V = -1`, `f₁ = f₂ = 1`.
    Constant,
    /// Scalar constant `V = 1`, `f₁ = f₂ = 1`; violates hyperbolicity.
    UnstableLimit,
}

impl Builtin {
    pub fn n(self) -> usize {
        match self {
            Builtin::Example3 | Builtin::Example4 => 2,
            _ => 1,
        }
    }

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, c(v))
    }

    fn example1_entry(x: f64) -> f64 {
        -1.0 - (815.0 + 219.0 * (1.8 * x).cos()) * (0.1 * x).exp()
    }
}

impl CoefficientSource for Builtin {
    fn n(&self) -> usize {
        Builtin::n(*self)
    }

    fn eval(&self, x: f64) -> Result<CoeffValues> {
        if !x.is_finite() {
            return Err(Error::Evaluation { name: format!("{self:?}"), at: x });
        }
        let out = match self {
            Builtin::Example1 => CoeffValues {
                v: Self::scalar(Self::example1_entry(x)),
                f1: Self::scalar(1.0),
                f2: Self::scalar(2.0),
            },
            Builtin::Example2 => CoeffValues {
                v: Self::scalar(-1.0 + 1.8 * (-0.06 * x.abs()).exp()),
                f1: Self::scalar(1.0),
                f2: Self::scalar(2.0),
            },
            Builtin::Example3 => {
                let mut v = CMat::zeros(2, 2);
                v[(0, 0)] = c(Self::example1_entry(x));
                v[(1, 1)] = c(-1.0 - (255.0 + 0.1 * (0.5 * x).cos()) * (0.15 * x).exp());
                CoeffValues { v, f1: CMat::identity(2, 2), f2: CMat::identity(2, 2) * c(2.0) }
            }
            Builtin::Example4 => {
                let d = -1.0 + 1.93 * (-0.141 * x.abs()).exp();
                let v = CMat::from_row_slice(2, 2, &[c(d), c(0.5), c(0.5), c(d)]);
                CoeffValues { v, f1: CMat::identity(2, 2), f2: CMat::identity(2, 2) * c(2.0) }
            }
            Builtin::Constant => CoeffValues { v: Self::scalar(-1.0), f1: Self::scalar(1.0), f2: Self::scalar(1.0) },
            Builtin::UnstableLimit => {
                CoeffValues { v: Self::scalar(1.0), f1: Self::scalar(1.0), f2: Self::scalar(1.0) }
            }
        };
        Ok(out)
    }
}

/// Constant `f₁`, `f₂` and `V(x) = V₋ + A exp(-((x - x₀)/w)²)`.
#[derive(Clone, Debug)]
pub struct BumpCoefficients {
    pub v_limit: HermitianMatrix,
    pub amplitude: HermitianMatrix,
    pub center: f64,
    pub width: f64,
    pub f1: HermitianMatrix,
    pub f2: HermitianMatrix,
}

impl CoefficientSource for BumpCoefficients {
    fn n(&self) -> usize {
        self.v_limit.dim()
    }

    fn eval(&self, x: f64) -> Result<CoeffValues> {
        let s = (x - self.center) / self.width;
        let g = (-s * s).exp();
        Ok(CoeffValues {
            v: self.v_limit.matrix() + self.amplitude.matrix() * c(g),
            f1: self.f1.matrix().clone(),
            f2: self.f2.matrix().clone(),
        })
    }
}

/// Sampled coefficients with entrywise natural cubic spline interpolation.
/// Outside the sampled range the end samples are held constant.
#[derive(Clone, Debug)]
pub struct TableCoefficients {
    n: usize,
    xs: Vec<f64>,
    v: EntrySplines,
    f1: EntrySplines,
    f2: EntrySplines,
}

impl TableCoefficients {
    pub fn new(xs: Vec<f64>, v: Vec<CMat>, f1: Vec<CMat>, f2: Vec<CMat>) -> Result<Self> {
        let m = xs.len();
        if m < 2 {
            return Err(Error::Config("coefficient table needs at least two samples".into()));
        }
        if v.len() != m || f1.len() != m || f2.len() != m {
            return Err(Error::Config("coefficient table columns have different lengths".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("coefficient table x values must be strictly increasing".into()));
        }
        let n = v[0].nrows();
        for mats in [&v, &f1, &f2] {
            for (k, mat) in mats.iter().enumerate() {
                if mat.nrows() != n || mat.ncols() != n {
                    return Err(Error::Dimension(format!("table sample {k} is not {n}×{n}")));
                }
                HermitianMatrix::new(mat.clone())?;
            }
        }
        Ok(Self {
            n,
            v: EntrySplines::new(&xs, &v),
            f1: EntrySplines::new(&xs, &f1),
            f2: EntrySplines::new(&xs, &f2),
            xs,
        })
    }
}

impl CoefficientSource for TableCoefficients {
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, x: f64) -> Result<CoeffValues> {
        if !x.is_finite() {
            return Err(Error::Evaluation { name: "table".into(), at: x });
        }
        let h = |m: CMat| (&m + m.adjoint()) * c(0.5);
        Ok(CoeffValues {
            v: h(self.v.eval(&self.xs, x)),
            f1: h(self.f1.eval(&self.xs, x)),
            f2: h(self.f2.eval(&self.xs, x)),
        })
    }
}

/// Second-derivative data of a natural cubic spline for every matrix entry.
#[derive(Clone, Debug)]
struct EntrySplines {
    n: usize,
    values: Vec<CMat>,
    second: Vec<CMat>,
}

impl EntrySplines {
    fn new(xs: &[f64], values: &[CMat]) -> Self {
        let n = values[0].nrows();
        let m = xs.len();
        let mut second = vec![CMat::zeros(n, n); m];
        if m > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let mut diag = vec![0.0; m];
            let mut rhs = vec![CMat::zeros(n, n); m];
            let mut upper = vec![0.0; m];
            for i in 1..m - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = (&values[i + 1] - &values[i]) * c(6.0 / h1) - (&values[i] - &values[i - 1]) * c(6.0 / h0);
            }
            for i in 2..m - 1 {
                let lower = xs[i] - xs[i - 1];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                let prev = rhs[i - 1].clone();
                rhs[i] -= prev * c(f);
            }
            for i in (1..m - 1).rev() {
                let next = if i + 1 < m - 1 { second[i + 1].clone() * c(upper[i]) } else { CMat::zeros(n, n) };
                second[i] = (&rhs[i] - next) * c(1.0 / diag[i]);
            }
        }
        Self { n, values: values.to_vec(), second }
    }

    fn eval(&self, xs: &[f64], x: f64) -> CMat {
        let m = xs.len();
        if x <= xs[0] {
            return self.values[0].clone();
        }
        if x >= xs[m - 1] {
            return self.values[m - 1].clone();
        }
        let k = xs.partition_point(|&t| t <= x).clamp(1, m - 1) - 1;
        let h = xs[k + 1] - xs[k];
        let a = (xs[k + 1] - x) / h;
        let b = (x - xs[k]) / h;
        let mut out = CMat::zeros(self.n, self.n);
        let ca = (a * a * a - a) * h * h / 6.0;
        let cb = (b * b * b - b) * h * h / 6.0;
        for j in 0..self.n {
            for l in 0..self.n {
                let v: C64 = self.values[k][(j, l)] * a
                    + self.values[k + 1][(j, l)] * b
                    + self.second[k][(j, l)] * ca
                    + self.second[k + 1][(j, l)] * cb;
                out[(j, l)] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_formulas() {
        let e1 = Builtin::Example1.eval(0.0).unwrap();
        assert!((e1.v[(0, 0)].re - (-1.0 - 1034.0)).abs() < 1e-12);
        let e2 = Builtin::Example2.eval(-10.0).unwrap();
        assert!((e2.v[(0, 0)].re - (-1.0 + 1.8 * (-0.6f64).exp())).abs() < 1e-15);
        assert_eq!(e2.f2[(0, 0)], c(2.0));
        let e3 = Builtin::Example3.eval(0.0).unwrap();
        assert!((e3.v[(1, 1)].re - (-1.0 - 255.1)).abs() < 1e-12);
        assert_eq!(e3.v[(0, 1)], c(0.0));
        let e4 = Builtin::Example4.eval(3.0).unwrap();
        assert_eq!(e4.v[(0, 1)], c(0.5));
        assert!((e4.v[(0, 0)].re - (-1.0 + 1.93 * (-0.423f64).exp())).abs() < 1e-15);
    }

    // A natural spline reproduces linear data exactly and cubic data closely
    // away from the ends.
    #[test]
    fn table_interpolation() {
        let xs: Vec<f64> = (0..41).map(|k| -10.0 + 0.5 * k as f64).collect();
        let lin = |x: f64| CMat::from_element(1, 1, C64::new(2.0 * x - 1.0, 0.0));
        let smooth = |x: f64| CMat::from_element(1, 1, C64::new((0.3 * x).sin(), 0.0));
        let one = CMat::from_element(1, 1, c(1.0));
        let t = TableCoefficients::new(
            xs.clone(),
            xs.iter().map(|&x| lin(x)).collect(),
            xs.iter().map(|&x| smooth(x)).collect(),
            vec![one; xs.len()],
        )
        .unwrap();
        for x in [-9.3, -2.0, 0.1, 7.77] {
            let e = t.eval(x).unwrap();
            assert!((e.v[(0, 0)] - lin(x)[(0, 0)]).norm() < 1e-12);
            if x.abs() < 8.0 {
                assert!((e.f1[(0, 0)] - smooth(x)[(0, 0)]).norm() < 1e-4);
            }
        }
        assert_eq!(t.eval(-50.0).unwrap().v, lin(-10.0));
    }

    #[test]
    fn table_rejects_unsorted_grid() {
        let m = CMat::from_element(1, 1, c(1.0));
        let r = TableCoefficients::new(vec![0.0, 0.0], vec![m.clone(); 2], vec![m.clone(); 2], vec![m; 2]);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}

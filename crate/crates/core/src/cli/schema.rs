//! JSON problem files.
//!
//! ```json
//! {
//!   "name": "my-problem",
//!   "n": 1,
//!   "coefficients": {"kind": "table", "x": [...], "V": [...], "f1": [...], "f2": [...]},
//!   "limits": {"Vminus": -1.0, "f1minus": 1.0, "f2minus": 2.0},
//!   "delta": 2.0,
//!   "domain": {"kind": "half", "c": 18.0, "C2": -9.0}
//! }
//! ```
//!
//! Matrices are a number (a multiple of the identity), real rows
//! `[[a, b], [c, d]]`, or `{"re": rows, "im": rows}`. Coefficient kinds are
//! `builtin` (`{"kind": "builtin", "name": "example1"}`, other fields
//! optional), `table` (natural cubic splines through samples) and `bump`
//! (`V = Vminus + A exp(-((x - center)/width)²)` with constant `f₁`, `f₂`).
//! Domains are `half` (with `c` and either `C2` or a coefficient list `phi`),
//! `whole`, and `truncated` (with `L`).

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{CMat, HermitianMatrix, C64};
use crate::pencil::{
    BoundaryData, BumpCoefficients, CoefficientField, Domain, Limits, PencilProblem, PhiKind, TableCoefficients,
};

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Real(Vec<Vec<f64>>),
    Complex { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
}

impl MatrixSpec {
    fn to_cmat(&self, n: usize, what: &str) -> Result<CMat> {
        let rows_to = |re: &[Vec<f64>], im: Option<&[Vec<f64>]>| -> Result<CMat> {
            if re.len() != n || re.iter().any(|r| r.len() != n) {
                return Err(Error::Dimension(format!("{what} must be {n}×{n}")));
            }
            if let Some(im) = im {
                if im.len() != n || im.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension(format!("imaginary part of {what} must be {n}×{n}")));
                }
            }
            Ok(CMat::from_fn(n, n, |i, j| C64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))))
        };
        match self {
            MatrixSpec::Scalar(v) => Ok(CMat::identity(n, n) * C64::new(*v, 0.0)),
            MatrixSpec::Real(rows) => rows_to(rows, None),
            MatrixSpec::Complex { re, im } => rows_to(re, Some(im)),
        }
    }

    fn hermitian(&self, n: usize, what: &str) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.to_cmat(n, what)?)
    }

    fn dim(&self) -> Option<usize> {
        match self {
            MatrixSpec::Scalar(_) => None,
            MatrixSpec::Real(rows) => Some(rows.len()),
            MatrixSpec::Complex { re, .. } => Some(re.len()),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientSpec {
    Builtin {
        name: String,
    },
    Table {
        x: Vec<f64>,
        #[serde(rename = "V")]
        v: Vec<MatrixSpec>,
        f1: Vec<MatrixSpec>,
        f2: Vec<MatrixSpec>,
    },
    Bump {
        #[serde(rename = "A")]
        amplitude: MatrixSpec,
        center: f64,
        width: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSpec {
    #[serde(rename = "Vminus")]
    pub v_minus: MatrixSpec,
    pub f1minus: MatrixSpec,
    pub f2minus: MatrixSpec,
    #[serde(rename = "Vplus")]
    pub v_plus: Option<MatrixSpec>,
    pub f1plus: Option<MatrixSpec>,
    pub f2plus: Option<MatrixSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Half {
        c: MatrixSpec,
        #[serde(rename = "C2")]
        c2: Option<MatrixSpec>,
        phi: Option<Vec<MatrixSpec>>,
    },
    Whole,
    Truncated {
        #[serde(rename = "L")]
        l: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub n: Option<usize>,
    pub coefficients: CoefficientSpec,
    pub limits: Option<LimitsSpec>,
    pub delta: Option<f64>,
    pub domain: Option<DomainSpec>,
}

impl DomainSpec {
    fn build(&self, n: usize) -> Result<Domain> {
        Ok(match self {
            DomainSpec::Whole => Domain::WholeLine,
            DomainSpec::Truncated { l } => Domain::Truncated { l: *l },
            DomainSpec::Half { c, c2, phi } => {
                let c = c.hermitian(n, "c")?;
                let phi = match (c2, phi) {
                    (Some(c2), None) => PhiKind::Linear(c2.hermitian(n, "C2")?),
                    (None, Some(list)) => PhiKind::Polynomial(
                        list.iter().enumerate().map(|(k, m)| m.hermitian(n, &format!("phi[{k}]"))).collect::<Result<_>>()?,
                    ),
                    _ => return Err(Error::Config("half-line domain needs exactly one of `C2` and `phi`".into())),
                };
                Domain::HalfLine { boundary: BoundaryData { c, phi } }
            }
        })
    }
}

impl ProblemSpec {
    fn infer_n(&self) -> Option<usize> {
        if self.n.is_some() {
            return self.n;
        }
        let mut cands: Vec<Option<usize>> = Vec::new();
        if let Some(l) = &self.limits {
            cands.extend([l.v_minus.dim(), l.f1minus.dim(), l.f2minus.dim()]);
        }
        match &self.coefficients {
            CoefficientSpec::Table { v, .. } => cands.extend(v.iter().map(MatrixSpec::dim)),
            CoefficientSpec::Bump { amplitude, .. } => cands.push(amplitude.dim()),
            _ => {}
        }
        cands.into_iter().flatten().next().or(Some(1))
    }

    pub fn build(&self) -> Result<PencilProblem> {
        if let CoefficientSpec::Builtin { name } = &self.coefficients {
            let mut p = PencilProblem::builtin(name)?;
            if self.limits.is_some() || self.delta.is_some() {
                return Err(Error::Config("limits and delta of a built-in problem cannot be overridden".into()));
            }
            if let Some(n) = self.n {
                if n != p.n() {
                    return Err(Error::Dimension(format!("built-in `{name}` has n = {}, file says {n}", p.n())));
                }
            }
            if let Some(d) = &self.domain {
                let domain = d.build(p.n())?;
                p = PencilProblem::new(self.name.clone().unwrap_or_else(|| p.name.clone()), p.coeffs, domain)?;
            } else if let Some(name) = &self.name {
                p.name = name.clone();
            }
            return Ok(p);
        }
        let n = self.infer_n().expect("defaults to 1");
        let limits = self.limits.as_ref().ok_or_else(|| Error::Config("`limits` is required".into()))?;
        let minus = Limits {
            v: limits.v_minus.hermitian(n, "Vminus")?,
            f1: limits.f1minus.hermitian(n, "f1minus")?,
            f2: limits.f2minus.hermitian(n, "f2minus")?,
        };
        let plus = match (&limits.v_plus, &limits.f1plus, &limits.f2plus) {
            (None, None, None) => None,
            (Some(v), Some(f1), Some(f2)) => Some(Limits {
                v: v.hermitian(n, "Vplus")?,
                f1: f1.hermitian(n, "f1plus")?,
                f2: f2.hermitian(n, "f2plus")?,
            }),
            _ => return Err(Error::Config("give all or none of Vplus, f1plus, f2plus".into())),
        };
        let domain_spec = self.domain.as_ref().ok_or_else(|| Error::Config("`domain` is required".into()))?;
        let domain = domain_spec.build(n)?;
        let plus = match (&domain, plus) {
            // Whole-line problems need both limits; default to the ones at -∞.
            (Domain::WholeLine, None) => Some(minus.clone()),
            (_, p) => p,
        };
        let delta = match self.delta {
            Some(d) => d,
            None => minus.f2.min_eigenvalue()?,
        };
        let source: Arc<dyn crate::pencil::CoefficientSource> = match &self.coefficients {
            CoefficientSpec::Table { x, v, f1, f2 } => {
                let conv = |list: &[MatrixSpec], what: &str| -> Result<Vec<CMat>> {
                    list.iter().enumerate().map(|(k, m)| m.to_cmat(n, &format!("{what}[{k}]"))).collect()
                };
                Arc::new(TableCoefficients::new(x.clone(), conv(v, "V")?, conv(f1, "f1")?, conv(f2, "f2")?)?)
            }
            CoefficientSpec::Bump { amplitude, center, width } => {
                if !(*width > 0.0) {
                    return Err(Error::Config("bump width must be positive".into()));
                }
                Arc::new(BumpCoefficients {
                    v_limit: minus.v.clone(),
                    amplitude: amplitude.hermitian(n, "A")?,
                    center: *center,
                    width: *width,
                    f1: minus.f1.clone(),
                    f2: minus.f2.clone(),
                })
            }
            CoefficientSpec::Builtin { .. } => unreachable!("handled above"),
        };
        let field = CoefficientField { source, minus, plus, delta };
        PencilProblem::new(self.name.clone().unwrap_or_else(|| "custom".into()), field, domain)
    }
}

pub fn parse_problem(text: &str) -> Result<PencilProblem> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.pointer("/coefficients/kind").and_then(|k| k.as_str()) == Some("expr") {
        return Err(Error::Unsupported("`expr` coefficients; tabulate them instead".into()));
    }
    // Parse the text again so type errors carry a line and column.
    let spec: ProblemSpec = serde_json::from_str(text)?;
    spec.build()
}

/// A built-in name or the path of a problem file.
pub fn load_problem(arg: &str) -> Result<PencilProblem> {
    if crate::pencil::BUILTIN_NAMES.contains(&arg) {
        return PencilProblem::builtin(arg);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::Config(format!(
            "`{arg}` is neither a built-in problem ({}) nor an existing file",
            crate::pencil::BUILTIN_NAMES.join(", ")
        )));
    }
    parse_problem(&std::fs::read_to_string(path)?)
}

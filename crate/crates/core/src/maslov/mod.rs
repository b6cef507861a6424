//! Shelf Maslov indices, the Maslov box, and the spectral-count theorems.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frameflow::{
    detect_crossings, path_maslov, propagate_in_lambda, propagate_in_x, unstable_frame_at, ConjugatePoint,
    FramePath, IntegratorOptions, PathKind, Reference,
};
use crate::lagrangian::intersection_dim;
use crate::linalg::{morse_index, ZERO_TOL};
use crate::pencil::{
    asymptotic_decomposition, morse_matrix, unstable_frame_at_minus_infinity, Domain, PencilProblem, Side,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shelf {
    Top,
    Right,
    Bottom,
    Left,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShelfResult {
    pub shelf: Shelf,
    pub maslov: i64,
    pub crossings: Vec<ConjugatePoint>,
}

impl ShelfResult {
    /// Sum of `direction · multiplicity` over the detected crossings.
    pub fn signed_crossings(&self) -> i64 {
        self.crossings.iter().map(|c| c.direction as i64 * c.multiplicity as i64).sum()
    }
}

/// Maslov index of a path against its reference, with the crossings that
/// make it up.
pub fn shelf_index(p: &PencilProblem, shelf: Shelf, path: &FramePath, opts: &IntegratorOptions) -> Result<ShelfResult> {
    let maslov = path_maslov(path, opts.angle_tol);
    let crossings = detect_crossings(p, path, opts)?;
    Ok(ShelfResult { shelf, maslov, crossings })
}

/// `(negative, zero)` eigenvalue counts of `√(λf₁₋ + λ²f₂₋ - V₋) - c - φ(λ)`.
pub fn bottom_shelf_correction(p: &PencilProblem, lambda: f64) -> Result<(usize, usize)> {
    morse_index(&morse_matrix(p, lambda)?, ZERO_TOL)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralCountReport {
    pub problem: String,
    pub domain: &'static str,
    pub lambda: f64,
    /// Number of real eigenvalues greater than `lambda`.
    #[serde(rename = "N")]
    pub n: usize,
    /// Left-shelf Maslov index.
    pub maslov: i64,
    /// Negative eigenvalues of the Morse matrix (half-line only).
    pub morse: usize,
    pub morse_zero: usize,
    /// Dimension of the intersection with the reference plane at the right end.
    pub kernel: usize,
    pub x_min: f64,
    pub x_right: f64,
    pub shelf_results: Vec<ShelfResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_sum: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hi: Option<f64>,
    /// No further conjugate points on `[x_right, 2 x_right]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_stable: Option<bool>,
    pub oracle_count: Option<usize>,
    pub max_lagrangian_defect: f64,
    pub max_unitarity_defect: f64,
}

impl SpectralCountReport {
    fn shelf(&self, s: Shelf) -> Option<&ShelfResult> {
        self.shelf_results.iter().find(|r| r.shelf == s)
    }

    pub fn top(&self) -> Option<&ShelfResult> {
        self.shelf(Shelf::Top)
    }

    pub fn left(&self) -> Option<&ShelfResult> {
        self.shelf(Shelf::Left)
    }

    pub fn right(&self) -> Option<&ShelfResult> {
        self.shelf(Shelf::Right)
    }

    pub fn bottom(&self) -> Option<&ShelfResult> {
        self.shelf(Shelf::Bottom)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("λ must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

fn left_path(p: &PencilProblem, lambda: f64, x_right: f64, opts: &IntegratorOptions) -> Result<(f64, FramePath)> {
    let x0 = opts.resolve_x_min(p)?;
    let seed = unstable_frame_at_minus_infinity(p, lambda)?;
    let reference = Reference::for_problem(p);
    let path = if x_right > x0 {
        propagate_in_x(p, lambda, x0, x_right, &seed, &reference, opts)?
    } else {
        // Truncation left of the seed point: the path is a single asymptotic frame.
        propagate_in_x(p, lambda, x0, x0 + opts.min_step.max(1e-9), &seed, &reference, opts)?
    };
    Ok((x0, path))
}

/// The left-shelf path at `lambda`, from the seed point to the right end.
pub fn left_shelf_path(p: &PencilProblem, lambda: f64, opts: &IntegratorOptions) -> Result<FramePath> {
    check_lambda(lambda)?;
    Ok(left_path(p, lambda, opts.resolve_right_end(p)?, opts)?.1)
}

/// `N(λ) = -Mas(left shelf vs Φ(λ)) - dim ker + Mor(M(λ)) + dim ker M(λ)` on the half-line.
pub fn spectral_count_halfline(p: &PencilProblem, lambda: f64, opts: &IntegratorOptions) -> Result<SpectralCountReport> {
    check_lambda(lambda)?;
    let b = p.boundary().ok_or_else(|| Error::Config("spectral_count_halfline needs a half-line problem".into()))?;
    let (x0, path) = left_path(p, lambda, 0.0, opts)?;
    let left = shelf_index(p, Shelf::Left, &path, opts)?;
    let end = &path.samples.last().expect("nonempty path").frame;
    let kernel = intersection_dim(end, &crate::lagrangian::phi_frame(b, lambda)?, opts.angle_tol)?;
    let (morse, morse_zero) = bottom_shelf_correction(p, lambda)?;
    let signed = -left.maslov - kernel as i64 + (morse + morse_zero) as i64;
    if signed < 0 {
        return Err(Error::InconsistentBox {
            box_sum: signed,
            detail: format!("negative count: Maslov {} kernel {kernel} Morse {morse}+{morse_zero}", left.maslov),
        });
    }
    Ok(SpectralCountReport {
        problem: p.name.clone(),
        domain: p.domain.kind(),
        lambda,
        n: signed as usize,
        maslov: left.maslov,
        morse,
        morse_zero,
        kernel,
        x_min: x0,
        x_right: 0.0,
        max_lagrangian_defect: path.max_lagrangian_defect(),
        max_unitarity_defect: path.max_unitarity_defect(),
        shelf_results: vec![left],
        box_sum: None,
        lambda_hi: None,
        truncation_stable: None,
        oracle_count: None,
    })
}

fn dirichlet_count(p: &PencilProblem, lambda: f64, x_right: f64, opts: &IntegratorOptions) -> Result<SpectralCountReport> {
    check_lambda(lambda)?;
    let (x0, path) = left_path(p, lambda, x_right, opts)?;
    let left = shelf_index(p, Shelf::Left, &path, opts)?;
    let total: usize = left.crossings.iter().map(|c| c.multiplicity).sum();
    if left.crossings.iter().any(|c| c.direction > 0) || -left.maslov != total as i64 {
        return Err(Error::InconsistentBox {
            box_sum: left.maslov + total as i64,
            detail: format!(
                "left shelf Maslov {} disagrees with {total} clockwise conjugate points",
                left.maslov
            ),
        });
    }
    let end = &path.samples.last().expect("nonempty path").frame;
    let kernel = intersection_dim(end, &crate::lagrangian::dirichlet_frame(p.n()), opts.angle_tol)?;
    Ok(SpectralCountReport {
        problem: p.name.clone(),
        domain: p.domain.kind(),
        lambda,
        n: total,
        maslov: left.maslov,
        morse: 0,
        morse_zero: 0,
        kernel,
        x_min: x0,
        x_right,
        max_lagrangian_defect: path.max_lagrangian_defect(),
        max_unitarity_defect: path.max_unitarity_defect(),
        shelf_results: vec![left],
        box_sum: None,
        lambda_hi: None,
        truncation_stable: None,
        oracle_count: None,
    })
}

/// Total multiplicity of conjugate points against the Dirichlet plane on
/// `[x_min, x_max]`, with a check that `[x_max, 2 x_max]` adds none.
pub fn spectral_count_wholeline(p: &PencilProblem, lambda: f64, opts: &IntegratorOptions) -> Result<SpectralCountReport> {
    if !matches!(p.domain, Domain::WholeLine) {
        return Err(Error::Config("spectral_count_wholeline needs a whole-line problem".into()));
    }
    let x_right = opts.resolve_right_end(p)?;
    let mut report = dirichlet_count(p, lambda, x_right, opts)?;
    let end = unstable_frame_at(p, lambda, x_right, opts)?;
    let tail = propagate_in_x(p, lambda, x_right, 2.0 * x_right, &end, &Reference::Dirichlet, opts)?;
    let extra = detect_crossings(p, &tail, opts)?;
    report.truncation_stable = Some(extra.is_empty());
    report.max_lagrangian_defect = report.max_lagrangian_defect.max(tail.max_lagrangian_defect());
    report.max_unitarity_defect = report.max_unitarity_defect.max(tail.max_unitarity_defect());
    Ok(report)
}

/// Conjugate points on `(-∞, L]` against the Dirichlet plane.
pub fn spectral_count_truncated(
    p: &PencilProblem,
    l: f64,
    lambda: f64,
    opts: &IntegratorOptions,
) -> Result<SpectralCountReport> {
    if !l.is_finite() {
        return Err(Error::Config("truncation point must be finite".into()));
    }
    dirichlet_count(p, lambda, l, opts)
}

/// Dispatch on the problem's domain.
pub fn spectral_count(p: &PencilProblem, lambda: f64, opts: &IntegratorOptions) -> Result<SpectralCountReport> {
    match &p.domain {
        Domain::HalfLine { .. } => spectral_count_halfline(p, lambda, opts),
        Domain::WholeLine => spectral_count_wholeline(p, lambda, opts),
        Domain::Truncated { l } => spectral_count_truncated(p, *l, lambda, opts),
    }
}

/// Right edge of the box. Half-line and truncated problems use their
/// boundary point. On the whole line the top shelf sits one decay length past
/// the last conjugate point at `λ_lo`: the conjugate-point curves steepen as
/// they move right, so farther out their top-shelf crossings become
/// exponentially narrow in `λ`, while the box sum is the same for every choice.
fn box_right_edge(p: &PencilProblem, lambda_lo: f64, left: &ShelfResult, opts: &IntegratorOptions) -> Result<f64> {
    match &p.domain {
        Domain::HalfLine { .. } => Ok(0.0),
        Domain::Truncated { l } => Ok(*l),
        Domain::WholeLine => {
            let mu_min = asymptotic_decomposition(p, Side::Plus, lambda_lo)?.mus[0];
            let last = left.crossings.iter().map(|c| c.param).fold(f64::NEG_INFINITY, f64::max);
            let base = if last.is_finite() { last } else { 0.0 };
            Ok((base + 1.0 / mu_min).min(opts.resolve_right_end(p)?))
        }
    }
}

fn box_once(p: &PencilProblem, lambda_lo: f64, lambda_hi: f64, opts: &IntegratorOptions) -> Result<SpectralCountReport> {
    let x_end = opts.resolve_right_end(p)?;
    let (x0, full_left) = left_path(p, lambda_lo, x_end, opts)?;
    let full = shelf_index(p, Shelf::Left, &full_left, opts)?;
    let x_right = box_right_edge(p, lambda_lo, &full, opts)?;

    let reference = Reference::for_problem(p);
    let (left_path_res, (top_res, right_res)) = rayon::join(
        || left_path(p, lambda_lo, x_right, opts),
        || {
            rayon::join(
                || propagate_in_lambda(p, x_right, lambda_lo, lambda_hi, &reference, opts),
                || left_path(p, lambda_hi, x_right, opts),
            )
        },
    );
    let (_, lpath) = left_path_res?;
    let tpath = top_res?;
    let (_, rpath) = right_res?;
    let rpath = rpath.reversed();

    let shelves: Vec<(Shelf, &FramePath)> = vec![(Shelf::Left, &lpath), (Shelf::Top, &tpath), (Shelf::Right, &rpath)];
    let mut results: Vec<ShelfResult> =
        shelves.par_iter().map(|(s, path)| shelf_index(p, *s, path, opts)).collect::<Result<Vec<_>>>()?;

    let (bottom, morse, morse_zero) = match p.boundary() {
        Some(_) => {
            let (lo_neg, lo_zero) = bottom_shelf_correction(p, lambda_lo)?;
            let (hi_neg, _) = bottom_shelf_correction(p, lambda_hi)?;
            (hi_neg as i64 - lo_neg as i64, lo_neg, lo_zero)
        }
        None => (0, 0, 0),
    };
    results.push(ShelfResult { shelf: Shelf::Bottom, maslov: bottom, crossings: Vec::new() });
    let box_sum: i64 = results.iter().map(|r| r.maslov).sum();

    let left = &results[0];
    let kernel = match p.boundary() {
        Some(b) => intersection_dim(
            &lpath.samples.last().expect("nonempty").frame,
            &crate::lagrangian::phi_frame(b, lambda_lo)?,
            opts.angle_tol,
        )?,
        None => 0,
    };
    let n_signed = match p.boundary() {
        Some(_) => -left.maslov - kernel as i64 + (morse + morse_zero) as i64,
        None => -full.maslov,
    };
    let paths = [&lpath, &tpath, &rpath];
    Ok(SpectralCountReport {
        problem: p.name.clone(),
        domain: p.domain.kind(),
        lambda: lambda_lo,
        n: n_signed.max(0) as usize,
        maslov: left.maslov,
        morse,
        morse_zero,
        kernel,
        x_min: x0,
        x_right,
        max_lagrangian_defect: paths.iter().map(|q| q.max_lagrangian_defect()).fold(0.0, f64::max),
        max_unitarity_defect: paths.iter().map(|q| q.max_unitarity_defect()).fold(0.0, f64::max),
        shelf_results: results,
        box_sum: Some(box_sum),
        lambda_hi: Some(lambda_hi),
        truncation_stable: None,
        oracle_count: None,
    })
}

/// All four shelves of the box `[x_min, x_right] × [λ_lo, λ_hi]`, traversed
/// left (up in `x`), top (up in `λ`), right (down in `x`), bottom (down in
/// `λ`). A nonzero sum is retried once at halved tolerances before it is
/// reported as an error.
pub fn maslov_box(p: &PencilProblem, lambda_lo: f64, lambda_hi: f64, opts: &IntegratorOptions) -> Result<SpectralCountReport> {
    check_lambda(lambda_lo)?;
    if !(lambda_hi >= lambda_lo) || !lambda_hi.is_finite() {
        return Err(Error::Config(format!("box needs λ_lo ≤ λ_hi, got [{lambda_lo}, {lambda_hi}]")));
    }
    let first = box_once(p, lambda_lo, lambda_hi, opts)?;
    if first.box_sum == Some(0) {
        return Ok(first);
    }
    let second = box_once(p, lambda_lo, lambda_hi, &opts.halved())?;
    if second.box_sum == Some(0) {
        return Ok(second);
    }
    let detail = second
        .shelf_results
        .iter()
        .map(|r| {
            let params: Vec<String> = r.crossings.iter().map(|c| format!("{:.6}", c.param)).collect();
            format!("{:?}={} [{}]", r.shelf, r.maslov, params.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::InconsistentBox { box_sum: second.box_sum.unwrap_or(0), detail })
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    /// Position among the conjugate points at this `λ`, counted from the left from 1.
    pub strand_index: usize,
    pub x_star: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CurveTable {
    pub points: Vec<CurvePoint>,
    /// `λ` values whose propagation failed, with the reason.
    pub gaps: Vec<(f64, String)>,
}

impl CurveTable {
    pub fn strands_at(&self, lambda: f64) -> usize {
        self.points.iter().filter(|p| p.lambda == lambda).count()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        crate::cli::write_atomically(path, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["lambda", "strand_index", "x_star"])?;
            for pt in &self.points {
                out.write_record([format!("{:.12e}", pt.lambda), pt.strand_index.to_string(), format!("{:.12e}", pt.x_star)])?;
            }
            out.flush()?;
            Ok(())
        })
    }
}

/// Conjugate-point locations `x*(λ)` of the left shelf at each grid value,
/// computed in parallel; failures become gaps.
pub fn eigenvalue_curves(p: &PencilProblem, lambda_grid: &[f64], opts: &IntegratorOptions) -> Result<CurveTable> {
    let x_right = opts.resolve_right_end(p)?;
    let per_lambda: Vec<(f64, Result<Vec<f64>>)> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let run = || -> Result<Vec<f64>> {
                check_lambda(lambda)?;
                let (_, path) = left_path(p, lambda, x_right, opts)?;
                let mut xs = Vec::new();
                for cp in detect_crossings(p, &path, opts)? {
                    debug_assert_eq!(cp.kind, PathKind::InX);
                    xs.extend(std::iter::repeat(cp.param).take(cp.multiplicity));
                }
                Ok(xs)
            };
            (lambda, run())
        })
        .collect();
    let mut table = CurveTable::default();
    for (lambda, r) in per_lambda {
        match r {
            Ok(xs) => table.points.extend(
                xs.into_iter().enumerate().map(|(k, x_star)| CurvePoint { lambda, strand_index: k + 1, x_star }),
            ),
            Err(e) => table.gaps.push((lambda, e.to_string())),
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> IntegratorOptions {
        IntegratorOptions::default()
    }

    #[test]
    fn morse_corrections_of_half_line_examples() {
        let p1 = PencilProblem::builtin("example1").unwrap();
        assert_eq!(bottom_shelf_correction(&p1, 0.0).unwrap(), (1, 0));
        let p3 = PencilProblem::builtin("example3").unwrap();
        assert_eq!(bottom_shelf_correction(&p3, 0.0).unwrap(), (2, 0));
        let l_inf = crate::pencil::lambda_max(&p1, &crate::pencil::default_sample_grid(&p1).unwrap()).unwrap();
        assert_eq!(bottom_shelf_correction(&p1, l_inf).unwrap(), (0, 0));
    }

    #[test]
    fn example_counts_at_zero() {
        let r1 = spectral_count(&PencilProblem::builtin("example1").unwrap(), 0.0, &opts()).unwrap();
        assert_eq!((r1.maslov, r1.morse, r1.n), (1, 1, 0));
        let r2 = spectral_count(&PencilProblem::builtin("example2").unwrap(), 0.0, &opts()).unwrap();
        assert_eq!((r2.maslov, r2.n, r2.truncation_stable), (-3, 3, Some(true)));
        let r3 = spectral_count(&PencilProblem::builtin("example3").unwrap(), 0.0, &opts()).unwrap();
        assert_eq!((r3.maslov, r3.morse, r3.n), (1, 2, 1));
        let r4 = spectral_count(&PencilProblem::builtin("example4").unwrap(), 0.0, &opts()).unwrap();
        assert_eq!((r4.maslov, r4.n), (-5, 5));
    }

    #[test]
    fn constant_problem_counts_nothing() {
        let p = PencilProblem::builtin("constant").unwrap();
        let r = spectral_count(&p, 0.0, &opts()).unwrap();
        assert_eq!(r.n, 0);
        let table = eigenvalue_curves(&p, &[0.0, 0.2, 0.4], &opts()).unwrap();
        assert!(table.points.is_empty() && table.gaps.is_empty());
    }

    #[test]
    fn example2_box_shelves() {
        let p = PencilProblem::builtin("example2").unwrap();
        let l_inf = crate::pencil::lambda_max(&p, &crate::pencil::default_sample_grid(&p).unwrap()).unwrap();
        let r = maslov_box(&p, 0.0, l_inf, &opts()).unwrap();
        assert_eq!(r.box_sum, Some(0));
        assert_eq!(r.top().unwrap().maslov, 3);
        assert_eq!(r.left().unwrap().maslov, -3);
        assert_eq!(r.right().unwrap().maslov, 0);
        assert_eq!(r.bottom().unwrap().maslov, 0);
        assert!(r.top().unwrap().crossings.iter().all(|c| c.direction == 1));
    }

    #[test]
    fn example1_box_sums_to_zero() {
        let p = PencilProblem::builtin("example1").unwrap();
        let l_inf = crate::pencil::lambda_max(&p, &crate::pencil::default_sample_grid(&p).unwrap()).unwrap();
        let r = maslov_box(&p, 0.0, l_inf, &opts()).unwrap();
        assert_eq!(r.box_sum, Some(0), "{:?}", r.shelf_results);
        assert_eq!(r.top().unwrap().maslov, 0);
        assert_eq!(r.bottom().unwrap().maslov, -1);
    }

    #[test]
    fn degenerate_box_encloses_nothing() {
        let p = PencilProblem::builtin("example2").unwrap();
        let r = maslov_box(&p, 0.3, 0.3, &opts()).unwrap();
        assert_eq!(r.top().unwrap().maslov, 0);
        assert_eq!(r.bottom().unwrap().maslov, 0);
        assert_eq!(r.left().unwrap().maslov, -r.right().unwrap().maslov);
        let l_inf = crate::pencil::lambda_max(&p, &crate::pencil::default_sample_grid(&p).unwrap()).unwrap();
        let r = maslov_box(&p, l_inf, l_inf, &opts()).unwrap();
        assert!(r.shelf_results.iter().all(|s| s.maslov == 0 && s.crossings.is_empty()));
    }

    #[test]
    fn truncated_counts_grow_with_l() {
        let p = PencilProblem::builtin("example2").unwrap();
        let whole = spectral_count(&p, 0.0, &opts()).unwrap();
        let before_first = whole.left().unwrap().crossings[0].param - 1.0;
        assert_eq!(spectral_count_truncated(&p, before_first, 0.0, &opts()).unwrap().n, 0);
        let mut prev = 0;
        for l in [0.0, 20.0, 60.0, whole.x_right] {
            let n = spectral_count_truncated(&p, l, 0.0, &opts()).unwrap().n;
            assert!(n >= prev);
            prev = n;
        }
        assert_eq!(prev, whole.n);
    }

    #[test]
    fn example2_curves_have_three_strands_at_zero() {
        let p = PencilProblem::builtin("example2").unwrap();
        let table = eigenvalue_curves(&p, &[0.0, 0.05], &opts()).unwrap();
        assert_eq!(table.strands_at(0.0), 3);
        assert!(table.gaps.is_empty());
    }
}

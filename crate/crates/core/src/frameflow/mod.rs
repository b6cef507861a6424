//! Propagation of the unstable Lagrangian frame in `x` (fixed `λ`) and in `λ`
//! (fixed `x`), with continuously tracked eigenphases of `W̃` against a
//! reference plane, and location of conjugate points on the resulting paths.

mod rk;

pub use rk::integrate_to;

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lagrangian::{
    dirichlet_frame, distance_to_pi, phase_velocity, phi_frame, track_phases, unitarity_defect, unitary_eig,
    unitary_phases, w_relative, LagrangianFrame, UnitaryTrace, ANGLE_TOL,
};
use crate::linalg::CMat;
use crate::pencil::{unstable_frame_at_minus_infinity, x_min, BoundaryData, PencilProblem};

#[derive(Clone, Debug)]
pub struct IntegratorOptions {
    /// Tolerance on the per-step error of the spanned plane.
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub initial_step: f64,
    /// Accepted steps between QR re-orthonormalizations.
    pub renorm_every: usize,
    /// Largest eigenphase move accepted between consecutive samples.
    pub max_phase_step: f64,
    pub angle_tol: f64,
    /// Width to which crossing locations are bisected.
    pub param_tol: f64,
    /// Seed point standing in for `-∞`; probed from the coefficients when `None`.
    pub x_min: Option<f64>,
    /// Point standing in for `+∞` on whole-line problems; probed when `None`.
    pub x_max: Option<f64>,
    /// Initial number of λ intervals for λ-paths.
    pub lambda_intervals: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.5,
            min_step: 1e-12,
            initial_step: 1e-2,
            renorm_every: 5,
            max_phase_step: 0.5,
            angle_tol: ANGLE_TOL,
            param_tol: 1e-8,
            x_min: None,
            x_max: None,
            lambda_intervals: 16,
        }
    }
}

impl IntegratorOptions {
    pub(crate) fn tol(&self) -> f64 {
        self.rel_tol + self.abs_tol
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.rel_tol, self.max_step, self.min_step, self.initial_step, self.max_phase_step, self.param_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || self.abs_tol < 0.0 || self.angle_tol <= 0.0 {
            return Err(Error::Config("integrator tolerances and step bounds must be positive".into()));
        }
        if self.renorm_every == 0 || self.lambda_intervals == 0 {
            return Err(Error::Config("renorm_every and lambda_intervals must be at least 1".into()));
        }
        if self.max_phase_step >= PI / 2.0 {
            return Err(Error::Config("max_phase_step must be below π/2".into()));
        }
        Ok(())
    }

    /// Same options with both tolerances halved.
    pub fn halved(&self) -> Self {
        Self { rel_tol: self.rel_tol / 2.0, abs_tol: self.abs_tol / 2.0, ..self.clone() }
    }

    pub fn resolve_x_min(&self, p: &PencilProblem) -> Result<f64> {
        match self.x_min {
            Some(x) => Ok(x),
            None => x_min(p),
        }
    }

    /// Right end of the integration interval, with `x_max` applied to whole-line problems.
    pub fn resolve_right_end(&self, p: &PencilProblem) -> Result<f64> {
        match (&p.domain, self.x_max) {
            (crate::pencil::Domain::WholeLine, Some(x)) => Ok(x),
            _ => p.right_end(),
        }
    }
}

/// The plane that intersections are measured against.
#[derive(Clone, Debug)]
pub enum Reference {
    Dirichlet,
    /// `(I; c + φ(λ))`, moving with `λ`.
    Boundary(BoundaryData),
}

impl Reference {
    pub fn frame(&self, n: usize, lambda: f64) -> Result<LagrangianFrame> {
        match self {
            Reference::Dirichlet => Ok(dirichlet_frame(n)),
            Reference::Boundary(b) => phi_frame(b, lambda),
        }
    }

    pub fn for_problem(p: &PencilProblem) -> Self {
        match p.boundary() {
            Some(b) => Reference::Boundary(b.clone()),
            None => Reference::Dirichlet,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    InX,
    InLambda,
}

#[derive(Clone, Debug)]
pub struct PathSample {
    pub frame: LagrangianFrame,
    pub trace: UnitaryTrace,
    pub lagrangian_defect: f64,
    pub unitarity_defect: f64,
}

/// A sampled path of frames with continuously unwrapped eigenphases of `W̃`.
#[derive(Clone, Debug)]
pub struct FramePath {
    pub kind: PathKind,
    /// `λ` for x-paths, `x` for λ-paths.
    pub fixed: f64,
    pub reference: Reference,
    pub samples: Vec<PathSample>,
    /// Path traversed against increasing parameter.
    pub reversed: bool,
}

impl FramePath {
    pub fn params(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.trace.param).collect()
    }

    pub fn max_lagrangian_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.lagrangian_defect).fold(0.0, f64::max)
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.unitarity_defect).fold(0.0, f64::max)
    }

    /// The same path traversed backwards.
    pub fn reversed(mut self) -> Self {
        self.samples.reverse();
        self.reversed = !self.reversed;
        self
    }

    /// Write `param, phase_1..phase_n, lagrangian_defect` as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.trace.phases.len());
        let mut header = vec!["param".to_string()];
        header.extend((1..=n).map(|k| format!("phase_{k}")));
        header.push("lagrangian_defect".into());
        crate::cli::write_atomically(path, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(&header)?;
            for s in &self.samples {
                let mut row = vec![format!("{:.12e}", s.trace.param)];
                row.extend(s.trace.phases.iter().map(|p| format!("{p:.12e}")));
                row.push(format!("{:.3e}", s.lagrangian_defect));
                out.write_record(&row)?;
            }
            out.flush()?;
            Ok(())
        })
    }
}

/// Maximal tolerated Lagrangian defect along an accepted path.
pub const PATH_DEFECT_TOL: f64 = 1e-8;

fn make_sample(
    param: f64,
    frame: LagrangianFrame,
    reference: &LagrangianFrame,
    prev: Option<&[f64]>,
    max_phase_step: f64,
) -> Result<Option<PathSample>> {
    let w = w_relative(&frame, reference)?;
    let wrapped = unitary_phases(&w)?;
    let phases = match prev {
        None => wrapped,
        Some(prev) => match track_phases(prev, &wrapped, max_phase_step) {
            Some(p) => p,
            None => return Ok(None),
        },
    };
    let lagrangian_defect = frame.lagrangian_defect();
    if lagrangian_defect > PATH_DEFECT_TOL {
        return Err(Error::Integration {
            param,
            reason: format!("Lagrangian defect {lagrangian_defect:.3e} exceeds {PATH_DEFECT_TOL:.0e}"),
        });
    }
    let unitarity_defect = unitarity_defect(&w);
    Ok(Some(PathSample { frame, trace: UnitaryTrace { param, w, phases }, lagrangian_defect, unitarity_defect }))
}

/// Integrate the frame `seed` from `x_from` to `x_to > x_from` at fixed `λ`,
/// recording `W̃` against the reference at every accepted step. Steps whose
/// eigenphases would jump by more than `max_phase_step` are rejected.
pub fn propagate_in_x(
    p: &PencilProblem,
    lambda: f64,
    x_from: f64,
    x_to: f64,
    seed: &LagrangianFrame,
    reference: &Reference,
    opts: &IntegratorOptions,
) -> Result<FramePath> {
    if !(x_to > x_from) {
        return Err(Error::Config(format!("x-path needs x_from < x_to, got [{x_from}, {x_to}]")));
    }
    let n = p.n();
    let ref_frame = reference.frame(n, lambda)?;
    let mut samples = Vec::new();
    let first = make_sample(x_from, seed.clone(), &ref_frame, None, opts.max_phase_step)?
        .expect("first sample is always accepted");
    samples.push(first);

    let mut x = x_from;
    let mut phi = seed.stacked();
    let mut h = opts.initial_step.min(x_to - x_from);
    let mut since_renorm = 0;
    while x < x_to {
        h = h.min(opts.max_step).min(rk::stability_cap(p, lambda, x)?);
        let last = x + h >= x_to - 1e-14 * x_to.abs().max(1.0);
        let step = if last { x_to - x } else { h };
        let (y, err) = rk::dp_step(p, lambda, x, &phi, step)?;
        let ratio = err / opts.tol();
        let mut accepted = false;
        if ratio <= 1.0 {
            let x_new = if last { x_to } else { x + step };
            let frame = LagrangianFrame::from_stacked(&rk::orthonormalize(&y))?;
            let prev = &samples.last().expect("nonempty").trace.phases;
            if let Some(s) = make_sample(x_new, frame, &ref_frame, Some(prev), opts.max_phase_step)? {
                samples.push(s);
                x = x_new;
                phi = y;
                since_renorm += 1;
                if since_renorm >= opts.renorm_every || phi.norm() > 1e6 {
                    phi = rk::renormalize(&phi);
                    since_renorm = 0;
                }
                h = step * rk::grow_factor(ratio);
                accepted = true;
            }
        }
        if !accepted {
            h = if ratio > 1.0 { step * rk::grow_factor(ratio) } else { step / 2.0 };
            if h < opts.min_step {
                return Err(Error::Integration { param: x, reason: format!("step size underflow (h = {h:.3e})") });
            }
        }
    }
    Ok(FramePath { kind: PathKind::InX, fixed: lambda, reference: reference.clone(), samples, reversed: false })
}

/// Frame of the unstable subspace at `x`, seeded at `x_min` with the
/// asymptotic frame.
pub fn unstable_frame_at(p: &PencilProblem, lambda: f64, x: f64, opts: &IntegratorOptions) -> Result<LagrangianFrame> {
    let x0 = opts.resolve_x_min(p)?;
    let seed = unstable_frame_at_minus_infinity(p, lambda)?;
    if x <= x0 {
        return Ok(seed);
    }
    let out = integrate_to(p, lambda, x0, &seed.stacked(), x, opts)?;
    LagrangianFrame::from_stacked(&out)
}

struct LambdaPoint {
    lambda: f64,
    frame: LagrangianFrame,
    reference: LagrangianFrame,
    /// Wrapped eigenphases at `x_fixed`.
    phases: Vec<f64>,
    /// Wrapped eigenphases of the seed at `x_min`.
    seed_phases: Vec<f64>,
    /// Total eigenphase change along the x-path from `x_min` to `x_fixed`.
    x_winding: f64,
}

fn sum_of_moves(from: &[f64], to_wrapped: &[f64], max_step: f64) -> Option<f64> {
    let tracked = track_phases(from, to_wrapped, max_step)?;
    Some(tracked.iter().sum::<f64>() - from.iter().sum::<f64>())
}

/// An interval is resolved when the phases at `x_fixed` and at the seed both
/// move by less than `max_step`, and the change in the summed phase at
/// `x_fixed` agrees with what the x-paths at the two ends imply. The second
/// condition catches a phase wrapping a full turn between samples, which
/// happens in windows exponentially narrow in the distance from `x_fixed`
/// to where the eigenfunction lives.
fn interval_resolved(a: &LambdaPoint, b: &LambdaPoint, max_step: f64) -> bool {
    let Some(d_end) = sum_of_moves(&a.phases, &b.phases, max_step) else { return false };
    let Some(d_seed) = sum_of_moves(&a.seed_phases, &b.seed_phases, max_step) else { return false };
    (d_end - d_seed - (b.x_winding - a.x_winding)).abs() < PI
}

/// Path in `λ` of the unstable frame at fixed `x`, each frame obtained by
/// propagating the asymptotic frame from `x_min`. The λ grid is refined
/// until every interval is resolved in the sense of `interval_resolved`.
pub fn propagate_in_lambda(
    p: &PencilProblem,
    x_fixed: f64,
    lambda_from: f64,
    lambda_to: f64,
    reference: &Reference,
    opts: &IntegratorOptions,
) -> Result<FramePath> {
    if !(lambda_to >= lambda_from) {
        return Err(Error::Config(format!("λ-path needs λ_from ≤ λ_to, got [{lambda_from}, {lambda_to}]")));
    }
    let n = p.n();
    let x0 = opts.resolve_x_min(p)?;
    let eval = |lambda: f64| -> Result<LambdaPoint> {
        let seed = unstable_frame_at_minus_infinity(p, lambda)?;
        let rf = reference.frame(n, lambda)?;
        if x_fixed <= x0 {
            let phases = unitary_phases(&w_relative(&seed, &rf)?)?;
            return Ok(LambdaPoint {
                lambda,
                frame: seed,
                reference: rf,
                seed_phases: phases.clone(),
                phases,
                x_winding: 0.0,
            });
        }
        let path = propagate_in_x(p, lambda, x0, x_fixed, &seed, reference, opts)?;
        let first = path.samples.first().expect("nonempty path");
        let last = path.samples.last().expect("nonempty path");
        let x_winding = last.trace.phases.iter().sum::<f64>() - first.trace.phases.iter().sum::<f64>();
        Ok(LambdaPoint {
            lambda,
            seed_phases: first.trace.phases.clone(),
            phases: unitary_phases(&last.trace.w)?,
            frame: last.frame.clone(),
            reference: rf,
            x_winding,
        })
    };
    let m = if lambda_to > lambda_from { opts.lambda_intervals } else { 0 };
    let grid: Vec<f64> = (0..=m)
        .map(|k| if m == 0 { lambda_from } else { lambda_from + (lambda_to - lambda_from) * k as f64 / m as f64 })
        .collect();
    let mut points: Vec<LambdaPoint> = grid.par_iter().map(|&l| eval(l)).collect::<Result<Vec<_>>>()?;
    let min_width = 4.0 * f64::EPSILON * lambda_to.abs().max(1.0);

    loop {
        let split: Vec<usize> = points
            .par_windows(2)
            .enumerate()
            .filter(|(_, w)| !interval_resolved(&w[0], &w[1], opts.max_phase_step))
            .map(|(k, _)| k)
            .collect();
        if split.is_empty() {
            break;
        }
        if let Some(&k) = split.iter().find(|&&k| points[k + 1].lambda - points[k].lambda < min_width) {
            return Err(Error::PhaseDiscontinuity { param: points[k].lambda });
        }
        let mids: Vec<LambdaPoint> = split
            .par_iter()
            .map(|&k| eval(0.5 * (points[k].lambda + points[k + 1].lambda)))
            .collect::<Result<Vec<_>>>()?;
        let mut merged = Vec::with_capacity(points.len() + mids.len());
        let mut mids = split.iter().copied().zip(mids).peekable();
        for (k, pt) in points.into_iter().enumerate() {
            merged.push(pt);
            if mids.peek().is_some_and(|(j, _)| *j == k) {
                merged.push(mids.next().expect("peeked").1);
            }
        }
        points = merged;
    }

    let mut samples: Vec<PathSample> = Vec::with_capacity(points.len());
    for pt in points {
        let prev = samples.last().map(|s| s.trace.phases.as_slice());
        let s = make_sample(pt.lambda, pt.frame, &pt.reference, prev, opts.max_phase_step)?
            .ok_or(Error::PhaseDiscontinuity { param: pt.lambda })?;
        samples.push(s);
    }
    Ok(FramePath { kind: PathKind::InLambda, fixed: x_fixed, reference: reference.clone(), samples, reversed: false })
}

/// Location, multiplicity and direction of a Lagrangian intersection.
#[derive(Clone, Debug, Serialize)]
pub struct ConjugatePoint {
    pub param: f64,
    pub multiplicity: usize,
    /// `+1` counterclockwise, `-1` clockwise, in the direction of traversal.
    pub direction: i32,
    pub kind: PathKind,
    /// Crossing-form values on the kernel, when the rate of the frame is known.
    pub form_values: Vec<f64>,
}

/// `floor((θ - π) / 2π)`: changes by one exactly when `θ` passes an odd
/// multiple of `π` counterclockwise, with the value at `π` itself taken from above.
pub fn level(theta: f64) -> i64 {
    ((theta - PI) / (2.0 * PI)).floor() as i64
}

/// Move phases within `angle_tol` of an odd multiple of `π` onto it.
pub fn snap(theta: f64, angle_tol: f64) -> f64 {
    if distance_to_pi(theta) <= angle_tol {
        let k = ((theta - PI) / (2.0 * PI)).round();
        PI + 2.0 * PI * k
    } else {
        theta
    }
}

/// Signed Maslov index of the path: with endpoint phases snapped, each
/// strand contributes `level(θ_end) - level(θ_start)`. This counts
/// counterclockwise arrivals at `-1` and clockwise departures from `-1`, and
/// nothing for the other two endpoint cases.
pub fn path_maslov(path: &FramePath, angle_tol: f64) -> i64 {
    let (Some(first), Some(last)) = (path.samples.first(), path.samples.last()) else {
        return 0;
    };
    first
        .trace
        .phases
        .iter()
        .zip(&last.trace.phases)
        .map(|(&a, &b)| level(snap(b, angle_tol)) - level(snap(a, angle_tol)))
        .sum()
}

fn phases_at(
    p: &PencilProblem,
    path: &FramePath,
    k: usize,
    param: f64,
    opts: &IntegratorOptions,
) -> Result<(LagrangianFrame, LagrangianFrame, Vec<f64>)> {
    let n = p.n();
    let (frame, ref_frame) = match path.kind {
        PathKind::InX => {
            let s = &path.samples[k];
            let (lo, hi) = ordered(path.samples[k].trace.param, path.samples[k + 1].trace.param);
            // x-paths are always integrated forward from the lower end of the interval.
            let base = if (s.trace.param - lo).abs() <= (s.trace.param - hi).abs() { s } else { &path.samples[k + 1] };
            let out = integrate_to(p, path.fixed, base.trace.param, &base.frame.stacked(), param, opts)?;
            (LagrangianFrame::from_stacked(&out)?, path.reference.frame(n, path.fixed)?)
        }
        PathKind::InLambda => {
            (unstable_frame_at(p, param, path.fixed, opts)?, path.reference.frame(n, param)?)
        }
    };
    let wrapped = unitary_phases(&w_relative(&frame, &ref_frame)?)?;
    let tracked = track_phases(&path.samples[k].trace.phases, &wrapped, PI / 2.0)
        .ok_or(Error::PhaseDiscontinuity { param })?;
    Ok((frame, ref_frame, tracked))
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Locate every passage of an eigenphase through `π (mod 2π)` on the path.
/// Each is bisected to `param_tol` by recomputing frames inside the
/// sampled interval. Simultaneous passages in the same direction are merged
/// into one point with multiplicity.
pub fn detect_crossings(p: &PencilProblem, path: &FramePath, opts: &IntegratorOptions) -> Result<Vec<ConjugatePoint>> {
    let angle_tol = opts.angle_tol;
    let m = path.samples.len();
    let mut events: Vec<(f64, i32, Vec<f64>)> = Vec::new();
    let last_index = m.saturating_sub(1);
    for k in 0..last_index {
        let a = &path.samples[k];
        let b = &path.samples[k + 1];
        let nstr = a.trace.phases.len();
        for j in 0..nstr {
            let snap_if_end = |idx: usize, th: f64| if idx == 0 || idx == last_index { snap(th, angle_tol) } else { th };
            let ta = snap_if_end(k, a.trace.phases[j]);
            let tb = snap_if_end(k + 1, b.trace.phases[j]);
            let (la, lb) = (level(ta), level(tb));
            if la == lb {
                continue;
            }
            if distance_to_pi(ta) <= angle_tol
                && distance_to_pi(tb) <= angle_tol
                && (b.trace.param - a.trace.param).abs() > 10.0 * opts.param_tol
            {
                return Err(Error::NonTransversalCrossing { from: a.trace.param, to: b.trace.param });
            }
            let direction = (lb - la).signum() as i32;
            let target = PI + 2.0 * PI * la.max(lb) as f64;
            let (param, form_values) = bisect_crossing(p, path, k, j, target, ta, opts)?;
            events.push((param, direction, form_values));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<ConjugatePoint> = Vec::new();
    for (param, direction, forms) in events {
        if let Some(last) = out.last_mut() {
            if last.direction == direction && (last.param - param).abs() <= 10.0 * opts.param_tol.max(1e-12) {
                last.multiplicity += 1;
                for v in forms {
                    if !last.form_values.iter().any(|w| (w - v).abs() <= 1e-9 * v.abs().max(1.0)) {
                        last.form_values.push(v);
                    }
                }
                continue;
            }
        }
        out.push(ConjugatePoint { param, multiplicity: 1, direction, kind: path.kind, form_values: forms });
    }
    Ok(out)
}

fn bisect_crossing(
    p: &PencilProblem,
    path: &FramePath,
    k: usize,
    strand: usize,
    target: f64,
    theta_start: f64,
    opts: &IntegratorOptions,
) -> Result<(f64, Vec<f64>)> {
    let mut lo = path.samples[k].trace.param;
    let mut hi = path.samples[k + 1].trace.param;
    let side_start = (theta_start - target).signum();
    let mut last: Option<(LagrangianFrame, LagrangianFrame)> = None;
    let endpoint_hit = |th: f64| distance_to_pi(th) <= opts.angle_tol;
    if endpoint_hit(path.samples[k + 1].trace.phases[strand]) && k + 2 == path.samples.len() {
        let s = &path.samples[k + 1];
        let rf = path.reference.frame(p.n(), if path.kind == PathKind::InX { path.fixed } else { s.trace.param })?;
        let forms = crossing_forms(p, path, &s.frame, &rf, s.trace.param)?;
        return Ok((s.trace.param, forms));
    }
    if k == 0 && endpoint_hit(path.samples[0].trace.phases[strand]) {
        let s = &path.samples[0];
        let rf = path.reference.frame(p.n(), if path.kind == PathKind::InX { path.fixed } else { s.trace.param })?;
        let forms = crossing_forms(p, path, &s.frame, &rf, s.trace.param)?;
        return Ok((s.trace.param, forms));
    }
    while (hi - lo).abs() > opts.param_tol {
        let mid = 0.5 * (lo + hi);
        let (frame, rf, phases) = phases_at(p, path, k, mid, opts)?;
        if (phases[strand] - target).signum() == side_start {
            lo = mid;
        } else {
            hi = mid;
        }
        last = Some((frame, rf));
    }
    let param = 0.5 * (lo + hi);
    let forms = match last {
        Some((frame, rf)) => crossing_forms(p, path, &frame, &rf, param)?,
        None => Vec::new(),
    };
    Ok((param, forms))
}

/// Crossing-form values for eigenvectors of `W̃` near `-1`; available on
/// x-paths, where the frame's rate is `A(x, λ)` applied to the frame.
fn crossing_forms(
    p: &PencilProblem,
    path: &FramePath,
    frame: &LagrangianFrame,
    reference: &LagrangianFrame,
    param: f64,
) -> Result<Vec<f64>> {
    if path.kind != PathKind::InX {
        return Ok(Vec::new());
    }
    let rate = rk::rhs(p, path.fixed, param, &frame.stacked())?;
    let w = w_relative(frame, reference)?;
    let (phases, vecs) = unitary_eig(&w)?;
    let n = frame.n();
    let mut out = Vec::new();
    for (k, &ph) in phases.iter().enumerate() {
        if distance_to_pi(ph) <= 1e-3 {
            let v = CMat::from_iterator(n, 1, vecs.column(k).iter().cloned());
            let q = phase_velocity(frame, &rate, reference, None, &v)?;
            out.push(if path.reversed { -q } else { q });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::w_of;
    use crate::pencil::Side;

    #[test]
    fn level_conventions() {
        let eps = 1e-3;
        // counterclockwise arrival, clockwise arrival, counterclockwise departure, clockwise departure
        assert_eq!(level(PI) - level(PI - eps), 1);
        assert_eq!(level(PI) - level(PI + eps), 0);
        assert_eq!(level(PI + eps) - level(PI), 0);
        assert_eq!(level(PI - eps) - level(PI), -1);
        assert_eq!(level(-PI + eps) - level(-PI - eps), 1);
        assert_eq!(snap(PI + 1e-9, 1e-6), PI);
        assert_eq!(snap(-PI - 1e-9, 1e-6), -PI);
    }

    #[test]
    fn constant_coefficients_have_no_crossings() {
        let p = PencilProblem::builtin("constant").unwrap();
        let opts = IntegratorOptions::default();
        let seed = unstable_frame_at_minus_infinity(&p, 0.2).unwrap();
        let path = propagate_in_x(&p, 0.2, -30.0, 30.0, &seed, &Reference::Dirichlet, &opts).unwrap();
        let w0 = &path.samples[0].trace.w;
        for s in &path.samples {
            assert!((&s.trace.w - w0).norm() < 1e-8);
        }
        assert!(detect_crossings(&p, &path, &opts).unwrap().is_empty());
        assert_eq!(path_maslov(&path, opts.angle_tol), 0);
    }

    #[test]
    fn example2_has_three_clockwise_conjugate_points() {
        let p = PencilProblem::builtin("example2").unwrap();
        let opts = IntegratorOptions::default();
        let x0 = x_min(&p).unwrap();
        let seed = unstable_frame_at_minus_infinity(&p, 0.0).unwrap();
        let path = propagate_in_x(&p, 0.0, x0, 60.0, &seed, &Reference::Dirichlet, &opts).unwrap();
        let cps = detect_crossings(&p, &path, &opts).unwrap();
        assert_eq!(cps.len(), 3, "{cps:?}");
        for cp in &cps {
            assert_eq!(cp.direction, -1);
            assert!(cp.form_values.iter().all(|&q| q < 0.0));
        }
        assert_eq!(path_maslov(&path, opts.angle_tol), -3);
        assert!(path.max_lagrangian_defect() <= 1e-8);
        assert!(path.max_unitarity_defect() <= 1e-9);
    }

    #[test]
    fn reversal_negates_maslov() {
        let p = PencilProblem::builtin("example2").unwrap();
        let opts = IntegratorOptions::default();
        let seed = unstable_frame_at_minus_infinity(&p, 0.0).unwrap();
        let path = propagate_in_x(&p, 0.0, -200.0, 40.0, &seed, &Reference::Dirichlet, &opts).unwrap();
        let fwd = path_maslov(&path, opts.angle_tol);
        let back = path_maslov(&path.reversed(), opts.angle_tol);
        assert_eq!(fwd, -back);
    }

    #[test]
    fn renormalization_leaves_w_unchanged() {
        let p = PencilProblem::builtin("example4").unwrap();
        let opts = IntegratorOptions::default();
        let seed = unstable_frame_at_minus_infinity(&p, 0.1).unwrap();
        let out = integrate_to(&p, 0.1, -50.0, &seed.stacked(), -2.0, &opts).unwrap();
        let f = LagrangianFrame::from_stacked(&out).unwrap();
        let scaled = LagrangianFrame::new(f.x() * crate::linalg::c(1e5), f.y() * crate::linalg::c(1e5)).unwrap();
        assert!((w_of(&f).unwrap() - w_of(&scaled).unwrap()).norm() < 1e-10);
        assert!((w_of(&f).unwrap() - w_of(&f.orthonormalized()).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn lambda_path_at_x_min_has_no_dirichlet_crossings() {
        let p = PencilProblem::builtin("example2").unwrap();
        let mut opts = IntegratorOptions::default();
        let x0 = x_min(&p).unwrap();
        opts.x_min = Some(x0);
        let path = propagate_in_lambda(&p, x0, 0.0, 0.8, &Reference::Dirichlet, &opts).unwrap();
        assert!(detect_crossings(&p, &path, &opts).unwrap().is_empty());
        let d = crate::pencil::asymptotic_decomposition(&p, Side::Minus, 0.4).unwrap();
        assert!(d.mus[0] > 0.0);
    }
}

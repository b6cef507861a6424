use super::{c, CMat, EigenDecomposition, HermitianMatrix, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary, then applies the real symmetric Jacobi rotation that annihilates
/// it. Rotations are accumulated into the eigenvector matrix. Eigenvalues come
/// back sorted ascending with their eigenvectors permuted to match.
pub fn herm_eig(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    let mut a: CMat = h.matrix().clone();
    let mut v = CMat::identity(n, n);

    if n == 1 {
        return Ok(EigenDecomposition { values: vec![a[(0, 0)].re], vectors: v });
    }

    let total = a.norm();
    let target = f64::EPSILON * total.max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > 1e3 * target {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |r, k| v[(r, order[k])]);
    Ok(EigenDecomposition { values, vectors })
}

fn off_diagonal_norm(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            if j != k {
                s += a[(j, k)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Skip pivots that are already negligible against both diagonal entries.
    if r < f64::EPSILON * 1e-2 * (app.abs() + aqq.abs()) {
        a[(p, q)] = C64::new(0.0, 0.0);
        a[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / r; // e^{iφ}
    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;
    let cq = phase.conj(); // e^{-iφ}
    let n = a.nrows();

    // A ← A·G, with G = diag-phase · real rotation in the (p, q) plane.
    for j in 0..n {
        let ajp = a[(j, p)];
        let ajq = a[(j, q)] * cq;
        a[(j, p)] = ajp * c(cs) - ajq * c(sn);
        a[(j, q)] = ajp * c(sn) + ajq * c(cs);
    }
    // A ← G*·A
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)] * phase;
        a[(p, k)] = apk * c(cs) - aqk * c(sn);
        a[(q, k)] = apk * c(sn) + aqk * c(cs);
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = c(a[(p, p)].re);
    a[(q, q)] = c(a[(q, q)].re);

    for j in 0..n {
        let vjp = v[(j, p)];
        let vjq = v[(j, q)] * cq;
        v[(j, p)] = vjp * c(cs) - vjq * c(sn);
        v[(j, q)] = vjp * c(sn) + vjq * c(cs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::det_complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_hermitian(rng: &mut impl Rng, n: usize) -> HermitianMatrix {
        let m = CMat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::symmetrized(&m)
    }

    #[test]
    fn identity_and_diagonal() {
        let e = herm_eig(&HermitianMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!((e.vectors.clone() - CMat::identity(2, 2)).norm() < 1e-15);
        let e = herm_eig(&HermitianMatrix::diagonal(&[4.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 4.0]);
    }

    #[test]
    fn reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=16 {
            let h = random_hermitian(&mut rng, n);
            let e = herm_eig(&h).unwrap();
            let norm = h.norm().max(1e-300);
            let resid = (e.reconstruct() - h.matrix()).norm();
            assert!(resid <= 1e-10 * norm, "n={n} residual {resid}");
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!((gram - CMat::identity(n, n)).norm() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    // Independent check: eigenvalues are the roots of t ↦ det(H − tI), which is
    // real for Hermitian H. Bracket each root by sign changes on a fine grid
    // over the Gershgorin interval and bisect.
    #[test]
    fn matches_characteristic_polynomial_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let h = random_hermitian(&mut rng, 4);
            let radius: f64 = (0..4)
                .map(|j| (0..4).map(|k| h.get(j, k).norm()).sum::<f64>())
                .fold(0.0, f64::max);
            let charpoly = |t: f64| {
                let m = h.matrix() - CMat::identity(4, 4) * c(t);
                det_complex(&m).re
            };
            let steps = 20_000;
            let mut roots = Vec::new();
            let lo = -radius - 1.0;
            let dt = 2.0 * (radius + 1.0) / steps as f64;
            let mut prev = charpoly(lo);
            for s in 1..=steps {
                let (mut a, mut b) = (lo + (s - 1) as f64 * dt, lo + s as f64 * dt);
                let fb = charpoly(b);
                if prev.signum() != fb.signum() {
                    let fa0 = prev;
                    for _ in 0..100 {
                        let m = 0.5 * (a + b);
                        if charpoly(m).signum() == fa0.signum() {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    roots.push(0.5 * (a + b));
                }
                prev = fb;
            }
            let e = herm_eig(&h).unwrap();
            assert_eq!(roots.len(), 4);
            for (r, v) in roots.iter().zip(&e.values) {
                assert!((r - v).abs() < 1e-9, "{r} vs {v}");
            }
        }
    }

    #[test]
    fn complex_entries() {
        // [[2, i],[-i, 2]] has eigenvalues 1 and 3.
        let mut m = CMat::identity(2, 2) * c(2.0);
        m[(0, 1)] = C64::new(0.0, 1.0);
        m[(1, 0)] = C64::new(0.0, -1.0);
        let e = herm_eig(&HermitianMatrix::new(m).unwrap()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
    }
}

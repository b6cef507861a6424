use super::{c, CMat, C64};

/// Determinant by Gaussian elimination with partial pivoting.
///
/// Returns exactly zero when a pivot column is identically zero.
pub fn det_complex(m: &CMat) -> C64 {
    assert_eq!(m.nrows(), m.ncols(), "determinant of a non-square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = c(1.0);
    for k in 0..n {
        let (piv, mag) = (k..n)
            .map(|r| (r, a[(r, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag == 0.0 {
            return c(0.0);
        }
        if piv != k {
            a.swap_rows(piv, k);
            det = -det;
        }
        let p = a[(k, k)];
        det *= p;
        for r in k + 1..n {
            let f = a[(r, k)] / p;
            if f == c(0.0) {
                continue;
            }
            for col in k + 1..n {
                let v = a[(k, col)];
                a[(r, col)] -= f * v;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cofactor(m: &CMat) -> C64 {
        let n = m.nrows();
        if n == 1 {
            return m[(0, 0)];
        }
        let mut acc = c(0.0);
        for k in 0..n {
            let minor = m.clone().remove_row(0).remove_column(k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += m[(0, k)] * cofactor(&minor) * c(sign);
        }
        acc
    }

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(det_complex(&CMat::identity(3, 3)), c(1.0));
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = c(2.0);
        m[(1, 1)] = C64::new(0.0, 3.0);
        assert!((det_complex(&m) - C64::new(0.0, 6.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_is_zero() {
        let m = CMat::from_element(3, 3, c(1.0));
        assert!(det_complex(&m).norm() < 1e-15);
    }

    #[test]
    fn agrees_with_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = CMat::from_fn(4, 4, |_, _| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
            let a = det_complex(&m);
            let b = cofactor(&m);
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
    }
}

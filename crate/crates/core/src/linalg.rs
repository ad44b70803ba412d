//! Small dense linear algebra, generic over the scalar type.

use crate::ad::Scalar;

/// Solve `a x = b` in place (row-major `n x n`), pivoting on the real parts.
/// Returns `false` when a pivot falls below `tiny`.
pub fn solve<S: Scalar>(a: &mut [S], b: &mut [S], n: usize, tiny: f64) -> bool {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].re().abs();
        for r in col + 1..n {
            let v = a[r * n + col].re().abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > tiny) {
            return false;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let inv = a[col * n + col].recip();
        for r in col + 1..n {
            let f = a[r * n + col] * inv;
            if f.re() == 0.0 && is_plain(&f) {
                continue;
            }
            for c in col + 1..n {
                let t = a[col * n + c];
                a[r * n + c] -= f * t;
            }
            let bc = b[col];
            b[r] -= f * bc;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in col + 1..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

// f64 zeros can be skipped; jets with zero value may still carry derivatives.
#[inline]
fn is_plain<S: Scalar>(_f: &S) -> bool {
    std::mem::size_of::<S>() == std::mem::size_of::<f64>()
}

/// Determinant by Gaussian elimination on `f64`.
pub fn det(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut d = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            d = -d;
        }
        d *= m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
        }
    }
    d
}

/// Determinant of the `k x k` submatrix `m[rows, cols]` of a row-major matrix
/// with `stride` columns, by cofactor expansion (k is at most six here).
pub fn minor<S: Scalar>(m: &[S], stride: usize, rows: &[usize], cols: &[usize]) -> S {
    let k = rows.len();
    match k {
        0 => S::one(),
        1 => m[rows[0] * stride + cols[0]],
        2 => {
            let (r0, r1, c0, c1) = (rows[0], rows[1], cols[0], cols[1]);
            m[r0 * stride + c0] * m[r1 * stride + c1] - m[r0 * stride + c1] * m[r1 * stride + c0]
        }
        _ => {
            let mut acc = S::zero();
            let mut sub: smallvec::SmallVec<[usize; 6]> = smallvec::SmallVec::new();
            for (j, &c) in cols.iter().enumerate() {
                let e = m[rows[0] * stride + c];
                if e.re() == 0.0 && is_plain(&e) {
                    continue;
                }
                sub.clear();
                sub.extend(cols.iter().copied().filter(|&x| x != c));
                let d = minor(m, stride, &rows[1..], &sub);
                if j % 2 == 0 {
                    acc += e * d;
                } else {
                    acc -= e * d;
                }
            }
            acc
        }
    }
}

/// Frobenius-norm condition estimate `|A| |A^-1|`; infinite when singular.
pub fn condition(a: &[f64], n: usize) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut ninv = 0.0;
    for j in 0..n {
        let mut m = a.to_vec();
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if !solve(&mut m, &mut e, n, 1e-300) {
            return f64::INFINITY;
        }
        ninv += e.iter().map(|x| x * x).sum::<f64>();
    }
    na * ninv.sqrt()
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_det_agree() {
        let a = [0.0, 1.0, 1.0, -1.0, 0.0, 0.0, -1.0, 0.0, 1.0];
        let mut m = a;
        let mut b = [0.0, 0.0, 1.0];
        assert!(solve(&mut m, &mut b, 3, 1e-14));
        // a x = b
        for r in 0..3 {
            let s: f64 = (0..3).map(|c| a[r * 3 + c] * b[c]).sum();
            assert!((s - [0.0, 0.0, 1.0][r]).abs() < 1e-14);
        }
        assert!((det(&a, 3) - minor(&a, 3, &[0, 1, 2], &[0, 1, 2])).abs() < 1e-14);
        assert!((det(&a, 3) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(8);
        for k in 0..16 {
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }
}

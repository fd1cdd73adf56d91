//! Dense complex matrices just large enough for precoder math.
//!
//! The downlink dimensions here are tiny (a handful of users against a few
//! dozen antennas), so the solvers are written for clarity and bit-stable
//! determinism rather than asymptotic speed: plain row-major storage,
//! complex Cholesky for Hermitian systems, and a cyclic Jacobi sweep for
//! Hermitian eigenvalues used in rank checks.

use crate::{Error, Result};
use num_complex::Complex64;

/// Row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        CMat::from_fn(n, n, |r, c| {
            if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        })
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// Conjugate transpose.
    pub fn conj_t(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.at(c, r).conj())
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.cols {
                    acc += self.at(r, k) * rhs.at(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Squared Euclidean norm of one column.
    pub fn col_norm_sqr(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.at(r, c).norm_sqr()).sum()
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations, sorted
/// descending. Convergence is to machine-level off-diagonal mass, which a
/// few sweeps reach at these sizes.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    assert_eq!(a.rows, a.cols, "eigenvalues of a non-square matrix");
    let n = a.rows;
    let mut m = a.clone();
    let scale = m.frobenius().max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.at(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let tau = (m.at(q, q).re - m.at(p, p).re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    tau - (tau * tau + 1.0).sqrt()
                } else {
                    tau + (tau * tau + 1.0).sqrt()
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Right-multiply by the rotation: columns p and q mix.
                for r in 0..n {
                    let vp = m.at(r, p);
                    let vq = m.at(r, q);
                    m.set(r, p, c * vp + s * phase.conj() * vq);
                    m.set(r, q, -s * phase * vp + c * vq);
                }
                // Left-multiply by its adjoint: rows p and q mix.
                for col in 0..n {
                    let vp = m.at(p, col);
                    let vq = m.at(q, col);
                    m.set(p, col, c * vp + s * phase * vq);
                    m.set(q, col, -s * phase.conj() * vp + c * vq);
                }
                let hp = m.at(p, p);
                let hq = m.at(q, q);
                m.set(p, p, Complex64::new(hp.re, 0.0));
                m.set(q, q, Complex64::new(hq.re, 0.0));
                m.set(p, q, Complex64::new(0.0, 0.0));
                m.set(q, p, Complex64::new(0.0, 0.0));
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m.at(i, i).re).collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigenvalue iteration diverged".into()));
    }
    eig.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    Ok(eig)
}

/// Solve A X = B for Hermitian positive definite A via complex Cholesky.
pub fn solve_hermitian(a: &CMat, b: &CMat) -> Result<CMat> {
    assert_eq!(a.rows, a.cols, "solve with non-square matrix");
    assert_eq!(a.rows, b.rows, "right-hand side row mismatch");
    let n = a.rows;
    // A = L L^H, L lower triangular.
    let mut l = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a.at(i, j);
            for k in 0..j {
                acc -= l.at(i, k) * l.at(j, k).conj();
            }
            if i == j {
                let d = acc.re;
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::Numeric(format!(
                        "matrix is not positive definite at pivot {i} (value {d})"
                    )));
                }
                l.set(i, j, Complex64::new(d.sqrt(), 0.0));
            } else {
                l.set(i, j, acc / l.at(j, j).re);
            }
        }
    }
    // Forward substitution L Y = B, then back substitution L^H X = Y.
    let mut x = b.clone();
    for col in 0..b.cols {
        for i in 0..n {
            let mut acc = x.at(i, col);
            for k in 0..i {
                acc -= l.at(i, k) * x.at(k, col);
            }
            x.set(i, col, acc / l.at(i, i).re);
        }
        for i in (0..n).rev() {
            let mut acc = x.at(i, col);
            for k in (i + 1)..n {
                acc -= l.at(k, i).conj() * x.at(k, col);
            }
            x.set(i, col, acc / l.at(i, i).re);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eigenvalues_of_known_two_by_two() {
        // [[2, 1+i], [1-i, 3]] has eigenvalues 1 and 4.
        let a = CMat { rows: 2, cols: 2, data: vec![c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)] };
        let e = hermitian_eigenvalues(&a).unwrap();
        assert!((e[0] - 4.0).abs() < 1e-12, "{e:?}");
        assert!((e[1] - 1.0).abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn eigenvalues_preserve_trace_and_frobenius() {
        let mut s = crate::rng::Stream::new(17, &[99]);
        for _ in 0..20 {
            let n = 4;
            let g = CMat::from_fn(n, n, |_, _| c(s.standard_normal(), s.standard_normal()));
            let a = g.mul(&g.conj_t()); // Hermitian PSD
            let e = hermitian_eigenvalues(&a).unwrap();
            let tr: f64 = (0..n).map(|i| a.at(i, i).re).sum();
            let fr2: f64 = a.data.iter().map(|z| z.norm_sqr()).sum();
            let es: f64 = e.iter().sum();
            let es2: f64 = e.iter().map(|v| v * v).sum();
            assert!((tr - es).abs() < 1e-9 * tr.abs().max(1.0));
            assert!((fr2 - es2).abs() < 1e-9 * fr2.max(1.0));
            assert!(e.windows(2).all(|w| w[0] >= w[1]), "sorted descending");
        }
    }

    #[test]
    fn solve_hermitian_matches_identity_reconstruction() {
        let mut s = crate::rng::Stream::new(3, &[7]);
        let n = 4;
        let g = CMat::from_fn(n, n + 3, |_, _| c(s.standard_normal(), s.standard_normal()));
        let a = g.mul(&g.conj_t());
        let x = solve_hermitian(&a, &CMat::identity(n)).unwrap();
        let should_be_i = a.mul(&x);
        for r in 0..n {
            for cidx in 0..n {
                let want = if r == cidx { 1.0 } else { 0.0 };
                assert!((should_be_i.at(r, cidx) - c(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn solve_rejects_indefinite_matrix() {
        let a = CMat { rows: 2, cols: 2, data: vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)] };
        assert!(solve_hermitian(&a, &CMat::identity(2)).is_err());
    }

    #[test]
    fn conj_t_and_mul_shapes() {
        let g = CMat::from_fn(2, 5, |r, cidx| c((r * 5 + cidx) as f64, 1.0));
        let gh = g.conj_t();
        assert_eq!((gh.rows, gh.cols), (5, 2));
        let p = g.mul(&gh);
        assert_eq!((p.rows, p.cols), (2, 2));
        // diagonal of G G^H is real and positive
        assert!(p.at(0, 0).im.abs() < 1e-12 && p.at(0, 0).re > 0.0);
    }
}

//! Dense complex helpers shared by the solvers.
//!
//! Products go through `ndarray` (complex GEMM from `matrixmultiply`);
//! Hermitian spectra go through `nalgebra`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat = Array2<C64>;
pub type Vect = Array1<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> Mat {
    Mat::eye(n)
}

/// Conjugate transpose.
pub fn adj(m: &Mat) -> Mat {
    adj_view(m.view())
}

pub fn adj_view(m: ArrayView2<C64>) -> Mat {
    let (r, cdim) = m.dim();
    Mat::from_shape_fn((cdim, r), |(i, j)| m[(j, i)].conj())
}

/// Replaces `m` by `(m + m^*) / 2`.
pub fn symmetrize(m: &mut Mat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub fn hermitian_defect(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn fro_norm(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &Vect) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `m^* v` without forming the adjoint.
pub fn adj_dot(m: &Mat, v: &Vect) -> Vect {
    let vc = v.mapv(|z| z.conj());
    m.t().dot(&vc).mapv(|z| z.conj())
}

/// `m^* x` for a matrix right-hand side.
pub fn adj_dot_mat(m: &Mat, x: &Mat) -> Mat {
    let xc = x.mapv(|z| z.conj());
    m.t().dot(&xc).mapv(|z| z.conj())
}

/// `<a, b>`, conjugate-linear in `a`.
pub fn dot(a: &Vect, b: &Vect) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn to_nalgebra(m: &Mat) -> DMatrix<C64> {
    let (r, cdim) = m.dim();
    DMatrix::from_fn(r, cdim, |i, j| m[(i, j)])
}

fn from_nalgebra(m: &DMatrix<C64>) -> Mat {
    Mat::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Spectrum (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Mat::zeros((0, 0)));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = to_nalgebra(&sym).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = from_nalgebra(&eig.eigenvectors);
    let sorted = Mat::from_shape_fn((n, n), |(i, j)| vecs[(i, order[j])]);
    (values, sorted)
}

pub fn hermitian_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let mut v: Vec<f64> = to_nalgebra(&sym)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eig(m: &Mat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm; works for rectangular input.
pub fn op_norm(m: &Mat) -> f64 {
    let (r, cdim) = m.dim();
    if r == 0 || cdim == 0 {
        return 0.0;
    }
    let gram = if cdim <= r {
        adj(m).dot(m)
    } else {
        m.dot(&adj(m))
    };
    hermitian_eigenvalues(&gram)
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
        .sqrt()
}

/// Extreme singular values `(min, max)`.
pub fn singular_range(m: &Mat) -> (f64, f64) {
    let gram = adj(m).dot(m);
    let ev = hermitian_eigenvalues(&gram);
    let lo = ev.first().copied().unwrap_or(0.0).max(0.0).sqrt();
    let hi = ev.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    (lo, hi)
}

/// Lower Cholesky factor of a Hermitian matrix, or `None` if a pivot is not
/// strictly positive.
pub fn cholesky(m: &Mat) -> Option<Mat> {
    let n = m.nrows();
    let mut l = Mat::zeros((n, n));
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.is_nan() || d <= 0.0 {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = c(d);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves `(L L^*) X = B` given the lower factor `L`.
pub fn cholesky_solve(l: &Mat, b: &Mat) -> Mat {
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)].re;
        }
    }
    x
}

/// Solves `K X = B` for Hermitian positive definite `K`; `None` when the
/// factorization breaks down.
pub fn hpd_solve(k: &Mat, b: &Mat) -> Option<Mat> {
    let mut sym = k.clone();
    symmetrize(&mut sym);
    let chol = to_nalgebra(&sym).cholesky()?;
    Some(from_nalgebra(&chol.solve(&to_nalgebra(b))))
}

/// Infinity norm; an upper bound for the spectral radius.
pub fn inf_norm(m: &Mat) -> f64 {
    m.rows()
        .into_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Least-squares log-log slope of `errors` against `steps`.
pub fn loglog_slope(steps: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .zip(errors)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_hermitian_system() {
        let a = Mat::from_shape_fn((3, 3), |(i, j)| {
            C64::new((i + j) as f64, i as f64 - j as f64)
        });
        let spd = adj(&a).dot(&a) + Mat::eye(3);
        let b = Mat::from_shape_fn((3, 2), |(i, j)| C64::new(i as f64, j as f64 + 1.0));
        let l = cholesky(&spd).unwrap();
        let x = cholesky_solve(&l, &b);
        assert!(fro_norm(&(spd.dot(&x) - &b)) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = Mat::eye(2);
        m[(1, 1)] = c(-1.0);
        assert!(cholesky(&m).is_none());
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = Mat::from_shape_fn((4, 4), |(i, j)| {
            C64::new((i * j) as f64 + 1.0, (i as f64) - (j as f64))
        });
        let h = &a + &adj(&a);
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let diag = Mat::from_shape_fn((4, 4), |(i, j)| if i == j { c(vals[i]) } else { ZERO });
        let rebuilt = vecs.dot(&diag).dot(&adj(&vecs));
        assert!(fro_norm(&(rebuilt - &h)) < 1e-10);
    }

    #[test]
    fn op_norm_of_diagonal() {
        let mut m = Mat::zeros((3, 2));
        m[(0, 0)] = c(3.0);
        m[(1, 1)] = C64::new(0.0, -5.0);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.25, 0.125, 0.0625];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((loglog_slope(&h, &e) - 2.0).abs() < 1e-12);
    }
}

//! Dense complex helpers shared by the estimator and detector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Unitary DFT matrix with entries `exp(-i 2 pi k l / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |k, l| {
        // reduce k*l mod n first so large n keeps full phase precision
        let m = (k * l) % n;
        Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * m as f64 / n as f64)
    })
}

/// Draw from CN(0, 1).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = CMat::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_normal(rng);
        }
    }
    m
}

/// `A A^H`, computed on the lower triangle and mirrored so the result is
/// exactly Hermitian.
pub fn gram(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut out = CMat::zeros(n, n);
    {
        let acc = out.as_mut_slice();
        for col in a.column_iter() {
            let col = col.as_slice();
            for j in 0..n {
                let cj = col[j].conj();
                let dst = &mut acc[j * n + j..(j + 1) * n];
                for (d, &x) in dst.iter_mut().zip(&col[j..]) {
                    *d += x * cj;
                }
            }
        }
    }
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

pub fn hermitian_error(a: &CMat) -> f64 {
    (a - a.adjoint()).norm()
}

/// In-place lower Cholesky factor of a column-major `n x n` Hermitian
/// matrix; only the lower triangle is read and written. Returns `false` if
/// a pivot is not positive.
fn cholesky_in_place(a: &mut [Complex64], n: usize) -> bool {
    for k in 0..n {
        let d = a[k * n + k].re;
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[k * n + k] = Complex64::new(d, 0.0);
        let inv = 1.0 / d;
        for x in &mut a[k * n + k + 1..(k + 1) * n] {
            *x *= inv;
        }
        let (head, tail) = a.split_at_mut((k + 1) * n);
        let col_k = &head[k * n..(k + 1) * n];
        for j in (k + 1)..n {
            let cj = col_k[j].conj();
            let dst = &mut tail[(j - k - 1) * n + j..(j - k) * n];
            for (x, &l) in dst.iter_mut().zip(&col_k[j..]) {
                *x -= l * cj;
            }
        }
    }
    true
}

/// Solve `L L^H X = B` in place given the lower factor.
fn cholesky_solve_in_place(l: &[Complex64], n: usize, b: &mut [Complex64]) {
    for x in b.chunks_exact_mut(n) {
        // forward: L y = b, column-oriented
        for k in 0..n {
            let yk = x[k] / l[k * n + k].re;
            x[k] = yk;
            for (xi, &lik) in x[k + 1..].iter_mut().zip(&l[k * n + k + 1..(k + 1) * n]) {
                *xi -= lik * yk;
            }
        }
        // backward: L^H z = y, row k of L^H is column k of L conjugated
        for k in (0..n).rev() {
            let mut acc = x[k];
            for (xi, &lik) in x[k + 1..].iter().zip(&l[k * n + k + 1..(k + 1) * n]) {
                acc -= lik.conj() * xi;
            }
            x[k] = acc / l[k * n + k].re;
        }
    }
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(a: &CMat) -> Option<CMat> {
    let n = a.nrows();
    let mut l = a.clone();
    if !cholesky_in_place(l.as_mut_slice(), n) {
        return None;
    }
    for j in 0..n {
        for i in 0..j {
            l[(i, j)] = ZERO;
        }
    }
    Some(l)
}

/// Solve `A X = B` for Hermitian positive definite `A` through a Cholesky
/// factorization. On failure, `delta I` with `delta = 1e-10 tr(A) / n` is
/// added and the factorization retried.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "solve: A is {}x{}, B has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let mut l = a.clone();
    if !cholesky_in_place(l.as_mut_slice(), n) {
        let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
        let delta = 1e-10 * trace.abs().max(f64::MIN_POSITIVE) / n as f64;
        log::warn!("cholesky failed on {n}x{n} system, regularizing with delta={delta:e}");
        l = a.clone();
        for i in 0..n {
            l[(i, i)] += delta;
        }
        if !cholesky_in_place(l.as_mut_slice(), n) {
            return Err(Error::Domain("matrix is not positive definite after regularization".into()));
        }
    }
    let mut x = b.clone();
    if n > 0 {
        cholesky_solve_in_place(l.as_slice(), n, x.as_mut_slice());
    }
    Ok(x)
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

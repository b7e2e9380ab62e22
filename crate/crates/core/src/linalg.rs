//! Small dense helpers shared by the modules: real-matrix × complex-vector
//! products, Hermitian quadratic forms and vector norms.

use faer::{c64, Mat};

pub fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

/// `a · x` for a real matrix and complex vector.
pub fn matvec(a: &Mat<f64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![c64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj.re == 0.0 && xj.im == 0.0 {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += xj * col[i];
        }
    }
    y
}

/// `a · x` for a complex matrix and complex vector.
pub fn cmatvec(a: &Mat<c64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![c64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

/// Sesquilinear product `xᴴ y`.
pub fn dotc(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Bilinear product `xᵀ y`.
pub fn dotu(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `xᴴ A x` for a real matrix `A`.
pub fn qform(a: &Mat<f64>, x: &[c64]) -> c64 {
    dotc(x, &matvec(a, x))
}

pub fn norm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_real(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn frobenius(a: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

pub fn frobenius_c(a: &Mat<c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn to_complex(a: &Mat<f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

pub fn scale(x: &mut [c64], s: c64) {
    for v in x {
        *v *= s;
    }
}

/// `Σ_k coeffs[k] · mats[k]`, all real.
pub fn lincomb(mats: &[&Mat<f64>], coeffs: &[f64]) -> Mat<f64> {
    let (r, cdim) = (mats[0].nrows(), mats[0].ncols());
    Mat::from_fn(r, cdim, |i, j| mats.iter().zip(coeffs).map(|(m, &w)| w * m[(i, j)]).sum())
}

/// `Σ_k coeffs[k] · mats[k]` with complex weights.
pub fn lincomb_c(mats: &[&Mat<f64>], coeffs: &[c64]) -> Mat<c64> {
    let (r, cdim) = (mats[0].nrows(), mats[0].ncols());
    Mat::from_fn(r, cdim, |i, j| mats.iter().zip(coeffs).map(|(m, &w)| w * m[(i, j)]).sum())
}

//! Dense complex linear algebra for the small (N ≲ 16) matrices used
//! throughout the crate.

mod eig;
mod expm;
mod lu;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::{Error, Result};

pub use eig::{eig_general, SpectralData};
pub use expm::{expm, expm_raw};
pub use lu::{solve_linear, Lu};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

/// Relative residual tolerance.
pub const TAU_RESID: f64 = 1e-10;
/// Bi-orthonormality tolerance for paired left/right eigenvectors.
pub const TAU_BIORTH: f64 = 1e-8;
/// Relative minimum eigenvalue gap below which left/right pairing is refused.
pub const TAU_DEGEN: f64 = 1e-8;
/// Largest admissible 1-norm condition number for linear solves.
pub const TAU_SING: f64 = 1e12;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn norm_one(m: &CMat) -> f64 {
    m.columns()
        .into_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖M − M†‖_F`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    frobenius(&(m - &dagger(m)))
}

pub(crate) fn ensure_square(m: &CMat) -> Result<usize> {
    let (r, c) = m.dim();
    if r == 0 {
        return Err(Error::InvalidInput("matrix must have dimension >= 1".into()));
    }
    if r != c {
        return Err(Error::InvalidInput(format!("matrix must be square, got {r}x{c}")));
    }
    Ok(r)
}

pub(crate) fn ensure_finite<'a>(values: impl IntoIterator<Item = &'a C64>, what: &str) -> Result<()> {
    if values.into_iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

pub(crate) fn ensure_square_finite(m: &CMat) -> Result<usize> {
    let n = ensure_square(m)?;
    ensure_finite(m.iter(), "matrix")?;
    Ok(n)
}

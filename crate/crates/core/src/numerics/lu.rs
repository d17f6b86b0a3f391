use ndarray::{s, Array1};

use super::{ensure_finite, ensure_square_finite, identity, norm_one, CMat, CVec, TAU_SING};
use crate::{Error, Result};

/// LU factorisation with partial pivoting, `P M = L U`, packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    anorm: f64,
}

impl Lu {
    pub fn factor(m: &CMat) -> Result<Self> {
        let n = ensure_square_finite(m)?;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&a, &b| lu[[a, k]].norm().total_cmp(&lu[[b, k]].norm()))
                .unwrap();
            if lu[[p, k]].norm() == 0.0 {
                return Err(Error::SingularMatrix { rcond: 0.0 });
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let pivot = lu[[k, k]];
            for i in k + 1..n {
                let l = lu[[i, k]] / pivot;
                lu[[i, k]] = l;
                for j in k + 1..n {
                    let u = lu[[k, j]];
                    lu[[i, j]] -= l * u;
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            anorm: norm_one(m),
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        let n = self.dim();
        let mut x: CVec = Array1::from_shape_fn(n, |i| b[self.perm[i]]);
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[[i, j]] * x[j];
            }
            x[i] = acc / self.lu[[i, i]];
        }
        x
    }

    pub fn solve_matrix(&self, b: &CMat) -> CMat {
        let mut out = CMat::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            let x = self.solve(&col.to_owned());
            out.slice_mut(s![.., j]).assign(&x);
        }
        out
    }

    /// Reciprocal 1-norm condition number, from the explicit inverse.
    pub fn rcond(&self) -> f64 {
        let inv = self.solve_matrix(&identity(self.dim()));
        let inv_norm = norm_one(&inv);
        if !inv_norm.is_finite() || self.anorm == 0.0 {
            return 0.0;
        }
        1.0 / (self.anorm * inv_norm)
    }
}

/// Solves `M x = b`, refusing matrices whose condition number exceeds
/// [`TAU_SING`].
pub fn solve_linear(m: &CMat, b: &CVec) -> Result<CVec> {
    let lu = Lu::factor(m)?;
    if b.len() != lu.dim() {
        return Err(Error::DimensionMismatch {
            expected: lu.dim(),
            found: b.len(),
        });
    }
    ensure_finite(b.iter(), "right-hand side")?;
    let rcond = lu.rcond();
    if rcond < 1.0 / TAU_SING {
        return Err(Error::SingularMatrix { rcond });
    }
    Ok(lu.solve(b))
}

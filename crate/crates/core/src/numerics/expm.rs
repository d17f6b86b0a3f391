use super::{ensure_square_finite, identity, norm_one, CMat, Lu, C64, I};
use crate::{Error, Result};

// Degree-13 Padé coefficients and the 1-norm bound below which the unscaled
// approximant is accurate to double precision (Higham 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Propagator `e^(−i M t)`.
pub fn expm(m: &CMat, t: f64) -> Result<CMat> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    ensure_square_finite(m)?;
    expm_raw(&m.mapv(|z| -I * t * z))
}

/// Plain matrix exponential `e^A` by scaling and squaring.
pub fn expm_raw(a: &CMat) -> Result<CMat> {
    let n = ensure_square_finite(a)?;
    let norm = norm_one(a);
    if norm == 0.0 {
        return Ok(identity(n));
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|z| z * 2f64.powi(-s));

    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let eye = identity(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let u_inner = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u_outer = a6.dot(&u_inner) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &eye * b(1);
    let u = a.dot(&u_outer);
    let v_inner = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = a6.dot(&v_inner) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &eye * b(0);

    let lu = Lu::factor(&(&v - &u))?;
    let mut r = lu.solve_matrix(&(&v + &u));
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{c, dagger, frobenius, TAU_RESID};
    use super::*;
    use ndarray::array;

    /// Unscaled Taylor series, summed until terms stop contributing.
    fn taylor_oracle(a: &CMat, terms: usize) -> CMat {
        let n = a.nrows();
        let mut sum = identity(n);
        let mut term = identity(n);
        for k in 1..terms {
            term = term.dot(a).mapv(|z| z / k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_matrix_gives_identity() {
        for n in 1..5 {
            assert_eq!(expm(&CMat::zeros((n, n)), 3.7).unwrap(), identity(n));
        }
    }

    #[test]
    fn diagonal_matrix() {
        let m = array![[c(1.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-2.0, -0.5)]];
        let t = 0.8;
        let u = expm(&m, t).unwrap();
        for k in 0..2 {
            let expect = (-I * m[[k, k]] * t).exp();
            assert!((u[[k, k]] - expect).norm() < 1e-14);
        }
        assert!(u[[0, 1]].norm() < 1e-15 && u[[1, 0]].norm() < 1e-15);
    }

    #[test]
    fn off_diagonal_against_taylor() {
        let m = array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, -1.0), c(0.0, 0.0)]];
        let oracle = taylor_oracle(&m.mapv(|z| -I * z), 200);
        let u = expm(&m, 1.0).unwrap();
        assert!(frobenius(&(&u - &oracle)) < 1e-14, "{u} vs {oracle}");
        // -iM = [[0,-1],[-1,0]]: e^{-iM} = cosh(1) I - sinh(1) σx
        assert!((u[[0, 0]] - c(1f64.cosh(), 0.0)).norm() < 1e-14);
        assert!((u[[0, 1]] - c(-(1f64.sinh()), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn random_against_taylor() {
        let mut r = rng(11);
        for &norm in &[0.1, 1.0, 4.0] {
            let a = random_matrix(&mut r, 4, norm);
            let oracle = taylor_oracle(&a, 200);
            let e = expm_raw(&a).unwrap();
            assert!(frobenius(&(&e - &oracle)) <= 1e-12 * frobenius(&oracle));
        }
    }

    #[test]
    fn semigroup_property() {
        let mut r = rng(3);
        for _ in 0..20 {
            let m = random_matrix(&mut r, 4, 10.0);
            let (t1, t2) = (0.37, 0.21);
            let lhs = expm(&m, t1 + t2).unwrap();
            let rhs = expm(&m, t1).unwrap().dot(&expm(&m, t2).unwrap());
            assert!(frobenius(&(&lhs - &rhs)) <= 10.0 * TAU_RESID * frobenius(&lhs).max(1.0));
        }
    }

    #[test]
    fn hermitian_gives_unitary() {
        let mut r = rng(5);
        for _ in 0..20 {
            let h = random_hermitian(&mut r, 4, 10.0);
            let u = expm(&h, 1.3).unwrap();
            let defect = frobenius(&(dagger(&u).dot(&u) - identity(4)));
            assert!(defect <= 10.0 * TAU_RESID, "unitarity defect {defect}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let m = array![[c(f64::INFINITY, 0.0)]];
        assert!(matches!(expm(&m, 1.0), Err(Error::InvalidInput(_))));
        assert!(matches!(expm(&identity(2), f64::NAN), Err(Error::InvalidInput(_))));
    }
}

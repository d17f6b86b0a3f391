use std::cmp::Ordering;

use ndarray::{s, Array1};
use serde::Serialize;

use super::{ensure_square_finite, frobenius, identity, CMat, CVec, C64, TAU_DEGEN};
use crate::{Error, Result};

const MAX_ITER_PER_EIGENVALUE: usize = 60;

/// Eigenvalues with paired right (columns) and left (rows) eigenvectors,
/// bi-orthonormalised so that `left.row(k) · right.column(j) = δ_kj`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<C64>,
    /// Column `k` is `|v_k⟩`, unit 2-norm, largest component real-positive.
    pub right: CMat,
    /// Row `k` is `⟨u_k|` (no conjugation implied when contracting).
    pub left: CMat,
    /// Per pair: `(‖M v − λ v‖, ‖u M − λ u‖)`.
    pub residuals: Vec<(f64, f64)>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_k λ_k |v_k⟩⟨u_k|`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.dim();
        CMat::from_shape_fn((n, n), |(i, j)| {
            (0..n)
                .map(|k| self.eigenvalues[k] * self.right[[i, k]] * self.left[[k, j]])
                .sum()
        })
    }

    /// `max_kj |⟨u_k|v_j⟩ − δ_kj|`.
    pub fn biorth_defect(&self) -> f64 {
        let g = self.left.dot(&self.right);
        g.indexed_iter()
            .map(|((k, j), z)| (z - if k == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_gap(&self) -> f64 {
        min_pairwise_gap(&self.eigenvalues)
    }
}

/// General (non-Hermitian) eigendecomposition.
///
/// Right vectors come from a complex Schur form of `M`; left vectors are the
/// right vectors of `Mᵀ`, matched to eigenvalues by nearest distance.
pub fn eig_general(m: &CMat) -> Result<SpectralData> {
    let n = ensure_square_finite(m)?;
    let scale = frobenius(m);

    let (values_r, vecs_r) = schur_eigen(m)?;
    let gap = min_pairwise_gap(&values_r);
    let threshold = TAU_DEGEN * scale;
    if n > 1 && gap <= threshold {
        return Err(Error::NearDegenerateSpectrum { gap, threshold });
    }
    let (values_l, vecs_l) = schur_eigen(&m.t().to_owned())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spectral_order(values_r[a], values_r[b], scale));

    let mut used = vec![false; n];
    let mut eigenvalues = Vec::with_capacity(n);
    let mut right = CMat::zeros((n, n));
    let mut left = CMat::zeros((n, n));
    for (slot, &k) in order.iter().enumerate() {
        let lambda = values_r[k];
        let partner = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (values_l[a] - lambda).norm().total_cmp(&(values_l[b] - lambda).norm()))
            .unwrap();
        used[partner] = true;

        let mut v = vecs_r.column(k).to_owned();
        fix_phase(&mut v);
        let u = vecs_l.column(partner).to_owned();
        let overlap: C64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        if overlap.norm() == 0.0 {
            return Err(Error::NearDegenerateSpectrum { gap: 0.0, threshold });
        }
        let u = u.mapv(|z| z / overlap);

        eigenvalues.push(lambda);
        right.slice_mut(s![.., slot]).assign(&v);
        left.slice_mut(s![slot, ..]).assign(&u);
    }

    let residuals = (0..n)
        .map(|k| {
            let lambda = eigenvalues[k];
            let v = right.column(k);
            let u = left.row(k);
            let rv = m.dot(&v) - v.mapv(|z| z * lambda);
            let ru = u.dot(m) - u.mapv(|z| z * lambda);
            (norm(&rv), norm(&ru))
        })
        .collect();

    Ok(SpectralData {
        eigenvalues,
        right,
        left,
        residuals,
    })
}

fn norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn min_pairwise_gap(values: &[C64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

/// Real part first, then imaginary part; real parts within rounding of each
/// other count as ties.
fn spectral_order(a: C64, b: C64, scale: f64) -> Ordering {
    let tie = 1e-12 * scale.max(1.0);
    if (a.re - b.re).abs() > tie {
        a.re.total_cmp(&b.re)
    } else {
        a.im.total_cmp(&b.im)
    }
}

/// Unit 2-norm with the largest-magnitude component real and positive.
fn fix_phase(v: &mut CVec) {
    let nrm = norm(v);
    let (mut best, mut mag) = (0, -1.0);
    for (i, z) in v.iter().enumerate() {
        // earlier index wins near-ties so the choice is stable under rounding
        if z.norm() > mag * (1.0 + 1e-9) {
            best = i;
            mag = z.norm();
        }
    }
    let phase = v[best].conj() / v[best].norm();
    v.mapv_inplace(|z| z * phase / nrm);
}

/// Eigenvalues and (unnormalised) right eigenvectors via Hessenberg reduction
/// and shifted QR to complex Schur form.
fn schur_eigen(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = m.nrows();
    let (mut h, mut z) = hessenberg(m);
    let anorm = frobenius(m);
    if n > 1 {
        qr_iterate(&mut h, &mut z, anorm)?;
    }
    for i in 0..n {
        for j in 0..i {
            h[[i, j]] = C64::new(0.0, 0.0);
        }
    }
    let values: Vec<C64> = (0..n).map(|i| h[[i, i]]).collect();

    let small = f64::EPSILON * anorm.max(f64::MIN_POSITIVE);
    let mut x = CMat::zeros((n, n));
    for k in 0..n {
        let mut col = Array1::<C64>::zeros(n);
        col[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let acc: C64 = (i + 1..=k).map(|j| h[[i, j]] * col[j]).sum();
            let mut d = h[[i, i]] - h[[k, k]];
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            col[i] = -acc / d;
        }
        x.slice_mut(s![.., k]).assign(&col);
    }
    Ok((values, z.dot(&x)))
}

/// Householder reduction `M = Q H Q†` with `H` upper Hessenberg.
fn hessenberg(m: &CMat) -> (CMat, CMat) {
    let n = m.nrows();
    let mut h = m.clone();
    let mut q = identity(n);
    for k in 0..n.saturating_sub(2) {
        let x = h.slice(s![k + 1.., k]).to_owned();
        let xnorm = norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let mut v = x;
        v[0] += phase * xnorm;
        let vnorm = norm(&v);
        v.mapv_inplace(|z| z / vnorm);

        // H ← P H P with P = I − 2 v v†, acting on indices k+1..
        for j in 0..n {
            let dot: C64 = (0..v.len()).map(|i| v[i].conj() * h[[k + 1 + i, j]]).sum();
            for i in 0..v.len() {
                h[[k + 1 + i, j]] -= v[i] * dot * 2.0;
            }
        }
        for mat in [&mut h, &mut q] {
            for i in 0..n {
                let dot: C64 = (0..v.len()).map(|j| mat[[i, k + 1 + j]] * v[j]).sum();
                for j in 0..v.len() {
                    mat[[i, k + 1 + j]] -= dot * v[j].conj() * 2.0;
                }
            }
        }
    }
    (h, q)
}

fn qr_iterate(h: &mut CMat, z: &mut CMat, anorm: f64) -> Result<()> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        // deflate negligible subdiagonals inside the active window
        let mut lo = hi;
        while lo > 0 {
            let sub = h[[lo, lo - 1]].norm();
            let mut local = h[[lo, lo]].norm() + h[[lo - 1, lo - 1]].norm();
            if local == 0.0 {
                local = anorm;
            }
            if sub <= eps * local || sub <= f64::MIN_POSITIVE {
                h[[lo, lo - 1]] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }

        iter += 1;
        total += 1;
        if iter > MAX_ITER_PER_EIGENVALUE {
            return Err(Error::ConvergenceFailure { iterations: total });
        }

        let shift = if iter.is_multiple_of(10) {
            // exceptional shift to break cycles
            h[[hi, hi]] + C64::new(h[[hi, hi - 1]].norm() * 0.75, 0.0)
        } else {
            wilkinson_shift(h[[hi - 1, hi - 1]], h[[hi - 1, hi]], h[[hi, hi - 1]], h[[hi, hi]])
        };

        for i in lo..=hi {
            h[[i, i]] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[[k, k]], h[[k + 1, k]]);
            for j in k..n {
                let (x, y) = (h[[k, j]], h[[k + 1, j]]);
                h[[k, j]] = c.conj() * x + s.conj() * y;
                h[[k + 1, j]] = -s * x + c * y;
            }
            rotations.push((c, s));
        }
        for (k, &(c, s)) in (lo..hi).zip(rotations.iter()) {
            for i in 0..=hi.min(k + 1) {
                let (x, y) = (h[[i, k]], h[[i, k + 1]]);
                h[[i, k]] = x * c + y * s;
                h[[i, k + 1]] = -x * s.conj() + y * c.conj();
            }
            for i in 0..n {
                let (x, y) = (z[[i, k]], z[[i, k + 1]]);
                z[[i, k]] = x * c + y * s;
                z[[i, k + 1]] = -x * s.conj() + y * c.conj();
            }
        }
        for i in lo..=hi {
            h[[i, i]] += shift;
        }
    }
    Ok(())
}

/// Rotation `(c, s)` with `[[c̄, s̄], [−s, c]] · [a, b]ᵀ = [r, 0]ᵀ`.
fn givens(a: C64, b: C64) -> (C64, C64) {
    let r = a.norm().hypot(b.norm());
    if r == 0.0 {
        (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    } else {
        (a / r, b / r)
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let (l1, l2) = (half_tr + root, half_tr - root);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{c, dagger, TAU_BIORTH, TAU_RESID};
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn check_contract(m: &CMat, sd: &SpectralData) {
        let scale = frobenius(m);
        for &(rr, rl) in &sd.residuals {
            assert!(rr <= TAU_RESID * scale, "right residual {rr}");
            let lnorm = 1.0_f64.max(
                sd.left
                    .rows()
                    .into_iter()
                    .map(|r| norm(&r.to_owned()))
                    .fold(0.0, f64::max),
            );
            assert!(rl <= TAU_RESID * scale * lnorm, "left residual {rl}");
        }
        assert!(sd.biorth_defect() <= TAU_BIORTH, "biorth {}", sd.biorth_defect());
        let recon = frobenius(&(sd.reconstruct() - m));
        assert!(recon <= 10.0 * TAU_RESID * scale.max(1.0), "reconstruction {recon}");
    }

    #[test]
    fn diagonal_gives_standard_basis() {
        let m = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 3.0)]];
        let sd = eig_general(&m).unwrap();
        assert_eq!(sd.eigenvalues, vec![c(1.0, 0.0), c(2.0, 3.0)]);
        assert_eq!(sd.right, identity(2));
        assert_eq!(sd.left, identity(2));
    }

    #[test]
    fn symmetric_two_by_two() {
        let g = 0.7;
        let m = array![[c(0.0, 0.0), c(g, 0.0)], [c(g, 0.0), c(0.0, 0.0)]];
        let sd = eig_general(&m).unwrap();
        assert!((sd.eigenvalues[0] - c(-g, 0.0)).norm() < 1e-14);
        assert!((sd.eigenvalues[1] - c(g, 0.0)).norm() < 1e-14);
        check_contract(&m, &sd);
        // Hermitian: left row equals the conjugate-transposed right column
        let defect = frobenius(&(dagger(&sd.right) - &sd.left));
        assert!(defect <= TAU_BIORTH);
    }

    #[test]
    fn non_hermitian_quadratic_oracle() {
        for &(delta, phi, cc) in &[
            (2.0, 0.3, 0.4),
            (10.0, std::f64::consts::FRAC_PI_2, 0.5),
            (0.5, 2.5, 1.2),
        ] {
            let a = C64::from_polar(delta, -phi);
            let m = array![[a, c(cc, 0.0)], [c(cc, 0.0), c(0.0, 0.0)]];
            // λ² − a λ − c² = 0
            let disc = (a * a + 4.0 * cc * cc).sqrt();
            let mut roots = [(a + disc) * 0.5, (a - disc) * 0.5];
            roots.sort_by(|x, y| spectral_order(*x, *y, 1.0));
            let sd = eig_general(&m).unwrap();
            for k in 0..2 {
                assert!(
                    (sd.eigenvalues[k] - roots[k]).norm() < 1e-13,
                    "{:?} vs {:?}",
                    sd.eigenvalues,
                    roots
                );
            }
            check_contract(&m, &sd);
        }
    }

    #[test]
    fn hermitian_left_is_right_dagger() {
        let mut r = rng(21);
        for _ in 0..20 {
            let h = random_hermitian(&mut r, 5, 3.0);
            let sd = eig_general(&h).unwrap();
            check_contract(&h, &sd);
            assert!(frobenius(&(dagger(&sd.right) - &sd.left)) <= TAU_BIORTH);
            for z in &sd.eigenvalues {
                assert!(z.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_spectrum_rejected() {
        let m = identity(3);
        assert!(matches!(eig_general(&m), Err(Error::NearDegenerateSpectrum { .. })));
    }

    #[test]
    fn ordering_is_by_real_then_imaginary() {
        let m = array![
            [c(1.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(1.0, -3.0)]
        ];
        let sd = eig_general(&m).unwrap();
        assert_eq!(sd.eigenvalues, vec![c(-2.0, 0.0), c(1.0, -3.0), c(1.0, -1.0)]);
    }

    #[test]
    fn random_matrices_satisfy_contract() {
        let mut r = rng(99);
        for n in 1..=8 {
            for _ in 0..10 {
                let m = random_matrix(&mut r, n, 5.0);
                let sd = eig_general(&m).unwrap();
                check_contract(&m, &sd);
            }
        }
    }

    #[test]
    fn jordan_like_matrix_still_converges() {
        // companion-like structure with distinct eigenvalues 1, 2, 3
        let m = array![
            [c(6.0, 0.0), c(-11.0, 0.0), c(6.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]
        ];
        let sd = eig_general(&m).unwrap();
        for (k, z) in sd.eigenvalues.iter().enumerate() {
            assert!((z - c(k as f64 + 1.0, 0.0)).norm() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn reconstruction_holds(seed in any::<u64>(), n in 2usize..7) {
            let mut r = rng(seed);
            let m = random_matrix(&mut r, n, 4.0);
            let sd = eig_general(&m).unwrap();
            let recon = frobenius(&(sd.reconstruct() - &m));
            prop_assert!(recon <= 10.0 * TAU_RESID * frobenius(&m));
            prop_assert!(sd.biorth_defect() <= TAU_BIORTH);
        }
    }
}

//! Exact propagation under `e^(−iHt)`.
//!
//! Norm loss under a non-Hermitian generator is physical, so nothing here
//! renormalises.

use std::ops::Range;

use serde::Serialize;

use crate::numerics::{c, dagger, ensure_square_finite, expm, frobenius, CMat, CVec, SpectralData, C64, TAU_RESID};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVector(CVec);

impl StateVector {
    pub fn new(amplitudes: CVec) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidInput("state vector must have dimension >= 1".into()));
        }
        crate::numerics::ensure_finite(amplitudes.iter(), "state vector")?;
        Ok(StateVector(amplitudes))
    }

    /// Basis state `|k⟩`, zero-based.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidInput(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut v = CVec::zeros(dim);
        v[k] = c(1.0, 0.0);
        Ok(StateVector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.0
    }

    pub fn into_inner(self) -> CVec {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidInput("cannot normalise the zero vector".into()));
        }
        Ok(StateVector(self.0.mapv(|z| z / n)))
    }

    /// `⟨ψ|Π|ψ⟩` for the projector onto the index range.
    pub fn population(&self, range: Range<usize>) -> f64 {
        self.0.slice(ndarray::s![range]).iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> DensityMatrix {
        let n = self.dim();
        DensityMatrix(CMat::from_shape_fn((n, n), |(i, j)| self.0[i] * self.0[j].conj()))
    }
}

/// `⟨a|Π|b⟩` over the index range.
pub fn projected_overlap(a: &CVec, b: &CVec, range: Range<usize>) -> C64 {
    range.map(|k| a[k].conj() * b[k]).sum()
}

/// A possibly sub-normalised density operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    /// Checks Hermiticity, non-negative populations and `tr ρ ≤ 1` to within
    /// [`TAU_RESID`].
    pub fn new(m: CMat) -> Result<Self> {
        ensure_square_finite(&m)?;
        let defect = frobenius(&(&m - &dagger(&m)));
        if defect > TAU_RESID {
            return Err(Error::InvariantViolation(format!(
                "density matrix not Hermitian (defect {defect:.3e})"
            )));
        }
        if m.diag().iter().any(|z| z.re < -TAU_RESID) {
            return Err(Error::InvariantViolation(
                "density matrix has a negative population".into(),
            ));
        }
        let tr: f64 = m.diag().iter().map(|z| z.re).sum();
        if tr > 1.0 + TAU_RESID {
            return Err(Error::InvariantViolation(format!(
                "density matrix trace {tr} exceeds 1"
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// Incoherent mixture `Σ_k w_k |ψ_k⟩⟨ψ_k|`.
    pub fn mixture(parts: &[(f64, StateVector)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, s)| s.dim())
            .ok_or_else(|| Error::InvalidInput("empty mixture".into()))?;
        let mut m = CMat::zeros((dim, dim));
        for (w, s) in parts {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            m = m + s.projector().0.mapv(|z| z * *w);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().iter().map(|z| z.re).sum()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidInput(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn check_dims(h: &CMat, n: usize) -> Result<()> {
    let dim = ensure_square_finite(h)?;
    if dim != n {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: n,
        });
    }
    Ok(())
}

/// `e^(−iHt) |ψ0⟩`.
pub fn propagate_state(h: &CMat, psi0: &StateVector, t: f64) -> Result<StateVector> {
    check_dims(h, psi0.dim())?;
    check_time(t)?;
    Ok(StateVector(expm(h, t)?.dot(&psi0.0)))
}

/// `U ρ0 U†` with `U = e^(−iHt)`.
pub fn propagate_density(h: &CMat, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_dims(h, rho0.dim())?;
    check_time(t)?;
    let u = expm(h, t)?;
    Ok(DensityMatrix(u.dot(&rho0.0).dot(&dagger(&u))))
}

/// Largest entry of the off-diagonal blocks for the `A | B` split at `dim_a`.
pub fn off_block_magnitude(h: &CMat, dim_a: usize) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..dim_a {
        for j in dim_a..n {
            worst = worst.max(h[[i, j]].norm()).max(h[[j, i]].norm());
        }
    }
    worst
}

/// Evolution under the block-diagonal `H0`; a **B**-supported state never
/// leaves **B** and keeps its norm.
pub fn propagate_unperturbed(h0: &CMat, dim_a: usize, psi0: &StateVector, t: f64) -> Result<StateVector> {
    check_dims(h0, psi0.dim())?;
    if dim_a > h0.nrows() {
        return Err(Error::InvalidInput(format!(
            "dim_a {dim_a} exceeds dimension {}",
            h0.nrows()
        )));
    }
    let magnitude = off_block_magnitude(h0, dim_a);
    if magnitude > TAU_RESID * frobenius(h0).max(1.0) {
        return Err(Error::NotBlockDiagonal { magnitude });
    }
    propagate_state(h0, psi0, t)
}

/// `Σ_k e^(−iλ_k t) |v_k⟩⟨u_k|ψ0⟩` from a precomputed eigendecomposition.
pub fn spectral_propagate(spec: &SpectralData, psi0: &StateVector, t: f64) -> Result<StateVector> {
    if spec.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: psi0.dim(),
        });
    }
    check_time(t)?;
    let weights = spec.left.dot(&psi0.0);
    let phased = CVec::from_shape_fn(spec.dim(), |k| {
        weights[k] * (-crate::numerics::I * spec.eigenvalues[k] * t).exp()
    });
    Ok(StateVector(spec.right.dot(&phased)))
}

/// One-step propagator `e^(−iH dt)`, applied repeatedly for uniform time grids.
///
/// Each application adds at most ~`TAU_RESID` relative error, so a 10⁴-step
/// trajectory stays within a 10⁴·`TAU_RESID` budget.
#[derive(Debug, Clone)]
pub struct StepPropagator {
    step: CMat,
    dt: f64,
}

impl StepPropagator {
    pub fn new(h: &CMat, dt: f64) -> Result<Self> {
        check_time(dt)?;
        Ok(StepPropagator { step: expm(h, dt)?, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn matrix(&self) -> &CMat {
        &self.step
    }

    pub fn apply(&self, psi: &CVec) -> CVec {
        self.step.dot(psi)
    }

    /// States at `t_k = k·dt` for `k = 0..n_points`.
    pub fn trajectory(&self, psi0: &StateVector, n_points: usize) -> Result<Vec<CVec>> {
        if psi0.dim() != self.step.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.step.nrows(),
                found: psi0.dim(),
            });
        }
        let mut out = Vec::with_capacity(n_points);
        let mut psi = psi0.0.clone();
        for k in 0..n_points {
            if k > 0 {
                psi = self.apply(&psi);
            }
            out.push(psi.clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NonHermitianHamiltonian;
    use crate::numerics::{eig_general, vec_norm};
    use ndarray::array;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn three(delta: f64, phi: f64, g: f64) -> NonHermitianHamiltonian {
        NonHermitianHamiltonian::three_state(delta, phi, g, g, 1.0, 0.1).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let h = three(2.0, 1.0, 0.2).assemble();
        let psi = StateVector::new(array![c(0.3, 0.1), c(0.5, 0.0), c(0.0, -0.2)]).unwrap();
        let out = propagate_state(&h, &psi, 0.0).unwrap();
        assert_eq!(out, psi);
        let rho = psi.projector();
        assert_eq!(propagate_density(&h, &rho, 0.0).unwrap(), rho);
    }

    #[test]
    fn diagonal_phase_evolution() {
        let h = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let psi = StateVector::basis(2, 1).unwrap();
        let t = 2.3;
        let out = propagate_state(&h, &psi, t).unwrap();
        assert!((out.amplitudes()[1] - c(0.0, -t).exp()).norm() < 1e-14);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unperturbed_b_evolution_is_unitary() {
        let h = three(5.0, 1.0, 0.2);
        let psi = StateVector::basis(3, 1).unwrap();
        for k in 0..20 {
            let out = propagate_unperturbed(&h.unperturbed(), 1, &psi, 0.4 * k as f64).unwrap();
            assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
            assert_eq!(out.amplitudes()[0], c(0.0, 0.0));
        }
    }

    #[test]
    fn unperturbed_pure_decay() {
        let delta = 0.7;
        let h = three(delta, FRAC_PI_2, 0.2);
        let psi = StateVector::basis(3, 0).unwrap();
        let t = 1.9;
        let out = propagate_unperturbed(&h.unperturbed(), 1, &psi, t).unwrap();
        assert!((out.amplitudes()[0].norm() - (-delta * t).exp()).abs() < 1e-14);
    }

    #[test]
    fn unperturbed_matches_full_without_coupling() {
        let h = three(3.0, 0.8, 0.0);
        let psi = StateVector::new(array![c(0.5, 0.0), c(0.5, 0.5), c(0.0, 0.5)]).unwrap();
        let a = propagate_unperturbed(&h.unperturbed(), 1, &psi, 1.7).unwrap();
        let b = propagate_state(&h.assemble(), &psi, 1.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unperturbed_rejects_coupled_generator() {
        let h = three(3.0, 0.8, 0.2).assemble();
        let psi = StateVector::basis(3, 1).unwrap();
        assert!(matches!(
            propagate_unperturbed(&h, 1, &psi, 1.0),
            Err(Error::NotBlockDiagonal { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let h = three(3.0, 0.8, 0.2).assemble();
        let psi = StateVector::basis(2, 1).unwrap();
        assert!(matches!(
            propagate_state(&h, &psi, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spectral_matches_expm() {
        for &(d, p) in &[(3.0, 0.9), (10.0, FRAC_PI_2), (1.5, 2.5)] {
            let h = three(d, p, 0.2).assemble();
            let spec = eig_general(&h).unwrap();
            let psi = StateVector::basis(3, 1).unwrap();
            // completeness at t = 0
            let back = spectral_propagate(&spec, &psi, 0.0).unwrap();
            assert!(vec_norm(&(back.amplitudes() - psi.amplitudes())) < 1e-12);
            let mut worst: f64 = 0.0;
            for k in 0..=100 {
                let t = 2.0 * PI * k as f64 / 100.0;
                let a = spectral_propagate(&spec, &psi, t).unwrap();
                let b = propagate_state(&h, &psi, t).unwrap();
                worst = worst.max(vec_norm(&(a.amplitudes() - b.amplitudes())));
            }
            assert!(worst < 1e-8, "deviation {worst}");
        }
    }

    #[test]
    fn spectral_diagonal_equals_unperturbed() {
        let h = three(4.0, 0.5, 0.0);
        let h0 = h.unperturbed();
        // intra-B coupling makes H0 non-diagonal; use a genuinely diagonal one
        let mut diag = CMat::zeros((3, 3));
        for k in 0..3 {
            diag[[k, k]] = h0[[k, k]];
        }
        let spec = eig_general(&diag).unwrap();
        let psi = StateVector::new(array![c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)]).unwrap();
        let a = spectral_propagate(&spec, &psi, 1.3).unwrap();
        let b = propagate_unperturbed(&diag, 1, &psi, 1.3).unwrap();
        assert!(vec_norm(&(a.amplitudes() - b.amplitudes())) < 1e-14);
    }

    #[test]
    fn pure_density_matches_state() {
        let h = three(2.0, 1.2, 0.3).assemble();
        let psi = StateVector::new(array![c(0.1, 0.2), c(0.7, 0.0), c(0.3, -0.6)])
            .unwrap()
            .normalized()
            .unwrap();
        for &t in &[0.3, 1.0, 6.0] {
            let rho = propagate_density(&h, &psi.projector(), t).unwrap();
            let pr = propagate_state(&h, &psi, t).unwrap().projector();
            assert!(frobenius(&(rho.matrix() - pr.matrix())) <= 1e-9);
        }
    }

    #[test]
    fn step_propagator_drift_budget() {
        let h = three(3.0, 1.0, 0.2).assemble();
        let psi = StateVector::basis(3, 1).unwrap();
        let n = 10_001;
        let t_end = 10.0;
        let prop = StepPropagator::new(&h, t_end / (n - 1) as f64).unwrap();
        let traj = prop.trajectory(&psi, n).unwrap();
        let direct = propagate_state(&h, &psi, t_end).unwrap();
        let drift = vec_norm(&(&traj[n - 1] - direct.amplitudes()));
        assert!(drift <= 1e4 * TAU_RESID, "drift {drift}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_is_non_increasing(delta in 0.0..50.0f64, phi in 0.0..=PI, g in 0.0..0.6f64,
                                  om in -0.3..0.3f64, init in 0usize..3) {
            let h = NonHermitianHamiltonian::three_state(delta, phi, g, g * 0.7, 1.0, om).unwrap().assemble();
            let psi = StateVector::basis(3, init).unwrap();
            let prop = StepPropagator::new(&h, 0.01).unwrap();
            let traj = prop.trajectory(&psi, 600).unwrap();
            let norms: Vec<f64> = traj.iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum()).collect();
            for w in norms.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-10);
            }
        }

        #[test]
        fn hermitian_limit_preserves_norm(delta in 0.0..50.0f64, endpoint in prop::bool::ANY, g in 0.0..0.6f64) {
            let phi = if endpoint { PI } else { 0.0 };
            let h = NonHermitianHamiltonian::three_state(delta, phi, g, g, 1.0, 0.1).unwrap().assemble();
            let psi = StateVector::basis(3, 1).unwrap();
            for k in 0..10 {
                let out = propagate_state(&h, &psi, 0.7 * k as f64).unwrap();
                prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
            }
        }

        #[test]
        fn composition(delta in 0.0..30.0f64, phi in 0.0..=PI, t1 in 0.0..3.0f64, t2 in 0.0..3.0f64) {
            let h = NonHermitianHamiltonian::three_state(delta, phi, 0.3, 0.2, 1.0, 0.1).unwrap().assemble();
            let psi = StateVector::basis(3, 2).unwrap();
            let once = propagate_state(&h, &psi, t1 + t2).unwrap();
            let twice = propagate_state(&h, &propagate_state(&h, &psi, t1).unwrap(), t2).unwrap();
            prop_assert!(vec_norm(&(once.amplitudes() - twice.amplitudes())) <= 1e-9);
        }
    }
}

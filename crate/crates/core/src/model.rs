//! The partitioned non-Hermitian Hamiltonian `H = H0 + H_I`.
//!
//! Basis ordering is fixed everywhere: the `M` decaying states of block **A**
//! come first, followed by the `N − M` non-decaying states of block **B**.
//! **A** is diagonal with complex entries `Δ e^(−iφ)`, **B** is Hermitian, and
//! the coupling block **C** (`M × (N − M)`) sits above the diagonal with
//! **C**† below it.

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::numerics::{c, dagger, frobenius, CMat, C64};
use crate::{Error, Result};

/// Complex energy `Δ e^(−iφ)` of a decaying level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEntry {
    pub delta: f64,
    pub phi: f64,
}

impl DiagonalEntry {
    pub fn new(delta: f64, phi: f64) -> Result<Self> {
        let entry = DiagonalEntry { delta, phi };
        entry.validate()?;
        Ok(entry)
    }

    fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        if !(0.0..=PI).contains(&self.phi) {
            return Err(Error::InvariantViolation(format!(
                "phi must lie in [0, pi], got {}",
                self.phi
            )));
        }
        Ok(())
    }

    /// `Δ cos φ − i Δ sin φ`. The endpoints `φ = 0, π` give an exactly real value.
    pub fn complex_energy(&self) -> C64 {
        let im = if self.phi == 0.0 || self.phi == PI {
            0.0
        } else {
            -self.delta * self.phi.sin()
        };
        c(self.delta * self.phi.cos(), im)
    }

    /// Real part `ε_k = Δ cos φ`.
    pub fn energy(&self) -> f64 {
        self.complex_energy().re
    }

    /// `Γ_k = Δ sin φ ≥ 0`.
    pub fn decay_rate(&self) -> f64 {
        -self.complex_energy().im
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HamiltonianJson", into = "HamiltonianJson")]
pub struct NonHermitianHamiltonian {
    diag_a: Vec<DiagonalEntry>,
    diag_b: Vec<f64>,
    coupling: CMat,
    intra_b: CMat,
}

/// Minimum complex gap between the **A** and **B** diagonals and the largest
/// coupling magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationReport {
    pub delta_gap: f64,
    pub c_max: f64,
    pub ratio: f64,
}

impl NonHermitianHamiltonian {
    /// Validates and builds the model. `coupling` is `M × (N − M)`; `intra_b`
    /// is the Hermitian off-diagonal part of **B** and must have a zero diagonal.
    pub fn new(diag_a: Vec<DiagonalEntry>, diag_b: Vec<f64>, coupling: CMat, intra_b: CMat) -> Result<Self> {
        let (m, nb) = (diag_a.len(), diag_b.len());
        if nb == 0 {
            return Err(Error::InvariantViolation(
                "block B must contain at least one state".into(),
            ));
        }
        for entry in &diag_a {
            entry.validate()?;
        }
        if diag_b.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvariantViolation("diag_B energies must be finite".into()));
        }
        if coupling.dim() != (m, nb) {
            return Err(Error::InvariantViolation(format!(
                "coupling block must be {m}x{nb}, got {:?}",
                coupling.dim()
            )));
        }
        if intra_b.dim() != (nb, nb) {
            return Err(Error::InvariantViolation(format!(
                "intra_B block must be {nb}x{nb}, got {:?}",
                intra_b.dim()
            )));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !coupling.iter().all(finite) || !intra_b.iter().all(finite) {
            return Err(Error::InvariantViolation("coupling entries must be finite".into()));
        }
        if intra_b.diag().iter().any(|z| *z != c(0.0, 0.0)) {
            return Err(Error::InvariantViolation(
                "intra_B must have a zero diagonal (energies go in diag_B)".into(),
            ));
        }
        let defect = frobenius(&(&intra_b - &dagger(&intra_b)));
        if defect > 1e-12 * frobenius(&intra_b).max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "block B must be Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(NonHermitianHamiltonian {
            diag_a,
            diag_b,
            coupling,
            intra_b,
        })
    }

    /// The three-level model: one decaying level `|1⟩` with energy `Δ e^(−iφ)`
    /// coupled by `g1`, `g2` to `|2⟩` (energy `ε`) and `|3⟩` (energy 0), which
    /// are coupled to each other by `Ω`.
    pub fn three_state(delta: f64, phi: f64, g1: f64, g2: f64, epsilon: f64, omega: f64) -> Result<Self> {
        let coupling = CMat::from_shape_vec((1, 2), vec![c(g1, 0.0), c(g2, 0.0)]).unwrap();
        let mut intra_b = CMat::zeros((2, 2));
        intra_b[[0, 1]] = c(omega, 0.0);
        intra_b[[1, 0]] = c(omega, 0.0);
        Self::new(
            vec![DiagonalEntry::new(delta, phi)?],
            vec![epsilon, 0.0],
            coupling,
            intra_b,
        )
    }

    pub fn dim_a(&self) -> usize {
        self.diag_a.len()
    }

    pub fn dim_b(&self) -> usize {
        self.diag_b.len()
    }

    pub fn dim(&self) -> usize {
        self.dim_a() + self.dim_b()
    }

    pub fn b_range(&self) -> Range<usize> {
        self.dim_a()..self.dim()
    }

    pub fn diag_a(&self) -> &[DiagonalEntry] {
        &self.diag_a
    }

    pub fn diag_b(&self) -> &[f64] {
        &self.diag_b
    }

    pub fn coupling(&self) -> &CMat {
        &self.coupling
    }

    pub fn intra_b(&self) -> &CMat {
        &self.intra_b
    }

    /// Copy with every **A** diagonal entry replaced by `(Δ, φ)`.
    pub fn with_decaying_entries(&self, delta: f64, phi: f64) -> Result<Self> {
        let entry = DiagonalEntry::new(delta, phi)?;
        let mut out = self.clone();
        out.diag_a.iter_mut().for_each(|e| *e = entry);
        Ok(out)
    }

    /// Block **B** of `H0` (diag_B plus intra_B).
    pub fn b_block(&self) -> CMat {
        let mut b = self.intra_b.clone();
        for (k, e) in self.diag_b.iter().enumerate() {
            b[[k, k]] = c(*e, 0.0);
        }
        b
    }

    /// `H0 = blockdiag(A, B)`.
    pub fn unperturbed(&self) -> CMat {
        let (m, n) = (self.dim_a(), self.dim());
        let mut h = CMat::zeros((n, n));
        for (k, e) in self.diag_a.iter().enumerate() {
            h[[k, k]] = e.complex_energy();
        }
        h.slice_mut(ndarray::s![m.., m..]).assign(&self.b_block());
        h
    }

    /// `H_I`: **C** above the diagonal, **C**† below.
    pub fn interaction(&self) -> CMat {
        let (m, n) = (self.dim_a(), self.dim());
        let mut h = CMat::zeros((n, n));
        h.slice_mut(ndarray::s![..m, m..]).assign(&self.coupling);
        h.slice_mut(ndarray::s![m.., ..m]).assign(&dagger(&self.coupling));
        h
    }

    /// The full matrix `H = H0 + H_I`.
    pub fn assemble(&self) -> CMat {
        self.unperturbed() + self.interaction()
    }

    /// `H̃ = (H + H†)/2`: the complex diagonal replaced by its real part.
    pub fn hermitianize(&self) -> CMat {
        let h = self.assemble();
        (&h + &dagger(&h)).mapv(|z| z * 0.5)
    }

    pub fn separation(&self) -> Result<SeparationReport> {
        if self.dim_a() == 0 {
            return Err(Error::InvalidInput(
                "separation needs at least one decaying state".into(),
            ));
        }
        let mut delta_gap = f64::INFINITY;
        for a in &self.diag_a {
            for e in &self.diag_b {
                delta_gap = delta_gap.min((a.complex_energy() - e).norm());
            }
        }
        let c_max = self.coupling.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = frobenius(&self.unperturbed()).max(f64::MIN_POSITIVE);
        if delta_gap <= f64::EPSILON * scale {
            return Err(Error::ZeroGap);
        }
        Ok(SeparationReport {
            delta_gap,
            c_max,
            ratio: c_max / delta_gap,
        })
    }
}

/// On-disk form of [`NonHermitianHamiltonian`]. Matrices are flat row-major
/// lists of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianJson {
    #[serde(rename = "dim_A")]
    pub dim_a: usize,
    #[serde(rename = "dim_B")]
    pub dim_b: usize,
    #[serde(rename = "diag_A")]
    pub diag_a: Vec<DiagonalEntry>,
    #[serde(rename = "diag_B")]
    pub diag_b: Vec<f64>,
    #[serde(default)]
    pub coupling: Vec<[f64; 2]>,
    #[serde(rename = "intra_B", default)]
    pub intra_b: Vec<[f64; 2]>,
}

pub(crate) fn matrix_from_pairs(pairs: &[[f64; 2]], rows: usize, cols: usize, what: &str) -> Result<CMat> {
    if pairs.is_empty() {
        return Ok(CMat::zeros((rows, cols)));
    }
    if pairs.len() != rows * cols {
        return Err(Error::InvariantViolation(format!(
            "{what} must list {} [re, im] pairs ({rows}x{cols}), got {}",
            rows * cols,
            pairs.len()
        )));
    }
    Ok(CMat::from_shape_vec((rows, cols), pairs.iter().map(|p| c(p[0], p[1])).collect()).unwrap())
}

pub(crate) fn matrix_to_pairs(m: &CMat) -> Vec<[f64; 2]> {
    m.iter().map(|z| [z.re, z.im]).collect()
}

impl TryFrom<HamiltonianJson> for NonHermitianHamiltonian {
    type Error = Error;

    fn try_from(j: HamiltonianJson) -> Result<Self> {
        if j.diag_a.len() != j.dim_a {
            return Err(Error::InvariantViolation(format!(
                "diag_A has {} entries, dim_A = {}",
                j.diag_a.len(),
                j.dim_a
            )));
        }
        if j.diag_b.len() != j.dim_b {
            return Err(Error::InvariantViolation(format!(
                "diag_B has {} entries, dim_B = {}",
                j.diag_b.len(),
                j.dim_b
            )));
        }
        let coupling = matrix_from_pairs(&j.coupling, j.dim_a, j.dim_b, "coupling")?;
        let intra_b = matrix_from_pairs(&j.intra_b, j.dim_b, j.dim_b, "intra_B")?;
        NonHermitianHamiltonian::new(j.diag_a, j.diag_b, coupling, intra_b)
    }
}

impl From<NonHermitianHamiltonian> for HamiltonianJson {
    fn from(h: NonHermitianHamiltonian) -> Self {
        HamiltonianJson {
            dim_a: h.dim_a(),
            dim_b: h.dim_b(),
            coupling: matrix_to_pairs(&h.coupling),
            intra_b: matrix_to_pairs(&h.intra_b),
            diag_a: h.diag_a,
            diag_b: h.diag_b,
        }
    }
}

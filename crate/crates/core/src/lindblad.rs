//! Zero-temperature Markovian master equation over `R ⊕ G`.
//!
//! With rank-one jumps `X_kj = |j⟩⟨k|` (k in R, j in G) the generator is
//!
//! ```text
//! dρ/dt = −i[H_S, ρ] + Σ_kj γ_kj ( |j⟩⟨k| ρ |k⟩⟨j| − ½{|k⟩⟨k|, ρ} )
//! ```
//!
//! The R-block of this equation closes on itself and is generated by
//! `H = Π_R H_S Π_R − i Σ_kj (γ_kj/2) |k⟩⟨k|`, which [`OpenSystemModel::equivalence_check`]
//! verifies numerically.

use ndarray::s;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_density, DensityMatrix};
use crate::model::{matrix_from_pairs, DiagonalEntry, HamiltonianJson, NonHermitianHamiltonian};
use crate::numerics::{c, dagger, frobenius, CMat, I};
use crate::{Error, Result};

/// Tolerance on trace, Hermiticity and positivity of full density matrices.
pub const TAU_TRACE: f64 = 1e-8;

/// Decay channel `|k⟩ → |j⟩` with rate `γ`. Indices are zero-based over `R ⊕ G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jump {
    pub k: usize,
    pub j: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct OpenSystemModel {
    dim_r: usize,
    dim_g: usize,
    h_s: CMat,
    jumps: Vec<Jump>,
}

/// Density matrix over `R ⊕ G`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDensityMatrix(CMat);

impl FullDensityMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        crate::numerics::ensure_square_finite(&m)?;
        let herm = frobenius(&(&m - &dagger(&m)));
        if herm > TAU_TRACE {
            return Err(Error::InvariantViolation(format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr: f64 = m.diag().iter().map(|z| z.re).sum();
        if (tr - 1.0).abs() > TAU_TRACE {
            return Err(Error::InvariantViolation(format!("density matrix trace {tr} != 1")));
        }
        if m.diag().iter().any(|z| z.re < -TAU_TRACE) {
            return Err(Error::InvariantViolation(
                "density matrix has a negative population".into(),
            ));
        }
        Ok(FullDensityMatrix(m))
    }

    /// Embeds a density matrix on R into `R ⊕ G` with empty ground manifold.
    pub fn from_r_block(rho_r: &DensityMatrix, dim_g: usize) -> Result<Self> {
        Self::new(embed(rho_r.matrix(), dim_g))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().iter().map(|z| z.re).sum()
    }

    pub fn r_block(&self, dim_r: usize) -> CMat {
        self.0.slice(s![..dim_r, ..dim_r]).to_owned()
    }
}

fn embed(rho_r: &CMat, dim_g: usize) -> CMat {
    let n = rho_r.nrows();
    let mut m = CMat::zeros((n + dim_g, n + dim_g));
    m.slice_mut(s![..n, ..n]).assign(rho_r);
    m
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub dt: f64,
    /// Largest accepted local error estimate, relative to `max(1, ‖ρ‖_F)`.
    pub local_error_budget: f64,
    /// Steps between step-doubling error checks (the first step is always checked).
    pub check_every: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            dt: 1e-3,
            local_error_budget: 1e-10,
            check_every: 256,
        }
    }
}

impl OpenSystemModel {
    pub fn new(dim_r: usize, dim_g: usize, h_s: CMat, jumps: Vec<Jump>) -> Result<Self> {
        let n = dim_r + dim_g;
        if dim_r == 0 {
            return Err(Error::InvariantViolation("subspace R must be non-empty".into()));
        }
        if h_s.dim() != (n, n) {
            return Err(Error::InvariantViolation(format!(
                "H_S must be {n}x{n}, got {:?}",
                h_s.dim()
            )));
        }
        crate::numerics::ensure_finite(h_s.iter(), "H_S")?;
        let herm = frobenius(&(&h_s - &dagger(&h_s)));
        if herm > 1e-12 * frobenius(&h_s).max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "H_S must be Hermitian (defect {herm:.3e})"
            )));
        }
        let cross = h_s
            .slice(s![..dim_r, dim_r..])
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if cross > 0.0 {
            return Err(Error::InvariantViolation(format!(
                "H_S couples R and G (max element {cross:.3e})"
            )));
        }
        for jump in &jumps {
            if jump.k >= dim_r || jump.j < dim_r || jump.j >= n {
                return Err(Error::InvariantViolation(format!(
                    "jump {} -> {} must map R (0..{dim_r}) to G ({dim_r}..{n})",
                    jump.k, jump.j
                )));
            }
            if !jump.gamma.is_finite() || jump.gamma < 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "decay rate must be finite and >= 0, got {}",
                    jump.gamma
                )));
            }
        }
        Ok(OpenSystemModel {
            dim_r,
            dim_g,
            h_s,
            jumps,
        })
    }

    /// Master-equation model whose R-block reduction is `h`: the Hermitian part
    /// of `h` becomes `H_S` on R and every decaying level `k` gets one jump
    /// into the first ground state with `γ = 2 Δ_k sin φ_k`.
    pub fn from_hamiltonian(h: &NonHermitianHamiltonian, ground_energies: &[f64]) -> Result<Self> {
        let dim_g = ground_energies.len();
        if dim_g == 0 && h.diag_a().iter().any(|e| e.decay_rate() > 0.0) {
            return Err(Error::InvariantViolation(
                "decaying levels need at least one ground state".into(),
            ));
        }
        let dim_r = h.dim();
        let mut h_s = CMat::zeros((dim_r + dim_g, dim_r + dim_g));
        h_s.slice_mut(s![..dim_r, ..dim_r]).assign(&h.hermitianize());
        for (q, e) in ground_energies.iter().enumerate() {
            h_s[[dim_r + q, dim_r + q]] = c(*e, 0.0);
        }
        let jumps = h
            .diag_a()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.decay_rate() > 0.0)
            .map(|(k, e)| Jump {
                k,
                j: dim_r,
                gamma: 2.0 * e.decay_rate(),
            })
            .collect();
        Self::new(dim_r, dim_g, h_s, jumps)
    }

    pub fn dim_r(&self) -> usize {
        self.dim_r
    }

    pub fn dim_g(&self) -> usize {
        self.dim_g
    }

    pub fn dim(&self) -> usize {
        self.dim_r + self.dim_g
    }

    pub fn h_s(&self) -> &CMat {
        &self.h_s
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Total decay rate out of each R level, `Σ_j γ_kj`.
    pub fn total_rates(&self) -> Vec<f64> {
        let mut rates = vec![0.0; self.dim_r];
        for jump in &self.jumps {
            rates[jump.k] += jump.gamma;
        }
        rates
    }

    /// `dρ/dt` of the master equation.
    pub fn liouvillian_apply(&self, rho: &CMat) -> Result<CMat> {
        let n = self.dim();
        if rho.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rho.nrows(),
            });
        }
        Ok(self.generator(rho))
    }

    fn generator(&self, rho: &CMat) -> CMat {
        let n = self.dim();
        let comm = self.h_s.dot(rho) - rho.dot(&self.h_s);
        let mut out = comm.mapv(|z| -I * z);
        let rates = self.total_rates();
        // −½{|k⟩⟨k|, ρ} scales row k and column k by −γ_k/2
        for (k, &g) in rates.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for j in 0..n {
                out[[k, j]] -= rho[[k, j]] * (0.5 * g);
                out[[j, k]] -= rho[[j, k]] * (0.5 * g);
            }
        }
        for jump in &self.jumps {
            out[[jump.j, jump.j]] += rho[[jump.k, jump.k]] * jump.gamma;
        }
        out
    }

    fn rk4_step(&self, rho: &CMat, dt: f64) -> CMat {
        let k1 = self.generator(rho);
        let k2 = self.generator(&(rho + &k1.mapv(|z| z * (0.5 * dt))));
        let k3 = self.generator(&(rho + &k2.mapv(|z| z * (0.5 * dt))));
        let k4 = self.generator(&(rho + &k3.mapv(|z| z * dt)));
        let incr = (k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (dt / 6.0));
        let next = rho + &incr;
        (&next + &dagger(&next)).mapv(|z| z * 0.5)
    }

    /// Richardson estimate of the local error of one step of size `dt`.
    pub fn local_error_estimate(&self, rho: &CMat, dt: f64) -> f64 {
        let full = self.rk4_step(rho, dt);
        let half = self.rk4_step(&self.rk4_step(rho, 0.5 * dt), 0.5 * dt);
        frobenius(&(full - half)) * 16.0 / 15.0
    }

    /// Fixed-step RK4 from 0 to `t`; the step is shrunk so the grid lands on `t`.
    pub fn integrate(&self, rho0: &FullDensityMatrix, t: f64, opts: &IntegratorOptions) -> Result<FullDensityMatrix> {
        if rho0.0.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho0.0.nrows(),
            });
        }
        Ok(FullDensityMatrix(self.integrate_raw(&rho0.0, t, opts)?))
    }

    fn integrate_raw(&self, rho0: &CMat, t: f64, opts: &IntegratorOptions) -> Result<CMat> {
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {}", opts.dt)));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("t must be finite and >= 0, got {t}")));
        }
        let steps = (t / opts.dt).ceil() as usize;
        if steps == 0 {
            return Ok(rho0.clone());
        }
        let h = t / steps as f64;
        let every = opts.check_every.max(1);
        let mut rho = rho0.clone();
        for step in 0..steps {
            if step % every == 0 {
                let estimate = self.local_error_estimate(&rho, h);
                let budget = opts.local_error_budget * frobenius(&rho).max(1.0);
                if estimate > budget {
                    return Err(Error::StepTooLarge { estimate, budget });
                }
            }
            rho = self.rk4_step(&rho, h);
        }
        Ok(rho)
    }

    /// `H = Π_R H_S Π_R − i Σ_kj (γ_kj/2) |k⟩⟨k|`.
    pub fn reduce_to_r(&self) -> CMat {
        let mut h = self.h_s.slice(s![..self.dim_r, ..self.dim_r]).to_owned();
        for (k, g) in self.total_rates().into_iter().enumerate() {
            h[[k, k]] -= I * (0.5 * g);
        }
        h
    }

    /// Max Frobenius distance between the R-block of the master-equation
    /// solution and `e^(−iHt) ρ0 e^(iH†t)`, over `n_samples` evenly spaced
    /// times in `[0, t]`.
    pub fn equivalence_check(
        &self,
        rho0_r: &DensityMatrix,
        t: f64,
        n_samples: usize,
        opts: &IntegratorOptions,
    ) -> Result<f64> {
        if rho0_r.dim() != self.dim_r {
            return Err(Error::DimensionMismatch {
                expected: self.dim_r,
                found: rho0_r.dim(),
            });
        }
        let h = self.reduce_to_r();
        let n_samples = n_samples.max(2);
        let mut rho = embed(rho0_r.matrix(), self.dim_g);
        let mut worst: f64 = 0.0;
        let mut t_prev = 0.0;
        for k in 0..n_samples {
            let t_k = t * k as f64 / (n_samples - 1) as f64;
            rho = self.integrate_raw(&rho, t_k - t_prev, opts)?;
            t_prev = t_k;
            let exact = propagate_density(&h, rho0_r, t_k)?;
            let block = rho.slice(s![..self.dim_r, ..self.dim_r]).to_owned();
            worst = worst.max(frobenius(&(block - exact.matrix())));
        }
        Ok(worst)
    }

    /// `(tr Π_R ρ, tr Π_G ρ)`.
    pub fn population_split(&self, rho: &CMat) -> (f64, f64) {
        let pr = (0..self.dim_r).map(|k| rho[[k, k]].re).sum();
        let pg = (self.dim_r..self.dim()).map(|k| rho[[k, k]].re).sum();
        (pr, pg)
    }

    /// `Σ_kj γ_kj ρ_kk`, the rate at which the ground manifold is fed.
    pub fn ground_feeding_rate(&self, rho: &CMat) -> f64 {
        self.jumps
            .iter()
            .map(|jump| jump.gamma * rho[[jump.k, jump.k]].re)
            .sum()
    }
}

/// JSON form: the Hamiltonian schema plus the ground manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenSystemJson {
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
    #[serde(rename = "dim_G", default = "one")]
    pub dim_g: usize,
    /// One-based: `k` in `1..=N`, `j` in `N+1..=N+Q`. Omitted: derived from the
    /// decay rates of `diag_A`.
    #[serde(default)]
    pub jumps: Option<Vec<JumpJson>>,
    #[serde(rename = "diag_G", default)]
    pub diag_g: Option<Vec<f64>>,
    /// Coherent R–G couplings, flat `N × Q`; must be zero.
    #[serde(rename = "coupling_RG", default)]
    pub coupling_rg: Vec<[f64; 2]>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpJson {
    pub k: usize,
    pub j: usize,
    pub gamma: f64,
}

impl OpenSystemJson {
    pub fn hamiltonian(&self) -> Result<NonHermitianHamiltonian> {
        NonHermitianHamiltonian::try_from(HamiltonianJson {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            diag_a: self.diag_a.clone(),
            diag_b: self.diag_b.clone(),
            coupling: self.coupling.clone(),
            intra_b: self.intra_b.clone(),
        })
    }
}

impl TryFrom<OpenSystemJson> for OpenSystemModel {
    type Error = Error;

    fn try_from(j: OpenSystemJson) -> Result<Self> {
        let h = j.hamiltonian()?;
        let ground = j.diag_g.clone().unwrap_or_else(|| vec![0.0; j.dim_g]);
        if ground.len() != j.dim_g {
            return Err(Error::InvariantViolation(format!(
                "diag_G has {} entries, dim_G = {}",
                ground.len(),
                j.dim_g
            )));
        }
        let mut model = OpenSystemModel::from_hamiltonian(&h, &ground)?;
        let (n, q) = (h.dim(), j.dim_g);
        let cross = matrix_from_pairs(&j.coupling_rg, n, q, "coupling_RG")?;
        let mut h_s = model.h_s.clone();
        h_s.slice_mut(s![..n, n..]).assign(&cross);
        h_s.slice_mut(s![n.., ..n]).assign(&dagger(&cross));
        let jumps = match j.jumps {
            None => model.jumps.clone(),
            Some(list) => list
                .iter()
                .map(|jj| {
                    if jj.k == 0 || jj.j == 0 {
                        return Err(Error::InvariantViolation("jump indices are one-based".into()));
                    }
                    Ok(Jump {
                        k: jj.k - 1,
                        j: jj.j - 1,
                        gamma: jj.gamma,
                    })
                })
                .collect::<Result<_>>()?,
        };
        model = OpenSystemModel::new(n, q, h_s, jumps)?;
        Ok(model)
    }
}

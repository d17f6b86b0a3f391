//! Rayleigh–Schrödinger corrections for `H = H0 + H_I` with non-Hermitian `H0`.
//!
//! The unperturbed problem has left eigenvectors `⟨u_k|` and right
//! eigenvectors `|v_k⟩` that are not adjoints of each other, so every bra of
//! the textbook expansion is replaced by a left eigenvector and matrix
//! elements read `V_jk = ⟨u_j|H_I|v_k⟩`. Block **A** is already diagonal; a
//! non-diagonal **B** (intra-B couplings) is diagonalised first, so `E_n` are
//! the eigenvalues of **B** and the couplings are expressed in its eigenbasis.
//!
//! Odd orders vanish for eigenvalues because `H_I` only connects **A** with
//! **B**: the second-order eigenvalue error is `O((c/δ)⁴)`.

use serde::Serialize;

use crate::model::{NonHermitianHamiltonian, SeparationReport};
use crate::numerics::{c, eig_general, frobenius, CMat, C64, TAU_DEGEN};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct PerturbativeSpectrum {
    /// Order of the eigenvalue corrections (1 or 2).
    pub order: u8,
    /// Order of the eigenvector corrections (1 or 2).
    pub vector_order: u8,
    /// Corrected **A**-branch eigenvalues.
    pub alpha: Vec<C64>,
    /// Corrected **B**-branch eigenvalues.
    pub beta: Vec<C64>,
    /// Columns `|α_m^R⟩`.
    pub right_alpha: CMat,
    /// Rows `⟨α_m^L|`.
    pub left_alpha: CMat,
    /// Columns `|β_n^R⟩`.
    pub right_beta: CMat,
    /// Rows `⟨β_n^L|`.
    pub left_beta: CMat,
    pub separation: SeparationReport,
}

impl PerturbativeSpectrum {
    /// All eigenvalues, **A** branch first.
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.alpha.iter().chain(self.beta.iter()).copied().collect()
    }

    /// Right vectors as columns, **A** branch first.
    pub fn right(&self) -> CMat {
        ndarray::concatenate![ndarray::Axis(1), self.right_alpha, self.right_beta]
    }

    /// Left vectors as rows, **A** branch first.
    pub fn left(&self) -> CMat {
        ndarray::concatenate![ndarray::Axis(0), self.left_alpha, self.left_beta]
    }
}

/// Eigen-decomposition of `H0` together with `V_jk = ⟨u_j|H_I|v_k⟩`.
struct Unperturbed {
    dim_a: usize,
    energies: Vec<C64>,
    right: CMat,
    left: CMat,
    v: CMat,
    separation: SeparationReport,
}

impl Unperturbed {
    fn new(h: &NonHermitianHamiltonian) -> Result<Self> {
        let separation = h.separation()?;
        let (m, n) = (h.dim_a(), h.dim());
        let mut energies: Vec<C64> = h.diag_a().iter().map(|e| e.complex_energy()).collect();
        let mut right = CMat::eye(n);
        let mut left = CMat::eye(n);
        if h.intra_b().iter().all(|z| *z == c(0.0, 0.0)) {
            energies.extend(h.diag_b().iter().map(|e| c(*e, 0.0)));
        } else {
            let spec = eig_general(&h.b_block())?;
            // Hermitian block: eigenvalues are real up to rounding
            energies.extend(spec.eigenvalues.iter().map(|z| c(z.re, 0.0)));
            right.slice_mut(ndarray::s![m.., m..]).assign(&spec.right);
            left.slice_mut(ndarray::s![m.., m..]).assign(&spec.left);
        }
        let scale = frobenius(&h.unperturbed()).max(f64::MIN_POSITIVE);
        for a in &energies[..m] {
            for b in &energies[m..] {
                if (a - b).norm() <= f64::EPSILON * scale {
                    return Err(Error::ZeroGap);
                }
            }
        }
        let v = left.dot(&h.interaction()).dot(&right);
        Ok(Unperturbed {
            dim_a: m,
            energies,
            right,
            left,
            v,
            separation,
        })
    }

    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn require_nondegenerate(&self) -> Result<()> {
        let scale = self
            .energies
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let threshold = TAU_DEGEN * scale;
        let mut gap = f64::INFINITY;
        for i in 0..self.dim() {
            for j in i + 1..self.dim() {
                gap = gap.min((self.energies[i] - self.energies[j]).norm());
            }
        }
        if gap <= threshold {
            return Err(Error::NearDegenerateSpectrum { gap, threshold });
        }
        Ok(())
    }

    /// `V_jk / (e_k − e_j)`, zero whenever the matrix element vanishes.
    fn ratio(&self, num: C64, k: usize, j: usize) -> C64 {
        if num == c(0.0, 0.0) {
            c(0.0, 0.0)
        } else {
            num / (self.energies[k] - self.energies[j])
        }
    }

    fn eigenvalue(&self, k: usize, order: u8) -> C64 {
        let mut e = self.energies[k] + self.v[[k, k]];
        if order >= 2 {
            for j in (0..self.dim()).filter(|&j| j != k) {
                e += self.ratio(self.v[[j, k]] * self.v[[k, j]], k, j);
            }
        }
        e
    }

    /// Expansion coefficients of the corrected right (`|v_k⟩ = Σ_j r_j |v_j⁰⟩`)
    /// and left (`⟨u_k| = Σ_j l_j ⟨u_j⁰|`) vectors.
    fn vector_coefficients(&self, k: usize, order: u8) -> (Vec<C64>, Vec<C64>) {
        let n = self.dim();
        let v = &self.v;
        let mut r = vec![c(0.0, 0.0); n];
        let mut l = vec![c(0.0, 0.0); n];
        r[k] = c(1.0, 0.0);
        l[k] = c(1.0, 0.0);
        let others = || (0..n).filter(move |&j| j != k);
        for j in others() {
            r[j] += self.ratio(v[[j, k]], k, j);
            l[j] += self.ratio(v[[k, j]], k, j);
        }
        if order >= 2 {
            let mut norm_term = c(0.0, 0.0);
            for m in others() {
                let dm = self.energies[k] - self.energies[m];
                for nn in others() {
                    let dn = self.energies[k] - self.energies[nn];
                    let rn = v[[m, nn]] * v[[nn, k]];
                    if rn != c(0.0, 0.0) {
                        r[m] += rn / (dm * dn);
                    }
                    let ln = v[[k, nn]] * v[[nn, m]];
                    if ln != c(0.0, 0.0) {
                        l[m] += ln / (dn * dm);
                    }
                }
                let rk = v[[k, k]] * v[[m, k]];
                if rk != c(0.0, 0.0) {
                    r[m] -= rk / (dm * dm);
                }
                let lk = v[[k, k]] * v[[k, m]];
                if lk != c(0.0, 0.0) {
                    l[m] -= lk / (dm * dm);
                }
                let s = v[[k, m]] * v[[m, k]];
                if s != c(0.0, 0.0) {
                    norm_term += s / (dm * dm);
                }
            }
            r[k] -= norm_term * 0.5;
            l[k] -= norm_term * 0.5;
        }
        (r, l)
    }

    fn spectrum(&self, order: u8, vector_order: u8) -> PerturbativeSpectrum {
        let (m, n) = (self.dim_a, self.dim());
        let mut right = CMat::zeros((n, n));
        let mut left = CMat::zeros((n, n));
        for k in 0..n {
            let (r, l) = self.vector_coefficients(k, vector_order);
            let r = ndarray::Array1::from(r);
            let l = ndarray::Array1::from(l);
            right.column_mut(k).assign(&self.right.dot(&r));
            left.row_mut(k).assign(&l.dot(&self.left));
        }
        let values: Vec<C64> = (0..n).map(|k| self.eigenvalue(k, order)).collect();
        PerturbativeSpectrum {
            order,
            vector_order,
            alpha: values[..m].to_vec(),
            beta: values[m..].to_vec(),
            right_alpha: right.slice(ndarray::s![.., ..m]).to_owned(),
            left_alpha: left.slice(ndarray::s![..m, ..]).to_owned(),
            right_beta: right.slice(ndarray::s![.., m..]).to_owned(),
            left_beta: left.slice(ndarray::s![m.., ..]).to_owned(),
            separation: self.separation,
        }
    }
}

/// First-order vectors; eigenvalues stay at the unperturbed diagonal.
pub fn correct_first_order(h: &NonHermitianHamiltonian) -> Result<PerturbativeSpectrum> {
    Ok(Unperturbed::new(h)?.spectrum(1, 1))
}

/// Second-order eigenvalues `β_n = E_n + Σ_m |c_nm|²/(E_n − Δ_m e^(−iφ_m))`
/// (and the analogue for `α_m`), with first-order vectors.
pub fn correct_second_order_eigenvalues(h: &NonHermitianHamiltonian) -> Result<PerturbativeSpectrum> {
    Ok(Unperturbed::new(h)?.spectrum(2, 1))
}

/// Second-order eigenvalues and vectors. Needs a non-degenerate `H0`.
pub fn correct_second_order_vectors(h: &NonHermitianHamiltonian) -> Result<PerturbativeSpectrum> {
    let u = Unperturbed::new(h)?;
    u.require_nondegenerate()?;
    Ok(u.spectrum(2, 2))
}

/// `Im β_n = −Σ_m |c_nm|² Δ_m sin φ_m / |E_n − Δ_m e^(−iφ_m)|²` for each **B** state.
pub fn effective_decay_rates(h: &NonHermitianHamiltonian) -> Result<Vec<f64>> {
    let u = Unperturbed::new(h)?;
    let m = u.dim_a;
    let rates = (m..u.dim())
        .map(|n| {
            let e_n = u.energies[n].re;
            -h.diag_a()
                .iter()
                .enumerate()
                .map(|(a, entry)| {
                    let c2 = u.v[[a, n]].norm_sqr();
                    let z = entry.complex_energy();
                    // −Im z = Δ sin φ, exactly zero at φ ∈ {0, π}
                    c2 * (-z.im) / (c(e_n, 0.0) - z).norm_sqr()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(rates)
}

/// Exact eigenvalues paired with first- and second-order predictions.
#[derive(Debug, Clone, Serialize)]
pub struct EigenComparison {
    /// `alpha_m` or `beta_n`, one-based.
    pub label: String,
    pub exact: C64,
    pub first_order: C64,
    pub second_order: C64,
    pub first_order_error: f64,
    pub second_order_error: f64,
    /// Closed-form `Im β_n`; `None` on the **A** branch.
    pub effective_decay: Option<f64>,
}

/// Compares orders 1 and 2 with `eig_general`, matching each perturbative
/// eigenvalue to the nearest unused exact one.
pub fn compare_with_exact(h: &NonHermitianHamiltonian) -> Result<Vec<EigenComparison>> {
    let first = correct_first_order(h)?;
    let second = correct_second_order_eigenvalues(h)?;
    let decay = effective_decay_rates(h)?;
    let exact = eig_general(&h.assemble())?.eigenvalues;
    let mut used = vec![false; exact.len()];
    let m = h.dim_a();
    let rows = second
        .eigenvalues()
        .into_iter()
        .zip(first.eigenvalues())
        .enumerate()
        .map(|(k, (s, f))| {
            let best = (0..exact.len())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| (exact[a] - s).norm().total_cmp(&(exact[b] - s).norm()))
                .unwrap();
            used[best] = true;
            let x = exact[best];
            EigenComparison {
                label: if k < m {
                    format!("alpha_{}", k + 1)
                } else {
                    format!("beta_{}", k - m + 1)
                },
                exact: x,
                first_order: f,
                second_order: s,
                first_order_error: (f - x).norm(),
                second_order_error: (s - x).norm(),
                effective_decay: (k >= m).then(|| decay[k - m]),
            }
        })
        .collect();
    Ok(rows)
}

//! Extended-Zeno indicators built from paired trajectories.
//!
//! `ψ` evolves under the full `H`, `ψ0` under the block-diagonal `H0` and `ζ`
//! under the Hermitian part `H̃ = (H + H†)/2`. All three start from the same
//! state. The minimum over `[0, T]` is taken over a uniform grid that includes
//! both endpoints.

use std::f64::consts::TAU;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::{projected_overlap, StateVector, StepPropagator};
use crate::model::NonHermitianHamiltonian;
use crate::numerics::{ensure_square_finite, CMat, CVec, C64};
use crate::{Error, Result};

/// `T·ε = 2π`.
pub const DEFAULT_HORIZON: f64 = TAU;
pub const DEFAULT_N_TIME: usize = 2001;
/// Below this a B-subspace population counts as vanished.
pub const B_POPULATION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZenoThresholds {
    /// `F` at or above this is classified as extended Zeno dynamics.
    pub ezd: f64,
    /// `F̃` strictly below this is anti-Zeno-leaning.
    pub anti_zeno: f64,
}

impl Default for ZenoThresholds {
    fn default() -> Self {
        ZenoThresholds {
            ezd: 0.95,
            anti_zeno: -0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZenoClass {
    #[serde(rename = "EZD")]
    Ezd,
    #[serde(rename = "anti-Zeno-leaning")]
    AntiZenoLeaning,
    #[serde(rename = "neutral")]
    Neutral,
}

impl ZenoClass {
    pub fn classify(f: f64, f_tilde: f64, th: &ZenoThresholds) -> Self {
        if f >= th.ezd {
            ZenoClass::Ezd
        } else if f_tilde < th.anti_zeno {
            ZenoClass::AntiZenoLeaning
        } else {
            ZenoClass::Neutral
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ZenoClass::Ezd => "EZD",
            ZenoClass::AntiZenoLeaning => "anti-Zeno-leaning",
            ZenoClass::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorConfig {
    horizon: f64,
    n_time: usize,
    initial_state: StateVector,
    pub thresholds: ZenoThresholds,
}

impl IndicatorConfig {
    /// The initial state is normalised here.
    pub fn new(horizon: f64, n_time: usize, initial_state: StateVector) -> Result<Self> {
        if !horizon.is_finite() || horizon < 0.0 {
            return Err(Error::InvalidInput(format!(
                "horizon must be finite and >= 0, got {horizon}"
            )));
        }
        if n_time < 2 {
            return Err(Error::InvalidInput(format!("n_time must be >= 2, got {n_time}")));
        }
        Ok(IndicatorConfig {
            horizon,
            n_time,
            initial_state: initial_state.normalized()?,
            thresholds: ZenoThresholds::default(),
        })
    }

    /// Default horizon and grid, starting in basis state `k` (zero-based).
    pub fn with_basis_state(dim: usize, k: usize) -> Result<Self> {
        Self::new(DEFAULT_HORIZON, DEFAULT_N_TIME, StateVector::basis(dim, k)?)
    }

    pub fn with_thresholds(mut self, thresholds: ZenoThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn dt(&self) -> f64 {
        self.horizon / (self.n_time - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_time)
            .map(|k| {
                if k + 1 == self.n_time {
                    self.horizon
                } else {
                    k as f64 * dt
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityTrace {
    pub times: Vec<f64>,
    /// Integrand of `F`, normalised by the initial B populations.
    pub f_raw: Vec<f64>,
    /// Integrand of `F̄`, normalised by the time-`t` B populations; `None`
    /// when a population fell below [`B_POPULATION_FLOOR`].
    pub f_norm: Option<Vec<f64>>,
    /// Same functional as `f_raw` with `ζ` in place of `ψ`.
    pub f_tilde_integrand: Vec<f64>,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_bar")]
    pub f_bar: Result<f64, BSupportLoss>,
    #[serde(rename = "F_tilde")]
    pub f_tilde: f64,
    pub masked: f64,
    pub zeno_class: ZenoClass,
}

/// Where `F̄` became undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BSupportLoss {
    pub time: f64,
    pub population: f64,
}

impl From<BSupportLoss> for Error {
    fn from(l: BSupportLoss) -> Self {
        Error::BSupportVanished {
            time: l.time,
            population: l.population,
        }
    }
}

/// `𝓗(x)`, with `𝓗(0) = 0`.
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// All indicators for `h` in one pass.
pub fn evaluate(h: &NonHermitianHamiltonian, cfg: &IndicatorConfig) -> Result<FidelityTrace> {
    evaluate_matrices(&h.assemble(), &h.unperturbed(), &h.hermitianize(), h.b_range(), cfg)
}

pub fn fidelity_f(h: &NonHermitianHamiltonian, cfg: &IndicatorConfig) -> Result<f64> {
    check_model(h, cfg)?;
    let f = Functional::new(h.b_range(), cfg)?;
    let psi0 = trajectory(&h.unperturbed(), cfg)?;
    let psi = trajectory(&h.assemble(), cfg)?;
    Ok(min(&f.raw(&psi0, &psi)))
}

/// Errors with [`Error::BSupportVanished`] if a B population drops below the floor.
pub fn fidelity_f_bar(h: &NonHermitianHamiltonian, cfg: &IndicatorConfig) -> Result<f64> {
    check_model(h, cfg)?;
    let f = Functional::new(h.b_range(), cfg)?;
    let psi0 = trajectory(&h.unperturbed(), cfg)?;
    let psi = trajectory(&h.assemble(), cfg)?;
    Ok(min(&f.normalised(&psi0, &psi, cfg)?))
}

pub fn fidelity_f_tilde(h: &NonHermitianHamiltonian, cfg: &IndicatorConfig) -> Result<f64> {
    Ok(evaluate(h, cfg)?.f_tilde)
}

/// `F·𝓗(F̃)`.
pub fn masked_confinement(h: &NonHermitianHamiltonian, cfg: &IndicatorConfig) -> Result<f64> {
    Ok(evaluate(h, cfg)?.masked)
}

/// Matrix-level entry point: `h` full generator, `h0` its block-diagonal
/// part, `h_tilde` its Hermitian part, `b` the index range of **B**.
pub fn evaluate_matrices(
    h: &CMat,
    h0: &CMat,
    h_tilde: &CMat,
    b: Range<usize>,
    cfg: &IndicatorConfig,
) -> Result<FidelityTrace> {
    let n = cfg.initial_state.dim();
    for m in [h, h0, h_tilde] {
        let dim = ensure_square_finite(m)?;
        if dim != n {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: n,
            });
        }
    }
    if b.end > n || b.is_empty() {
        return Err(Error::InvalidInput(format!("B range {b:?} invalid for dimension {n}")));
    }
    let f = Functional::new(b, cfg)?;
    let psi0 = trajectory(h0, cfg)?;
    let psi = trajectory(h, cfg)?;
    let zeta = trajectory(h_tilde, cfg)?;

    let f_raw = f.raw(&psi0, &psi);
    let f_tilde_integrand = f.raw(&psi0, &zeta);
    let (f_norm, f_bar) = match f.normalised(&psi0, &psi, cfg) {
        Ok(v) => {
            let m = min(&v);
            (Some(v), Ok(m))
        }
        Err(Error::BSupportVanished { time, population }) => (None, Err(BSupportLoss { time, population })),
        Err(e) => return Err(e),
    };
    let big_f = min(&f_raw);
    let f_tilde = big_f - min(&f_tilde_integrand);
    Ok(FidelityTrace {
        times: cfg.times(),
        f_raw,
        f_norm,
        f_tilde_integrand,
        f: big_f,
        f_bar,
        f_tilde,
        masked: big_f * heaviside(f_tilde),
        zeno_class: ZenoClass::classify(big_f, f_tilde, &cfg.thresholds),
    })
}

fn check_model(h: &NonHermitianHamiltonian, cfg: &IndicatorConfig) -> Result<()> {
    if h.dim() != cfg.initial_state.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: cfg.initial_state.dim(),
        });
    }
    Ok(())
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// States on the configuration grid.
fn trajectory(h: &CMat, cfg: &IndicatorConfig) -> Result<Vec<CVec>> {
    let step = StepPropagator::new(h, cfg.dt())?;
    let n = h.nrows();
    // row-major copy; plain loops beat ndarray's dot at these sizes
    let u: Vec<C64> = step.matrix().iter().copied().collect();
    let mut out = Vec::with_capacity(cfg.n_time);
    let mut psi = cfg.initial_state.amplitudes().clone();
    out.push(psi.clone());
    for _ in 1..cfg.n_time {
        let next = CVec::from_shape_fn(n, |i| {
            let row = &u[i * n..(i + 1) * n];
            row.iter().zip(psi.iter()).map(|(a, b)| a * b).sum()
        });
        psi = next;
        out.push(psi.clone());
    }
    Ok(out)
}

struct Functional {
    b: Range<usize>,
    /// `sqrt(p0(0)·p(0))`; both trajectories start from the same state.
    denom0: f64,
}

impl Functional {
    fn new(b: Range<usize>, cfg: &IndicatorConfig) -> Result<Self> {
        let p = cfg.initial_state.population(b.clone());
        if p < B_POPULATION_FLOOR {
            return Err(Error::EmptyBSupport { population: p });
        }
        Ok(Functional { b, denom0: p })
    }

    fn overlap_sqr(&self, a: &CVec, b: &CVec) -> f64 {
        projected_overlap(a, b, self.b.clone()).norm_sqr()
    }

    fn population(&self, a: &CVec) -> f64 {
        a.slice(ndarray::s![self.b.clone()]).iter().map(|z| z.norm_sqr()).sum()
    }

    fn raw(&self, psi0: &[CVec], psi: &[CVec]) -> Vec<f64> {
        psi0.iter()
            .zip(psi)
            .map(|(a, b)| (self.overlap_sqr(a, b) / self.denom0).clamp(0.0, 1.0))
            .collect()
    }

    fn normalised(&self, psi0: &[CVec], psi: &[CVec], cfg: &IndicatorConfig) -> Result<Vec<f64>> {
        let times = cfg.times();
        psi0.iter()
            .zip(psi)
            .zip(times)
            .map(|((a, b), t)| {
                let (pa, pb) = (self.population(a), self.population(b));
                let p = pa.min(pb);
                if p < B_POPULATION_FLOOR {
                    return Err(Error::BSupportVanished { time: t, population: p });
                }
                Ok((self.overlap_sqr(a, b) / (pa * pb).sqrt()).clamp(0.0, 1.0))
            })
            .collect()
    }
}

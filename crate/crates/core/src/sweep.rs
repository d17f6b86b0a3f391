//! `(Δ, φ)` grid evaluation of the indicators.
//!
//! Cells are independent; results are assembled by position, so the grid is
//! the same whichever [`Execution`] mode runs it. A failing cell never aborts
//! the sweep: its values become NaN and the failure is recorded.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::indicators::{evaluate, FidelityTrace, IndicatorConfig};
use crate::model::NonHermitianHamiltonian;
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize, scale: AxisScale) -> Result<Self> {
        let axis = Axis { min, max, n, scale };
        axis.validate()?;
        Ok(axis)
    }

    pub fn linear(min: f64, max: f64, n: usize) -> Result<Self> {
        Self::new(min, max, n, AxisScale::Linear)
    }

    pub fn log(min: f64, max: f64, n: usize) -> Result<Self> {
        Self::new(min, max, n, AxisScale::Log)
    }

    /// `Δ/ε ∈ [0.1, 100]`, 121 log-spaced points.
    pub fn default_delta() -> Self {
        Axis {
            min: 0.1,
            max: 100.0,
            n: 121,
            scale: AxisScale::Log,
        }
    }

    /// `φ ∈ [0, π]`, 97 points.
    pub fn default_phi() -> Self {
        Axis {
            min: 0.0,
            max: std::f64::consts::PI,
            n: 97,
            scale: AxisScale::Linear,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("axis needs at least one point".into()));
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::InvalidInput(format!(
                "invalid axis range [{}, {}]",
                self.min, self.max
            )));
        }
        if self.scale == AxisScale::Log && self.min <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "log axis needs a positive range, got min {}",
                self.min
            )));
        }
        Ok(())
    }

    /// Grid points; both endpoints are hit exactly.
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i + 1 == self.n {
                    return self.max;
                }
                let s = i as f64 / last;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * s,
                    AxisScale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * s).exp(),
                }
            })
            .collect()
    }
}

/// Hamiltonian builder with `(Δ, φ)` slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    ThreeState {
        g1: f64,
        g2: f64,
        epsilon: f64,
        omega: f64,
    },
    /// Every **A** entry takes the cell's `(Δ, φ)`.
    Model {
        hamiltonian: NonHermitianHamiltonian,
    },
}

impl Family {
    /// `g1 = g2 = g`, `ε = 1`, `Ω = 0.1`.
    pub fn three_state(g: f64) -> Self {
        Family::ThreeState {
            g1: g,
            g2: g,
            epsilon: 1.0,
            omega: 0.1,
        }
    }

    pub fn build(&self, delta: f64, phi: f64) -> Result<NonHermitianHamiltonian> {
        match self {
            Family::ThreeState { g1, g2, epsilon, omega } => {
                NonHermitianHamiltonian::three_state(delta, phi, *g1, *g2, *epsilon, *omega)
            }
            Family::Model { hamiltonian } => hamiltonian.with_decaying_entries(delta, phi),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::ThreeState { .. } => 3,
            Family::Model { hamiltonian } => hamiltonian.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Indicator {
    #[serde(rename = "F")]
    F,
    #[serde(rename = "F_bar")]
    FBar,
    #[serde(rename = "F_tilde")]
    FTilde,
    #[serde(rename = "masked")]
    Masked,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [Indicator::F, Indicator::FBar, Indicator::FTilde, Indicator::Masked];

    pub fn name(&self) -> &'static str {
        match self {
            Indicator::F => "F",
            Indicator::FBar => "F_bar",
            Indicator::FTilde => "F_tilde",
            Indicator::Masked => "masked",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Indicator::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown indicator {s:?}")))
    }

    fn pick(&self, tr: &FidelityTrace) -> f64 {
        match self {
            Indicator::F => tr.f,
            Indicator::FBar => tr.f_bar.map_or(f64::NAN, |v| v),
            Indicator::FTilde => tr.f_tilde,
            Indicator::Masked => tr.masked,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub delta_axis: Axis,
    pub phi_axis: Axis,
    pub family: Family,
    pub indicator_cfg: IndicatorConfig,
    /// Sorted and de-duplicated by [`SweepSpec::new`].
    pub which: Vec<Indicator>,
}

impl SweepSpec {
    pub fn new(
        delta_axis: Axis,
        phi_axis: Axis,
        family: Family,
        indicator_cfg: IndicatorConfig,
        mut which: Vec<Indicator>,
    ) -> Result<Self> {
        delta_axis.validate()?;
        phi_axis.validate()?;
        if which.is_empty() {
            return Err(Error::InvalidInput("no indicators requested".into()));
        }
        if family.dim() != indicator_cfg.initial_state().dim() {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                found: indicator_cfg.initial_state().dim(),
            });
        }
        which.sort();
        which.dedup();
        Ok(SweepSpec {
            delta_axis,
            phi_axis,
            family,
            indicator_cfg,
            which,
        })
    }

    /// SHA-256 of the canonical JSON echo of this spec.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("sweep spec serialises");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellError {
    pub delta_index: usize,
    pub phi_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    /// Output depends on the configuration only: no seeds, positional assembly.
    pub deterministic: bool,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub spec: SweepSpec,
    pub delta: Vec<f64>,
    pub phi: Vec<f64>,
    /// One `n_delta × n_phi` array per entry of `spec.which`.
    pub values: Vec<Array2<f64>>,
    pub errors: Vec<CellError>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndicatorSummary {
    pub indicator: Indicator,
    pub min: f64,
    pub max: f64,
    pub n_nan: usize,
}

impl SweepGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.delta.len(), self.phi.len())
    }

    pub fn get(&self, which: Indicator) -> Option<&Array2<f64>> {
        self.spec
            .which
            .iter()
            .position(|w| *w == which)
            .map(|k| &self.values[k])
    }

    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }

    /// Row-major cell error mask.
    pub fn error_mask(&self) -> Array2<bool> {
        let mut mask = Array2::from_elem(self.shape(), false);
        for e in &self.errors {
            mask[[e.delta_index, e.phi_index]] = true;
        }
        mask
    }

    /// Min/max over the non-NaN cells of each indicator.
    pub fn summary(&self) -> Vec<IndicatorSummary> {
        self.spec
            .which
            .iter()
            .zip(&self.values)
            .map(|(w, a)| {
                let finite = a.iter().copied().filter(|v| !v.is_nan());
                let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                IndicatorSummary {
                    indicator: *w,
                    min,
                    max,
                    n_nan: a.iter().filter(|v| v.is_nan()).count(),
                }
            })
            .collect()
    }

    /// Header `delta,phi,<indicators>` plus `error` when any cell failed.
    /// Rows run Δ-outer, φ-inner; floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,phi");
        for w in &self.spec.which {
            out.push(',');
            out.push_str(w.name());
        }
        let mask = self.has_errors().then(|| self.error_mask());
        if mask.is_some() {
            out.push_str(",error");
        }
        out.push('\n');
        for (i, d) in self.delta.iter().enumerate() {
            for (j, p) in self.phi.iter().enumerate() {
                write!(out, "{d:.16e},{p:.16e}").unwrap();
                for a in &self.values {
                    write!(out, ",{:.16e}", a[[i, j]]).unwrap();
                }
                if let Some(m) = &mask {
                    write!(out, ",{}", u8::from(m[[i, j]])).unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        v["values"] = self
            .spec
            .which
            .iter()
            .zip(&self.values)
            .map(|(w, a)| {
                let rows: Vec<Vec<f64>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
                (w.name().to_string(), serde_json::to_value(rows).unwrap())
            })
            .collect::<serde_json::Map<_, _>>()
            .into();
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Evaluates every cell. Only an invalid spec is an error; cell failures end
/// up in [`SweepGrid::errors`].
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepGrid> {
    spec.delta_axis.validate()?;
    spec.phi_axis.validate()?;
    let delta = spec.delta_axis.points();
    let phi = spec.phi_axis.points();
    let (nd, np) = (delta.len(), phi.len());
    let cells = par::map_indexed(nd * np, exec == Execution::Parallel, |k| {
        let (i, j) = (k / np, k % np);
        evaluate_cell(spec, delta[i], phi[j])
    });

    let mut values = vec![Array2::from_elem((nd, np), f64::NAN); spec.which.len()];
    let mut errors = Vec::new();
    for (k, cell) in cells.into_iter().enumerate() {
        let (i, j) = (k / np, k % np);
        match cell {
            Ok(tr) => {
                for (a, w) in values.iter_mut().zip(&spec.which) {
                    a[[i, j]] = w.pick(&tr);
                }
                if let Err(loss) = tr.f_bar {
                    if spec.which.contains(&Indicator::FBar) {
                        errors.push(CellError {
                            delta_index: i,
                            phi_index: j,
                            message: Error::from(loss).to_string(),
                        });
                    }
                }
            }
            Err(e) => errors.push(CellError {
                delta_index: i,
                phi_index: j,
                message: e.to_string(),
            }),
        }
    }
    Ok(SweepGrid {
        spec: spec.clone(),
        delta,
        phi,
        values,
        errors,
        provenance: Provenance {
            config_hash: spec.config_hash(),
            deterministic: true,
            version: env!("CARGO_PKG_VERSION"),
        },
    })
}

/// Single-point evaluation, exactly as performed for a sweep cell.
pub fn evaluate_cell(spec: &SweepSpec, delta: f64, phi: f64) -> Result<FidelityTrace> {
    evaluate(&spec.family.build(delta, phi)?, &spec.indicator_cfg)
}

pub fn export_csv(grid: &SweepGrid, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(grid.to_csv().as_bytes())?;
    Ok(())
}

pub fn export_json(grid: &SweepGrid, path: &Path) -> Result<()> {
    std::fs::write(path, grid.to_json()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StateVector;
    use crate::indicators::DEFAULT_HORIZON;
    use crate::model::DiagonalEntry;
    use crate::numerics::{c, CMat};
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn small_cfg() -> IndicatorConfig {
        IndicatorConfig::new(DEFAULT_HORIZON, 401, StateVector::basis(3, 1).unwrap()).unwrap()
    }

    fn spec(nd: usize, np: usize) -> SweepSpec {
        SweepSpec::new(
            Axis::log(0.5, 50.0, nd).unwrap(),
            Axis::linear(0.0, PI, np).unwrap(),
            Family::three_state(0.2),
            small_cfg(),
            Indicator::ALL.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn axis_points() {
        assert_eq!(Axis::linear(0.0, PI, 1).unwrap().points(), vec![0.0]);
        let lin = Axis::linear(0.0, PI, 5).unwrap().points();
        assert_eq!(lin[0], 0.0);
        assert_eq!(lin[2], FRAC_PI_2);
        assert_eq!(lin[4], PI);
        let log = Axis::log(0.1, 100.0, 4).unwrap().points();
        assert_eq!(log[0], 0.1);
        assert_eq!(log[3], 100.0);
        assert!((log[1] - 1.0).abs() < 1e-14 && (log[2] - 10.0).abs() < 1e-13);
        assert_eq!(Axis::default_delta().points().len(), 121);
        assert_eq!(Axis::default_phi().points().len(), 97);
        assert!(Axis::log(0.0, 1.0, 3).is_err());
        assert!(Axis::linear(1.0, 0.0, 3).is_err());
        assert!(Axis::linear(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn spec_validation() {
        let err = SweepSpec::new(
            Axis::default_delta(),
            Axis::default_phi(),
            Family::three_state(0.1),
            IndicatorConfig::with_basis_state(4, 1).unwrap(),
            vec![Indicator::F],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let empty = SweepSpec::new(
            Axis::default_delta(),
            Axis::default_phi(),
            Family::three_state(0.1),
            small_cfg(),
            vec![],
        );
        assert!(empty.is_err());
        let s = SweepSpec::new(
            Axis::default_delta(),
            Axis::default_phi(),
            Family::three_state(0.1),
            small_cfg(),
            vec![Indicator::Masked, Indicator::F, Indicator::F],
        )
        .unwrap();
        assert_eq!(s.which, vec![Indicator::F, Indicator::Masked]);
        assert_eq!(Indicator::parse("f_bar").unwrap(), Indicator::FBar);
        assert!(Indicator::parse("G").is_err());
    }

    #[test]
    fn one_by_one_matches_direct_call() {
        let s = SweepSpec::new(
            Axis::log(15.0, 15.0, 1).unwrap(),
            Axis::linear(FRAC_PI_2, FRAC_PI_2, 1).unwrap(),
            Family::three_state(0.2),
            small_cfg(),
            Indicator::ALL.to_vec(),
        )
        .unwrap();
        let grid = run_sweep(&s, Execution::Sequential).unwrap();
        let h = NonHermitianHamiltonian::three_state(15.0, FRAC_PI_2, 0.2, 0.2, 1.0, 0.1).unwrap();
        let tr = evaluate(&h, &small_cfg()).unwrap();
        assert_eq!(grid.get(Indicator::F).unwrap()[[0, 0]].to_bits(), tr.f.to_bits());
        assert_eq!(
            grid.get(Indicator::FBar).unwrap()[[0, 0]].to_bits(),
            tr.f_bar.unwrap().to_bits()
        );
        assert_eq!(
            grid.get(Indicator::FTilde).unwrap()[[0, 0]].to_bits(),
            tr.f_tilde.to_bits()
        );
        assert_eq!(
            grid.get(Indicator::Masked).unwrap()[[0, 0]].to_bits(),
            tr.masked.to_bits()
        );
        assert_eq!(grid.to_csv().lines().count(), 2);
    }

    #[test]
    fn cells_equal_single_point_evaluation() {
        let s = spec(4, 5);
        let grid = run_sweep(&s, Execution::Parallel).unwrap();
        for (i, d) in grid.delta.iter().enumerate() {
            for (j, p) in grid.phi.iter().enumerate() {
                let tr = evaluate_cell(&s, *d, *p).unwrap();
                assert_eq!(grid.get(Indicator::F).unwrap()[[i, j]].to_bits(), tr.f.to_bits());
                assert_eq!(
                    grid.get(Indicator::FTilde).unwrap()[[i, j]].to_bits(),
                    tr.f_tilde.to_bits()
                );
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = spec(6, 7);
        let a = run_sweep(&s, Execution::Sequential).unwrap();
        let b = run_sweep(&s, Execution::Parallel).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.provenance, b.provenance);
    }

    #[test]
    fn csv_layout() {
        let grid = run_sweep(&spec(2, 2), Execution::Sequential).unwrap();
        let csv = grid.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "delta,phi,F,F_bar,F_tilde,masked");
        let cell = |l: &str| -> (f64, f64) {
            let v: Vec<f64> = l.split(',').take(2).map(|x| x.parse().unwrap()).collect();
            (v[0], v[1])
        };
        assert_eq!(cell(lines[1]), (0.5, 0.0));
        assert_eq!(cell(lines[2]), (0.5, PI));
        assert_eq!(cell(lines[3]), (50.0, 0.0));
        assert_eq!(cell(lines[4]), (50.0, PI));
        // 17 significant digits round-trip exactly
        let f: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(f, grid.get(Indicator::F).unwrap()[[0, 1]]);
    }

    #[test]
    fn only_requested_columns() {
        let s = SweepSpec::new(
            Axis::log(1.0, 10.0, 2).unwrap(),
            Axis::linear(0.0, PI, 2).unwrap(),
            Family::three_state(0.2),
            small_cfg(),
            vec![Indicator::FTilde],
        )
        .unwrap();
        let grid = run_sweep(&s, Execution::Sequential).unwrap();
        assert!(grid.to_csv().starts_with("delta,phi,F_tilde\n"));
        assert!(grid.get(Indicator::F).is_none());
    }

    #[test]
    fn export_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        let s = spec(3, 3);
        export_csv(&run_sweep(&s, Execution::Parallel).unwrap(), &p1).unwrap();
        export_csv(&run_sweep(&s, Execution::Parallel).unwrap(), &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let j = dir.path().join("a.json");
        export_json(&run_sweep(&s, Execution::Sequential).unwrap(), &j).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
        assert_eq!(v["values"]["F"].as_array().unwrap().len(), 3);
        assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
        assert!(export_csv(
            &run_sweep(&s, Execution::Sequential).unwrap(),
            &dir.path().join("no/such/dir.csv")
        )
        .is_err());
    }

    #[test]
    fn hash_tracks_configuration() {
        assert_eq!(spec(3, 3).config_hash(), spec(3, 3).config_hash());
        assert_ne!(spec(3, 3).config_hash(), spec(3, 4).config_hash());
    }

    #[test]
    fn hermitian_line_has_zero_f_tilde() {
        let grid = run_sweep(&spec(5, 3), Execution::Parallel).unwrap();
        let ft = grid.get(Indicator::FTilde).unwrap();
        for i in 0..5 {
            assert_eq!(ft[[i, 0]], 0.0);
            assert_eq!(ft[[i, 2]], 0.0);
        }
    }

    #[test]
    fn failing_cells_are_masked() {
        // φ = 0 is Hermitian; at φ = π/2 the decay drains B below the floor
        let h = NonHermitianHamiltonian::new(
            vec![DiagonalEntry::new(2.0, 0.0).unwrap()],
            vec![0.0],
            array![[c(1.0, 0.0)]],
            CMat::zeros((1, 1)),
        )
        .unwrap();
        let cfg = IndicatorConfig::new(40.0, 801, StateVector::basis(2, 1).unwrap()).unwrap();
        let s = SweepSpec::new(
            Axis::linear(2.0, 2.0, 1).unwrap(),
            Axis::linear(0.0, FRAC_PI_2, 2).unwrap(),
            Family::Model { hamiltonian: h },
            cfg,
            vec![Indicator::F, Indicator::FBar],
        )
        .unwrap();
        let grid = run_sweep(&s, Execution::Parallel).unwrap();
        assert_eq!(grid.errors.len(), 1);
        assert_eq!((grid.errors[0].delta_index, grid.errors[0].phi_index), (0, 1));
        assert!(grid.get(Indicator::FBar).unwrap()[[0, 1]].is_nan());
        assert!(grid.get(Indicator::F).unwrap()[[0, 1]].is_finite());
        let csv = grid.to_csv();
        assert!(csv.starts_with("delta,phi,F,F_bar,error\n"));
        assert!(csv.lines().nth(2).unwrap().ends_with(",NaN,1"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",0"));
        let sum = grid.summary();
        assert_eq!(sum[1].n_nan, 1);
        assert!(sum[1].min.is_finite());
    }
}

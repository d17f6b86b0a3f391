use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Non-Hermitian effective dynamics and extended Zeno indicators.
///
/// Energies, rates and couplings are given in units of ε (the B-level energy
/// of the three-state model); times are given as T·ε.
#[derive(Debug, Parser)]
#[command(name = "nhzeno", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trajectories of ψ (full H) and ψ0 (block-diagonal H0) on the indicator grid.
    ///
    /// CSV columns: t, re_psi_k/im_psi_k and re_psi0_k/im_psi0_k for each basis
    /// state k (one-based), norm, norm0 (squared norms), pop_B, pop0_B
    /// (B-subspace populations).
    Propagate(PropagateArgs),
    /// Compare the master equation with the non-Hermitian reduction.
    ///
    /// Exit status 2 when the maximum deviation exceeds the threshold.
    LindbladCheck(LindbladArgs),
    /// First- and second-order eigenvalues against the exact spectrum.
    Perturb(PerturbArgs),
    /// F, F_bar, F_tilde and the masked confinement at one (Δ, φ).
    ///
    /// CSV output is the time series t, f_raw, f_norm, f_zeta; the summary goes
    /// to stderr. JSON output holds both.
    Indicators(IndicatorArgs),
    /// Indicator maps over a (Δ, φ) grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Δ of every decaying level.
    #[arg(long)]
    pub delta: Option<f64>,
    /// φ of every decaying level, in [0, π].
    #[arg(long)]
    pub phi: Option<f64>,
    /// Coupling of |1⟩ to |2⟩.
    #[arg(long, default_value_t = 0.1, conflicts_with = "model")]
    pub g1: f64,
    /// Coupling of |1⟩ to |3⟩.
    #[arg(long, default_value_t = 0.1, conflicts_with = "model")]
    pub g2: f64,
    /// Energy of |2⟩; sets the unit.
    #[arg(long, default_value_t = 1.0, conflicts_with = "model")]
    pub epsilon: f64,
    /// Coupling between |2⟩ and |3⟩.
    #[arg(long, default_value_t = 0.1, conflicts_with = "model")]
    pub omega: f64,
    /// JSON model file instead of the three-state parameters. --delta/--phi,
    /// when given, overwrite every decaying level.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Initial state: a one-based basis label ("2") or real amplitudes
    /// ("0,1,0"); normalised. Default: first B state.
    #[arg(long)]
    pub initial: Option<String>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Horizon T·ε.
    #[arg(long, default_value_t = TAU)]
    pub horizon: f64,
    /// Time-grid points, both endpoints included.
    #[arg(long, default_value_t = 2001)]
    pub n_time: usize,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct LindbladArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Final time T·ε of the comparison.
    #[arg(long, default_value_t = 5.0)]
    pub t_final: f64,
    /// Integrator step (units 1/ε).
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Comparison times, evenly spaced in [0, t_final].
    #[arg(long, default_value_t = 51)]
    pub samples: usize,
    /// Energy of the ground state receiving the decay (three-state model only).
    #[arg(long, default_value_t = 0.0, conflicts_with = "model")]
    pub ground: f64,
    /// Pass/fail threshold on the maximum Frobenius deviation.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct IndicatorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// F at or above this counts as extended Zeno dynamics.
    #[arg(long, default_value_t = 0.95)]
    pub ezd_threshold: f64,
    /// F_tilde below this counts as anti-Zeno-leaning.
    #[arg(long, default_value_t = -0.02, allow_hyphen_values = true)]
    pub anti_zeno_threshold: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 0.1)]
    pub delta_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 121)]
    pub delta_n: usize,
    #[arg(long, value_enum, default_value_t = Scale::Log)]
    pub delta_scale: Scale,
    #[arg(long, default_value_t = 0.0)]
    pub phi_min: f64,
    #[arg(long, default_value_t = PI)]
    pub phi_max: f64,
    #[arg(long, default_value_t = 97)]
    pub phi_n: usize,
    /// Indicators to compute, comma-separated: F, F_bar, F_tilde, masked.
    #[arg(long, value_delimiter = ',', default_value = "F,F_bar,F_tilde,masked")]
    pub which: Vec<String>,
    /// Evaluate cells on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

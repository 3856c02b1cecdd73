//! Command-line experiments: density of states, Fourier decay, phase-averaged
//! amplitudes, tensor/convolution checks and a bundled report.
//!
//! Every command writes its artifacts into `--out`, which must already exist.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub mod commands;
pub mod output;
pub mod state;

pub use commands::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(quasispec::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<quasispec::Error> for CliError {
    fn from(e: quasispec::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "quasispec",
    version,
    about = "Spectral experiments on the Fibonacci Hamiltonian"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Existing directory receiving the artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "QUASISPEC_THREADS")]
    pub threads: Option<usize>,
    /// Seed for randomized instances.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Phase-averaged density of states (or one spectral measure).
    Dos(DosArgs),
    /// Fourier trace of the density of states and its decay exponent.
    Decay(DecayArgs),
    /// Phase-averaged transition amplitudes A(t).
    Average(AverageArgs),
    /// Compare the tensor-sum spectral measure with the convolution of factors.
    TensorCheck(TensorArgs),
    /// DOS summary, decay fit, L² diagnostic and escape-of-mass in one run.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = quasispec::operator::DEFAULT_COUPLING)]
    pub coupling: f64,
    /// Truncation half-width L (sites -L..=L); the default depends on the command.
    #[arg(long)]
    pub half_width: Option<usize>,
    /// Phase ω for single-phase runs.
    #[arg(long, default_value_t = 0.0)]
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Phase-averaged Chebyshev moments, resummed on the grid.
    Moments,
    /// Eigendecompositions of every distinct truncation.
    Eigen,
}

#[derive(Debug, Clone, Args)]
pub struct DosArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Spectral measure of δ₀ at `--phase` instead of the phase average.
    #[arg(long)]
    pub single_phase: bool,
    /// Also write the N-th convolution power.
    #[arg(long, default_value_t = 1)]
    pub power: u32,
    /// Bin width for convolution powers (default 1e-4·(4+2V)).
    #[arg(long)]
    pub bin_width: Option<f64>,
    /// Exact convolution powers instead of binned ones.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[arg(long, default_value_t = 1000.0)]
    pub xi_max: f64,
    /// Uniform frequency samples on [0, xi-max].
    #[arg(long, default_value_t = 20_001)]
    pub xi_points: usize,
    #[arg(long, default_value_t = quasispec::analysis::DEFAULT_BLOCKS_PER_DECADE)]
    pub blocks_per_decade: usize,
    /// Lower end of the fit window; the upper end is xi-max.
    #[arg(long, default_value_t = quasispec::analysis::DEFAULT_FIT_WINDOW.0)]
    pub fit_min: f64,
    #[arg(long, value_enum, default_value_t = Route::Moments)]
    pub route: Route,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TimeGrid {
    Linear,
    /// Zero followed by log-uniform points on [1, t-max].
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct AverageArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 501)]
    pub t_points: usize,
    #[arg(long, value_enum, default_value_t = TimeGrid::Linear)]
    pub t_grid: TimeGrid,
    /// Initial state: `site:value,...` with complex values like `0.5+0.2i`,
    /// or `@file.json` holding `[[site, re, im], ...]`. Default δ₀.
    #[arg(long)]
    pub psi: Option<String>,
    /// Probe state, same syntax as `--psi`. Default δ₀.
    #[arg(long)]
    pub phi: Option<String>,
    /// Amplitude of the single operator at `--phase` instead of the average.
    #[arg(long)]
    pub single_phase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    /// Free chains, ψ = δ at the first site.
    Free,
    /// Fibonacci truncations at random phases (odd dimension), random unit ψ.
    Fibonacci,
    /// Random symmetric matrices with entries in [-1, 1], random unit ψ.
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct TensorArgs {
    #[arg(long, default_value_t = 2)]
    pub factors: usize,
    #[arg(long, default_value_t = 2)]
    pub factor_dim: usize,
    #[arg(long, value_enum, default_value_t = FactorKind::Free)]
    pub kind: FactorKind,
    #[arg(long, default_value_t = quasispec::operator::DEFAULT_COUPLING)]
    pub coupling: f64,
    /// Largest admissible product dimension.
    #[arg(long, default_value_t = quasispec::operator::DEFAULT_TENSOR_CAP)]
    pub cap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub spectrum: SpectrumArgs,
    /// Escape-of-mass horizon (default: the largest the light cone allows).
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Uniform time samples on [0, t-max] (default: spacing 0.05).
    #[arg(long)]
    pub t_points: Option<usize>,
}

//! Truncated Fibonacci Hamiltonians and the machinery around them.
//!
//! The operator on `ℓ²(ℤ)` is
//!
//! ```text
//! (H_ω ψ)(n) = ψ(n+1) + ψ(n-1) + V · 1_[1-α, 1)(ω + nα mod 1) · ψ(n)
//! ```
//!
//! restricted to the sites `[-L, L]` with a hard (Dirichlet) cutoff.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Inverse golden ratio `(√5 - 1) / 2`.
pub const INV_GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9;

/// Coupling used when none is given.
pub const DEFAULT_COUPLING: f64 = 0.5;

/// Breakpoints closer than this are treated as one.
pub const BREAKPOINT_DEDUP_TOL: f64 = 1e-12;

/// Largest Kronecker-sum dimension `tensor_sum` builds by default.
pub const DEFAULT_TENSOR_CAP: usize = 4096;

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Parameters of one truncated operator `H_ω` on `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub coupling: f64,
    pub alpha: f64,
    pub half_width: usize,
    pub phase: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            coupling: DEFAULT_COUPLING,
            alpha: INV_GOLDEN_RATIO,
            half_width: 0,
            phase: 0.0,
        }
    }
}

impl ModelParams {
    pub fn new(coupling: f64, half_width: usize) -> Result<Self> {
        Self {
            coupling,
            half_width,
            ..Self::default()
        }
        .validated()
    }

    pub fn with_phase(self, phase: f64) -> Result<Self> {
        Self { phase, ..self }.validated()
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self { alpha, ..self }.validated()
    }

    pub fn with_half_width(self, half_width: usize) -> Self {
        Self { half_width, ..self }
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling must be finite and nonnegative, got {}",
                self.coupling
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.phase >= 0.0 && self.phase < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "phase must lie in [0, 1), got {}",
                self.phase
            )));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Bound on the spectral radius shared by every phase: `2 + V`.
    pub fn spectral_scale(&self) -> f64 {
        2.0 + self.coupling
    }
}

/// `V` if `frac(ω + nα) ∈ [1-α, 1)`, else `0`.
#[inline]
pub fn potential_value(phase: f64, site: i64, params: &ModelParams) -> f64 {
    if in_window(phase, site, params.alpha) {
        params.coupling
    } else {
        0.0
    }
}

#[inline]
fn in_window(phase: f64, site: i64, alpha: f64) -> bool {
    frac(phase + site as f64 * alpha) >= 1.0 - alpha
}

/// Real symmetric tridiagonal matrix indexed by lattice sites.
///
/// Vector index 0 corresponds to lattice site `site_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diag: Vec<f64>,
    off: Vec<f64>,
    site_offset: i64,
}

impl TridiagonalOperator {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, site_offset: i64) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty diagonal".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len() - 1,
                actual: off.len(),
            });
        }
        if diag.iter().chain(&off).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite matrix entry".into()));
        }
        Ok(Self {
            diag,
            off,
            site_offset,
        })
    }

    /// Discrete Laplacian (hopping 1, zero potential) on `[-L, L]`.
    pub fn free(half_width: usize) -> Self {
        let n = 2 * half_width + 1;
        Self {
            diag: vec![0.0; n],
            off: vec![1.0; n - 1],
            site_offset: -(half_width as i64),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diag(&self) -> &[f64] {
        &self.off
    }

    pub fn site_offset(&self) -> i64 {
        self.site_offset
    }

    /// Vector index of a lattice site, if inside the box.
    pub fn index_of(&self, site: i64) -> Option<usize> {
        let idx = site - self.site_offset;
        (0..self.dim() as i64)
            .contains(&idx)
            .then_some(idx as usize)
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// `y = H x`.
    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        debug_assert!(x.len() == n && y.len() == n);
        if n == 1 {
            y[0] = self.diag[0] * x[0];
            return;
        }
        y[0] = self.diag[0] * x[0] + self.off[0] * x[1];
        for i in 1..n - 1 {
            y[i] = self.off[i - 1] * x[i - 1] + self.diag[i] * x[i] + self.off[i] * x[i + 1];
        }
        y[n - 1] = self.off[n - 2] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &e) in self.off.iter().enumerate() {
            m[(i, i + 1)] = e;
            m[(i + 1, i)] = e;
        }
        m
    }
}

impl From<&TridiagonalOperator> for DMatrix<f64> {
    fn from(op: &TridiagonalOperator) -> Self {
        op.to_dense()
    }
}

/// Truncated `H_ω` at the phase stored in `params`.
pub fn build_hamiltonian(params: &ModelParams) -> TridiagonalOperator {
    build_hamiltonian_at(params.phase, params)
}

/// Truncated `H_ω` at an explicit phase, ignoring `params.phase`.
pub fn build_hamiltonian_at(phase: f64, params: &ModelParams) -> TridiagonalOperator {
    let l = params.half_width as i64;
    let diag = (-l..=l)
        .map(|n| potential_value(phase, n, params))
        .collect::<Vec<_>>();
    let n = diag.len();
    TridiagonalOperator {
        diag,
        off: vec![1.0; n - 1],
        site_offset: -l,
    }
}

/// Largest discrepancy between the potential of `H_{ω+kα}` at site `n` and
/// that of `H_ω` at site `n + k`, over all `n` with `|n|, |n+k| ≤ L`.
///
/// Shift covariance `S^k H_ω S^{-k} = H_{ω+kα}` predicts exactly zero.
pub fn shift_hamiltonian_check(params: &ModelParams, k: i64) -> Result<f64> {
    let l = params.half_width as i64;
    if k.abs() > l {
        return Err(Error::ShiftOutOfRange {
            shift: k,
            half_width: params.half_width,
        });
    }
    let shifted_phase = frac(params.phase + k as f64 * params.alpha);
    let shifted = build_hamiltonian_at(shifted_phase, params);
    let base = build_hamiltonian(params);
    let lo = (-l).max(-l - k);
    let hi = l.min(l - k);
    let worst = (lo..=hi)
        .map(|n| {
            let a = shifted.diag[(n + l) as usize];
            let b = base.diag[(n + k + l) as usize];
            (a - b).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

/// One piece of the torus on which `H_ω` restricted to `[-L, L]` is constant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PhaseInterval {
    pub left: f64,
    pub length: f64,
    /// Midpoint of the interval.
    pub representative: f64,
}

/// Exact partition of `[0, 1)` into intervals of constant truncated operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePartition {
    breakpoints: Vec<f64>,
    intervals: Vec<PhaseInterval>,
}

impl PhasePartition {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn intervals(&self) -> &[PhaseInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Window membership of each site `-L..=L` on the interval.
    pub fn pattern(&self, index: usize, params: &ModelParams) -> Vec<bool> {
        let omega = self.intervals[index].representative;
        let l = params.half_width as i64;
        (-l..=l)
            .map(|n| in_window(omega, n, params.alpha))
            .collect()
    }
}

/// Breakpoints `{frac(1-α-nα), frac(-nα) : |n| ≤ L}`, sorted and deduplicated,
/// with the intervals between them.
pub fn phase_partition(params: &ModelParams) -> PhasePartition {
    let l = params.half_width as i64;
    let alpha = params.alpha;
    let mut points = Vec::with_capacity(2 * params.dim());
    for n in -l..=l {
        let nf = n as f64;
        points.push(frac(1.0 - alpha - nf * alpha));
        points.push(frac(-nf * alpha));
    }
    points.sort_by(f64::total_cmp);

    let mut breakpoints: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        match breakpoints.last() {
            Some(&last) if p - last <= BREAKPOINT_DEDUP_TOL => {}
            _ => breakpoints.push(p),
        }
    }
    // points near 1 wrap onto 0
    while breakpoints.len() > 1
        && 1.0 - breakpoints[breakpoints.len() - 1] + breakpoints[0] <= BREAKPOINT_DEDUP_TOL
    {
        breakpoints.pop();
    }

    let m = breakpoints.len();
    // n = 0 contributes the breakpoint 0, so the last interval ends at 1
    let mut intervals = Vec::with_capacity(m);
    for i in 0..m {
        let left = breakpoints[i];
        let right = if i + 1 < m {
            breakpoints[i + 1]
        } else {
            1.0 + breakpoints[0]
        };
        let length = right - left;
        intervals.push(PhaseInterval {
            left,
            length,
            representative: frac(left + 0.5 * length),
        });
    }
    PhasePartition {
        breakpoints,
        intervals,
    }
}

/// Kronecker sum `Σ_k I ⊗ … ⊗ H_k ⊗ … ⊗ I`; the first factor is the slowest
/// index of the product basis.
pub fn tensor_sum(factors: &[DMatrix<f64>], cap: usize) -> Result<DMatrix<f64>> {
    if factors.is_empty() {
        return Err(Error::InvalidParameter("no factors".into()));
    }
    for f in factors {
        if !f.is_square() {
            return Err(Error::InvalidParameter("factor is not square".into()));
        }
    }
    let dim = factors
        .iter()
        .try_fold(1usize, |acc, f| acc.checked_mul(f.nrows()))
        .filter(|&d| d <= cap)
        .ok_or_else(|| Error::DimensionCap {
            dim: factors
                .iter()
                .fold(1usize, |acc, f| acc.saturating_mul(f.nrows())),
            cap,
        })?;

    let mut sum = DMatrix::zeros(dim, dim);
    for (k, factor) in factors.iter().enumerate() {
        let before: usize = factors[..k].iter().map(|f| f.nrows()).product();
        let after: usize = factors[k + 1..].iter().map(|f| f.nrows()).product();
        let term = DMatrix::<f64>::identity(before, before)
            .kronecker(factor)
            .kronecker(&DMatrix::<f64>::identity(after, after));
        sum += term;
    }
    Ok(sum)
}

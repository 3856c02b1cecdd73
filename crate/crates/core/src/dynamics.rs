//! Time evolution `e^{itH}ψ` and phase-averaged transition amplitudes.
//!
//! Two propagators are provided: the exact one through an [`EigenSystem`] and
//! a Chebyshev expansion
//!
//! ```text
//! e^{itH} = J_0(at) + 2 Σ_{k≥1} i^k J_k(at) T_k(H/a),    ‖H‖ ≤ a,
//! ```
//!
//! which needs only matrix-vector products. Phase averages
//! `A(t) = ∫_𝕋 ⟨e^{itH_ω}ψ, φ⟩ dω` reuse the same expansion: the averaged
//! Chebyshev moments `∫ ⟨T_k(H_ω/a)ψ, φ⟩ dω` are computed once per distinct
//! truncated operator and resummed for every `t`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measures::FourierTrace;
use crate::operator::{phase_partition, ModelParams, TridiagonalOperator};
use crate::special::bessel_j_sequence;
use crate::spectral::{group_by_pattern, EigenSystem};

/// Sites beyond the ballistic front `2t` that must stay inside the box.
pub const LIGHT_CONE_MARGIN: usize = 50;

/// Truncation tolerance for phase-averaged amplitudes.
pub const AMPLITUDE_TOL: f64 = 1e-13;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex amplitudes on the lattice sites `[-L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    half_width: usize,
}

impl StateVector {
    pub fn zeros(half_width: usize) -> Self {
        Self {
            amplitudes: vec![ZERO; 2 * half_width + 1],
            half_width,
        }
    }

    /// `δ_site`.
    pub fn delta(half_width: usize, site: i64) -> Result<Self> {
        Self::from_sites(half_width, &[(site, Complex64::new(1.0, 0.0))])
    }

    /// Finitely supported state; repeated sites add up.
    pub fn from_sites(half_width: usize, sites: &[(i64, Complex64)]) -> Result<Self> {
        let mut s = Self::zeros(half_width);
        for &(n, a) in sites {
            let idx = s.index_of(n).ok_or_else(|| {
                Error::InvalidParameter(format!("site {n} outside [-{half_width}, {half_width}]"))
            })?;
            s.amplitudes[idx] += a;
        }
        Ok(s)
    }

    pub fn from_amplitudes(half_width: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 2 * half_width + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * half_width + 1,
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            half_width,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    fn index_of(&self, site: i64) -> Option<usize> {
        let idx = site + self.half_width as i64;
        (0..self.dim() as i64)
            .contains(&idx)
            .then_some(idx as usize)
    }

    /// Amplitude at a lattice site (zero outside the box).
    pub fn at(&self, site: i64) -> Complex64 {
        self.index_of(site).map_or(ZERO, |i| self.amplitudes[i])
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `⟨self, other⟩ = Σ_n self(n) · conj(other(n))`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    /// Largest `|n|` carrying a nonzero amplitude, or 0 for the zero state.
    pub fn support_radius(&self) -> usize {
        self.nonzero_sites()
            .map(|(n, _)| n.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn nonzero_sites(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let l = self.half_width as i64;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .map(move |(i, &a)| (i as i64 - l, a))
    }

    /// The same state in the larger box `[-L', L']`.
    pub fn embedded(&self, half_width: usize) -> Result<Self> {
        if half_width < self.support_radius() {
            return Err(Error::InvalidParameter(format!(
                "support radius {} does not fit half-width {half_width}",
                self.support_radius()
            )));
        }
        let sites: Vec<_> = self.nonzero_sites().collect();
        Self::from_sites(half_width, &sites)
    }

    /// `(S^k φ)(n) = φ(n + k)`; fails if support would leave the box.
    pub fn shifted(&self, k: i64) -> Result<Self> {
        let sites: Vec<_> = self.nonzero_sites().map(|(n, a)| (n - k, a)).collect();
        Self::from_sites(self.half_width, &sites)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: dim,
            });
        }
        Ok(())
    }

    fn is_real(&self) -> bool {
        self.amplitudes.iter().all(|a| a.im == 0.0)
    }
}

/// Sampled `A(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSeries {
    pub t: Grid,
    pub values: Vec<Complex64>,
}

/// `Q e^{itΛ} Qᵀ ψ`.
pub fn evolve_exact(sys: &EigenSystem, psi: &StateVector, t: f64) -> Result<StateVector> {
    let coeffs = sys.coefficients(psi.amplitudes())?;
    let phased: Vec<Complex64> = coeffs
        .iter()
        .zip(&sys.eigenvalues)
        .map(|(c, &e)| c * Complex64::from_polar(1.0, t * e))
        .collect();
    let q = &sys.eigenvectors;
    let n = sys.dim();
    let mut out = vec![ZERO; n];
    for (j, c) in phased.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(q.column(j).iter()) {
            *o += c * v;
        }
    }
    StateVector::from_amplitudes(psi.half_width(), out)
}

/// Degree budget `4·z + 200` for an expansion at `z = a·|t|`.
pub fn chebyshev_degree_cap(z: f64) -> usize {
    (4.0 * z + 200.0).ceil() as usize
}

/// Chebyshev coefficients `J_k(z)` of `e^{izx}` up to the truncation order:
/// the first `k > z` after which `2|J_k|` stays below `tol / 10` for three
/// consecutive orders.
pub fn chebyshev_bessel_coefficients(z: f64, tol: f64, t: f64) -> Result<Vec<f64>> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let cap = chebyshev_degree_cap(z);
    let mut j = bessel_j_sequence(z, cap);
    let mut small = 0;
    for k in 0..=cap {
        if (k as f64) > z && 2.0 * j[k].abs() < 0.1 * tol {
            small += 1;
            if small == 3 {
                j.truncate(k + 1);
                return Ok(j);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::DegreeCap { cap, t })
}

/// `i^k` times `sign^k`.
fn phase_power(k: usize, negative: bool) -> Complex64 {
    let k = if negative { (4 - k % 4) % 4 } else { k % 4 };
    match k {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn scale_of(op: &TridiagonalOperator) -> f64 {
    let a = op.norm_bound();
    if a > 0.0 {
        a
    } else {
        1.0
    }
}

/// `e^{itH}ψ` by Chebyshev expansion on `[-a, a]`, `a` the Gershgorin bound
/// of `op` (`2 + V` for the Fibonacci family).
pub fn evolve_chebyshev(
    op: &TridiagonalOperator,
    psi: &StateVector,
    t: f64,
    tol: f64,
) -> Result<StateVector> {
    psi.check_dim(op.dim())?;
    let a = scale_of(op);
    let inv_a = 1.0 / a;
    let coeffs = chebyshev_bessel_coefficients(a * t.abs(), tol, t)?;
    let negative = t < 0.0;
    let n = op.dim();

    let mut prev = psi.amplitudes().to_vec();
    let mut out: Vec<Complex64> = prev.iter().map(|&x| x * coeffs[0]).collect();
    if coeffs.len() == 1 {
        return StateVector::from_amplitudes(psi.half_width(), out);
    }
    let mut cur = vec![ZERO; n];
    apply_scaled_complex(op, inv_a, &prev, &mut cur, 1.0, None);
    let mut next = vec![ZERO; n];
    for (k, &jk) in coeffs.iter().enumerate().skip(1) {
        let c = phase_power(k, negative) * (2.0 * jk);
        for (o, &x) in out.iter_mut().zip(&cur) {
            *o += c * x;
        }
        if k + 1 == coeffs.len() {
            break;
        }
        apply_scaled_complex(op, inv_a, &cur, &mut next, 2.0, Some(&prev));
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    StateVector::from_amplitudes(psi.half_width(), out)
}

/// `y = factor · (H/a) x - sub`.
fn apply_scaled_complex(
    op: &TridiagonalOperator,
    inv_a: f64,
    x: &[Complex64],
    y: &mut [Complex64],
    factor: f64,
    sub: Option<&[Complex64]>,
) {
    let d = op.diag();
    let e = op.off_diag();
    let n = d.len();
    let s = factor * inv_a;
    for i in 0..n {
        let mut acc = x[i] * d[i];
        if i > 0 {
            acc += x[i - 1] * e[i - 1];
        }
        if i + 1 < n {
            acc += x[i + 1] * e[i];
        }
        y[i] = acc * s;
    }
    if let Some(sub) = sub {
        for (yi, &p) in y.iter_mut().zip(sub) {
            *yi -= p;
        }
    }
}

/// Real three-term Chebyshev recurrence `u_k = T_k(H/a) u_0`, tracking the
/// index range outside which every iterate vanishes.
struct ChebyshevIterates<'a> {
    op: &'a TridiagonalOperator,
    inv_a: f64,
    prev: Vec<f64>,
    cur: Vec<f64>,
    next: Vec<f64>,
    lo: usize,
    hi: usize,
    k: usize,
}

impl<'a> ChebyshevIterates<'a> {
    fn new(op: &'a TridiagonalOperator, a: f64, start: Vec<f64>) -> Option<Self> {
        let lo = start.iter().position(|&x| x != 0.0)?;
        let hi = start.iter().rposition(|&x| x != 0.0)?;
        let n = start.len();
        Some(Self {
            op,
            inv_a: 1.0 / a,
            prev: vec![0.0; n],
            cur: start,
            next: vec![0.0; n],
            lo,
            hi,
            k: 0,
        })
    }

    fn current(&self) -> (&[f64], usize, usize) {
        (&self.cur, self.lo, self.hi)
    }

    fn advance(&mut self) {
        let d = self.op.diag();
        let e = self.op.off_diag();
        let n = d.len();
        let lo = self.lo.saturating_sub(1);
        let hi = (self.hi + 1).min(n - 1);
        let (factor, subtract) = if self.k == 0 {
            (1.0, false)
        } else {
            (2.0, true)
        };
        let s = factor * self.inv_a;
        let x = &self.cur;
        for i in lo..=hi {
            let mut acc = d[i] * x[i];
            if i > 0 {
                acc += e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += e[i] * x[i + 1];
            }
            self.next[i] = s * acc - if subtract { self.prev[i] } else { 0.0 };
        }
        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.next);
        self.lo = lo;
        self.hi = hi;
        self.k += 1;
    }
}

fn dot_range(u: &[f64], v: &[f64], lo: usize, hi: usize) -> f64 {
    u[lo..=hi].iter().zip(&v[lo..=hi]).map(|(a, b)| a * b).sum()
}

/// Chebyshev moments `m_k = ⟨T_k(H/a)ψ, φ⟩` for `k = 0..=degree`.
pub fn chebyshev_moments(
    op: &TridiagonalOperator,
    a: f64,
    psi: &StateVector,
    phi: &StateVector,
    degree: usize,
) -> Result<Vec<Complex64>> {
    psi.check_dim(op.dim())?;
    phi.check_dim(op.dim())?;
    if psi == phi && psi.is_real() {
        let re: Vec<f64> = psi.amplitudes().iter().map(|z| z.re).collect();
        return Ok(diagonal_moments_real(op, a, re, degree)
            .into_iter()
            .map(|m| Complex64::new(m, 0.0))
            .collect());
    }

    let phi_re: Vec<f64> = phi.amplitudes().iter().map(|z| z.re).collect();
    let phi_im: Vec<f64> = phi.amplitudes().iter().map(|z| z.im).collect();
    let mut moments = vec![ZERO; degree + 1];
    let parts = [
        (
            psi.amplitudes().iter().map(|z| z.re).collect::<Vec<_>>(),
            Complex64::new(1.0, 0.0),
        ),
        (
            psi.amplitudes().iter().map(|z| z.im).collect::<Vec<_>>(),
            Complex64::new(0.0, 1.0),
        ),
    ];
    for (part, unit) in parts {
        let Some(mut it) = ChebyshevIterates::new(op, a, part) else {
            continue;
        };
        for m in moments.iter_mut() {
            let (u, lo, hi) = it.current();
            // ⟨u, φ⟩ = Σ u (φ_re - i φ_im) for real u
            let re = dot_range(u, &phi_re, lo, hi);
            let im = -dot_range(u, &phi_im, lo, hi);
            *m += unit * Complex64::new(re, im);
            it.advance();
        }
    }
    Ok(moments)
}

/// `⟨T_k(H/a)ψ, ψ⟩` for real `ψ`, using `T_{2k} = 2T_k² - 1` and
/// `T_{2k+1} = 2T_{k+1}T_k - T_1`.
fn diagonal_moments_real(
    op: &TridiagonalOperator,
    a: f64,
    psi: Vec<f64>,
    degree: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; degree + 1];
    let Some(mut it) = ChebyshevIterates::new(op, a, psi) else {
        return out;
    };
    let half = degree / 2 + 1;
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    let mut prev_u: Vec<f64> = Vec::new();
    let mut prev_range = (0, 0);
    for k in 0..=half {
        let (u, lo, hi) = it.current();
        let sq = dot_range(u, u, lo, hi);
        if k == 0 {
            m0 = sq;
            out[0] = m0;
        } else {
            // u_{k-1} is supported in a subrange of u_k's
            let cross = dot_range(u, &prev_u, prev_range.0, prev_range.1);
            if k == 1 {
                m1 = cross;
                if degree >= 1 {
                    out[1] = m1;
                }
            } else if 2 * k - 1 <= degree {
                out[2 * k - 1] = 2.0 * cross - m1;
            }
            if 2 * k <= degree {
                out[2 * k] = 2.0 * sq - m0;
            }
        }
        if k < half {
            prev_u.clear();
            prev_u.extend_from_slice(u);
            prev_range = (lo, hi);
            it.advance();
        }
    }
    out
}

/// Phase-averaged moments `∫_𝕋 ⟨T_k(H_ω/a)ψ, φ⟩ dω` with `a = 2 + V`,
/// summed over the distinct truncated operators in sorted-breakpoint order.
pub fn averaged_chebyshev_moments(
    params: &ModelParams,
    psi: &StateVector,
    phi: &StateVector,
    degree: usize,
) -> Result<Vec<Complex64>> {
    let dim = params.dim();
    psi.check_dim(dim)?;
    phi.check_dim(dim)?;
    let partition = phase_partition(params);
    let groups = group_by_pattern(&partition, params);
    let a = params.spectral_scale();
    let per_group: Vec<Vec<Complex64>> = groups
        .operators
        .par_iter()
        .map(|op| chebyshev_moments(op, a, psi, phi, degree))
        .collect::<Result<_>>()?;
    let mut total = vec![ZERO; degree + 1];
    for (moments, &w) in per_group.iter().zip(&groups.weights) {
        for (t, m) in total.iter_mut().zip(moments) {
            *t += m * w;
        }
    }
    Ok(total)
}

/// Resums `Σ_k (2 - δ_k0) i^k J_k(a t) m_k` on every grid point.
pub fn resum_moments(moments: &[Complex64], a: f64, grid: &Grid) -> Vec<Complex64> {
    let kmax = moments.len().saturating_sub(1);
    grid.points()
        .par_iter()
        .map(|&t| {
            let j = bessel_j_sequence(a * t.abs(), kmax);
            let negative = t < 0.0;
            moments
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let c = if k == 0 { 1.0 } else { 2.0 };
                    phase_power(k, negative) * (c * j[k]) * m
                })
                .sum()
        })
        .collect()
}

/// Smallest half-width that keeps `[-(2 t_max + radius), 2 t_max + radius]`
/// at least [`LIGHT_CONE_MARGIN`] sites away from the boundary.
pub fn light_cone_requirement(t_max: f64, support_radius: usize) -> usize {
    (2.0 * t_max.abs()).ceil() as usize + support_radius + LIGHT_CONE_MARGIN
}

fn degree_for(params: &ModelParams, t_max: f64) -> Result<usize> {
    let z = params.spectral_scale() * t_max;
    Ok(chebyshev_bessel_coefficients(z, AMPLITUDE_TOL, t_max)?.len() - 1)
}

fn max_abs(grid: &Grid) -> f64 {
    grid.first().abs().max(grid.last().abs())
}

/// `A(t) = ∫_𝕋 ⟨e^{itH_ω}ψ, φ⟩ dω` on the truncated lattice of `params`.
pub fn phase_averaged_amplitude(
    psi: &StateVector,
    phi: &StateVector,
    t_grid: &Grid,
    params: &ModelParams,
) -> Result<AmplitudeSeries> {
    let t_max = max_abs(t_grid);
    let radius = psi.support_radius().max(phi.support_radius());
    let required = light_cone_requirement(t_max, radius);
    if params.half_width < required {
        return Err(Error::LightCone {
            half_width: params.half_width,
            required,
        });
    }
    let degree = degree_for(params, t_max)?;
    let moments = averaged_chebyshev_moments(params, psi, phi, degree)?;
    Ok(AmplitudeSeries {
        t: t_grid.clone(),
        values: resum_moments(&moments, params.spectral_scale(), t_grid),
    })
}

/// Fourier trace of the finite-volume density of states, `Σ_k c_k(ξ) m_k`
/// with the phase-averaged moments of `δ₀`. Equal to
/// `fourier(density_of_states(params), xi)` up to the truncation tolerance.
pub fn dos_fourier_trace(params: &ModelParams, xi: &Grid) -> Result<FourierTrace> {
    let delta = StateVector::delta(params.half_width, 0)?;
    let degree = degree_for(params, max_abs(xi))?;
    let moments = averaged_chebyshev_moments(params, &delta, &delta, degree)?;
    Ok(FourierTrace {
        xi: xi.clone(),
        values: resum_moments(&moments, params.spectral_scale(), xi),
    })
}

/// `|LHS - RHS|` for the decomposition `ψ = Σ_k ψ(k) S^{-k}δ₀`:
///
/// ```text
/// LHS = ∫⟨e^{itH_ω}ψ, φ⟩ dω,   RHS = Σ_k ψ(k) ∫⟨e^{itH_ω}δ₀, S^kφ⟩ dω,
/// ```
///
/// both on the enlarged box `L' = L + radius(ψ)`.
pub fn l1_decomposition_check(
    psi: &StateVector,
    phi: &StateVector,
    t: f64,
    params: &ModelParams,
) -> Result<f64> {
    let enlarged = params.half_width + psi.support_radius();
    let p = params.with_half_width(enlarged);
    let psi_e = psi.embedded(enlarged)?;
    let phi_e = phi.embedded(enlarged)?;
    let grid = Grid::new(vec![t])?;

    let lhs = phase_averaged_amplitude(&psi_e, &phi_e, &grid, &p)?.values[0];
    let delta = StateVector::delta(enlarged, 0)?;
    let mut rhs = ZERO;
    for (k, coeff) in psi_e.nonzero_sites() {
        let shifted = phi_e.shifted(k)?;
        rhs += coeff * phase_averaged_amplitude(&delta, &shifted, &grid, &p)?.values[0];
    }
    Ok((lhs - rhs).norm())
}

//! Eigendecompositions and the spectral measures built from them.
//!
//! For a finite symmetric matrix with eigenpairs `(E_j, v_j)` the spectral
//! measure of `ψ` is `μ_ψ = Σ_j |⟨v_j, ψ⟩|² δ_{E_j}`. The density of states is
//! the phase average of `μ_ω` for `ψ = δ₀`, evaluated exactly over the
//! [`PhasePartition`](crate::operator::PhasePartition).

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::measures::{convolve_exact, fourier, AtomicMeasure, COALESCE_REL};
use crate::operator::{
    build_hamiltonian_at, phase_partition, tensor_sum, ModelParams, PhasePartition,
    TridiagonalOperator,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `‖H - QΛQᵀ‖_max`.
    pub fn reconstruction_residual(&self, h: &DMatrix<f64>) -> f64 {
        let q = &self.eigenvectors;
        let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * self.eigenvalues[j]);
        (h - scaled * q.transpose()).amax()
    }

    /// `‖QᵀQ - I‖_max`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.dim();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// Coefficients `Qᵀψ`.
    pub fn coefficients(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: psi.len(),
            });
        }
        let q = &self.eigenvectors;
        Ok((0..self.dim())
            .map(|j| {
                q.column(j)
                    .iter()
                    .zip(psi)
                    .map(|(&v, &p)| p * v)
                    .sum::<Complex64>()
            })
            .collect())
    }

    fn coalesce_tolerance(&self) -> f64 {
        let extent = self.eigenvalues.iter().map(|e| e.abs()).fold(1.0, f64::max);
        2.0 * COALESCE_REL * extent
    }
}

pub fn eigendecompose(op: &TridiagonalOperator) -> Result<EigenSystem> {
    let (eigenvalues, eigenvectors) = eigen::tridiagonal_eigen_full(op.diag(), op.off_diag())?;
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Dense symmetric route, used for Kronecker sums.
pub fn eigendecompose_dense(h: &DMatrix<f64>) -> Result<EigenSystem> {
    if !h.is_square() {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    let n = h.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let eig = h
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::DenseNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// `μ_ψ`: atoms at the eigenvalues, weights `|⟨v_j, ψ⟩|²`.
pub fn spectral_measure(sys: &EigenSystem, psi: &[Complex64]) -> Result<AtomicMeasure> {
    let coeffs = sys.coefficients(psi)?;
    AtomicMeasure::from_atoms(
        sys.eigenvalues
            .iter()
            .zip(&coeffs)
            .map(|(&e, c)| (e, c.norm_sqr())),
        sys.coalesce_tolerance(),
    )
}

/// Spectral measure of the basis vector at `index`, without forming the
/// eigenvector matrix.
pub fn local_spectral_measure(op: &TridiagonalOperator, index: usize) -> Result<AtomicMeasure> {
    let (vals, rows) = eigen::tridiagonal_eigen_rows(op.diag(), op.off_diag(), &[index])?;
    let tol = 2.0 * COALESCE_REL * op.norm_bound().max(1.0);
    AtomicMeasure::from_atoms(vals.into_iter().zip(rows[0].iter().map(|c| c * c)), tol)
}

/// Intervals of a partition grouped by identical truncated operator.
///
/// Groups are listed in order of first appearance along the sorted
/// breakpoints, each with the summed length of its intervals.
pub struct PatternGroups {
    pub operators: Vec<TridiagonalOperator>,
    pub weights: Vec<f64>,
}

pub fn group_by_pattern(partition: &PhasePartition, params: &ModelParams) -> PatternGroups {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut operators = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for iv in partition.intervals() {
        let op = build_hamiltonian_at(iv.representative, params);
        let key: Vec<u64> = op.diag().iter().map(|d| d.to_bits()).collect();
        match index.get(&key) {
            Some(&g) => weights[g] += iv.length,
            None => {
                index.insert(key, operators.len());
                operators.push(op);
                weights.push(iv.length);
            }
        }
    }
    PatternGroups { operators, weights }
}

/// Finite-volume density of states `μ = ∫_𝕋 μ_ω dω`, exact over the phase
/// partition.
pub fn density_of_states(params: &ModelParams) -> Result<AtomicMeasure> {
    let partition = phase_partition(params);
    let groups = group_by_pattern(&partition, params);
    let center = params.half_width;
    let parts: Vec<Vec<(f64, f64)>> = groups
        .operators
        .par_iter()
        .zip(&groups.weights)
        .map(|(op, &len)| {
            let (vals, rows) = eigen::tridiagonal_eigen_rows(op.diag(), op.off_diag(), &[center])?;
            Ok(vals
                .into_iter()
                .zip(&rows[0])
                .map(|(e, c)| (e, len * c * c))
                .collect())
        })
        .collect::<Result<_>>()?;
    let tol = COALESCE_REL * (4.0 + 2.0 * params.coupling);
    AtomicMeasure::from_atoms(parts.into_iter().flatten(), tol)
}

/// Frequencies `0, 0.1, …, 19.9` used by [`tensor_spectral_check`].
pub fn tensor_check_grid() -> Grid {
    Grid::linear(0.0, 19.9, 200).expect("static grid")
}

/// Kronecker product `ψ₁ ⊗ … ⊗ ψ_N`, first factor slowest.
pub fn tensor_product(states: &[Vec<Complex64>]) -> Vec<Complex64> {
    states
        .iter()
        .fold(vec![Complex64::new(1.0, 0.0)], |acc, s| {
            acc.iter()
                .flat_map(|&a| s.iter().map(move |&b| a * b))
                .collect()
        })
}

/// Largest `|μ̂_direct(ξ) - μ̂_conv(ξ)|` on [`tensor_check_grid`], where
/// `μ_direct` is the spectral measure of `ψ₁ ⊗ … ⊗ ψ_N` under the Kronecker
/// sum and `μ_conv = μ_{ψ₁} ∗ … ∗ μ_{ψ_N}`.
pub fn tensor_spectral_check(
    factors: &[DMatrix<f64>],
    states: &[Vec<Complex64>],
    cap: usize,
) -> Result<f64> {
    if factors.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: factors.len(),
            actual: states.len(),
        });
    }
    let sum = tensor_sum(factors, cap)?;
    let direct = spectral_measure(&eigendecompose_dense(&sum)?, &tensor_product(states))?;

    let mut convolved = AtomicMeasure::dirac(0.0);
    for (h, psi) in factors.iter().zip(states) {
        let mu = spectral_measure(&eigendecompose_dense(h)?, psi)?;
        convolved = convolve_exact(&convolved, &mu)?;
    }

    let grid = tensor_check_grid();
    let a = fourier(&direct, &grid);
    let b = fourier(&convolved, &grid);
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

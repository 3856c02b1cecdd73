//! Implicit QL iteration for real symmetric tridiagonal matrices.
//!
//! The Givens rotations of each sweep are handed to a [`RotationSink`], so the
//! same iteration yields eigenvalues only, selected rows of the eigenvector
//! matrix (the components of every eigenvector at a few sites), or the full
//! eigenvector matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Iterations allowed per eigenvalue before giving up.
pub const MAX_QL_ITERATIONS: usize = 50;

/// Receives the plane rotations acting on columns `i` and `i + 1` of the
/// accumulated eigenvector matrix.
pub trait RotationSink {
    fn rotate(&mut self, i: usize, c: f64, s: f64);
    fn permute(&mut self, order: &[usize]);
}

/// Discards rotations.
pub struct NoVectors;

impl RotationSink for NoVectors {
    #[inline]
    fn rotate(&mut self, _: usize, _: f64, _: f64) {}
    fn permute(&mut self, _: &[usize]) {}
}

/// Tracks a handful of rows of the eigenvector matrix.
pub struct SelectedRows {
    rows: Vec<Vec<f64>>,
}

impl SelectedRows {
    pub fn new(n: usize, which: &[usize]) -> Self {
        let rows = which
            .iter()
            .map(|&k| {
                let mut r = vec![0.0; n];
                r[k] = 1.0;
                r
            })
            .collect();
        Self { rows }
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }
}

impl RotationSink for SelectedRows {
    #[inline]
    fn rotate(&mut self, i: usize, c: f64, s: f64) {
        for row in &mut self.rows {
            let f = row[i + 1];
            row[i + 1] = s * row[i] + c * f;
            row[i] = c * row[i] - s * f;
        }
    }

    fn permute(&mut self, order: &[usize]) {
        for row in &mut self.rows {
            *row = order.iter().map(|&j| row[j]).collect();
        }
    }
}

/// Full column-major eigenvector matrix.
pub struct FullVectors {
    z: DMatrix<f64>,
}

impl FullVectors {
    pub fn new(n: usize) -> Self {
        Self {
            z: DMatrix::identity(n, n),
        }
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.z
    }
}

impl RotationSink for FullVectors {
    #[inline]
    fn rotate(&mut self, i: usize, c: f64, s: f64) {
        let n = self.z.nrows();
        let data = self.z.as_mut_slice();
        let (head, tail) = data.split_at_mut((i + 1) * n);
        let left = &mut head[i * n..];
        let right = &mut tail[..n];
        for (zl, zr) in left.iter_mut().zip(right.iter_mut()) {
            let f = *zr;
            *zr = s * *zl + c * f;
            *zl = c * *zl - s * f;
        }
    }

    fn permute(&mut self, order: &[usize]) {
        let n = self.z.nrows();
        let mut out = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            out.set_column(dst, &self.z.column(src));
        }
        self.z = out;
    }
}

/// Diagonalizes the tridiagonal matrix `(diag, off)` in place of `diag`,
/// feeding rotations to `sink`. On return `diag` holds the eigenvalues in
/// ascending order and `sink` has been permuted to match.
pub fn ql_implicit<S: RotationSink>(diag: &mut [f64], off: &[f64], sink: &mut S) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    if off.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            actual: off.len(),
        });
    }
    let d = diag;
    let mut e = Vec::with_capacity(n);
    e.extend_from_slice(off);
    e.push(0.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERATIONS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: iter - 1,
                });
            }

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                sink.rotate(i, c, s);
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    if order.iter().enumerate().any(|(i, &j)| i != j) {
        let sorted: Vec<f64> = order.iter().map(|&j| d[j]).collect();
        d.copy_from_slice(&sorted);
        sink.permute(&order);
    }
    Ok(())
}

/// Eigenvalues only, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let mut d = diag.to_vec();
    ql_implicit(&mut d, off, &mut NoVectors)?;
    Ok(d)
}

/// Eigenvalues and the components of every eigenvector at the given indices.
pub fn tridiagonal_eigen_rows(
    diag: &[f64],
    off: &[f64],
    rows: &[usize],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if let Some(&bad) = rows.iter().find(|&&k| k >= n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad + 1,
        });
    }
    let mut d = diag.to_vec();
    let mut sink = SelectedRows::new(n, rows);
    ql_implicit(&mut d, off, &mut sink)?;
    Ok((d, sink.into_rows()))
}

/// Eigenvalues and orthonormal eigenvectors (columns).
pub fn tridiagonal_eigen_full(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let mut d = diag.to_vec();
    let mut sink = FullVectors::new(d.len());
    ql_implicit(&mut d, off, &mut sink)?;
    Ok((d, sink.into_matrix()))
}

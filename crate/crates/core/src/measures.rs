//! Finite atomic measures on ℝ: convolution, convolution powers and the
//! Fourier transform `μ̂(ξ) = Σ_j w_j e^{iξE_j}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Atoms closer than `COALESCE_REL · scale` are merged.
pub const COALESCE_REL: f64 = 1e-12;

/// Atoms lighter than `PRUNE_REL · mass` are dropped after a convolution.
pub const PRUNE_REL: f64 = 1e-15;

/// Default cap on the pairwise atom count of an exact convolution.
pub const DEFAULT_ATOM_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Finite nonnegative combination of point masses, sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
    /// Mass removed by pruning, accumulated through every operation.
    dropped_mass: f64,
}

impl Default for AtomicMeasure {
    fn default() -> Self {
        Self::empty()
    }
}

impl AtomicMeasure {
    pub fn empty() -> Self {
        Self {
            atoms: Vec::new(),
            total_mass: 0.0,
            dropped_mass: 0.0,
        }
    }

    pub fn dirac(position: f64) -> Self {
        Self {
            atoms: vec![Atom {
                position,
                weight: 1.0,
            }],
            total_mass: 1.0,
            dropped_mass: 0.0,
        }
    }

    /// Builds a measure from `(position, weight)` pairs, merging atoms closer
    /// than `tol`. Zero weights are discarded.
    pub fn from_atoms<I>(atoms: I, tol: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw = Vec::new();
        for (position, weight) in atoms {
            if !position.is_finite() || !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "invalid atom ({position}, {weight})"
                )));
            }
            if weight > 0.0 {
                raw.push(Atom { position, weight });
            }
        }
        raw.sort_by(|a, b| a.position.total_cmp(&b.position));
        Ok(Self::from_sorted(raw, tol, 0.0))
    }

    fn from_sorted(sorted: Vec<Atom>, tol: f64, dropped_mass: f64) -> Self {
        let atoms = coalesce_sorted(sorted, tol);
        let total_mass = atoms.iter().map(|a| a.weight).sum();
        Self {
            atoms,
            total_mass,
            dropped_mass,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    /// `∫ E^k dμ`.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.position.powi(k))
            .sum()
    }

    /// Largest `|position|`, or 0 for the empty measure.
    pub fn extent(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.position.abs())
            .fold(0.0, f64::max)
    }

    /// Drops atoms lighter than `rel · mass`, recording the removed mass.
    pub fn pruned(mut self, rel: f64) -> Self {
        let threshold = rel * self.total_mass;
        let dropped: f64 = self
            .atoms
            .iter()
            .filter(|a| a.weight < threshold)
            .map(|a| a.weight)
            .sum();
        if dropped > 0.0 {
            self.atoms.retain(|a| a.weight >= threshold);
            self.total_mass = self.atoms.iter().map(|a| a.weight).sum();
            self.dropped_mass += dropped;
        }
        self
    }

    /// `sup_A |μ(A) - ν(A)|` for measures of equal mass, i.e. half the ℓ¹
    /// distance of the weights; atoms within `tol` of each other are
    /// matched.
    pub fn total_variation(&self, other: &Self, tol: f64) -> f64 {
        let mut merged: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.position, a.weight))
            .chain(other.atoms.iter().map(|a| (a.position, -a.weight)))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut l1 = 0.0;
        let mut i = 0;
        while i < merged.len() {
            let mut j = i;
            let mut signed = 0.0;
            while j < merged.len() && merged[j].0 - merged[i].0 <= tol {
                signed += merged[j].1;
                j += 1;
            }
            l1 += signed.abs();
            i = j;
        }
        0.5 * l1
    }
}

fn coalesce_sorted(sorted: Vec<Atom>, tol: f64) -> Vec<Atom> {
    struct Cluster {
        anchor: f64,
        // Σ w (x - anchor)
        offset: f64,
        weight: f64,
        last: f64,
    }
    impl Cluster {
        fn atom(&self) -> Atom {
            Atom {
                position: self.anchor + self.offset / self.weight,
                weight: self.weight,
            }
        }
    }
    let mut out: Vec<Atom> = Vec::with_capacity(sorted.len());
    let mut open: Option<Cluster> = None;
    for a in sorted {
        match open.as_mut() {
            Some(c) if a.position - c.last <= tol => {
                c.offset += a.weight * (a.position - c.anchor);
                c.weight += a.weight;
                c.last = a.position;
            }
            _ => {
                if let Some(c) = open.take() {
                    out.push(c.atom());
                }
                open = Some(Cluster {
                    anchor: a.position,
                    offset: 0.0,
                    weight: a.weight,
                    last: a.position,
                });
            }
        }
    }
    if let Some(c) = open {
        out.push(c.atom());
    }
    out
}

fn default_tolerance(extent: f64) -> f64 {
    COALESCE_REL * extent.max(1.0)
}

/// Sampled Fourier transform `μ̂(ξ) = Σ_j w_j e^{iξE_j}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierTrace {
    pub xi: Grid,
    pub values: Vec<Complex64>,
}

impl FourierTrace {
    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// The part of the trace with `lo ≤ ξ ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<Self> {
        let (xi, values): (Vec<f64>, Vec<Complex64>) = self
            .xi
            .points()
            .iter()
            .zip(&self.values)
            .filter(|(&x, _)| x >= lo && x <= hi)
            .map(|(&x, &v)| (x, v))
            .unzip();
        Ok(Self {
            xi: Grid::new(xi)?,
            values,
        })
    }
}

/// Points evaluated per phasor chain; each chain starts from an exact
/// `sin_cos`.
const FOURIER_CHUNK: usize = 64;

/// Direct summation of `μ̂` over the grid, atoms in ascending order for each
/// `ξ`. Chunks of the grid are independent and run in parallel.
pub fn fourier(m: &AtomicMeasure, xi: &Grid) -> FourierTrace {
    let pts = xi.points();
    let mut values = vec![Complex64::new(0.0, 0.0); pts.len()];
    values
        .par_chunks_mut(FOURIER_CHUNK)
        .zip(pts.par_chunks(FOURIER_CHUNK))
        .for_each(|(out, chunk)| fourier_chunk(m.atoms(), chunk, out));
    FourierTrace {
        xi: xi.clone(),
        values,
    }
}

fn fourier_chunk(atoms: &[Atom], xi: &[f64], out: &mut [Complex64]) {
    let m = xi.len();
    let x0 = xi[0];
    let step = if m > 1 {
        (xi[m - 1] - x0) / (m - 1) as f64
    } else {
        0.0
    };
    let uniform = xi
        .iter()
        .enumerate()
        .all(|(k, &x)| (x - x0 - k as f64 * step).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0));
    let mut acc_re = vec![0.0; m];
    let mut acc_im = vec![0.0; m];
    if uniform {
        for a in atoms {
            let (s0, c0) = (x0 * a.position).sin_cos();
            let (ss, cs) = (step * a.position).sin_cos();
            let (mut pr, mut pi) = (c0, s0);
            for k in 0..m {
                acc_re[k] += a.weight * pr;
                acc_im[k] += a.weight * pi;
                let nr = pr * cs - pi * ss;
                pi = pr * ss + pi * cs;
                pr = nr;
            }
        }
    } else {
        for a in atoms {
            for k in 0..m {
                let (s, c) = (xi[k] * a.position).sin_cos();
                acc_re[k] += a.weight * c;
                acc_im[k] += a.weight * s;
            }
        }
    }
    for k in 0..m {
        out[k] = Complex64::new(acc_re[k], acc_im[k]);
    }
}

/// `μ ∗ ν`: atoms at all pairwise sums with product weights.
pub fn convolve_exact(a: &AtomicMeasure, b: &AtomicMeasure) -> Result<AtomicMeasure> {
    convolve_exact_capped(a, b, DEFAULT_ATOM_CAP)
}

pub fn convolve_exact_capped(
    a: &AtomicMeasure,
    b: &AtomicMeasure,
    cap: usize,
) -> Result<AtomicMeasure> {
    let count = a.len().saturating_mul(b.len());
    if count > cap {
        return Err(Error::AtomCap { count, cap });
    }
    let mut sums = Vec::with_capacity(count);
    for x in a.atoms() {
        for y in b.atoms() {
            sums.push(Atom {
                position: x.position + y.position,
                weight: x.weight * y.weight,
            });
        }
    }
    sums.sort_by(|p, q| p.position.total_cmp(&q.position));
    let dropped = carried_dropped_mass(a, b);
    let tol = default_tolerance(a.extent() + b.extent());
    Ok(AtomicMeasure::from_sorted(sums, tol, dropped).pruned(PRUNE_REL))
}

fn carried_dropped_mass(a: &AtomicMeasure, b: &AtomicMeasure) -> f64 {
    a.dropped_mass * (b.total_mass + b.dropped_mass) + a.total_mass * b.dropped_mass
}

/// Nearest-bin projection onto `hℤ`: `(first bin index, dense weights)`.
fn bin(m: &AtomicMeasure, h: f64) -> (i64, Vec<f64>) {
    if m.is_empty() {
        return (0, Vec::new());
    }
    let idx = |x: f64| (x / h).round() as i64;
    let lo = idx(m.atoms()[0].position);
    let hi = idx(m.atoms()[m.len() - 1].position);
    let mut w = vec![0.0; (hi - lo + 1) as usize];
    for a in m.atoms() {
        w[(idx(a.position) - lo) as usize] += a.weight;
    }
    (lo, w)
}

/// Convolution after projecting both inputs onto the lattice `hℤ`.
///
/// Each position of the result is within `h` of an exact pairwise sum.
pub fn convolve_binned(a: &AtomicMeasure, b: &AtomicMeasure, h: f64) -> Result<AtomicMeasure> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bin width must be positive, got {h}"
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(AtomicMeasure {
            dropped_mass: carried_dropped_mass(a, b),
            ..AtomicMeasure::empty()
        });
    }
    let (lo_a, wa) = bin(a, h);
    let (lo_b, wb) = bin(b, h);
    let nonzero_b: Vec<(usize, f64)> = wb
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, &w)| (i, w))
        .collect();
    let mut out = vec![0.0; wa.len() + wb.len() - 1];
    for (i, &x) in wa.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for &(j, y) in &nonzero_b {
            out[i + j] += x * y;
        }
    }
    let lo = lo_a + lo_b;
    let atoms = out
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(k, weight)| Atom {
            position: (lo + k as i64) as f64 * h,
            weight,
        })
        .collect();
    let dropped = carried_dropped_mass(a, b);
    Ok(AtomicMeasure::from_sorted(atoms, 0.0, dropped).pruned(PRUNE_REL))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvolutionMode {
    Exact,
    Binned { bin_width: f64 },
}

/// Default bin width for a coupling `V`: `1e-4 · (4 + 2V)`.
pub fn default_bin_width(coupling: f64) -> f64 {
    1e-4 * (4.0 + 2.0 * coupling)
}

/// `μ^{∗N}` by repeated squaring.
pub fn convolution_power(
    m: &AtomicMeasure,
    n: u32,
    mode: ConvolutionMode,
) -> Result<AtomicMeasure> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "convolution power needs N >= 1".into(),
        ));
    }
    let conv = |x: &AtomicMeasure, y: &AtomicMeasure| match mode {
        ConvolutionMode::Exact => convolve_exact(x, y),
        ConvolutionMode::Binned { bin_width } => convolve_binned(x, y, bin_width),
    };
    let mut result: Option<AtomicMeasure> = None;
    let mut base = m.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => conv(&r, &base)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = conv(&base, &base)?;
    }
    Ok(result.expect("n >= 1 sets the result"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point() -> AtomicMeasure {
        AtomicMeasure::from_atoms([(-1.0, 0.5), (1.0, 0.5)], 1e-12).unwrap()
    }

    fn assert_atoms(m: &AtomicMeasure, expect: &[(f64, f64)], tol: f64) {
        assert_eq!(m.len(), expect.len(), "{:?}", m.atoms());
        for (a, &(x, w)) in m.atoms().iter().zip(expect) {
            assert!((a.position - x).abs() <= tol && (a.weight - w).abs() <= tol);
        }
    }

    #[test]
    fn construction_and_coalescing() {
        let m = AtomicMeasure::from_atoms(
            [(1.0, 0.25), (0.0, 0.5), (1.0 + 1e-14, 0.25), (3.0, 0.0)],
            1e-12,
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.total_mass() - 1.0).abs() < 1e-15);
        assert!(AtomicMeasure::from_atoms([(0.0, -0.1)], 1e-12).is_err());
        assert!(AtomicMeasure::from_atoms([(f64::NAN, 0.1)], 1e-12).is_err());
    }

    #[test]
    fn fourier_examples() {
        let grid = Grid::linear(-3.0, 7.0, 201).unwrap();
        let origin = fourier(&AtomicMeasure::dirac(0.0), &grid);
        assert!(origin
            .values
            .iter()
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let cosine = fourier(&two_point(), &grid);
        for (x, v) in grid.points().iter().zip(&cosine.values) {
            assert!((v.re - x.cos()).abs() < 1e-14 && v.im.abs() < 1e-14);
        }

        let c = 2.3;
        let shifted = fourier(&AtomicMeasure::dirac(c), &grid);
        for (x, v) in grid.points().iter().zip(&shifted.values) {
            assert!((v - Complex64::from_polar(1.0, c * x)).norm() < 1e-13);
        }
    }

    #[test]
    fn fourier_matches_naive_sum_on_both_paths() {
        let m = AtomicMeasure::from_atoms((0..50).map(|i| ((i as f64).sin() * 2.4, 0.02)), 1e-12)
            .unwrap();
        let naive = |x: f64| -> Complex64 {
            m.atoms()
                .iter()
                .map(|a| Complex64::from_polar(a.weight, x * a.position))
                .sum()
        };
        let uniform = Grid::linear(0.0, 1000.0, 4001).unwrap();
        let irregular = Grid::new(
            uniform
                .points()
                .iter()
                .map(|x| x + 1e-3 * x.sin())
                .collect(),
        )
        .unwrap();
        for grid in [uniform, irregular] {
            let tr = fourier(&m, &grid);
            for (&x, v) in grid.points().iter().zip(&tr.values) {
                assert!((v - naive(x)).norm() < 1e-11, "xi={x}");
            }
        }
    }

    #[test]
    fn convolution_examples() {
        let d = convolve_exact(&AtomicMeasure::dirac(0.5), &AtomicMeasure::dirac(-2.0)).unwrap();
        assert_atoms(&d, &[(-1.5, 1.0)], 0.0);

        let sq = convolve_exact(&two_point(), &two_point()).unwrap();
        assert_atoms(&sq, &[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)], 1e-15);

        let m = AtomicMeasure::from_atoms([(0.3, 0.2), (1.7, 0.8)], 1e-12).unwrap();
        assert_eq!(convolve_exact(&m, &AtomicMeasure::dirac(0.0)).unwrap(), m);

        assert!(matches!(
            convolve_exact_capped(&sq, &sq, 8),
            Err(Error::AtomCap { count: 9, cap: 8 })
        ));
    }

    #[test]
    fn binned_convolution() {
        let d =
            convolve_binned(&AtomicMeasure::dirac(0.0), &AtomicMeasure::dirac(0.0), 0.37).unwrap();
        assert_atoms(&d, &[(0.0, 1.0)], 0.0);

        let binned = convolve_binned(&two_point(), &two_point(), 0.5).unwrap();
        let exact = convolve_exact(&two_point(), &two_point()).unwrap();
        assert_atoms(&binned, &[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)], 1e-15);
        assert_eq!(binned.len(), exact.len());

        assert!(convolve_binned(&two_point(), &two_point(), 0.0).is_err());
    }

    #[test]
    fn binned_fourier_error_bound() {
        let a = AtomicMeasure::from_atoms(
            (0..40).map(|i| ((i as f64 * 0.77).sin() * 2.0, 0.025)),
            1e-12,
        )
        .unwrap();
        let b = AtomicMeasure::from_atoms(
            (0..30).map(|i| ((i as f64 * 1.31).cos() * 2.5, 1.0 / 30.0)),
            1e-12,
        )
        .unwrap();
        let h = 1e-3;
        let grid = Grid::linear(0.0, 100.0, 401).unwrap();
        let fe = fourier(&convolve_exact(&a, &b).unwrap(), &grid);
        let fb = fourier(&convolve_binned(&a, &b, h).unwrap(), &grid);
        let mass = a.total_mass() * b.total_mass();
        for ((x, u), v) in grid.points().iter().zip(&fe.values).zip(&fb.values) {
            assert!((u - v).norm() <= mass * mass * h * x + 1e-12);
        }
    }

    #[test]
    fn binomial_power() {
        let p = convolution_power(&two_point(), 4, ConvolutionMode::Exact).unwrap();
        let expect: Vec<(f64, f64)> =
            [(-4.0, 1.0), (-2.0, 4.0), (0.0, 6.0), (2.0, 4.0), (4.0, 1.0)]
                .iter()
                .map(|&(x, w)| (x, w / 16.0))
                .collect();
        assert_atoms(&p, &expect, 1e-15);
        let m = AtomicMeasure::from_atoms([(0.3, 0.2), (1.7, 0.8)], 1e-12).unwrap();
        assert_eq!(convolution_power(&m, 1, ConvolutionMode::Exact).unwrap(), m);
        assert!(convolution_power(&m, 0, ConvolutionMode::Exact).is_err());
        let binned =
            convolution_power(&two_point(), 4, ConvolutionMode::Binned { bin_width: 0.5 }).unwrap();
        assert_atoms(&binned, &expect, 1e-15);
    }

    #[test]
    fn pruning_is_tracked() {
        let m = AtomicMeasure::from_atoms([(0.0, 1.0), (1.0, 1e-17)], 1e-12).unwrap();
        let p = m.pruned(PRUNE_REL);
        assert_eq!(p.len(), 1);
        assert!((p.dropped_mass() - 1e-17).abs() < 1e-30);
    }

    #[test]
    fn total_variation_basics() {
        let a = two_point();
        assert_eq!(a.total_variation(&a, 1e-12), 0.0);
        let b = AtomicMeasure::from_atoms([(-1.0, 0.25), (1.0, 0.75)], 1e-12).unwrap();
        assert!((a.total_variation(&b, 1e-12) - 0.25).abs() < 1e-15);
        assert!((a.total_variation(&AtomicMeasure::dirac(5.0), 1e-12) - 1.0).abs() < 1e-15);
    }

    fn measure_strategy() -> impl Strategy<Value = AtomicMeasure> {
        prop::collection::vec((-3.0f64..3.0, 0.0f64..1.0), 1..12)
            .prop_map(|atoms| AtomicMeasure::from_atoms(atoms, 1e-12).unwrap())
    }

    proptest! {
        #[test]
        fn convolution_theorem(a in measure_strategy(), b in measure_strategy()) {
            let grid = Grid::linear(-20.0, 20.0, 81).unwrap();
            let fc = fourier(&convolve_exact(&a, &b).unwrap(), &grid);
            let fa = fourier(&a, &grid);
            let fb = fourier(&b, &grid);
            for k in 0..grid.len() {
                prop_assert!((fc.values[k] - fa.values[k] * fb.values[k]).norm() < 1e-10);
            }
        }

        #[test]
        fn convolution_is_commutative_and_associative(
            a in measure_strategy(), b in measure_strategy(), c in measure_strategy()
        ) {
            let ab = convolve_exact(&a, &b).unwrap();
            let ba = convolve_exact(&b, &a).unwrap();
            prop_assert!(ab.total_variation(&ba, 1e-10) < 1e-12);
            let ab_c = convolve_exact(&ab, &c).unwrap();
            let a_bc = convolve_exact(&a, &convolve_exact(&b, &c).unwrap()).unwrap();
            prop_assert!(ab_c.total_variation(&a_bc, 1e-10) < 1e-12);
        }

        #[test]
        fn mass_is_multiplicative(a in measure_strategy(), b in measure_strategy()) {
            let ab = convolve_exact(&a, &b).unwrap();
            let expect = a.total_mass() * b.total_mass();
            prop_assert!((ab.total_mass() + ab.dropped_mass() - expect).abs() <= 1e-12 * expect);
        }

        #[test]
        fn fourier_bounded_by_mass(a in measure_strategy(), x in -500.0f64..500.0) {
            let grid = Grid::new(vec![x]).unwrap();
            prop_assert!(fourier(&a, &grid).values[0].norm() <= a.total_mass() * (1.0 + 1e-14));
        }

        #[test]
        fn power_matches_fourier_power(a in measure_strategy(), n in 1u32..5) {
            let grid = Grid::linear(0.0, 10.0, 41).unwrap();
            let p = convolution_power(&a, n, ConvolutionMode::Exact).unwrap();
            prop_assert!((p.total_mass() + p.dropped_mass() - a.total_mass().powi(n as i32)).abs()
                <= 1e-10 * a.total_mass().powi(n as i32));
            let fp = fourier(&p, &grid);
            let fa = fourier(&a, &grid);
            for k in 0..grid.len() {
                prop_assert!((fp.values[k] - fa.values[k].powu(n)).norm() < 1e-8);
            }
        }
    }
}

//! Power-law decay estimates for `|μ̂(ξ)|` and the L² test for `μ̂^N`.
//!
//! `|μ̂|` oscillates, so the decay is measured on an envelope: the maximum of
//! `|μ̂|` over log-uniform blocks, fitted by ordinary least squares in ln-ln
//! coordinates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::FourierTrace;

pub const DEFAULT_BLOCKS_PER_DECADE: usize = 8;

/// Default fit window: the first decade is treated as transient.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (10.0, 1000.0);

/// Maximum of a sampled modulus over `[left, right)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMax {
    /// Geometric center `√(left·right)`, the abscissa used by the fit.
    pub center: f64,
    pub value: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub epsilon: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    pub stderr: f64,
    pub block_maxima: Vec<BlockMax>,
}

/// Block maxima of `|μ̂|` over `nb = round(blocks_per_decade · log10(hi/lo))`
/// log-uniform blocks spanning the positive part of the grid, `[lo, hi]`.
/// The last block is closed; blocks without samples are skipped.
pub fn envelope(trace: &FourierTrace, blocks_per_decade: usize) -> Result<Vec<BlockMax>> {
    if blocks_per_decade == 0 {
        return Err(Error::InvalidParameter(
            "blocks_per_decade must be at least 1".into(),
        ));
    }
    let samples: Vec<(f64, f64)> = trace
        .xi
        .points()
        .iter()
        .zip(&trace.values)
        .filter(|(&x, _)| x > 0.0)
        .map(|(&x, v)| (x, v.norm()))
        .collect();
    let (lo, hi) = match (samples.first(), samples.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::GridTooShort("no positive frequencies".into())),
    };
    let decades = (hi / lo).log10();
    if decades < 1.0 - 1e-12 {
        return Err(Error::GridTooShort(format!(
            "grid [{lo}, {hi}] spans {decades:.3} decades, need at least 1"
        )));
    }
    let nb = ((blocks_per_decade as f64 * decades).round() as usize).max(1);
    let ratio = (hi / lo).powf(1.0 / nb as f64);
    let edge = |b: usize| {
        if b == nb {
            hi
        } else {
            lo * ratio.powi(b as i32)
        }
    };

    // samples within rounding of an edge belong to the upper block
    let log_span = (hi / lo).ln();
    let mut best: Vec<Option<f64>> = vec![None; nb];
    for &(x, v) in &samples {
        let b = ((nb as f64 * (x / lo).ln() / log_span + 1e-9).floor() as usize).min(nb - 1);
        best[b] = Some(best[b].map_or(v, |m: f64| m.max(v)));
    }
    let out: Vec<BlockMax> = best
        .iter()
        .enumerate()
        .filter_map(|(b, m)| {
            let (left, right) = (edge(b), edge(b + 1));
            m.map(|value| BlockMax {
                center: (left * right).sqrt(),
                value,
                left,
                right,
            })
        })
        .collect();
    Ok(out)
}

/// OLS of `ln value` against `ln center`; `epsilon = -slope`.
pub fn fit_decay(blocks: &[BlockMax]) -> Result<DecayFit> {
    if blocks.len() < 4 {
        return Err(Error::GridTooShort(format!(
            "decay fit needs at least 4 blocks, got {}",
            blocks.len()
        )));
    }
    if let Some(b) = blocks
        .iter()
        .find(|b| b.value.is_nan() || b.value <= 0.0 || b.center.is_nan() || b.center <= 0.0)
    {
        return Err(Error::DegenerateWindow(format!(
            "non-positive envelope {} at {}",
            b.value, b.center
        )));
    }
    let n = blocks.len() as f64;
    let xs: Vec<f64> = blocks.iter().map(|b| b.center.ln()).collect();
    let ys: Vec<f64> = blocks.iter().map(|b| b.value.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx.is_nan() || sxx <= 0.0 {
        return Err(Error::DegenerateWindow("all block centers coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let window = (
        blocks.iter().map(|b| b.left).fold(f64::INFINITY, f64::min),
        blocks
            .iter()
            .map(|b| b.right)
            .fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(DecayFit {
        epsilon: -slope,
        intercept,
        fit_window: window,
        stderr,
        block_maxima: blocks.to_vec(),
    })
}

/// Restricts the trace to `window`, takes the envelope and fits it.
pub fn decay_analysis(
    trace: &FourierTrace,
    blocks_per_decade: usize,
    window: (f64, f64),
) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::DegenerateWindow(format!(
            "invalid fit window [{lo}, {hi}]"
        )));
    }
    if trace.xi.first() > lo || trace.xi.last() < hi {
        return Err(Error::GridTooShort(format!(
            "grid [{}, {}] does not cover the fit window [{lo}, {hi}]",
            trace.xi.first(),
            trace.xi.last()
        )));
    }
    let w = trace.window(lo, hi)?;
    fit_decay(&envelope(&w, blocks_per_decade)?)
}

/// Smallest `N` with `N·ε > 1/2`, the point where `|ξ|^{-Nε}` becomes
/// square integrable at infinity.
pub fn min_power_for_l2(epsilon: f64) -> Result<u64> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "no finite power is certified for epsilon = {epsilon}"
        )));
    }
    let mut n = (0.5 / epsilon).floor() as u64 + 1;
    while n > 1 && (n - 1) as f64 * epsilon > 0.5 {
        n -= 1;
    }
    while n as f64 * epsilon <= 0.5 {
        n += 1;
    }
    Ok(n)
}

/// Partial integrals `∫_{-Ξ}^{Ξ} |μ̂|^{2N} dξ = 2 ∫_0^Ξ |μ̂|^{2N} dξ` by the
/// trapezoid rule, for each cutoff. The integrand is interpolated linearly
/// at `Ξ` and held constant on `[0, first grid point]`.
pub fn l2_growth_diagnostic(trace: &FourierTrace, n: u64, cutoffs: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("power must be at least 1".into()));
    }
    if cutoffs.windows(2).any(|w| w[1] < w[0]) || cutoffs.iter().any(|&c| c.is_nan() || c < 0.0) {
        return Err(Error::InvalidParameter(
            "cutoffs must be nonnegative and increasing".into(),
        ));
    }
    let xs = trace.xi.points();
    if xs[0] < 0.0 {
        return Err(Error::InvalidParameter("trace must start at ξ ≥ 0".into()));
    }
    if let Some(&c) = cutoffs.iter().find(|&&c| c > trace.xi.last()) {
        return Err(Error::GridTooShort(format!(
            "cutoff {c} exceeds the grid end {}",
            trace.xi.last()
        )));
    }
    let pow = i32::try_from(2 * n)
        .map_err(|_| Error::InvalidParameter(format!("power {n} too large")))?;
    let f: Vec<f64> = trace.values.iter().map(|v| v.norm().powi(pow)).collect();

    // cumulative integral from 0 up to each grid point
    let mut cum = Vec::with_capacity(xs.len());
    cum.push(f[0] * xs[0]);
    for i in 1..xs.len() {
        cum.push(cum[i - 1] + 0.5 * (f[i] + f[i - 1]) * (xs[i] - xs[i - 1]));
    }
    Ok(cutoffs
        .iter()
        .map(|&c| {
            let half = if c <= xs[0] {
                f[0] * c
            } else {
                let i = xs.partition_point(|&x| x < c);
                if xs[i] == c {
                    cum[i]
                } else {
                    let s = (c - xs[i - 1]) / (xs[i] - xs[i - 1]);
                    let fc = f[i - 1] + s * (f[i] - f[i - 1]);
                    cum[i - 1] + 0.5 * (f[i - 1] + fc) * (c - xs[i - 1])
                }
            };
            2.0 * half
        })
        .collect())
}

/// Maxima of `|values|` over the dyadic windows `[2^j, 2^{j+1})` for
/// `j = j_min..=j_max`; windows are clipped to the sampled range and empty
/// windows are an error.
pub fn dyadic_block_maxima(
    t: &[f64],
    moduli: &[f64],
    j_min: u32,
    j_max: u32,
) -> Result<Vec<BlockMax>> {
    (j_min..=j_max)
        .map(|j| {
            let left = 2f64.powi(j as i32);
            let right = 2.0 * left;
            let value = t
                .iter()
                .zip(moduli)
                .filter(|(&x, _)| x >= left && x < right)
                .map(|(_, &v)| v)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
                .ok_or_else(|| Error::GridTooShort(format!("no samples in [{left}, {right})")))?;
            Ok(BlockMax {
                center: (left * right).sqrt(),
                value,
                left,
                right,
            })
        })
        .collect()
}

/// Hausdorff distance between two finite point sets on ℝ.
pub fn hausdorff_distance(a: &[f64], b: &[f64]) -> f64 {
    fn one_sided(a: &[f64], sorted_b: &[f64]) -> f64 {
        a.iter()
            .map(|&x| {
                let i = sorted_b.partition_point(|&y| y < x);
                let right = sorted_b.get(i).map_or(f64::INFINITY, |&y| y - x);
                let left = i.checked_sub(1).map_or(f64::INFINITY, |k| x - sorted_b[k]);
                left.min(right)
            })
            .fold(0.0, f64::max)
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    one_sided(&sa, &sb).max(one_sided(&sb, &sa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn trace_from(grid: Grid, f: impl Fn(f64) -> Complex64) -> FourierTrace {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        FourierTrace { xi: grid, values }
    }

    fn power_law(e: f64, c: f64) -> FourierTrace {
        let grid = Grid::logarithmic(10.0, 1000.0, 1601).unwrap();
        trace_from(grid, |x| Complex64::new(c * x.powf(-e), 0.0))
    }

    #[test]
    fn envelope_of_constant_trace() {
        let t = trace_from(Grid::linear(1.0, 100.0, 500).unwrap(), |_| {
            Complex64::new(0.0, 1.0)
        });
        let env = envelope(&t, 8).unwrap();
        assert_eq!(env.len(), 16);
        assert!(env.iter().all(|b| b.value == 1.0));
    }

    #[test]
    fn envelope_of_monotone_power_law_is_left_edge() {
        // 10 samples per block, aligned with the block edges
        let grid = Grid::logarithmic(10.0, 1000.0, 161).unwrap();
        let t = trace_from(grid, |x| Complex64::new(x.powf(-0.5), 0.0));
        let env = envelope(&t, 8).unwrap();
        assert_eq!(env.len(), 16);
        for b in &env {
            assert!((b.value - b.left.powf(-0.5)).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn envelope_of_cosine() {
        let t = trace_from(Grid::linear(10.0, 1000.0, 20_000).unwrap(), |x| {
            Complex64::new(x.cos(), 0.0)
        });
        for b in envelope(&t, 8).unwrap() {
            assert!(b.value > 0.99, "{b:?}");
        }
    }

    #[test]
    fn envelope_rejects_short_grids() {
        let t = trace_from(Grid::linear(1.0, 5.0, 50).unwrap(), |_| {
            Complex64::new(1.0, 0.0)
        });
        assert!(matches!(envelope(&t, 8), Err(Error::GridTooShort(_))));
        let one = trace_from(Grid::new(vec![3.0]).unwrap(), |_| Complex64::new(1.0, 0.0));
        assert!(matches!(envelope(&one, 8), Err(Error::GridTooShort(_))));
        assert!(envelope(&one, 0).is_err());
    }

    #[test]
    fn exact_power_law_fit() {
        let fit = decay_analysis(&power_law(0.5, 1.0), 8, (10.0, 1000.0)).unwrap();
        assert!((fit.epsilon - 0.5).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert_eq!(fit.fit_window, (10.0, 1000.0));
        let again = fit_decay(&fit.block_maxima).unwrap();
        assert_eq!(again, fit);
    }

    #[test]
    fn constant_envelope_has_zero_exponent() {
        let fit = decay_analysis(&power_law(0.0, 0.7), 8, (10.0, 1000.0)).unwrap();
        assert!(fit.epsilon.abs() < 1e-12);
    }

    #[test]
    fn fit_needs_four_blocks_and_spread() {
        let b = BlockMax {
            center: 2.0,
            value: 1.0,
            left: 1.0,
            right: 4.0,
        };
        assert!(matches!(fit_decay(&[b; 3]), Err(Error::GridTooShort(_))));
        assert!(matches!(
            fit_decay(&[b; 5]),
            Err(Error::DegenerateWindow(_))
        ));
        let zero = BlockMax { value: 0.0, ..b };
        assert!(matches!(
            fit_decay(&[b, b, b, zero]),
            Err(Error::DegenerateWindow(_))
        ));
    }

    #[test]
    fn recovers_synthetic_exponents() {
        for e in [0.1, 0.3, 0.5, 0.9] {
            let fit = decay_analysis(&power_law(e, 2.5), 8, (10.0, 1000.0)).unwrap();
            assert!((fit.epsilon - e).abs() < 1e-10, "e={e}: {}", fit.epsilon);
        }
    }

    #[test]
    fn min_power_examples() {
        assert_eq!(min_power_for_l2(0.5).unwrap(), 2);
        assert_eq!(min_power_for_l2(0.1).unwrap(), 6);
        assert_eq!(min_power_for_l2(0.26).unwrap(), 2);
        assert_eq!(min_power_for_l2(1.0).unwrap(), 1);
        assert!(min_power_for_l2(0.0).is_err());
        assert!(min_power_for_l2(-0.2).is_err());
        assert!(min_power_for_l2(f64::NAN).is_err());
    }

    #[test]
    fn l2_of_constant_trace_grows_linearly() {
        let t = trace_from(Grid::linear(0.0, 100.0, 1001).unwrap(), |_| {
            Complex64::new(1.0, 0.0)
        });
        let parts = l2_growth_diagnostic(&t, 3, &[1.0, 10.0, 55.55, 100.0]).unwrap();
        for (p, c) in parts.iter().zip([1.0, 10.0, 55.55, 100.0]) {
            assert!((p - 2.0 * c).abs() < 1e-12, "{p} vs {c}");
        }
    }

    #[test]
    fn l2_of_inverse_square_root_converges() {
        let t = trace_from(Grid::linear(1.0, 1000.0, 400_000).unwrap(), |x| {
            Complex64::new(x.powf(-0.5), 0.0)
        });
        let cutoffs = [10.0, 100.0, 1000.0];
        let parts = l2_growth_diagnostic(&t, 2, &cutoffs).unwrap();
        for (p, c) in parts.iter().zip(cutoffs) {
            assert!((p - (4.0 - 2.0 / c)).abs() < 1e-4, "{p} at {c}");
        }
    }

    #[test]
    fn l2_rejects_cutoff_past_grid() {
        let t = trace_from(Grid::linear(0.0, 10.0, 11).unwrap(), |_| {
            Complex64::new(1.0, 0.0)
        });
        assert!(matches!(
            l2_growth_diagnostic(&t, 1, &[20.0]),
            Err(Error::GridTooShort(_))
        ));
        assert!(l2_growth_diagnostic(&t, 1, &[5.0, 2.0]).is_err());
        assert!(l2_growth_diagnostic(&t, 0, &[5.0]).is_err());
    }

    #[test]
    fn dyadic_blocks() {
        let t: Vec<f64> = (0..=1000).map(|i| i as f64).collect();
        let m: Vec<f64> = t.iter().map(|&x| 1.0 / (1.0 + x)).collect();
        let blocks = dyadic_block_maxima(&t, &m, 2, 9).unwrap();
        assert_eq!(blocks.len(), 8);
        assert_eq!(blocks[0].value, 1.0 / 5.0);
        assert_eq!(blocks[7].value, 1.0 / 513.0);
        assert!(dyadic_block_maxima(&t, &m, 2, 10).is_err());
    }

    #[test]
    fn hausdorff() {
        assert_eq!(hausdorff_distance(&[0.0, 1.0], &[1.0, 0.0]), 0.0);
        assert_eq!(hausdorff_distance(&[0.0, 1.0], &[0.0, 1.0, 3.0]), 2.0);
        assert_eq!(hausdorff_distance(&[0.5], &[0.0, 1.0]), 0.5);
    }

    proptest! {
        #[test]
        fn min_power_brackets_one_half(e in 1e-6f64..=1.0, d in 0.0f64..0.5) {
            let n = min_power_for_l2(e).unwrap();
            prop_assert!(n as f64 * e > 0.5);
            prop_assert!((n - 1) as f64 * e <= 0.5);
            prop_assert!(min_power_for_l2((e + d).min(1.0)).unwrap() <= n);
        }

        #[test]
        fn l2_partial_integrals_are_monotone(
            vals in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 20..60),
            n in 1u64..4,
        ) {
            let grid = Grid::linear(0.5, 30.0, vals.len()).unwrap();
            let t = FourierTrace {
                xi: grid,
                values: vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect(),
            };
            let cutoffs: Vec<f64> = (0..=30).map(|k| k as f64).collect();
            let parts = l2_growth_diagnostic(&t, n, &cutoffs).unwrap();
            prop_assert!(parts.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

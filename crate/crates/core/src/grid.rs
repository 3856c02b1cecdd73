use serde::Serialize;

use crate::error::{Error, Result};

/// Strictly increasing sample points (frequencies or times).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Grid(Vec<f64>);

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::GridTooShort("grid has no points".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid contains non-finite values".into(),
            ));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "grid is not strictly increasing".into(),
            ));
        }
        Ok(Self(points))
    }

    /// `n` equally spaced points from `start` to `end` inclusive.
    pub fn linear(start: f64, end: f64, n: usize) -> Result<Self> {
        match n {
            0 => Err(Error::GridTooShort("zero points requested".into())),
            1 => Self::new(vec![start]),
            _ => {
                let h = (end - start) / (n - 1) as f64;
                let mut pts: Vec<f64> = (0..n).map(|i| start + i as f64 * h).collect();
                pts[n - 1] = end;
                Self::new(pts)
            }
        }
    }

    /// `n` log-uniform points from `start` to `end` inclusive (`0 < start`).
    pub fn logarithmic(start: f64, end: f64, n: usize) -> Result<Self> {
        if start.is_nan() || start <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "logarithmic grid needs a positive start, got {start}"
            )));
        }
        match n {
            0 => Err(Error::GridTooShort("zero points requested".into())),
            1 => Self::new(vec![start]),
            _ => {
                let (a, b) = (start.ln(), end.ln());
                let h = (b - a) / (n - 1) as f64;
                let mut pts: Vec<f64> = (0..n).map(|i| (a + i as f64 * h).exp()).collect();
                pts[0] = start;
                pts[n - 1] = end;
                Self::new(pts)
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Grid {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

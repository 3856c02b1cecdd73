//! Parsing of `--psi` / `--phi` state specifications.

use std::str::FromStr;

use num_complex::Complex64;
use quasispec::StateVector;

use crate::CliError;

/// `site:value,...` or `@file.json` with `[[site, re, im], ...]`; `None`
/// means `δ₀`.
pub fn parse_state(text: Option<&str>, half_width: usize) -> Result<StateVector, CliError> {
    let sites = match text {
        None => vec![(0, Complex64::new(1.0, 0.0))],
        Some(s) => match s.strip_prefix('@') {
            Some(path) => read_state_file(path)?,
            None => parse_site_list(s)?,
        },
    };
    StateVector::from_sites(half_width, &sites).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_site_list(s: &str) -> Result<Vec<(i64, Complex64)>, CliError> {
    let bad =
        |item: &str, why: String| CliError::Config(format!("bad state entry `{item}`: {why}"));
    s.split(',')
        .map(str::trim)
        .filter(|item| !item.is_empty())
        .map(|item| {
            let (site, value) = item
                .split_once(':')
                .ok_or_else(|| bad(item, "expected site:value".into()))?;
            let site = site
                .trim()
                .parse::<i64>()
                .map_err(|e| bad(item, e.to_string()))?;
            let value = Complex64::from_str(value.trim()).map_err(|e| bad(item, e.to_string()))?;
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(bad(item, "non-finite amplitude".into()));
            }
            Ok((site, value))
        })
        .collect()
}

fn read_state_file(path: &str) -> Result<Vec<(i64, Complex64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let rows: Vec<(i64, f64, f64)> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    Ok(rows
        .into_iter()
        .map(|(n, re, im)| (n, Complex64::new(re, im)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_site_lists() {
        let s = parse_state(Some("0:1.0, 1:0.5+0.2i,-2:-3i"), 3).unwrap();
        assert_eq!(s.at(0), Complex64::new(1.0, 0.0));
        assert_eq!(s.at(1), Complex64::new(0.5, 0.2));
        assert_eq!(s.at(-2), Complex64::new(0.0, -3.0));
        assert_eq!(
            parse_state(None, 2).unwrap(),
            StateVector::delta(2, 0).unwrap()
        );
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(matches!(
            parse_state(Some("0=1"), 3),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_state(Some("x:1"), 3),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_state(Some("0:abc"), 3),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_state(Some("9:1"), 3),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse_state(Some("@/nonexistent.json"), 3),
            Err(CliError::Io(_))
        ));
    }
}

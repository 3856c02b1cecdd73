//! CSV artifacts.
//!
//! | kind       | header             |
//! |------------|--------------------|
//! | measure    | `position,weight`  |
//! | trace      | `xi,re,im,abs`     |
//! | amplitude  | `t,re,im,abs`      |
//!
//! Floats use the shortest representation that round-trips; lines end in LF.

use std::io::{self, BufRead, Write};

use num_complex::Complex64;

use crate::dynamics::AmplitudeSeries;
use crate::grid::Grid;
use crate::measures::{AtomicMeasure, FourierTrace};

pub const MEASURE_HEADER: &str = "position,weight";
pub const TRACE_HEADER: &str = "xi,re,im,abs";
pub const AMPLITUDE_HEADER: &str = "t,re,im,abs";

pub fn write_measure_csv<W: Write>(mut w: W, m: &AtomicMeasure) -> io::Result<()> {
    writeln!(w, "{MEASURE_HEADER}")?;
    for a in m.atoms() {
        writeln!(w, "{:?},{:?}", a.position, a.weight)?;
    }
    w.flush()
}

fn write_complex_rows<W: Write>(
    mut w: W,
    header: &str,
    x: &[f64],
    values: &[Complex64],
) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for (x, v) in x.iter().zip(values) {
        writeln!(w, "{:?},{:?},{:?},{:?}", x, v.re, v.im, v.norm())?;
    }
    w.flush()
}

pub fn write_trace_csv<W: Write>(w: W, trace: &FourierTrace) -> io::Result<()> {
    write_complex_rows(w, TRACE_HEADER, trace.xi.points(), &trace.values)
}

pub fn write_amplitude_csv<W: Write>(w: W, series: &AmplitudeSeries) -> io::Result<()> {
    write_complex_rows(w, AMPLITUDE_HEADER, series.t.points(), &series.values)
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

fn read_rows<R: BufRead>(r: R, header: &str) -> io::Result<Vec<Vec<f64>>> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h == header => {}
        Some(Ok(h)) => return Err(invalid(format!("expected header `{header}`, found `{h}`"))),
        Some(Err(e)) => return Err(e),
        None => return Err(invalid("empty file".into())),
    }
    let cols = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("line {}: {e}", i + 2)))?;
        if row.len() != cols {
            return Err(invalid(format!("line {}: expected {cols} columns", i + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_measure_csv<R: BufRead>(r: R) -> io::Result<AtomicMeasure> {
    let atoms = read_rows(r, MEASURE_HEADER)?
        .into_iter()
        .map(|row| (row[0], row[1]));
    AtomicMeasure::from_atoms(atoms, 0.0).map_err(|e| invalid(e.to_string()))
}

fn read_complex_rows<R: BufRead>(r: R, header: &str) -> io::Result<(Grid, Vec<Complex64>)> {
    let (x, values): (Vec<f64>, Vec<Complex64>) = read_rows(r, header)?
        .into_iter()
        .map(|row| (row[0], Complex64::new(row[1], row[2])))
        .unzip();
    Ok((Grid::new(x).map_err(|e| invalid(e.to_string()))?, values))
}

pub fn read_trace_csv<R: BufRead>(r: R) -> io::Result<FourierTrace> {
    let (xi, values) = read_complex_rows(r, TRACE_HEADER)?;
    Ok(FourierTrace { xi, values })
}

pub fn read_amplitude_csv<R: BufRead>(r: R) -> io::Result<AmplitudeSeries> {
    let (t, values) = read_complex_rows(r, AMPLITUDE_HEADER)?;
    Ok(AmplitudeSeries { t, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_round_trip() {
        let m = AtomicMeasure::from_atoms([(-0.1, 1e-20), (2.0 / 3.0, 0.3)], 0.0).unwrap();
        let mut buf = Vec::new();
        write_measure_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("position,weight\n-0.1,1e-20\n"), "{text}");
        assert!(!text.contains('\r'));
        assert_eq!(read_measure_csv(&buf[..]).unwrap(), m);
    }

    #[test]
    fn trace_round_trip() {
        let t = FourierTrace {
            xi: Grid::linear(0.0, 1.0, 3).unwrap(),
            values: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.1, -0.2),
                Complex64::new(0.0, 0.7),
            ],
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &t).unwrap();
        assert!(buf.starts_with(b"xi,re,im,abs\n0.0,1.0,0.0,1.0\n"));
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), t);
        assert!(read_amplitude_csv(&buf[..]).is_err());
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(read_trace_csv(&b""[..]).is_err());
        assert!(read_trace_csv(&b"xi,re,im,abs\n1,2,3\n"[..]).is_err());
        assert!(read_measure_csv(&b"position,weight\n1,x\n"[..]).is_err());
    }
}

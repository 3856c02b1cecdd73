use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "output directory {} does not exist",
            dir.display()
        )))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Creates `dir/name` and hands a buffered writer to `f`.
pub fn write_file<F>(dir: &Path, name: &str, f: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

/// Rows of shortest round-trip floats under a header.
pub fn write_rows(
    dir: &Path,
    name: &str,
    header: &str,
    rows: &[Vec<f64>],
) -> Result<PathBuf, CliError> {
    write_file(dir, name, |w| {
        writeln!(w, "{header}")?;
        for row in rows {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

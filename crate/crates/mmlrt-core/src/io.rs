//! Wire formats.
//!
//! All numeric output is written with 17 significant digits (`{:.16e}`), the
//! shortest width that round-trips every f64 bit pattern.  Reports produced
//! with the same seed are therefore byte-identical regardless of worker
//! count, and a written value parses back to exactly the f64 that produced
//! it.
//!
//! Formats:
//! - paths: JSON Lines, one path object per line
//!   `{"z0": 0, "segments": [[0, 0.4], [1, 0.6]], "T": 1.0}`
//! - censored samples: single-column CSV with header `x`, plus a sidecar
//!   JSON `{"T": ..., "n": ..., "theta_true": ...}` (theta_true optional)
//! - everything else: single JSON documents via [`to_json_17`]

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// serde_json formatter that prints every float with 17 significant digits.
struct SigFig17;

impl serde_json::ser::Formatter for SigFig17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            // JSON has no inf/nan; null is the conventional stand-in.
            writer.write_all(b"null")
        }
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.write_f64(writer, value as f64)
    }
}

/// Serialize to a compact JSON string with full-precision floats.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFig17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// Write a single JSON document (trailing newline included).
pub fn write_json_17<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(to_json_17(value)?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Read a JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| annotate_io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Write records as JSON Lines.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        out.write_all(to_json_17(rec)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Read JSON Lines; blank lines are ignored, errors carry the line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| annotate_io(path, e))?;
    let mut records = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: ix + 1,
            msg: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Sidecar metadata for a censored-sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSidecar {
    #[serde(rename = "T")]
    pub horizon_t: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<f64>,
}

/// Write a censored sample as `<path>` (CSV, header `x`) plus
/// `<path>.meta.json` (sidecar).
pub fn write_censored_csv(path: &Path, xs: &[f64], sidecar: &CensoredSidecar) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(b"x\n")?;
    for &x in xs {
        writeln!(out, "{x:.16e}")?;
    }
    out.flush()?;
    write_json_17(&sidecar_path(path), sidecar)
}

/// Read a censored sample written by [`write_censored_csv`].
pub fn read_censored_csv(path: &Path) -> Result<(Vec<f64>, CensoredSidecar)> {
    let file = File::open(path).map_err(|e| annotate_io(path, e))?;
    let mut xs = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if ix == 0 {
            if trimmed != "x" {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    msg: format!("expected header 'x', found '{trimmed}'"),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let x: f64 = trimmed.parse().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: ix + 1,
            msg: format!("bad float '{trimmed}': {e}"),
        })?;
        xs.push(x);
    }
    let sidecar: CensoredSidecar = read_json(&sidecar_path(path))?;
    if sidecar.n != xs.len() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: xs.len() + 1,
            msg: format!("sidecar says n={}, file has {} rows", sidecar.n, xs.len()),
        });
    }
    Ok((xs, sidecar))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    std::path::PathBuf::from(s)
}

fn annotate_io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

//! CSV in and out. Sequences are `t,a,u_1..u_d`, states `t,x_1..x_d`.

use std::hash::Hasher;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context};
use fnv::FnvHasher;
use swr_core::{CoefficientSequence, InputSequence, StateSequence};

use crate::failure::{CliResult, Failure};

/// `digits` significant digits in scientific notation; 17 round-trips any f64.
pub fn fmt_float(x: f64, digits: u8) -> String {
    format!("{:.*e}", usize::from(digits.saturating_sub(1)), x)
}

/// 64-bit FNV-1a of a byte string.
pub fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

fn header(first: &str, value: &str, d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    if !first.is_empty() {
        h.push(first.to_string());
    }
    h.extend((1..=d).map(|c| format!("{value}_{c}")));
    h
}

fn to_csv(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| Failure::Runtime(e.into()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Failure::Runtime(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(anyhow!("{e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

pub fn states_csv(x: &StateSequence, digits: u8) -> CliResult<String> {
    labeled_csv(x, "x", digits)
}

/// Like [`states_csv`] with columns named `{label}_1..`.
pub fn labeled_csv(x: &StateSequence, label: &str, digits: u8) -> CliResult<String> {
    to_csv(
        header("", label, x.d()),
        (0..x.n()).map(|i| {
            std::iter::once((i + 1).to_string())
                .chain(x.row(i).iter().map(|&v| fmt_float(v, digits)))
                .collect()
        }),
    )
}

pub fn problem_csv(a: &CoefficientSequence, u: &InputSequence) -> CliResult<String> {
    to_csv(
        header("a", "u", u.d()),
        (0..u.n()).map(|i| {
            [(i + 1).to_string(), fmt_float(a.as_slice()[i], 17)]
                .into_iter()
                .chain(u.row(i).iter().map(|&v| fmt_float(v, 17)))
                .collect()
        }),
    )
}

/// Reads a numeric CSV with a header; returns the header and the rows.
fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(Failure::Input)?;
    let header: Vec<String> = r
        .headers()
        .with_context(|| format!("reading header of {}", path.display()))
        .map_err(Failure::Input)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Failure::Shape(e.into()),
            _ => Failure::Input(e.into()),
        })?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), line + 2))
            .map_err(Failure::Input)?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads `t,a,u_1..u_d`.
pub fn read_problem(path: &Path) -> CliResult<(CoefficientSequence, InputSequence)> {
    let (header, rows) = read_table(path)?;
    if header.len() < 3 || header[0] != "t" || header[1] != "a" {
        return Err(Failure::Shape(anyhow!(
            "{}: expected header t,a,u_1,...,u_d",
            path.display()
        )));
    }
    if rows.is_empty() {
        return Err(Failure::Shape(anyhow!("{}: no rows", path.display())));
    }
    let d = header.len() - 2;
    let a = rows.iter().map(|r| r[1]).collect();
    let u = rows.iter().flat_map(|r| r[2..].iter().copied()).collect();
    Ok((CoefficientSequence::new(a)?, InputSequence::from_flat(u, d)?))
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Runtime),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

//! CSV time series of run diagnostics.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{PfcError, Result};
use crate::scheme::TraceRecord;

pub const HEADER: &str = "step,time,energy,quartic,quadratic,gradient,biharmonic,mass,linf,h2norm,kappa";

pub fn format_row(r: &TraceRecord) -> String {
    let e = &r.energy;
    format!(
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.step, r.time, e.total, e.quartic, e.quadratic, e.gradient, e.biharmonic, r.mass, r.linf, r.h2norm, r.kappa
    )
}

/// One parsed CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub step: usize,
    pub values: [f64; 10],
}

impl Row {
    pub fn time(&self) -> f64 {
        self.values[0]
    }
    pub fn energy(&self) -> f64 {
        self.values[1]
    }
    pub fn mass(&self) -> f64 {
        self.values[6]
    }
    pub fn kappa(&self) -> f64 {
        self.values[9]
    }
}

pub fn parse_row(line: &str) -> Option<Row> {
    let mut it = line.split(',');
    let step = it.next()?.parse().ok()?;
    let mut values = [0.0; 10];
    for v in values.iter_mut() {
        *v = it.next()?.parse().ok()?;
    }
    it.next().is_none().then_some(Row { step, values })
}

pub fn read(path: &Path) -> Result<Vec<Row>> {
    let f = File::open(path).map_err(|e| PfcError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| PfcError::io(path, e))?;
        if i == 0 {
            continue;
        }
        rows.push(parse_row(&line).ok_or_else(|| PfcError::Snapshot {
            path: path.to_path_buf(),
            msg: format!("bad CSV row {}", i + 1),
        })?);
    }
    Ok(rows)
}

/// Appending CSV writer.
pub struct SeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| PfcError::io(path, e))?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(f) };
        w.line(HEADER)?;
        Ok(w)
    }

    /// Keeps the header and the rows with `step ≤ last_step`, then appends.
    pub fn resume(path: &Path, last_step: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PfcError::io(path, e))?;
        let mut keep = 0;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let ok = if i == 0 {
                line.trim_end() == HEADER
            } else {
                line.ends_with('\n') && parse_row(line.trim_end()).is_some_and(|r| r.step <= last_step)
            };
            if !ok {
                break;
            }
            keep += line.len();
        }
        if keep == 0 {
            return Err(PfcError::Snapshot { path: path.to_path_buf(), msg: "missing CSV header".into() });
        }
        let f = OpenOptions::new().write(true).open(path).map_err(|e| PfcError::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| PfcError::io(path, e))?;
        let f = OpenOptions::new().append(true).open(path).map_err(|e| PfcError::io(path, e))?;
        Ok(Self { path: path.to_path_buf(), out: BufWriter::new(f) })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| PfcError::io(&self.path, e))
    }

    pub fn push(&mut self, r: &TraceRecord) -> Result<()> {
        self.line(&format_row(r))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| PfcError::io(&self.path, e))
    }
}

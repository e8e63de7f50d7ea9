//! Binary field snapshots.
//!
//! Layout: the line `PFCSNAP1`, a header line
//! `dim N L epsilon tau step time mean` (space-separated decimals), then
//! `N^dim` little-endian `f64` values in row-major order (last axis fastest).

use std::io::Write;
use std::path::Path;

use crate::error::{PfcError, Result};
use crate::grid::{self, GridSpec, RealField};

pub const MAGIC: &str = "PFCSNAP1";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub field: RealField,
    pub epsilon: f64,
    pub tau: f64,
    pub step: usize,
    pub time: f64,
}

impl Snapshot {
    pub fn new(field: RealField, epsilon: f64, tau: f64, step: usize) -> Self {
        Self { field, epsilon, tau, step, time: step as f64 * tau }
    }

    pub fn mean(&self) -> f64 {
        grid::mean(&self.field)
    }
}

pub fn encode(s: &Snapshot) -> Vec<u8> {
    let spec = s.field.spec();
    let header = format!(
        "{MAGIC}\n{} {} {} {} {} {} {} {}\n",
        spec.dim(),
        spec.n(),
        spec.len(),
        s.epsilon,
        s.tau,
        s.step,
        s.time,
        s.mean()
    );
    let mut out = Vec::with_capacity(header.len() + 8 * spec.points());
    out.extend_from_slice(header.as_bytes());
    for v in s.field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<Snapshot> {
    let bad = |msg: String| PfcError::Snapshot { path: path.to_path_buf(), msg };
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let magic = lines.next().unwrap_or_default();
    if magic != MAGIC.as_bytes() {
        return Err(bad(format!("missing {MAGIC} magic")));
    }
    let header = lines.next().ok_or_else(|| bad("missing header line".into()))?;
    let payload = lines.next().ok_or_else(|| bad("missing payload".into()))?;
    let header = std::str::from_utf8(header).map_err(|_| bad("header is not text".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 8 {
        return Err(bad(format!("header has {} fields, expected 8", fields.len())));
    }
    let int = |i: usize| fields[i].parse::<usize>().map_err(|_| bad(format!("bad integer `{}`", fields[i])));
    let real = |i: usize| fields[i].parse::<f64>().map_err(|_| bad(format!("bad number `{}`", fields[i])));
    let spec = GridSpec::new(int(0)?, int(1)?, real(2)?).map_err(|e| bad(e.to_string()))?;
    if payload.len() != 8 * spec.points() {
        return Err(bad(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            8 * spec.points()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let field = RealField::from_vec(spec, values).map_err(|e| bad(e.to_string()))?;
    Ok(Snapshot { field, epsilon: real(3)?, tau: real(4)?, step: int(5)?, time: real(6)? })
}

pub fn write(path: &Path, s: &Snapshot) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| PfcError::io(path, e))?;
    f.write_all(&encode(s)).map_err(|e| PfcError::io(path, e))
}

pub fn read(path: &Path) -> Result<Snapshot> {
    let bytes = std::fs::read(path).map_err(|e| PfcError::io(path, e))?;
    decode(path, &bytes)
}

//! File formats: wavefunctions as flat binary with a JSON sidecar, CSV
//! tables, and an output sink that writes atomically and keeps checksums.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::TimeSample;
use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid1D, Wavefunction1D, Wavefunction2D};

/// Metadata stored next to a binary wavefunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefunctionSidecar {
    pub dims: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dx: f64,
    pub layout: String,
}

const LAYOUT: &str = "little-endian f64, interleaved re/im, row-major (first index x_a)";

fn sidecar(grid: &Grid1D, dims: usize) -> WavefunctionSidecar {
    WavefunctionSidecar {
        dims,
        x_min: grid.x_min(),
        x_max: grid.x_max(),
        n_points: grid.n_points(),
        dx: grid.dx(),
        layout: LAYOUT.into(),
    }
}

pub fn amplitudes_to_bytes(amps: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(amps.len() * 16);
    for c in amps {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn amplitudes_from_bytes(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::InvalidParameter(format!("binary length {} is not a multiple of 16", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// Binary payload and JSON sidecar of a pair wavefunction.
pub fn encode_wavefunction2d(psi: &Wavefunction2D) -> Result<(Vec<u8>, String)> {
    let meta = serde_json::to_string_pretty(&sidecar(&psi.grid, 2))?;
    Ok((amplitudes_to_bytes(&psi.amplitudes), meta))
}

pub fn decode_wavefunction2d(bytes: &[u8], meta: &str) -> Result<Wavefunction2D> {
    let meta: WavefunctionSidecar = serde_json::from_str(meta)?;
    if meta.dims != 2 {
        return Err(Error::InvalidParameter(format!("expected a 2D wavefunction, sidecar says {}D", meta.dims)));
    }
    let grid = make_grid(meta.x_max, meta.n_points)?;
    Wavefunction2D::new(grid, amplitudes_from_bytes(bytes)?)
}

/// Columns `x, re, im`.
pub fn wavefunction1d_csv(psi: &Wavefunction1D) -> String {
    let mut out = String::from("x,re,im\n");
    for (i, c) in psi.amplitudes.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", psi.grid.x(i), c.re, c.im);
    }
    out
}

/// Several real 1D functions on one grid, one column each.
pub fn columns_csv(grid: &Grid1D, names: &[String], columns: &[Vec<f64>]) -> String {
    let mut out = String::from("x");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for i in 0..grid.n_points() {
        let _ = write!(out, "{}", grid.x(i));
        for c in columns {
            let _ = write!(out, ",{}", c[i]);
        }
        out.push('\n');
    }
    out
}

/// `|ψ(x_a, x_b)|` as a matrix: rows are `x_a`, columns `x_b`, with the
/// coordinates in the first row and column.
pub fn magnitudes_csv(grid: &Grid1D, magnitudes: &[f64]) -> String {
    let n = grid.n_points();
    let mut out = String::from("x_a\\x_b");
    for j in 0..n {
        let _ = write!(out, ",{}", grid.x(j));
    }
    out.push('\n');
    for i in 0..n {
        let _ = write!(out, "{}", grid.x(i));
        for j in 0..n {
            let _ = write!(out, ",{}", magnitudes[i * n + j]);
        }
        out.push('\n');
    }
    out
}

/// Columns `t, d, fidelity, norm, exchange, parity`.
pub fn time_series_csv(samples: &[TimeSample]) -> String {
    let mut out = String::from("t,d,fidelity,norm,exchange,parity\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{},{},{}", s.t, s.d, s.fidelity, s.norm, s.exchange, s.parity);
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidParameter(format!("bad path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Collects every file a run writes.
#[derive(Debug)]
pub struct OutputSink {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSink {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputSink { root, entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(name), bytes)?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(OutputEntry { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// `<stem>.bin` plus `<stem>.json`.
    pub fn write_wavefunction2d(&mut self, stem: &str, psi: &Wavefunction2D) -> Result<()> {
        let (bin, meta) = encode_wavefunction2d(psi)?;
        self.write_bytes(&format!("{stem}.bin"), &bin)?;
        self.write_text(&format!("{stem}.json"), &meta)
    }

    /// Entries sorted by path.
    pub fn entries(&self) -> Vec<OutputEntry> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| a.path.cmp(&b.path));
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = make_grid(3.0, 16).unwrap();
        let mut psi = Wavefunction2D::from_fn(g, |a, b| Complex64::new((-a * a - b * b).exp(), 0.3 * a * b));
        psi.normalize();
        let (bin, meta) = encode_wavefunction2d(&psi).unwrap();
        assert_eq!(bin.len(), 16 * 16 * 16);
        let back = decode_wavefunction2d(&bin, &meta).unwrap();
        assert_eq!(back.amplitudes, psi.amplitudes);
        assert_eq!(back.grid, psi.grid);
    }

    #[test]
    fn csv_shapes() {
        let g = make_grid(2.0, 16).unwrap();
        let psi = Wavefunction1D::from_fn(g, |x| Complex64::new(x, -x));
        let csv = wavefunction1d_csv(&psi);
        assert_eq!(csv.lines().count(), 17);
        assert!(csv.starts_with("x,re,im\n-2,-2,2\n"));
        let m = magnitudes_csv(&g, &vec![1.0; 256]);
        assert_eq!(m.lines().count(), 17);
        assert_eq!(m.lines().nth(1).unwrap().split(',').count(), 17);
    }

    #[test]
    fn sink_records_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = OutputSink::new(dir.path()).unwrap();
        sink.write_text("b.csv", "x\n1\n").unwrap();
        sink.write_text("a.json", "{}").unwrap();
        let e = sink.entries();
        assert_eq!(e[0].path, "a.json");
        assert_eq!(e[1].sha256, sha256_hex(b"x\n1\n"));
        assert_eq!(fs::read_to_string(dir.path().join("b.csv")).unwrap(), "x\n1\n");
        assert!(!dir.path().join(".b.csv.tmp").exists());
    }
}

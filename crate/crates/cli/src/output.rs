//! CSV tables, JSON artifacts and the run manifest.
//!
//! Floats are written with `{:.16e}` (17 significant digits, enough to
//! round-trip any `f64`), lines end in `\n`, and a missing value is an empty
//! field, so identical inputs give identical bytes on every platform.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thouless_core::bloch::ChernResult;
use thouless_core::fock2::ObservableRecord;
use thouless_core::protocol::{EnsembleStats, ScanRow, Summary};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render))?;
            }
            w.flush()?;
            Ok(())
        };
        write(&mut w).expect("writing to memory cannot fail");
        String::from_utf8(w.into_inner().expect("flushed")).expect("cells are UTF-8")
    }
}

pub fn write_csv(table: &Table, path: &Path) -> io::Result<()> {
    fs::write(path, table.render())
}

/// One row per single-trajectory record:
/// `t, phi, com, gamma_max, nity, fidelity, density_1..density_M`.
pub fn records_table(records: &[ObservableRecord], n_sites: usize) -> Table {
    let mut header: Vec<String> = ["t", "phi", "com", "gamma_max", "nity", "fidelity"]
        .map(String::from)
        .to_vec();
    header.extend((1..=n_sites).map(|j| format!("density_{j}")));
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![
                Cell::Float(r.t),
                Cell::Float(r.phi),
                Cell::Float(r.com),
                Cell::Float(r.gamma_max),
                Cell::Float(r.nity),
                r.fidelity.into(),
            ];
            row.extend(r.density.iter().map(|&d| Cell::Float(d)));
            row
        })
        .collect();
    Table { header, rows }
}

/// Ensemble trajectory: `t, phi`, then `mean_x, std_x` for
/// `x ∈ {com, shift, gamma_max, nity, fidelity}`, then
/// `mean_density_j` and `std_density_j` for every site.
pub fn stats_table(stats: &EnsembleStats) -> Table {
    let mut header: Vec<String> = vec!["t".into(), "phi".into()];
    for name in ["com", "shift", "gamma_max", "nity", "fidelity"] {
        header.push(format!("mean_{name}"));
        header.push(format!("std_{name}"));
    }
    header.extend((1..=stats.n_sites).map(|j| format!("mean_density_{j}")));
    header.extend((1..=stats.n_sites).map(|j| format!("std_density_{j}")));
    let pair = |s: &Summary| [Cell::Float(s.mean), Cell::Float(s.std)];
    let rows = stats
        .points
        .iter()
        .map(|p| {
            let mut row = vec![Cell::Float(p.t), Cell::Float(p.phi)];
            for s in [&p.com, &p.shift, &p.gamma_max, &p.nity] {
                row.extend(pair(s));
            }
            match &p.fidelity {
                Some(f) => row.extend(pair(f)),
                None => row.extend([Cell::Empty, Cell::Empty]),
            }
            row.extend(p.density.iter().map(|d| Cell::Float(d.mean)));
            row.extend(p.density.iter().map(|d| Cell::Float(d.std)));
            row
        })
        .collect();
    Table { header, rows }
}

/// Final scalars of each sample: `index, seed, shift, gamma_max, nity, fidelity`.
pub fn samples_table(stats: &EnsembleStats) -> Table {
    let header = ["index", "seed", "shift", "gamma_max", "nity", "fidelity"]
        .map(String::from)
        .to_vec();
    let rows = stats
        .finals
        .iter()
        .map(|f| {
            vec![
                Cell::Int(f.index as u64),
                Cell::Int(f.seed),
                Cell::Float(f.shift),
                Cell::Float(f.gamma_max),
                Cell::Float(f.nity),
                f.fidelity.into(),
            ]
        })
        .collect();
    Table { header, rows }
}

/// Ensemble-mean correlation snapshots in long form: `label, t, q, r, gamma`.
pub fn correlations_table(stats: &EnsembleStats) -> Table {
    let header = ["label", "t", "q", "r", "gamma"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for snap in &stats.snapshots {
        for q in 0..snap.gamma.nrows() {
            for r in 0..snap.gamma.ncols() {
                rows.push(vec![
                    Cell::Text(snap.label.clone()),
                    Cell::Float(snap.t),
                    Cell::Int(q as u64 + 1),
                    Cell::Int(r as u64 + 1),
                    Cell::Float(snap.gamma[(q, r)]),
                ]);
            }
        }
    }
    Table { header, rows }
}

/// `band, chern, raw`: rounded and unrounded Chern number of each band.
pub fn chern_table(result: &ChernResult) -> Table {
    let header = ["band", "chern", "raw"].map(String::from).to_vec();
    let rows = [(1, result.nu1, result.raw.0), (2, result.nu2, result.raw.1)]
        .into_iter()
        .map(|(band, nu, raw)| vec![Cell::Int(band), Cell::Text(nu.to_string()), Cell::Float(raw)])
        .collect();
    Table { header, rows }
}

/// `amplitude`, then `mean_x, std_x` for `x ∈ {fidelity, shift, gamma_max}`.
pub fn scan_table(rows: &[ScanRow]) -> Table {
    let header = [
        "amplitude",
        "mean_fidelity",
        "std_fidelity",
        "mean_shift",
        "std_shift",
        "mean_gamma_max",
        "std_gamma_max",
    ]
    .map(String::from)
    .to_vec();
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Float(r.amplitude),
                Cell::Float(r.fidelity.mean),
                Cell::Float(r.fidelity.std),
                Cell::Float(r.shift.mean),
                Cell::Float(r.shift.std),
                Cell::Float(r.gamma_max.mean),
                Cell::Float(r.gamma_max.std),
            ]
        })
        .collect();
    Table { header, rows }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub duration_seconds: f64,
    pub files: Vec<FileDigest>,
}

/// Collects emitted files and writes the manifest after all of them.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    files: Vec<FileDigest>,
}

impl OutputSink {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> io::Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.files.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> io::Result<()> {
        write_csv(table, &self.path(name))?;
        self.record(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        write_json(value, &self.path(name))?;
        self.record(name)
    }

    pub fn text(&mut self, name: &str, text: &str) -> io::Result<()> {
        fs::write(self.path(name), text)?;
        self.record(name)
    }

    pub fn finish(self, manifest: impl FnOnce(Vec<FileDigest>) -> RunManifest) -> io::Result<PathBuf> {
        let path = self.path("manifest.json");
        write_json(&manifest(self.files), &path)?;
        Ok(path)
    }
}

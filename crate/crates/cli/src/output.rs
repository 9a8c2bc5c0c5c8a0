//! On-disk formats: record CSVs, fits, snapshots and run manifests.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stabfrac::structure::SearchStats;
use stabfrac::{BoxCountRecord, DepthRecord, EnsembleSpec};

pub const DEPTH_CSV: &str = "depth.csv";
pub const BOXCOUNT_CSV: &str = "boxcount.csv";
pub const FITS_CSV: &str = "fits.csv";
pub const SNAPSHOT_TXT: &str = "snapshot.txt";

pub const DEPTH_HEADER: &str = "p,L,realization,seed,depth_qubits,n_clusters";
pub const BOXCOUNT_HEADER: &str = "p,L,b,realization,seed,n_boxes";
pub const FITS_HEADER: &str = "p,gamma,gamma_err,d,d_err,n_L_points,n_b_points";

pub fn sort_depth(records: &mut [DepthRecord]) {
    records.sort_by(|a, b| {
        a.p.total_cmp(&b.p).then(a.l.cmp(&b.l)).then(a.realization.cmp(&b.realization))
    });
}

pub fn sort_boxcount(records: &mut [BoxCountRecord]) {
    records.sort_by(|a, b| {
        a.p.total_cmp(&b.p).then(a.l.cmp(&b.l)).then(a.b.cmp(&b.b)).then(a.realization.cmp(&b.realization))
    });
}

pub fn write_csv_to<T: Serialize, W: Write>(out: W, rows: &[T], header: &str) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &str) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv_to(BufWriter::new(f), rows, header).with_context(|| format!("writing {}", path.display()))
}

/// Parses a CSV, insisting on the exact header.
pub fn read_csv_from<T: DeserializeOwned, R: Read>(input: R, header: &str, what: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let found = r.headers()?.iter().collect::<Vec<_>>().join(",");
    anyhow::ensure!(found == header, "{what}: expected header `{header}`, found `{found}`");
    r.deserialize().enumerate().map(|(i, row)| row.with_context(|| format!("{what}: row {}", i + 1))).collect()
}

pub fn read_csv<T: DeserializeOwned>(path: &Path, header: &str) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_csv_from(f, header, &path.display().to_string())
}

/// One row of `fits.csv`; the depth and box-counting halves may be absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub p: f64,
    pub gamma: Option<f64>,
    pub gamma_err: Option<f64>,
    pub d: Option<f64>,
    pub d_err: Option<f64>,
    #[serde(rename = "n_L_points")]
    pub n_l_points: Option<usize>,
    pub n_b_points: Option<usize>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

/// Plain-text table of fits: p, γ, γ_err, d, d_err.
pub fn fit_table(rows: &[FitRow]) -> String {
    let mut s = format!("{:>6} {:>8} {:>8} {:>8} {:>8}\n", "p", "gamma", "err", "d", "err");
    for r in rows {
        s += &format!(
            "{:>6} {:>8} {:>8} {:>8} {:>8}\n",
            r.p,
            cell(r.gamma),
            cell(r.gamma_err),
            cell(r.d),
            cell(r.d_err)
        );
    }
    s
}

/// Largest-cluster membership of one state at one box size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotBitmap {
    pub b: usize,
    pub membership: Vec<bool>,
}

pub fn snapshot_text(p: f64, l: usize, seed: u64, rows: &[SnapshotBitmap]) -> String {
    let mut s = format!("p={p} L={l} seed={seed}\n");
    for r in rows {
        let bits: String = r.membership.iter().map(|&m| if m { '1' } else { '0' }).collect();
        s += &format!("b={} {bits}\n", r.b);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    DepthScan,
    BoxcountScan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// Everything needed to re-execute a scan, plus what happened last time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: ScanKind,
    pub tool_version: String,
    pub spec: EnsembleSpec,
    /// Box sizes; only meaningful for box-counting scans.
    pub b_values: Vec<usize>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub status: RunStatus,
    pub records: usize,
    pub search_stats: SearchStats,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn file_name(kind: ScanKind) -> &'static str {
        match kind {
            ScanKind::DepthScan => "depth.manifest.json",
            ScanKind::BoxcountScan => "boxcount.manifest.json",
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

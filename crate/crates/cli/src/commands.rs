use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use stabfrac::analysis::{fit_fractal_dim, fit_gamma};
use stabfrac::circuit::{run_boxcount_ensemble, run_ensemble_with_progress};
use stabfrac::structure::{build_structure_with, coarse_grain, StructureOptions};
use stabfrac::{BoxCountRecord, DepthRecord, StabilizerTableau};

use crate::config::ScanConfig;
use crate::output::*;

/// Percent-step progress lines on stderr.
pub struct Reporter {
    label: &'static str,
    quiet: bool,
    last: AtomicUsize,
}

impl Reporter {
    pub fn new(label: &'static str, quiet: bool) -> Self {
        Self { label, quiet, last: AtomicUsize::new(usize::MAX) }
    }

    pub fn tick(&self, done: usize, total: usize) {
        if self.quiet || total == 0 {
            return;
        }
        let pct = done * 100 / total;
        if self.last.swap(pct, Ordering::Relaxed) != pct {
            eprintln!("{}: {done}/{total} realizations ({pct}%)", self.label);
        }
    }
}

fn manifest_for(kind: ScanKind, cfg: &ScanConfig, out: &Path) -> RunManifest {
    let csv = match kind {
        ScanKind::DepthScan => DEPTH_CSV,
        ScanKind::BoxcountScan => BOXCOUNT_CSV,
    };
    RunManifest {
        command: kind,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        spec: cfg.spec.clone(),
        b_values: cfg.b_values.clone(),
        started_unix: unix_now(),
        finished_unix: None,
        outputs: vec![out.join(csv)],
        status: RunStatus::Running,
        records: 0,
        search_stats: Default::default(),
        error: None,
    }
}

/// Runs a depth or box-counting scan into `out`, keeping the manifest beside
/// the CSV. On failure the manifest is left with status `failed`.
pub fn run_scan(kind: ScanKind, cfg: &ScanConfig, out: &Path, quiet: bool) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest_path = out.join(RunManifest::file_name(kind));
    let mut manifest = manifest_for(kind, cfg, out);
    manifest.save(&manifest_path)?;
    let result = execute(kind, cfg, &manifest.outputs[0], quiet);
    manifest.finished_unix = Some(unix_now());
    match result {
        Ok((records, stats)) => {
            manifest.status = RunStatus::Complete;
            manifest.records = records;
            manifest.search_stats = stats;
            manifest.save(&manifest_path)?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(format!("{e:#}"));
            manifest.save(&manifest_path)?;
            Err(e)
        }
    }
}

fn execute(kind: ScanKind, cfg: &ScanConfig, csv: &Path, quiet: bool) -> Result<(usize, stabfrac::structure::SearchStats)> {
    match kind {
        ScanKind::DepthScan => {
            let sink = Mutex::new(Vec::<DepthRecord>::new());
            let rep = Reporter::new("depth-scan", quiet);
            let summary = run_ensemble_with_progress(&cfg.spec, &sink, &|d, t| rep.tick(d, t))?;
            let mut rows = sink.into_inner().expect("sink lock");
            sort_depth(&mut rows);
            write_csv(csv, &rows, DEPTH_HEADER)?;
            Ok((rows.len(), summary.stats))
        }
        ScanKind::BoxcountScan => {
            let sink = Mutex::new(Vec::<BoxCountRecord>::new());
            let rep = Reporter::new("boxcount-scan", quiet);
            let summary = run_boxcount_ensemble(&cfg.spec, &cfg.b_values, &sink, &|d, t| rep.tick(d, t))?;
            let mut rows = sink.into_inner().expect("sink lock");
            sort_boxcount(&mut rows);
            write_csv(csv, &rows, BOXCOUNT_HEADER)?;
            Ok((rows.len(), summary.stats))
        }
    }
}

pub fn scan_config_from_manifest(m: &RunManifest) -> ScanConfig {
    ScanConfig { spec: m.spec.clone(), b_values: m.b_values.clone() }
}

fn distinct_p(ps: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = ps.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// One fit row per p present in either input.
pub fn fit(depth: &[DepthRecord], boxes: &[BoxCountRecord], b_range: RangeInclusive<usize>) -> Result<Vec<FitRow>> {
    let ps = distinct_p(depth.iter().map(|r| r.p).chain(boxes.iter().map(|r| r.p)));
    let mut rows = Vec::with_capacity(ps.len());
    for p in ps {
        let mut row = FitRow { p, gamma: None, gamma_err: None, d: None, d_err: None, n_l_points: None, n_b_points: None };
        let ds: Vec<DepthRecord> = depth.iter().filter(|r| r.p == p).cloned().collect();
        if !ds.is_empty() {
            let f = fit_gamma(&ds).with_context(|| format!("depth fit at p = {p}"))?;
            row.gamma = Some(f.slope);
            row.gamma_err = Some(f.slope_err);
            row.n_l_points = Some(f.n_points);
        }
        let bs: Vec<BoxCountRecord> = boxes.iter().filter(|r| r.p == p).cloned().collect();
        if !bs.is_empty() {
            // all L of one p are pooled; mixing sizes would blur N_b
            let ls: BTreeSet<usize> = bs.iter().map(|r| r.l).collect();
            anyhow::ensure!(ls.len() == 1, "box counts at p = {p} mix system sizes {ls:?}");
            let f = fit_fractal_dim(&bs, Some(b_range.clone())).with_context(|| format!("box-count fit at p = {p}"))?;
            row.d = Some(f.dimension());
            row.d_err = Some(f.slope_err);
            row.n_b_points = Some(f.n_points);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Largest-cluster membership of `state` at each box size.
pub fn snapshot(state: &StabilizerTableau, b_values: &[usize], options: &StructureOptions) -> Result<Vec<SnapshotBitmap>> {
    let n = state.n_qubits();
    b_values
        .iter()
        .map(|&b| {
            let s = build_structure_with(state, &coarse_grain(n, b)?, options)?;
            let mut membership = vec![false; n];
            for &q in &s.largest_cluster().qubits {
                membership[q] = true;
            }
            debug_assert_eq!(membership.iter().filter(|&&m| m).count(), s.depth_report().depth_qubits);
            Ok(SnapshotBitmap { b, membership })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use stabfrac::TwoQubitClifford;

    use super::*;

    fn depth(p: f64, l: usize, d: usize) -> DepthRecord {
        DepthRecord { p, l, realization: 0, seed: 0, depth_qubits: d, n_clusters: 1 }
    }

    #[test]
    fn fit_on_synthetic_inputs() {
        let mut ds = Vec::new();
        let mut bs = Vec::new();
        for p in [0.1, 0.5] {
            for l in [16, 32, 64, 128] {
                ds.push(depth(p, l, l));
            }
            for b in 2..=20 {
                bs.push(BoxCountRecord { p, l: 240, b, realization: 0, seed: 0, n_boxes: 240usize.div_ceil(b) });
            }
        }
        let rows = fit(&ds, &bs, 2..=20).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert_eq!(r.gamma, Some(1.0));
            assert_eq!(r.gamma_err, Some(0.0));
            assert!((r.d.unwrap() - 1.0).abs() < 0.02);
            assert_eq!(r.n_l_points, Some(4));
            assert_eq!(r.n_b_points, Some(19));
        }
    }

    #[test]
    fn fit_needs_two_sizes() {
        assert!(fit(&[depth(0.1, 16, 3), depth(0.1, 16, 5)], &[], 2..=20).is_err());
        let one_b = [BoxCountRecord { p: 0.1, l: 32, b: 2, realization: 0, seed: 0, n_boxes: 3 }];
        assert!(fit(&[], &one_b, 2..=20).is_err());
    }

    #[test]
    fn snapshot_of_product_and_ghz_states() {
        let product = StabilizerTableau::new_product_state(6).unwrap();
        let rows = snapshot(&product, &[1], &StructureOptions::default()).unwrap();
        assert_eq!(rows[0].membership, vec![true, false, false, false, false, false]);

        let mut ghz = StabilizerTableau::new_product_state(6).unwrap();
        ghz.apply_h(0).unwrap();
        for q in 1..6 {
            ghz.apply_clifford2(&TwoQubitClifford::cnot(), q - 1, q).unwrap();
        }
        for row in snapshot(&ghz, &[1, 2, 3], &StructureOptions::default()).unwrap() {
            assert!(row.membership.iter().all(|&m| m), "b={}", row.b);
        }
    }
}

//! Brickwork monitored circuit and seeded ensembles over a `(p, L)` grid.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{BoxCountRecord, DepthRecord};
use crate::clifford::TwoQubitClifford;
use crate::error::{Error, Result};
use crate::structure::{build_structure_with, coarse_grain, SearchStats, StructureOptions};
use crate::tableau::{MeasurementOutcome, StabilizerTableau};

/// Reference location of the volume-to-area-law transition for this circuit.
pub const P_CRITICAL: f64 = 0.16;

/// Steps per qubit needed to reach the steady state.
pub const DEFAULT_STEPS_PER_QUBIT: usize = 4;

pub const DEFAULT_REALIZATIONS: usize = 500;

/// Measurement probabilities on the standard scan: spacing 0.04 below the
/// transition and 0.08 above it.
pub fn standard_p_grid() -> Vec<f64> {
    let below = (1..=4).map(|k| k as f64 * 0.04);
    let above = (1..=10).map(|k| P_CRITICAL + k as f64 * 0.08);
    below.chain(above).map(|p| (p * 1e6).round() / 1e6).filter(|&p| p <= 1.0).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    /// Adds the `(L−1, 0)` bond to even layers; needs even `L`.
    Periodic,
}

/// A state the circuit can drive: the tableau, or the dense oracle.
pub trait MonitoredState {
    fn n_qubits(&self) -> usize;
    fn apply_gate(&mut self, gate: &TwoQubitClifford, i: usize, j: usize) -> Result<()>;
    fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<MeasurementOutcome>;
}

impl MonitoredState for StabilizerTableau {
    fn n_qubits(&self) -> usize {
        StabilizerTableau::n_qubits(self)
    }

    fn apply_gate(&mut self, gate: &TwoQubitClifford, i: usize, j: usize) -> Result<()> {
        self.apply_clifford2(gate, i, j)
    }

    fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<MeasurementOutcome> {
        self.measure_z(q, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub n_qubits: usize,
    pub p: f64,
    pub steps: usize,
    pub master_seed: u64,
    pub realization_index: u64,
    pub boundary: Boundary,
}

impl CircuitConfig {
    /// `4L` steps, open chain, seed 0.
    pub fn new(n_qubits: usize, p: f64) -> Self {
        Self {
            n_qubits,
            p,
            steps: DEFAULT_STEPS_PER_QUBIT * n_qubits,
            master_seed: 0,
            realization_index: 0,
            boundary: Boundary::Open,
        }
    }

    pub fn with_seed(mut self, master_seed: u64, realization_index: u64) -> Self {
        self.master_seed = master_seed;
        self.realization_index = realization_index;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::EmptySystem);
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidConfig(format!("p = {} outside [0, 1]", self.p)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if self.boundary == Boundary::Periodic && self.n_qubits % 2 == 1 {
            return Err(Error::InvalidConfig("periodic brickwork needs an even number of qubits".into()));
        }
        Ok(())
    }

    /// Seed of this realization's random streams.
    pub fn stream_seed(&self) -> u64 {
        derive_seed(self.master_seed, &[self.realization_index])
    }

    /// Bonds of layer `t` (1-based): odd layers start at qubit 0, even at 1.
    pub fn bonds(&self, t: usize) -> Vec<(usize, usize)> {
        let n = self.n_qubits;
        let start = if t % 2 == 1 { 0 } else { 1 };
        let mut bonds: Vec<(usize, usize)> = (start..n.saturating_sub(1)).step_by(2).map(|i| (i, i + 1)).collect();
        if self.boundary == Boundary::Periodic && start == 1 && n >= 2 {
            bonds.push((n - 1, 0));
        }
        bonds
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed derivation: a pure function of the master seed and path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &k| mix(acc ^ mix(k.wrapping_add(0xA076_1D64_78BD_642F))))
}

/// Runs the monitored brickwork circuit on `state`, reporting every measurement
/// as `(layer, qubit, outcome)`.
///
/// Gates and measurement sites come from one stream; random measurement
/// outcomes from a second, so two backends in the same state follow identical
/// trajectories.
pub fn run_circuit<S, F>(state: &mut S, config: &CircuitConfig, mut on_measure: F) -> Result<()>
where
    S: MonitoredState,
    F: FnMut(usize, usize, MeasurementOutcome),
{
    config.validate()?;
    if state.n_qubits() != config.n_qubits {
        return Err(Error::InvalidConfig(format!(
            "state has {} qubits, config {}",
            state.n_qubits(),
            config.n_qubits
        )));
    }
    let seed = config.stream_seed();
    let mut circuit_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcome_rng = ChaCha8Rng::seed_from_u64(seed);
    outcome_rng.set_stream(1);
    for t in 1..=config.steps {
        for (i, j) in config.bonds(t) {
            let gate = TwoQubitClifford::sample(&mut circuit_rng);
            state.apply_gate(&gate, i, j)?;
        }
        for q in 0..config.n_qubits {
            if circuit_rng.gen::<f64>() < config.p {
                let out = state.measure(q, &mut outcome_rng)?;
                on_measure(t, q, out);
            }
        }
    }
    Ok(())
}

/// Steady state of one realization, starting from `|0…0⟩`.
pub fn run_realization(config: &CircuitConfig) -> Result<StabilizerTableau> {
    config.validate()?;
    let mut state = StabilizerTableau::new_product_state(config.n_qubits)?;
    run_circuit(&mut state, config, |_, _, _| {})?;
    Ok(state)
}

/// Consumer of ensemble records; must tolerate concurrent calls.
pub trait RecordSink<R>: Sync {
    fn accept(&self, record: R) -> std::result::Result<(), String>;
}

impl<R: Send> RecordSink<R> for Mutex<Vec<R>> {
    fn accept(&self, record: R) -> std::result::Result<(), String> {
        self.lock().map_err(|e| e.to_string())?.push(record);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub p_values: Vec<f64>,
    pub l_values: Vec<usize>,
    pub n_realizations: usize,
    /// Box size used for depth coarse-graining.
    pub coarse_b: usize,
    pub master_seed: u64,
    pub steps_per_qubit: usize,
    pub boundary: Boundary,
    pub search_budget: usize,
    /// Worker threads; 0 means all available cores.
    pub threads: usize,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            p_values: standard_p_grid(),
            l_values: vec![16, 32, 64, 128],
            n_realizations: DEFAULT_REALIZATIONS,
            coarse_b: 2,
            master_seed: 0,
            steps_per_qubit: DEFAULT_STEPS_PER_QUBIT,
            boundary: Boundary::Open,
            search_budget: crate::structure::DEFAULT_SEARCH_BUDGET,
            threads: 0,
        }
    }
}

/// One realization's coordinates within an ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Task {
    pub p: f64,
    pub n_qubits: usize,
    pub realization: usize,
    pub config: CircuitConfig,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty() || self.l_values.is_empty() {
            return Err(Error::InvalidConfig("p and L grids must be nonempty".into()));
        }
        if self.n_realizations == 0 {
            return Err(Error::InvalidConfig("need at least one realization".into()));
        }
        if self.steps_per_qubit == 0 {
            return Err(Error::InvalidConfig("steps_per_qubit must be at least 1".into()));
        }
        if self.coarse_b == 0 {
            return Err(Error::InvalidConfig("coarse_b must be at least 1".into()));
        }
        for &l in &self.l_values {
            if l < self.coarse_b {
                return Err(Error::InvalidConfig(format!("L = {l} smaller than coarse_b = {}", self.coarse_b)));
            }
        }
        for t in self.tasks() {
            t.config.validate()?;
        }
        Ok(())
    }

    pub fn structure_options(&self) -> StructureOptions {
        StructureOptions { search_budget: self.search_budget }
    }

    /// All realizations in `(p, L, realization)` order with derived seeds.
    pub fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::with_capacity(self.p_values.len() * self.l_values.len() * self.n_realizations);
        for (pi, &p) in self.p_values.iter().enumerate() {
            for (li, &l) in self.l_values.iter().enumerate() {
                let cell_seed = derive_seed(self.master_seed, &[pi as u64, li as u64]);
                for r in 0..self.n_realizations {
                    let config = CircuitConfig {
                        n_qubits: l,
                        p,
                        steps: self.steps_per_qubit * l,
                        master_seed: cell_seed,
                        realization_index: r as u64,
                        boundary: self.boundary,
                    };
                    out.push(Task { p, n_qubits: l, realization: r, config });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnsembleSummary {
    pub realizations: usize,
    pub records: usize,
    pub stats: SearchStats,
}

/// Progress callback: `(finished realizations, total)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Runs every realization of `spec` in parallel and hands `work`'s records to
/// `sink`. Record content depends only on the spec, never on scheduling.
pub fn run_tasks<R, W>(spec: &EnsembleSpec, work: W, sink: &dyn RecordSink<R>, progress: Progress<'_>) -> Result<EnsembleSummary>
where
    R: Send,
    W: Fn(&Task, &StabilizerTableau) -> Result<(Vec<R>, SearchStats)> + Sync,
{
    spec.validate()?;
    let tasks = spec.tasks();
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    let emitted = AtomicUsize::new(0);
    let stats = Mutex::new(SearchStats::default());
    let body = || {
        tasks.par_iter().try_for_each(|task| -> Result<()> {
            let state = run_realization(&task.config)?;
            let (records, s) = work(task, &state)?;
            stats.lock().expect("stats lock").absorb(&s);
            for rec in records {
                sink.accept(rec).map_err(|msg| Error::Sink { emitted: emitted.load(Ordering::SeqCst), msg })?;
                emitted.fetch_add(1, Ordering::SeqCst);
            }
            progress(done.fetch_add(1, Ordering::SeqCst) + 1, total);
            Ok(())
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(body)?;
    Ok(EnsembleSummary {
        realizations: total,
        records: emitted.into_inner(),
        stats: stats.into_inner().expect("stats lock"),
    })
}

/// Depth ensemble: one [`DepthRecord`] per realization at `spec.coarse_b`.
pub fn run_ensemble(spec: &EnsembleSpec, sink: &dyn RecordSink<DepthRecord>) -> Result<EnsembleSummary> {
    run_ensemble_with_progress(spec, sink, &|_, _| {})
}

pub fn run_ensemble_with_progress(
    spec: &EnsembleSpec,
    sink: &dyn RecordSink<DepthRecord>,
    progress: Progress<'_>,
) -> Result<EnsembleSummary> {
    let options = spec.structure_options();
    run_tasks(
        spec,
        |task, state| {
            let elements = coarse_grain(task.n_qubits, spec.coarse_b)?;
            let structure = build_structure_with(state, &elements, &options)?;
            let report = structure.depth_report();
            let rec = DepthRecord {
                p: task.p,
                l: task.n_qubits,
                realization: task.realization,
                seed: task.config.stream_seed(),
                depth_qubits: report.depth_qubits,
                n_clusters: report.n_clusters,
            };
            Ok((vec![rec], structure.stats))
        },
        sink,
        progress,
    )
}

/// Box-counting ensemble: one [`BoxCountRecord`] per realization and box size.
pub fn run_boxcount_ensemble(
    spec: &EnsembleSpec,
    b_values: &[usize],
    sink: &dyn RecordSink<BoxCountRecord>,
    progress: Progress<'_>,
) -> Result<EnsembleSummary> {
    if b_values.is_empty() {
        return Err(Error::InvalidConfig("empty box-size list".into()));
    }
    for &l in &spec.l_values {
        if let Some(&b) = b_values.iter().find(|&&b| b == 0 || b > l) {
            return Err(Error::InvalidBoxSize { b, n_qubits: l });
        }
    }
    let options = spec.structure_options();
    run_tasks(
        spec,
        |task, state| {
            let mut stats = SearchStats::default();
            let mut recs = Vec::with_capacity(b_values.len());
            for &b in b_values {
                let structure = build_structure_with(state, &coarse_grain(task.n_qubits, b)?, &options)?;
                stats.absorb(&structure.stats);
                recs.push(BoxCountRecord {
                    p: task.p,
                    l: task.n_qubits,
                    b,
                    realization: task.realization,
                    seed: task.config.stream_seed(),
                    n_boxes: structure.largest_cluster_elements(),
                });
            }
            Ok((recs, stats))
        },
        sink,
        progress,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubits::QubitSet;
    use crate::structure::{build_structure, singletons};

    #[test]
    fn standard_grid_layout() {
        let g = standard_p_grid();
        assert_eq!(&g[..4], &[0.04, 0.08, 0.12, 0.16]);
        assert_eq!(g[4], 0.24);
        assert_eq!(g[5], 0.32);
        assert_eq!(*g.last().unwrap(), 0.96);
    }

    #[test]
    fn bond_layout() {
        let c = CircuitConfig::new(6, 0.0);
        assert_eq!(c.bonds(1), vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(c.bonds(2), vec![(1, 2), (3, 4)]);
        let c = CircuitConfig::new(5, 0.0);
        assert_eq!(c.bonds(1), vec![(0, 1), (2, 3)]);
        assert_eq!(c.bonds(2), vec![(1, 2), (3, 4)]);
        let c = CircuitConfig { boundary: Boundary::Periodic, ..CircuitConfig::new(6, 0.0) };
        assert_eq!(c.bonds(2), vec![(1, 2), (3, 4), (5, 0)]);
        assert!(CircuitConfig { boundary: Boundary::Periodic, ..CircuitConfig::new(5, 0.0) }.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CircuitConfig::new(4, 1.5).validate().is_err());
        assert!(CircuitConfig::new(0, 0.5).validate().is_err());
        assert!(CircuitConfig { steps: 0, ..CircuitConfig::new(4, 0.5) }.validate().is_err());
    }

    #[test]
    fn realizations_are_reproducible() {
        let c = CircuitConfig::new(20, 0.2).with_seed(7, 3);
        let a = run_realization(&c).unwrap();
        let b = run_realization(&c).unwrap();
        assert_eq!(a, b);
        let other = run_realization(&c.with_seed(7, 4)).unwrap();
        assert_ne!(a.to_text(), other.to_text());
    }

    #[test]
    fn full_measurement_leaves_product_state() {
        for seed in 0..5 {
            let c = CircuitConfig::new(12, 1.0).with_seed(seed, 0);
            let s = run_realization(&c).unwrap();
            for q in 0..12 {
                assert_eq!(s.subset_entropy(&QubitSet::range(q, q + 1)).unwrap(), 0);
            }
            let d = build_structure(&s, &singletons(12)).unwrap().depth_report();
            assert!(d.depth_qubits <= 2);
        }
    }

    #[test]
    fn invariants_hold_along_trajectories() {
        for seed in 0..20 {
            let p = seed as f64 / 20.0;
            let mut c = CircuitConfig::new(9, p).with_seed(seed, 1);
            c.steps = 1;
            let mut s = StabilizerTableau::new_product_state(9).unwrap();
            for t in 0..30 {
                c.realization_index = t;
                run_circuit(&mut s, &c, |_, _, _| {}).unwrap();
                s.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn measurement_counts_are_binomial() {
        let (l, p) = (40usize, 0.3);
        let c = CircuitConfig { steps: 2000, ..CircuitConfig::new(l, p) }.with_seed(5, 0);
        let mut per_step = vec![0usize; c.steps + 1];
        let mut s = StabilizerTableau::new_product_state(l).unwrap();
        run_circuit(&mut s, &c, |t, _, _| per_step[t] += 1).unwrap();
        let counts = &per_step[1..];
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let var = counts.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        let expect_mean = l as f64 * p;
        let expect_var = l as f64 * p * (1.0 - p);
        let se = (expect_var / counts.len() as f64).sqrt();
        assert!((mean - expect_mean).abs() < 3.0 * se, "mean {mean}");
        // variance of the sample variance ≈ 2σ⁴/(n−1) for near-normal counts
        let se_var = expect_var * (2.0 / (counts.len() - 1) as f64).sqrt();
        assert!((var - expect_var).abs() < 3.0 * se_var, "var {var}");
    }

    #[test]
    fn ensemble_emits_one_record_per_realization() {
        let spec = EnsembleSpec {
            p_values: vec![0.3],
            l_values: vec![8],
            n_realizations: 3,
            threads: 2,
            ..EnsembleSpec::default()
        };
        let sink = Mutex::new(Vec::new());
        let summary = run_ensemble(&spec, &sink).unwrap();
        assert_eq!(summary.records, 3);
        let mut recs = sink.into_inner().unwrap();
        recs.sort_by_key(|r| r.realization);
        assert_eq!(recs.iter().map(|r| r.realization).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(recs.iter().all(|r| r.depth_qubits >= 1 && r.depth_qubits <= 8));
    }

    #[test]
    fn ensemble_is_schedule_independent() {
        let base = EnsembleSpec {
            p_values: vec![0.1, 0.5],
            l_values: vec![8, 12],
            n_realizations: 6,
            ..EnsembleSpec::default()
        };
        let collect = |threads| {
            let sink = Mutex::new(Vec::new());
            run_ensemble(&EnsembleSpec { threads, ..base.clone() }, &sink).unwrap();
            let mut v = sink.into_inner().unwrap();
            v.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).unwrap());
            v
        };
        assert_eq!(collect(1), collect(4));
    }

    struct FailingSink;

    impl RecordSink<DepthRecord> for FailingSink {
        fn accept(&self, _: DepthRecord) -> std::result::Result<(), String> {
            Err("disk full".into())
        }
    }

    #[test]
    fn sink_failure_aborts() {
        let spec = EnsembleSpec { p_values: vec![0.5], l_values: vec![6], n_realizations: 4, ..EnsembleSpec::default() };
        match run_ensemble(&spec, &FailingSink) {
            Err(Error::Sink { emitted, msg }) => {
                assert_eq!(emitted, 0);
                assert_eq!(msg, "disk full");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seeds_differ_across_grid_cells() {
        let spec = EnsembleSpec { p_values: vec![0.1, 0.2], l_values: vec![8, 10], n_realizations: 2, ..EnsembleSpec::default() };
        let seeds: std::collections::HashSet<u64> = spec.tasks().iter().map(|t| t.config.stream_seed()).collect();
        assert_eq!(seeds.len(), 8);
    }
}

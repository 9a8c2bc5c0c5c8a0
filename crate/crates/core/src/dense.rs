//! Brute-force statevector reference for small systems.
//!
//! Amplitude index bit `q` is qubit `q`. Everything here is written against
//! the Pauli definitions directly and never consults the tableau code, so it
//! can cross-check the stabilizer simulator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::circuit::{run_circuit, CircuitConfig, MonitoredState};
use crate::clifford::TwoQubitClifford;
use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::qubits::QubitSet;
use crate::structure::{build_structure, coarse_grain};
use crate::tableau::{MeasurementOutcome, StabilizerTableau};

/// Largest system the oracle accepts.
pub const MAX_DENSE_QUBITS: usize = 10;

const EIGEN_FLOOR: f64 = 1e-12;
const PROB_FLOOR: f64 = 1e-12;

pub type Unitary2 = [[Complex64; 4]; 4];

#[derive(Clone, Debug)]
pub struct DenseState {
    n: usize,
    amps: Vec<Complex64>,
}

/// Applies the Hermitian Pauli with bit masks `x`, `z` (`Y` where both set) and
/// optional minus sign to a statevector.
fn apply_pauli(amps: &[Complex64], x: usize, z: usize, negative: bool) -> Vec<Complex64> {
    let i_pow = (x & z).count_ones() % 4;
    let base = match i_pow {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    } * if negative { -1.0 } else { 1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (k, a) in amps.iter().enumerate() {
        // σ = i^{xz} XˣZᶻ: Z first, then X
        let sign = if (k & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        out[k ^ x] += base * sign * a;
    }
    out
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Packed two-qubit Pauli (`x₁ z₁ x₂ z₂`) as `(x mask, z mask)` over two qubits.
fn local_masks(p: u8) -> (usize, usize) {
    let x = (p & 1) as usize | ((p >> 2 & 1) as usize) << 1;
    let z = (p >> 1 & 1) as usize | ((p >> 3 & 1) as usize) << 1;
    (x, z)
}

/// A 4×4 unitary whose conjugation action matches `gate`, up to global phase.
///
/// `U|00⟩` is the joint `+1` eigenvector of the images of `Z₁, Z₂`; the
/// remaining columns are `U|x₁x₂⟩ = (U X₁ U†)^{x₁} (U X₂ U†)^{x₂} U|00⟩`.
pub fn clifford_to_unitary(gate: &TwoQubitClifford) -> Unitary2 {
    let project = |v: Vec<Complex64>| {
        let mut v = v;
        for k in [1, 3] {
            let (p, neg) = gate.image(k);
            let (x, z) = local_masks(p);
            let pv = apply_pauli(&v, x, z, neg);
            v = v.iter().zip(&pv).map(|(a, b)| (a + b) * 0.5).collect();
        }
        v
    };
    let mut psi0 = Vec::new();
    for k in 0..4 {
        let mut e = vec![Complex64::new(0.0, 0.0); 4];
        e[k] = Complex64::new(1.0, 0.0);
        let v = project(e);
        let nrm = norm_sqr(&v);
        if nrm > 1e-6 {
            psi0 = v.into_iter().map(|a| a / nrm.sqrt()).collect();
            break;
        }
    }
    assert_eq!(psi0.len(), 4, "stabilizer images must fix a state");
    let mut u = [[Complex64::new(0.0, 0.0); 4]; 4];
    for col in 0..4 {
        let mut v = psi0.clone();
        for (bit, k) in [(0, 0), (1, 2)] {
            if col >> bit & 1 == 1 {
                let (p, neg) = gate.image(k);
                let (x, z) = local_masks(p);
                v = apply_pauli(&v, x, z, neg);
            }
        }
        for row in 0..4 {
            u[row][col] = v[row];
        }
    }
    u
}

/// Dense matrix of a packed two-qubit Pauli.
pub fn pauli_matrix(p: u8, negative: bool) -> Unitary2 {
    let (x, z) = local_masks(p);
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for col in 0..4 {
        let mut e = vec![Complex64::new(0.0, 0.0); 4];
        e[col] = Complex64::new(1.0, 0.0);
        let v = apply_pauli(&e, x, z, negative);
        for row in 0..4 {
            m[row][col] = v[row];
        }
    }
    m
}

pub fn matmul(a: &Unitary2, b: &Unitary2) -> Unitary2 {
    let mut c = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn adjoint(a: &Unitary2) -> Unitary2 {
    let mut c = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = a[j][i].conj();
        }
    }
    c
}

pub fn max_abs_diff(a: &Unitary2, b: &Unitary2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

impl DenseState {
    pub fn new_product_state(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySystem);
        }
        if n > MAX_DENSE_QUBITS {
            return Err(Error::InvalidConfig(format!("dense oracle limited to {MAX_DENSE_QUBITS} qubits, got {n}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Statevector of a stabilizer tableau, up to global phase.
    pub fn from_tableau(t: &StabilizerTableau) -> Result<Self> {
        let n = t.n_qubits();
        let mut s = Self::new_product_state(n)?;
        for k in 0..1usize << n {
            let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
            v[k] = Complex64::new(1.0, 0.0);
            for g in 0..n {
                let (mut x, mut z) = (0, 0);
                for q in 0..n {
                    x |= (t.stabilizer_x(g, q) as usize) << q;
                    z |= (t.stabilizer_z(g, q) as usize) << q;
                }
                let pv = apply_pauli(&v, x, z, t.stabilizer_sign(g));
                v = v.iter().zip(&pv).map(|(a, b)| (a + b) * 0.5).collect();
            }
            let nrm = norm_sqr(&v);
            if nrm > 1e-6 {
                s.amps = v.into_iter().map(|a| a / nrm.sqrt()).collect();
                return Ok(s);
            }
        }
        Err(Error::InvariantViolation("generators stabilize no state".into()))
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q < self.n {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange { index: q, n_qubits: self.n })
        }
    }

    /// Applies `u` with its local qubit 1 on `i` and 2 on `j`.
    pub fn apply_unitary2(&mut self, u: &Unitary2, i: usize, j: usize) -> Result<()> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Err(Error::SameQubit(i));
        }
        let (mi, mj) = (1usize << i, 1usize << j);
        for base in 0..self.amps.len() {
            if base & (mi | mj) != 0 {
                continue;
            }
            let idx = [base, base | mi, base | mj, base | mi | mj];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| u[r][c] * v[c]).sum();
            }
        }
        Ok(())
    }

    /// Probability of the `−1` (bit 1) outcome on qubit `q`.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        self.check(q)?;
        Ok(self.amps.iter().enumerate().filter(|(k, _)| k >> q & 1 == 1).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Born-rule `Z` measurement. Consumes one `f64` from `rng` only when both
    /// outcomes have probability above `1e-12`.
    pub fn oracle_measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<MeasurementOutcome> {
        let p1 = self.prob_one(q)?;
        let (value, was_deterministic) = if p1 < PROB_FLOOR {
            (false, true)
        } else if p1 > 1.0 - PROB_FLOOR {
            (true, true)
        } else {
            (rng.gen::<f64>() < p1, false)
        };
        let keep = if value { p1 } else { 1.0 - p1 };
        let scale = 1.0 / keep.sqrt();
        for (k, a) in self.amps.iter_mut().enumerate() {
            if (k >> q & 1 == 1) == value {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        Ok(MeasurementOutcome { value, was_deterministic })
    }

    /// Reduced density matrix on `subset` (rows indexed by the subset's bits in order).
    pub fn reduced_density_matrix(&self, subset: &[usize]) -> DMatrix<Complex64> {
        let rest: Vec<usize> = (0..self.n).filter(|q| !subset.contains(q)).collect();
        let (da, db) = (1usize << subset.len(), 1usize << rest.len());
        let scatter = |bits: usize, qs: &[usize]| qs.iter().enumerate().fold(0, |acc, (i, &q)| acc | (bits >> i & 1) << q);
        let m = DMatrix::from_fn(da, db, |a, b| self.amps[scatter(a, subset) | scatter(b, &rest)]);
        &m * m.adjoint()
    }

    /// Von Neumann entropy in bits of the reduced state on `subset`.
    pub fn oracle_entropy(&self, subset: &QubitSet) -> Result<f64> {
        if let Some(q) = subset.iter().find(|&q| q >= self.n) {
            return Err(Error::QubitOutOfRange { index: q, n_qubits: self.n });
        }
        // a pure state has equal spectra on both sides of a cut
        let complement = subset.complement(self.n);
        let side = if subset.len() <= complement.len() { subset } else { &complement };
        Ok(self.entropy_of(side.as_slice()))
    }

    pub(crate) fn entropy_of(&self, qubits: &[usize]) -> f64 {
        if qubits.is_empty() || qubits.len() == self.n {
            return 0.0;
        }
        spectrum_entropy(&self.reduced_density_matrix(qubits))
    }
}

/// `−Σ λ log₂ λ` over the eigenvalues of a density matrix, ignoring λ < 1e−12.
pub fn spectrum_entropy(rho: &DMatrix<Complex64>) -> f64 {
    // ρ is positive semidefinite, so its singular values are its eigenvalues;
    // the Hermitian eigensolver returns inf/NaN on large degenerate spectra
    let sv = rho.clone().svd(false, false).singular_values;
    sv.iter().filter(|&&l| l > EIGEN_FLOOR).map(|&l| -l * l.log2()).sum()
}

impl EntropySource for DenseState {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn entropy(&self, qubits: &[usize]) -> u32 {
        let side: Vec<usize>;
        let qs = if 2 * qubits.len() > self.n {
            side = (0..self.n).filter(|q| !qubits.contains(q)).collect();
            &side[..]
        } else {
            qubits
        };
        self.entropy_of(qs).round() as u32
    }
}

impl MonitoredState for DenseState {
    fn n_qubits(&self) -> usize {
        self.n
    }

    fn apply_gate(&mut self, gate: &TwoQubitClifford, i: usize, j: usize) -> Result<()> {
        self.apply_unitary2(&clifford_to_unitary(gate), i, j)
    }

    fn measure<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<MeasurementOutcome> {
        self.oracle_measure_z(q, rng)
    }
}

/// Deliberate corruption of the tableau entropies, to show the oracle check bites.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EntropyFault {
    #[default]
    None,
    /// Reports `rank − |A| + 1` for proper subsets.
    OffByOne,
}

struct FaultyTableau<'a> {
    inner: &'a StabilizerTableau,
    fault: EntropyFault,
}

impl EntropySource for FaultyTableau<'_> {
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn entropy(&self, qubits: &[usize]) -> u32 {
        let s = self.inner.entropy_unchecked(qubits);
        match self.fault {
            EntropyFault::None => s,
            EntropyFault::OffByOne if !qubits.is_empty() && qubits.len() < self.n_qubits() => s + 1,
            EntropyFault::OffByOne => s,
        }
    }

    fn factor_labels(&self, elements: &[Vec<usize>]) -> Option<Vec<usize>> {
        match self.fault {
            EntropyFault::None => Some(self.inner.factorization(elements)),
            EntropyFault::OffByOne => None,
        }
    }
}

/// One discrepancy found by [`coupled_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub p: f64,
    pub trial: u64,
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OracleReport {
    pub trials: usize,
    pub subsets_compared: usize,
    pub outcomes_compared: usize,
    pub mismatches: Vec<Mismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

const MAX_REPORTED: usize = 20;

/// Drives the tableau and the dense oracle with identical gate, site and coin
/// streams and compares measurement outcomes, every proper-subset entropy and
/// the structure partitions at `b = 1` and `b = 2`.
pub fn coupled_check(
    n_qubits: usize,
    p_values: &[f64],
    trials: u64,
    master_seed: u64,
    fault: EntropyFault,
) -> Result<OracleReport> {
    if n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::InvalidConfig(format!("oracle check limited to L <= {MAX_DENSE_QUBITS}")));
    }
    let mut report = OracleReport::default();
    let push = |report: &mut OracleReport, m: Mismatch| {
        if report.mismatches.len() < MAX_REPORTED {
            report.mismatches.push(m);
        } else if report.mismatches.len() == MAX_REPORTED {
            report.mismatches.push(Mismatch { detail: "further mismatches suppressed".into(), ..m });
        }
    };
    for &p in p_values {
        for trial in 0..trials {
            let config = CircuitConfig::new(n_qubits, p).with_seed(master_seed, trial);
            let seed = config.stream_seed();
            let mk = |detail: String| Mismatch { p, trial, seed, detail };
            let mut tab = StabilizerTableau::new_product_state(n_qubits)?;
            let mut dense = DenseState::new_product_state(n_qubits)?;
            let mut tab_out = Vec::new();
            let mut dense_out = Vec::new();
            run_circuit(&mut tab, &config, |t, q, o| tab_out.push((t, q, o)))?;
            run_circuit(&mut dense, &config, |t, q, o| dense_out.push((t, q, o)))?;
            report.trials += 1;
            report.outcomes_compared += tab_out.len();
            if tab_out != dense_out {
                let at = tab_out.iter().zip(&dense_out).position(|(a, b)| a != b).unwrap_or(tab_out.len().min(dense_out.len()));
                push(&mut report, mk(format!("measurement records diverge at entry {at}")));
                continue;
            }
            if (dense.norm() - 1.0).abs() > 1e-9 {
                push(&mut report, mk(format!("dense norm drifted to {}", dense.norm())));
            }
            let faulty = FaultyTableau { inner: &tab, fault };
            for mask in 1u32..(1u32 << n_qubits) - 1 {
                let subset: Vec<usize> = (0..n_qubits).filter(|q| mask >> q & 1 == 1).collect();
                let exact = dense.oracle_entropy(&QubitSet::new(subset.clone(), n_qubits)?)?;
                let rounded = exact.round();
                report.subsets_compared += 1;
                if (exact - rounded).abs() > 1e-9 || faulty.entropy(&subset) as f64 != rounded {
                    push(&mut report, mk(format!("entropy of {subset:?}: tableau {} vs dense {exact:.12}", faulty.entropy(&subset))));
                    break;
                }
            }
            for b in [1, 2].into_iter().filter(|&b| b <= n_qubits) {
                let els = coarse_grain(n_qubits, b)?;
                let a = build_structure(&faulty, &els)?.partition();
                let d = build_structure(&dense, &els)?.partition();
                if a != d {
                    push(&mut report, mk(format!("b={b} partitions differ: tableau {a:?} vs dense {d:?}")));
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn identity4() -> Unitary2 {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Equal up to a global phase.
    fn phase_equal(a: &Unitary2, b: &Unitary2) -> bool {
        let (i, j) = (0..16).map(|k| (k / 4, k % 4)).find(|&(i, j)| b[i][j].norm() > 1e-6).unwrap();
        let phase = a[i][j] / b[i][j];
        (0..16).all(|k| (a[k / 4][k % 4] - phase * b[k / 4][k % 4]).norm() < 1e-9)
    }

    fn conjugation_matches(g: &TwoQubitClifford) -> bool {
        let u = clifford_to_unitary(g);
        let ud = adjoint(&u);
        (1u8..16).all(|p| {
            let (img, neg) = g.conjugate(p);
            let lhs = matmul(&matmul(&u, &pauli_matrix(p, false)), &ud);
            max_abs_diff(&lhs, &pauli_matrix(img, neg)) < 1e-9
        })
    }

    #[test]
    fn identity_gate_gives_identity_matrix() {
        assert!(phase_equal(&clifford_to_unitary(&TwoQubitClifford::identity()), &identity4()));
    }

    #[test]
    fn cnot_gate_matrix() {
        let u = clifford_to_unitary(&TwoQubitClifford::cnot());
        // control = local qubit 1 = index bit 0
        let mut cnot = [[Complex64::new(0.0, 0.0); 4]; 4];
        for k in 0..4usize {
            let out = if k & 1 == 1 { k ^ 2 } else { k };
            cnot[out][k] = Complex64::new(1.0, 0.0);
        }
        assert!(phase_equal(&u, &cnot));
        assert!(conjugation_matches(&TwoQubitClifford::cnot()));
    }

    #[test]
    fn sampled_gates_reproduce_tableau_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let g = TwoQubitClifford::sample(&mut rng);
            assert!(conjugation_matches(&g), "{g:?}");
            let u = clifford_to_unitary(&g);
            assert!(max_abs_diff(&matmul(&u, &adjoint(&u)), &identity4()) < 1e-9);
        }
    }

    fn bell() -> DenseState {
        let mut s = DenseState::new_product_state(2).unwrap();
        let u = clifford_to_unitary(&TwoQubitClifford::h(0).then(&TwoQubitClifford::cnot()));
        s.apply_unitary2(&u, 0, 1).unwrap();
        s
    }

    #[test]
    fn entropies() {
        let b = bell();
        assert!((b.oracle_entropy(&QubitSet::range(0, 1)).unwrap() - 1.0).abs() < 1e-12);
        let p = DenseState::new_product_state(4).unwrap();
        assert!(p.oracle_entropy(&QubitSet::range(1, 3)).unwrap().abs() < 1e-12);
        assert!(DenseState::new_product_state(11).is_err());
    }

    #[test]
    fn reduced_spectra_match_across_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [6, 8] {
            let mut s = DenseState::new_product_state(n).unwrap();
            for k in 0..6 * n {
                let i = k % (n - 1);
                s.apply_gate(&TwoQubitClifford::sample(&mut rng), i, i + 1).unwrap();
                if k % 3 == 0 {
                    s.oracle_measure_z(rng.gen_range(0..n), &mut rng).unwrap();
                }
            }
            for mask in 1u32..(1 << n) - 1 {
                let a: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
                let b: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 0).collect();
                let sa = spectrum_entropy(&s.reduced_density_matrix(&a));
                let sb = spectrum_entropy(&s.reduced_density_matrix(&b));
                assert!((sa - sb).abs() < 1e-9, "n={n} {a:?}: {sa} vs {sb}");
                assert!((sa - sa.round()).abs() < 1e-9);
            }
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measurement_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut zero = DenseState::new_product_state(1).unwrap();
        for _ in 0..10 {
            assert_eq!(zero.oracle_measure_z(0, &mut rng).unwrap(), MeasurementOutcome { value: false, was_deterministic: true });
        }
        let trials = 10_000;
        let mut ones = 0;
        for _ in 0..trials {
            let mut s = bell();
            let a = s.oracle_measure_z(0, &mut rng).unwrap();
            assert!(!a.was_deterministic);
            assert!((s.norm() - 1.0).abs() < 1e-12);
            let b = s.oracle_measure_z(1, &mut rng).unwrap();
            assert_eq!(a.value, b.value);
            assert!(b.was_deterministic);
            ones += a.value as usize;
        }
        let sigma = (trials as f64 / 4.0).sqrt();
        assert!((ones as f64 - trials as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn from_tableau_matches_entropies() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut t = StabilizerTableau::new_product_state(5).unwrap();
        for k in 0..40 {
            let i = k % 4;
            t.apply_clifford2(&TwoQubitClifford::sample(&mut rng), i, i + 1).unwrap();
            if k % 7 == 0 {
                t.measure_z(k % 5, &mut rng).unwrap();
            }
        }
        let d = DenseState::from_tableau(&t).unwrap();
        for mask in 1u32..31 {
            let a: Vec<usize> = (0..5).filter(|q| mask >> q & 1 == 1).collect();
            assert_eq!(EntropySource::entropy(&d, &a), t.entropy_unchecked(&a));
        }
    }

    #[test]
    fn coupled_check_small() {
        let r = coupled_check(4, &[0.0, 0.3, 1.0], 20, 9, EntropyFault::None).unwrap();
        assert!(r.passed(), "{:?}", r.mismatches);
        assert_eq!(r.trials, 60);
        assert!(r.outcomes_compared > 0);
    }

    #[test]
    fn coupled_check_catches_entropy_fault() {
        let r = coupled_check(4, &[0.2], 5, 9, EntropyFault::OffByOne).unwrap();
        assert!(!r.passed());
    }
}

//! Subsystem entropies of stabilizer states.
//!
//! For a pure stabilizer state with generator matrix `G`, the entropy (in bits)
//! of a subsystem `A` is `rank(G restricted to the columns of A) − |A|`.

use crate::dsu::DisjointSets;
use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::qubits::QubitSet;
use crate::tableau::StabilizerTableau;

/// Anything that can report integer subsystem entropies of a pure state.
pub trait EntropySource {
    fn n_qubits(&self) -> usize;

    /// Entropy in bits of the (sorted, distinct, nonempty) qubit list.
    fn entropy(&self, qubits: &[usize]) -> u32;

    /// Optional finest tensor factorization over a partition of the qubits into
    /// elements: returns one label per element, equal labels sharing a factor.
    fn factor_labels(&self, _elements: &[Vec<usize>]) -> Option<Vec<usize>> {
        None
    }
}

impl StabilizerTableau {
    /// Entropy of a qubit list assumed valid; the smaller side of the cut is used.
    pub(crate) fn entropy_unchecked(&self, qubits: &[usize]) -> u32 {
        let n = self.n_qubits();
        if qubits.is_empty() || qubits.len() == n {
            return 0;
        }
        let complement: Vec<usize>;
        let cols: &[usize] = if 2 * qubits.len() > n {
            let mut mark = vec![false; n];
            for &q in qubits {
                mark[q] = true;
            }
            complement = (0..n).filter(|&q| !mark[q]).collect();
            &complement
        } else {
            qubits
        };
        let k = cols.len();
        let mut m = BitMatrix::zeros(n, 2 * k);
        for g in 0..n {
            for (c, &q) in cols.iter().enumerate() {
                if self.stabilizer_x(g, q) {
                    m.set(g, 2 * c, true);
                }
                if self.stabilizer_z(g, q) {
                    m.set(g, 2 * c + 1, true);
                }
            }
        }
        (m.eliminate() - k) as u32
    }

    /// Entanglement entropy (bits) of `subset` with the rest of the system.
    pub fn subset_entropy(&self, subset: &QubitSet) -> Result<u32> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(q) = subset.iter().find(|&q| q >= self.n_qubits()) {
            return Err(Error::QubitOutOfRange { index: q, n_qubits: self.n_qubits() });
        }
        Ok(self.entropy_unchecked(subset.as_slice()))
    }

    /// `Σ S(part) − S(∪ parts)` for pairwise disjoint, nonempty parts.
    pub fn total_correlation(&self, parts: &[QubitSet]) -> Result<u32> {
        total_correlation(self, parts)
    }

    /// Finest factorization of the state into unions of `elements`.
    ///
    /// The reduced row echelon form of the generator matrix is unique, and when
    /// the state factorizes its RREF is the union of the factors' RREFs; hence
    /// the connected components of RREF row supports are exactly the factors.
    pub fn factorization(&self, elements: &[Vec<usize>]) -> Vec<usize> {
        let n = self.n_qubits();
        let mut owner = vec![usize::MAX; n];
        for (e, qs) in elements.iter().enumerate() {
            for &q in qs {
                owner[q] = e;
            }
        }
        let mut m = self.stabilizer_matrix();
        let rank = m.rref().len();
        let mut sets = DisjointSets::new(elements.len());
        for r in 0..rank {
            let row = m.row(r);
            let mut first: Option<usize> = None;
            for q in 0..n {
                let bit = |c: usize| (row[c / 64] >> (c % 64)) & 1 == 1;
                if bit(q) || bit(n + q) {
                    let e = owner[q];
                    match first {
                        None => first = Some(e),
                        Some(f) => {
                            sets.union(f, e);
                        }
                    }
                }
            }
        }
        (0..elements.len()).map(|e| sets.find(e)).collect()
    }
}

impl EntropySource for StabilizerTableau {
    fn n_qubits(&self) -> usize {
        StabilizerTableau::n_qubits(self)
    }

    fn entropy(&self, qubits: &[usize]) -> u32 {
        self.entropy_unchecked(qubits)
    }

    fn factor_labels(&self, elements: &[Vec<usize>]) -> Option<Vec<usize>> {
        Some(self.factorization(elements))
    }
}

/// Total correlation of disjoint parts under any entropy source.
pub fn total_correlation<S: EntropySource + ?Sized>(source: &S, parts: &[QubitSet]) -> Result<u32> {
    let n = source.n_qubits();
    let mut seen = vec![false; n];
    let mut union = Vec::new();
    let mut sum = 0;
    for part in parts {
        if part.is_empty() {
            return Err(Error::EmptySubset);
        }
        for q in part.iter() {
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n_qubits: n });
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::OverlappingParts(q));
            }
            union.push(q);
        }
        sum += source.entropy(part.as_slice());
    }
    union.sort_unstable();
    let joint = source.entropy(&union);
    debug_assert!(sum >= joint, "negative total correlation");
    Ok(sum - joint)
}

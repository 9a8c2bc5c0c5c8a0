use crate::error::{Error, Result};

/// Ordered set of distinct qubit indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct QubitSet(Vec<usize>);

impl QubitSet {
    /// Sorts `members` and checks them against `n_qubits`.
    pub fn new(mut members: Vec<usize>, n_qubits: usize) -> Result<Self> {
        members.sort_unstable();
        for w in members.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateQubit(w[0]));
            }
        }
        if let Some(&last) = members.last() {
            if last >= n_qubits {
                return Err(Error::QubitOutOfRange { index: last, n_qubits });
            }
        }
        Ok(Self(members))
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self(members)
    }

    pub fn range(start: usize, end: usize) -> Self {
        Self((start..end).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.0.binary_search(&q).is_ok()
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v: Vec<usize> = self.0.iter().chain(&other.0).copied().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn complement(&self, n_qubits: usize) -> Self {
        Self((0..n_qubits).filter(|q| !self.contains(*q)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl<'a> IntoIterator for &'a QubitSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

//! Entanglement structure: the finest decomposition of a pure state into
//! decoupled clusters, built by iteratively merging correlated elements.
//!
//! Elements are first merged pairwise (connected components of the
//! positive-mutual-information graph) until a fixed point. If some element still
//! has positive entropy, `w`-subsets of the positive-entropy elements are searched
//! in lexicographic id order for positive total correlation, for `w = 3, 4, …`;
//! the first hit is merged and the pairwise stage resumes.
//!
//! Every merge joins elements that share one tensor factor, so the final
//! clusters are exactly the factors. When the entropy source can report the
//! factorization, subset searches skip subsets spanning several factors (their
//! total correlation is provably zero at that stage) and, once the evaluation
//! budget is spent, a whole factor is merged in one step.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dsu::DisjointSets;
use crate::entropy::EntropySource;
use crate::error::{Error, Result};
use crate::qubits::QubitSet;

/// Indivisible group of qubits taking part in one structure pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub id: usize,
    pub qubits: QubitSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeEvent {
    /// Cluster level `w` at which the merge happened.
    pub level: usize,
    /// Ids of the merged elements, ascending.
    pub members: Vec<usize>,
    /// Id of the element created by the merge.
    pub result: usize,
    /// Set when the subset search budget ran out and a whole factor was merged.
    pub fallback: bool,
}

/// Bookkeeping for the `w ≥ 3` searches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub escalations: usize,
    pub subsets_evaluated: usize,
    pub fallbacks: usize,
    pub max_level: usize,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.escalations += other.escalations;
        self.subsets_evaluated += other.subsets_evaluated;
        self.fallbacks += other.fallbacks;
        self.max_level = self.max_level.max(other.max_level);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntanglementStructure {
    pub n_qubits: usize,
    pub initial_elements: Vec<Element>,
    /// Decoupled clusters sorted by their smallest qubit.
    pub final_clusters: Vec<Element>,
    pub merge_events: Vec<MergeEvent>,
    pub stats: SearchStats,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthReport {
    /// Entanglement depth in original qubits.
    pub depth_qubits: usize,
    pub largest_cluster: QubitSet,
    pub n_clusters: usize,
}

/// Tuning for [`build_structure_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructureOptions {
    /// Total-correlation evaluations allowed per escalation before a whole
    /// factor is merged. Only honoured when the source reports factors.
    pub search_budget: usize,
}

pub const DEFAULT_SEARCH_BUDGET: usize = 20_000;

impl Default for StructureOptions {
    fn default() -> Self {
        Self { search_budget: DEFAULT_SEARCH_BUDGET }
    }
}

/// Groups qubits `0..n` into `⌈n/b⌉` contiguous boxes in spatial order.
pub fn coarse_grain(n_qubits: usize, b: usize) -> Result<Vec<Element>> {
    if b == 0 || b > n_qubits {
        return Err(Error::InvalidBoxSize { b, n_qubits });
    }
    Ok((0..n_qubits.div_ceil(b))
        .map(|id| Element { id, qubits: QubitSet::range(id * b, ((id + 1) * b).min(n_qubits)) })
        .collect())
}

/// Single-qubit elements.
pub fn singletons(n_qubits: usize) -> Vec<Element> {
    (0..n_qubits).map(|q| Element { id: q, qubits: QubitSet::range(q, q + 1) }).collect()
}

#[derive(Clone, Debug)]
struct Node {
    id: usize,
    qubits: Vec<usize>,
    entropy: u32,
    label: usize,
    fresh: bool,
}

fn merged_qubits<'a>(parts: impl Iterator<Item = &'a Node>) -> Vec<usize> {
    let mut q: Vec<usize> = parts.flat_map(|n| n.qubits.iter().copied()).collect();
    q.sort_unstable();
    q
}

fn validate_partition(n: usize, elements: &[Element]) -> Result<()> {
    let mut seen = vec![false; n];
    for e in elements {
        if e.qubits.is_empty() {
            return Err(Error::NotAPartition(format!("element {} is empty", e.id)));
        }
        for q in e.qubits.iter() {
            if q >= n {
                return Err(Error::NotAPartition(format!("qubit {q} out of range")));
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::NotAPartition(format!("qubit {q} appears twice")));
            }
        }
    }
    if let Some(q) = seen.iter().position(|s| !s) {
        return Err(Error::NotAPartition(format!("qubit {q} not covered")));
    }
    Ok(())
}

/// [`build_structure_with`] using default options.
pub fn build_structure<S: EntropySource + ?Sized>(source: &S, elements: &[Element]) -> Result<EntanglementStructure> {
    build_structure_with(source, elements, &StructureOptions::default())
}

pub fn build_structure_with<S: EntropySource + ?Sized>(
    source: &S,
    elements: &[Element],
    options: &StructureOptions,
) -> Result<EntanglementStructure> {
    let n = source.n_qubits();
    validate_partition(n, elements)?;
    let qubit_lists: Vec<Vec<usize>> = elements.iter().map(|e| e.qubits.as_slice().to_vec()).collect();
    let labels = source.factor_labels(&qubit_lists);
    let mut nodes: Vec<Node> = elements
        .iter()
        .enumerate()
        .map(|(i, e)| Node {
            id: e.id,
            entropy: source.entropy(e.qubits.as_slice()),
            qubits: qubit_lists[i].clone(),
            label: labels.as_ref().map_or(0, |l| l[i]),
            fresh: true,
        })
        .collect();
    nodes.sort_by_key(|n| n.id);
    if nodes.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::NotAPartition("duplicate element ids".into()));
    }
    let mut next_id = nodes.last().map_or(0, |n| n.id + 1);
    let mut events = Vec::new();
    let mut stats = SearchStats::default();

    let mut merge = |nodes: &mut Vec<Node>, groups: Vec<Vec<usize>>, level: usize, fallback: bool| {
        let mut taken = vec![false; nodes.len()];
        let mut created = Vec::new();
        for group in groups {
            let qubits = merged_qubits(group.iter().map(|&i| &nodes[i]));
            let entropy = source.entropy(&qubits);
            let members: Vec<usize> = group.iter().map(|&i| nodes[i].id).collect();
            for &i in &group {
                taken[i] = true;
            }
            events.push(MergeEvent { level, members, result: next_id, fallback });
            created.push(Node { id: next_id, qubits, entropy, label: nodes[group[0]].label, fresh: true });
            next_id += 1;
        }
        let mut kept: Vec<Node> = nodes
            .drain(..)
            .zip(taken)
            .filter(|(_, t)| !t)
            .map(|(mut n, _)| {
                n.fresh = false;
                n
            })
            .collect();
        kept.extend(created);
        *nodes = kept;
    };

    loop {
        // pairwise stage, to a fixed point
        loop {
            let positive: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].entropy > 0).collect();
            let mut sets = DisjointSets::new(nodes.len());
            let mut any = false;
            for (k, &a) in positive.iter().enumerate() {
                for &b in &positive[k + 1..] {
                    let (na, nb) = (&nodes[a], &nodes[b]);
                    if !(na.fresh || nb.fresh) || na.label != nb.label {
                        continue;
                    }
                    let joint = source.entropy(&merged_qubits([na, nb].into_iter()));
                    if na.entropy + nb.entropy > joint {
                        sets.union(a, b);
                        any = true;
                    }
                }
            }
            for node in nodes.iter_mut() {
                node.fresh = false;
            }
            if !any {
                break;
            }
            let mut comps: Vec<Vec<usize>> = Vec::new();
            let mut comp_of = vec![usize::MAX; nodes.len()];
            for i in 0..nodes.len() {
                let root = sets.find(i);
                if comp_of[root] == usize::MAX {
                    comp_of[root] = comps.len();
                    comps.push(Vec::new());
                }
                comps[comp_of[root]].push(i);
            }
            comps.retain(|c| c.len() > 1);
            merge(&mut nodes, comps, 2, false);
        }

        let positive: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].entropy > 0).collect();
        if positive.is_empty() {
            break;
        }
        stats.escalations += 1;

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &i in &positive {
            match groups.iter_mut().find(|g| nodes[g[0]].label == nodes[i].label) {
                Some(g) => g.push(i),
                None => groups.push(vec![i]),
            }
        }
        let budget = labels.as_ref().map(|_| options.search_budget);
        let largest = groups.iter().map(Vec::len).max().unwrap_or(0);
        let mut spent = 0usize;
        let mut outcome: Option<(Vec<usize>, usize, bool)> = None;
        'levels: for w in 3..=largest {
            let mut best: Option<Vec<usize>> = None;
            for group in groups.iter().filter(|g| g.len() >= w) {
                let mut combo: Vec<usize> = (0..w).collect();
                loop {
                    if budget.is_some_and(|b| spent >= b) {
                        break 'levels;
                    }
                    spent += 1;
                    let picked: Vec<usize> = combo.iter().map(|&c| group[c]).collect();
                    let sum: u32 = picked.iter().map(|&i| nodes[i].entropy).sum();
                    let joint = source.entropy(&merged_qubits(picked.iter().map(|&i| &nodes[i])));
                    if sum > joint {
                        let better = best.as_ref().is_none_or(|b| {
                            picked.iter().map(|&i| nodes[i].id).lt(b.iter().map(|&i| nodes[i].id))
                        });
                        if better {
                            best = Some(picked);
                        }
                        break;
                    }
                    if !next_combination(&mut combo, group.len()) {
                        break;
                    }
                }
            }
            if let Some(best) = best {
                outcome = Some((best, w, false));
                break;
            }
        }
        stats.subsets_evaluated += spent;
        let (group, level, fallback) = match outcome {
            Some(found) => found,
            None if budget.is_some() => {
                // budget spent: merge the factor holding the lowest positive id
                let g = groups.into_iter().next().expect("positive elements exist");
                let len = g.len();
                stats.fallbacks += 1;
                (g, len, true)
            }
            None => {
                return Err(Error::InvariantViolation(
                    "no correlated subset found among positive-entropy elements; is the state pure?".into(),
                ))
            }
        };
        stats.max_level = stats.max_level.max(level);
        merge(&mut nodes, vec![group], level, fallback);
    }

    let mut final_clusters: Vec<Element> = nodes
        .into_iter()
        .map(|n| Element { id: n.id, qubits: QubitSet::from_sorted(n.qubits) })
        .collect();
    final_clusters.sort_by_key(|e| e.qubits.first());
    let mut initial_elements = elements.to_vec();
    initial_elements.sort_by_key(|e| e.id);
    Ok(EntanglementStructure { n_qubits: n, initial_elements, final_clusters, merge_events: events, stats })
}

/// Advances `combo` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for i in (0..k).rev() {
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

impl EntanglementStructure {
    /// Largest final cluster by qubit count; ties go to the smallest first qubit.
    pub fn largest_cluster(&self) -> &Element {
        // clusters are sorted by min qubit, so the first maximum wins ties
        let mut best = &self.final_clusters[0];
        for c in &self.final_clusters[1..] {
            if c.qubits.len() > best.qubits.len() {
                best = c;
            }
        }
        best
    }

    pub fn depth_report(&self) -> DepthReport {
        let largest = self.largest_cluster();
        DepthReport {
            depth_qubits: largest.qubits.len(),
            largest_cluster: largest.qubits.clone(),
            n_clusters: self.final_clusters.len(),
        }
    }

    /// Number of initial elements inside the largest cluster.
    pub fn largest_cluster_elements(&self) -> usize {
        let largest = self.largest_cluster();
        self.initial_elements.iter().filter(|e| e.qubits.iter().all(|q| largest.qubits.contains(q))).count()
    }

    /// Re-applies the merge events to the initial elements.
    pub fn replay(&self) -> Result<Vec<Element>> {
        let mut live: Vec<Element> = self.initial_elements.clone();
        for ev in &self.merge_events {
            let mut qubits = QubitSet::default();
            for id in &ev.members {
                let pos = live
                    .iter()
                    .position(|e| e.id == *id)
                    .ok_or_else(|| Error::InvariantViolation(format!("merge of unknown element {id}")))?;
                qubits = qubits.union(&live.swap_remove(pos).qubits);
            }
            live.push(Element { id: ev.result, qubits });
        }
        live.sort_by_key(|e| e.qubits.first());
        Ok(live)
    }

    /// Final clusters as sorted qubit lists, the partition itself.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.final_clusters.iter().map(|c| c.qubits.as_slice().to_vec()).collect()
    }

    /// Text dump: one comma-separated line per cluster, then `w=<k>: <ids>` lines.
    pub fn dump(&self) -> String {
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        for c in &self.final_clusters {
            let _ = writeln!(s, "{}", join(&mut c.qubits.iter()));
        }
        for ev in &self.merge_events {
            let _ = writeln!(s, "w={}: {}", ev.level, join(&mut ev.members.iter().copied()));
        }
        s
    }
}

/// Free-function form of [`EntanglementStructure::depth_report`].
pub fn depth_report(structure: &EntanglementStructure) -> DepthReport {
    structure.depth_report()
}

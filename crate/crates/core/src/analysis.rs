//! Theil–Sen fits of depth and box-counting data.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::{build_structure_with, coarse_grain, StructureOptions};
use crate::tableau::StabilizerTableau;

/// Entanglement depth of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRecord {
    pub p: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub realization: usize,
    pub seed: u64,
    pub depth_qubits: usize,
    pub n_clusters: usize,
}

impl DepthRecord {
    pub fn sort_key(&self) -> (f64, usize, usize) {
        (self.p, self.l, self.realization)
    }
}

/// Boxes of size `b` occupied by the largest cluster in one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountRecord {
    pub p: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub b: usize,
    pub realization: usize,
    pub seed: u64,
    pub n_boxes: usize,
}

impl BoxCountRecord {
    pub fn sort_key(&self) -> (f64, usize, usize, usize) {
        (self.p, self.l, self.b, self.realization)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Median pairwise slope.
    pub slope: f64,
    /// Median absolute deviation of the pairwise slopes from `slope`.
    pub slope_err: f64,
    /// Median of `y − slope·x`; informational only.
    pub intercept: f64,
    pub n_points: usize,
}

/// Median of a nonempty list; even lengths average the two middle values.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty list");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Theil–Sen line through `points`, using all pairs with distinct `x`.
pub fn theil_sen(points: &[(f64, f64)]) -> Result<FitResult> {
    let mut slopes = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (i, &(xi, yi)) in points.iter().enumerate() {
        for &(xj, yj) in &points[i + 1..] {
            if xi != xj {
                slopes.push((yj - yi) / (xj - xi));
            }
        }
    }
    if slopes.is_empty() {
        return Err(Error::InsufficientData("need at least two distinct x values".into()));
    }
    let slope = median(&mut slopes);
    let mut dev: Vec<f64> = slopes.iter().map(|m| (slope - m).abs()).collect();
    let slope_err = median(&mut dev);
    let mut resid: Vec<f64> = points.iter().map(|&(x, y)| y - slope * x).collect();
    let intercept = median(&mut resid);
    Ok(FitResult { slope, slope_err, intercept, n_points: points.len() })
}

/// Mean of `value` grouped by `key`, in ascending key order.
fn grouped_means<T>(items: &[T], key: impl Fn(&T) -> usize, value: impl Fn(&T) -> f64) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for it in items {
        let e = acc.entry(key(it)).or_default();
        e.0 += value(it);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

fn single_p<T>(items: &[T], p: impl Fn(&T) -> f64) -> Result<()> {
    match items.split_first() {
        None => Err(Error::InsufficientData("no records".into())),
        Some((first, rest)) => {
            let p0 = p(first);
            if rest.iter().any(|r| p(r) != p0) {
                Err(Error::InvalidConfig("records mix several p values".into()))
            } else {
                Ok(())
            }
        }
    }
}

/// Ensemble-average depth per `L`, then Theil–Sen on `(ln L, ln ⟨D⟩)`; the slope is γ.
pub fn fit_gamma(records: &[DepthRecord]) -> Result<FitResult> {
    single_p(records, |r| r.p)?;
    let means = grouped_means(records, |r| r.l, |r| r.depth_qubits as f64);
    if means.len() < 2 {
        return Err(Error::InsufficientData("need at least two distinct L values".into()));
    }
    let pts: Vec<(f64, f64)> = means.iter().map(|&(l, d)| ((l as f64).ln(), d.ln())).collect();
    theil_sen(&pts)
}

/// Default box sizes for box counting.
pub const DEFAULT_B_RANGE: RangeInclusive<usize> = 2..=20;

/// Ensemble-average `N_b` per `b` in `b_range`, then Theil–Sen on `(ln b, ln ⟨N_b⟩)`.
/// The fractal dimension is `−slope`; see [`FitResult::dimension`].
pub fn fit_fractal_dim(records: &[BoxCountRecord], b_range: Option<RangeInclusive<usize>>) -> Result<FitResult> {
    single_p(records, |r| r.p)?;
    let range = b_range.unwrap_or(DEFAULT_B_RANGE);
    let kept: Vec<&BoxCountRecord> = records.iter().filter(|r| range.contains(&r.b)).collect();
    let means = grouped_means(&kept, |r| r.b, |r| r.n_boxes as f64);
    if means.len() < 2 {
        return Err(Error::InsufficientData("need at least two distinct box sizes".into()));
    }
    let pts: Vec<(f64, f64)> = means.iter().map(|&(b, n)| ((b as f64).ln(), n.ln())).collect();
    theil_sen(&pts)
}

impl FitResult {
    /// `−slope`, the box-counting dimension.
    pub fn dimension(&self) -> f64 {
        -self.slope
    }
}

/// `N_b` for one state: coarse-grain into boxes of `b`, extract the structure
/// and count the boxes in the largest cluster.
pub fn box_count_state(state: &StabilizerTableau, b: usize) -> Result<usize> {
    box_count_state_with(state, b, &StructureOptions::default())
}

pub fn box_count_state_with(state: &StabilizerTableau, b: usize, options: &StructureOptions) -> Result<usize> {
    let boxes = coarse_grain(state.n_qubits(), b)?;
    Ok(build_structure_with(state, &boxes, options)?.largest_cluster_elements())
}

/// Boxes of size `b` (aligned from index 0) that contain at least one member.
pub fn occupied_boxes(membership: &[bool], b: usize) -> Result<usize> {
    if b == 0 || b > membership.len() {
        return Err(Error::InvalidBoxSize { b, n_qubits: membership.len() });
    }
    Ok(membership.chunks(b).filter(|c| c.iter().any(|&m| m)).count())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn depth(p: f64, l: usize, d: usize) -> DepthRecord {
        DepthRecord { p, l, realization: 0, seed: 0, depth_qubits: d, n_clusters: 1 }
    }

    #[test]
    fn exact_line() {
        let f = theil_sen(&[(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)]).unwrap();
        assert_eq!((f.slope, f.slope_err, f.intercept, f.n_points), (2.0, 0.0, 0.0, 3));
    }

    #[test]
    fn outlier_example() {
        // pairwise slopes {−3, −1, −1/3, 0, 1, 1, 1, 1, 1, 1}; six deviations
        // from the median are zero, so the MAD is 0
        let f = theil_sen(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 0.0)]).unwrap();
        assert_eq!(f.slope, 1.0);
        assert_eq!(f.slope_err, 0.0);
    }

    #[test]
    fn two_points() {
        let f = theil_sen(&[(0.0, 0.0), (1.0, 3.0)]).unwrap();
        assert_eq!((f.slope, f.slope_err), (3.0, 0.0));
    }

    #[test]
    fn degenerate_x_rejected() {
        assert!(matches!(theil_sen(&[(1.0, 0.0), (1.0, 3.0)]), Err(Error::InsufficientData(_))));
        assert!(theil_sen(&[(1.0, 0.0)]).is_err());
        // duplicate x pairs are skipped, not fatal
        let f = theil_sen(&[(1.0, 0.0), (1.0, 5.0), (2.0, 1.0)]).unwrap();
        assert_eq!(f.slope, -1.5);
    }

    #[test]
    fn even_median_averages() {
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut [5.0]), 5.0);
    }

    #[test]
    fn gamma_of_linear_depth() {
        let recs: Vec<_> = [16, 32, 64, 128].iter().map(|&l| depth(0.1, l, l)).collect();
        let f = fit_gamma(&recs).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(f.slope_err.abs() < 1e-12);
    }

    #[test]
    fn gamma_of_sqrt_depth() {
        let recs: Vec<_> = (16..=256).step_by(16).map(|l| depth(0.5, l, (l as f64).sqrt().floor() as usize)).collect();
        let f = fit_gamma(&recs).unwrap();
        assert!((f.slope - 0.5).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn gamma_needs_two_sizes_and_one_p() {
        assert!(matches!(fit_gamma(&[depth(0.1, 8, 3), depth(0.1, 8, 4)]), Err(Error::InsufficientData(_))));
        assert!(fit_gamma(&[depth(0.1, 8, 3), depth(0.2, 16, 4)]).is_err());
        assert!(fit_gamma(&[]).is_err());
    }

    #[test]
    fn gamma_averages_before_logs() {
        // mean depth 4 at L=8 (from 2 and 6), 8 at L=16
        let recs = vec![depth(0.2, 8, 2), depth(0.2, 8, 6), depth(0.2, 16, 8)];
        assert!((fit_gamma(&recs).unwrap().slope - 1.0).abs() < 1e-12);
    }

    fn boxes(l: usize, b: usize, n: usize) -> BoxCountRecord {
        BoxCountRecord { p: 0.3, l, b, realization: 0, seed: 0, n_boxes: n }
    }

    #[test]
    fn single_box_cluster_has_dimension_zero() {
        let recs: Vec<_> = (2..=20).map(|b| boxes(240, b, 1)).collect();
        assert_eq!(fit_fractal_dim(&recs, None).unwrap().dimension(), 0.0);
    }

    #[test]
    fn b_range_filters_records() {
        let recs: Vec<_> = (1..=30).map(|b| boxes(240, b, if b > 20 { 1000 } else { 1 })).collect();
        assert_eq!(fit_fractal_dim(&recs, None).unwrap().dimension(), 0.0);
        assert!(fit_fractal_dim(&recs, Some(5..=5)).is_err());
    }

    #[test]
    fn occupied_boxes_counts_touching_boxes() {
        let m = [true, false, false, false, true, true, false];
        assert_eq!(occupied_boxes(&m, 1).unwrap(), 3);
        assert_eq!(occupied_boxes(&m, 2).unwrap(), 2);
        assert_eq!(occupied_boxes(&m, 3).unwrap(), 2);
        assert_eq!(occupied_boxes(&m, 7).unwrap(), 1);
        assert!(occupied_boxes(&m, 8).is_err());
    }

    fn line_points(n: usize, slope: f64, icpt: f64) -> Vec<(f64, f64)> {
        (0..n).map(|i| (i as f64, slope * i as f64 + icpt)).collect()
    }

    #[test]
    fn one_outlier_does_not_move_slope() {
        for k in 0..10 {
            let mut pts = line_points(10, 0.75, -2.0);
            pts[k].1 += 100.0;
            assert_eq!(theil_sen(&pts).unwrap().slope, 0.75);
        }
    }

    proptest! {
        #[test]
        fn permutation_invariant(mut pts in prop::collection::vec((-50i32..50, -50i32..50), 2..12), seed in any::<u64>()) {
            let pts: Vec<(f64, f64)> = pts.drain(..).map(|(x, y)| (x as f64, y as f64)).collect();
            prop_assume!(pts.iter().any(|p| p.0 != pts[0].0));
            let base = theil_sen(&pts).unwrap();
            let mut shuffled = pts.clone();
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let other = theil_sen(&shuffled).unwrap();
            prop_assert_eq!(base.slope, other.slope);
            prop_assert_eq!(base.slope_err, other.slope_err);
        }

        #[test]
        fn slope_equivariance(pts in prop::collection::vec((-50i32..50, -50i32..50), 2..12), c in 1i32..8, shift in -100i32..100) {
            let pts: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
            prop_assume!(pts.iter().any(|p| p.0 != pts[0].0));
            let base = theil_sen(&pts).unwrap();
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (x, c as f64 * y)).collect();
            let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x, y + shift as f64)).collect();
            prop_assert!((theil_sen(&scaled).unwrap().slope - c as f64 * base.slope).abs() < 1e-9);
            prop_assert!((theil_sen(&shifted).unwrap().slope - base.slope).abs() < 1e-9);
        }
    }
}

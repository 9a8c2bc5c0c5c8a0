//! Box-counting fits on hand-built membership sets, independent of the circuit.

use proptest::prelude::*;
use stabfrac::{fit_fractal_dim, occupied_boxes, BoxCountRecord};

fn records(membership: &[bool], bs: &[usize]) -> Vec<BoxCountRecord> {
    bs.iter()
        .map(|&b| BoxCountRecord {
            p: 0.5,
            l: membership.len(),
            b,
            realization: 0,
            seed: 0,
            n_boxes: occupied_boxes(membership, b).unwrap(),
        })
        .collect()
}

fn cantor(level: u32) -> Vec<bool> {
    (0..3usize.pow(level))
        .map(|mut i| {
            for _ in 0..level {
                if i % 3 == 1 {
                    return false;
                }
                i /= 3;
            }
            true
        })
        .collect()
}

#[test]
fn cantor_set_dimension() {
    let set = cantor(7);
    assert_eq!(set.iter().filter(|&&m| m).count(), 128);
    let bs = [3, 9, 27, 81];
    let recs = records(&set, &bs);
    let counts: Vec<usize> = recs.iter().map(|r| r.n_boxes).collect();
    assert_eq!(counts, vec![64, 32, 16, 8]);
    let fit = fit_fractal_dim(&recs, Some(3..=81)).unwrap();
    let expected = 2f64.ln() / 3f64.ln();
    assert!((fit.dimension() - expected).abs() < 0.02, "d = {}", fit.dimension());
}

#[test]
fn full_block_is_one_dimensional() {
    for l in [240, 480, 960] {
        let set = vec![true; l];
        let recs = records(&set, &(2..=20).collect::<Vec<_>>());
        for r in &recs {
            assert_eq!(r.n_boxes, l.div_ceil(r.b));
        }
        let d = fit_fractal_dim(&recs, None).unwrap().dimension();
        assert!((d - 1.0).abs() < 0.02, "L={l}: d = {d}");
    }
}

proptest! {
    #[test]
    fn contiguous_blocks_are_one_dimensional(len in 200usize..3000, pad in 0usize..500) {
        let mut set = vec![false; len + pad];
        set[..len].iter_mut().for_each(|m| *m = true);
        let d = fit_fractal_dim(&records(&set, &(2..=20).collect::<Vec<_>>()), None).unwrap().dimension();
        prop_assert!((d - 1.0).abs() < 0.05, "len={} d={}", len, d);
    }
}

#[test]
fn single_box_is_zero_dimensional() {
    let mut set = vec![false; 64];
    set[0] = true;
    let d = fit_fractal_dim(&records(&set, &[2, 4, 8, 16]), None).unwrap().dimension();
    assert_eq!(d, 0.0);
}

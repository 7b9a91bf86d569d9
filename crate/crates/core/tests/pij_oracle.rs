//! The closed-form Pij estimator against exact enumeration.

use proptest::prelude::*;
use softdec_core::code::{pij_boundary, pij_bulk, DecodingGraph, DefectStats, Edge, EdgeKind};
use softdec_oracles::{detector_mean, two_detector_moments};

#[test]
fn bulk_formula_inverts_exact_moments_on_a_grid() {
    let grid: Vec<f64> = (1..=20).map(|k| 0.02 * k as f64).collect();
    let mut worst = 0.0f64;
    for &p in &grid {
        for &a in &grid {
            for &b in &grid {
                let (di, dj, dij) = two_detector_moments(p, a, b);
                let est = pij_bulk(di, dj, dij);
                worst = worst.max((est - p).abs());
            }
        }
    }
    assert!(worst < 1e-9, "worst deviation {worst}");
}

#[test]
fn boundary_formula_inverts_exact_mean() {
    for &pb in &[0.001, 0.01, 0.1, 0.3] {
        for others in [vec![], vec![0.02], vec![0.05, 0.1, 0.2]] {
            let mut all = others.clone();
            all.push(pb);
            let di = detector_mean(&all);
            assert!((pij_boundary(di, &others) - pb).abs() < 1e-12, "{pb} {others:?}");
        }
    }
}

proptest! {
    #[test]
    fn bulk_formula_is_exact_inverse(p in 0.0f64..0.4, a in 0.0f64..0.4, b in 0.0f64..0.4) {
        let (di, dj, dij) = two_detector_moments(p, a, b);
        prop_assert!((pij_bulk(di, dj, dij) - p).abs() < 1e-9);
    }

    #[test]
    fn defect_statistics_merge_like_a_single_pass(
        shots in prop::collection::vec(prop::collection::vec(0u8..2, 8), 0..40),
        split in 0usize..40,
    ) {
        let edge = |a, b| Edge {
            endpoints: [a, b],
            p: 0.01,
            kind: EdgeKind::DataQubitError,
            logical_flip: false,
            source_measurements: vec![],
            toggles: vec![],
        };
        let g = DecodingGraph::new(1, 4, vec![edge(0, 1), edge(1, 5), edge(2, 8), edge(3, 7)]);
        let split = split.min(shots.len());
        let mut whole = DefectStats::new(&g);
        let (mut left, mut right) = (DefectStats::new(&g), DefectStats::new(&g));
        for (k, s) in shots.iter().enumerate() {
            whole.add(&g, s);
            if k < split { left.add(&g, s) } else { right.add(&g, s) }
        }
        left.merge(&right);
        prop_assert_eq!(left, whole);
    }
}

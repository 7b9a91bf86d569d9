//! Matching decoder against brute-force oracles.

use proptest::prelude::*;
use rand::Rng;
use softdec_core::code::{CodeLayout, DecodingGraph, Edge, EdgeKind, NoiseParams};
use softdec_core::decode::{Decoder, ShotWeights, TIE_TOLERANCE};
use softdec_core::pipeline::ShotDecoder;
use softdec_core::readout::ModelSet;
use softdec_core::rng::substream;
use softdec_core::sim::{active_detectors, generator_graph, simulate, LeakageParams, QubitModels, SimConfig};
use softdec_core::Error;
use softdec_oracles::{min_weight_by_matching, min_weight_by_subsets, PlainEdge};

fn plain(graph: &DecodingGraph, weights: &[f64]) -> Vec<PlainEdge> {
    graph
        .edges
        .iter()
        .zip(weights)
        .map(|(e, &w)| PlainEdge {
            a: e.endpoints[0],
            b: (e.endpoints[1] != graph.boundary()).then_some(e.endpoints[1]),
            weight: w,
            logical: e.logical_flip,
        })
        .collect()
}

/// Expected (flip, weight, complementary) from per-class minima.
fn expected(best: [Option<f64>; 2]) -> Option<(u8, f64, Option<f64>)> {
    match best {
        [None, None] => None,
        [Some(w), None] => Some((0, w, None)),
        [None, Some(w)] => Some((1, w, None)),
        [Some(w0), Some(w1)] => Some(if w1 <= w0 + TIE_TOLERANCE { (1, w1, Some(w0)) } else { (0, w0, Some(w1)) }),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

prop_compose! {
    fn small_graph()(n in 2usize..6, colors in prop::collection::vec(any::<bool>(), 6),
        raw in prop::collection::vec((0usize..6, 0usize..7, 0.001f64..0.45, any::<bool>()), 1..13))
        -> DecodingGraph {
        // One round with `n` ancillas keeps 2n detectors; node 2n is the boundary.
        let nodes = 2 * n;
        let mut edges: Vec<Edge> = Vec::new();
        for (a, b, p, flip) in raw {
            let a = a % nodes;
            let b = if b >= 6 { nodes } else { b % nodes };
            if a == b {
                continue;
            }
            let (a, b) = (a.min(b), a.max(b));
            if edges.iter().any(|e| e.endpoints == [a, b]) {
                continue;
            }
            // Bulk logicals follow a vertex colouring so bulk cycles never flip.
            let logical = if b == nodes { flip } else { colors[a] ^ colors[b] };
            edges.push(Edge {
                endpoints: [a, b],
                p,
                kind: EdgeKind::DataQubitError,
                logical_flip: logical,
                source_measurements: vec![],
                toggles: vec![],
            });
        }
        DecodingGraph::new(1, n, edges)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn decoder_matches_subset_enumeration(
        g in small_graph(),
        defect_mask in any::<u16>(),
        overrides in prop::collection::vec((0usize..12, -4.0f64..8.0), 0..4),
    ) {
        let n = g.num_detectors();
        let defects: Vec<usize> = (0..n).filter(|&d| defect_mask >> d & 1 == 1).collect();
        let decoder = Decoder::new(&g).unwrap();
        let mut weights: Vec<f64> = g.edges.iter().map(|e| e.weight()).collect();
        let mut sw = ShotWeights::new();
        for (k, w) in overrides {
            if k < weights.len() {
                weights[k] = w;
                sw.set(k, w);
            }
        }
        let oracle = expected(min_weight_by_subsets(n, &plain(&g, &weights), &defects));
        match (decoder.decode_with(&defects, &sw), oracle) {
            (Err(Error::DisconnectedDefect(_)), None) => {}
            (Ok(r), Some((flip, w, comp))) => {
                prop_assert_eq!(r.flip, flip);
                prop_assert!(close(r.weight, w), "{} vs {}", r.weight, w);
                match (r.complementary_weight, comp) {
                    (None, None) => {}
                    (Some(a), Some(b)) => prop_assert!(close(a, b), "{} vs {}", a, b),
                    other => prop_assert!(false, "complementary {:?}", other),
                }
            }
            (got, want) => prop_assert!(false, "decoder {:?}, oracle {:?}", got, want),
        }
    }
}

#[test]
fn surface13_shots_match_exhaustive_matching() {
    let layout = CodeLayout::surface13();
    let mut config = SimConfig::new(40, 21);
    config.leakage = LeakageParams::none();
    config.rounds = vec![1, 2, 4, 8];
    config.keep_truth = false;
    let data = simulate(&layout, &config).unwrap();
    let graphs: Vec<DecodingGraph> = config
        .rounds
        .iter()
        .map(|&r| softdec_core::code::build_noise_floor_graph(&layout, &config.noise, r).unwrap())
        .collect();
    let mut checked = 0;
    for shot in &data.shots {
        let g = graphs.iter().find(|g| g.rounds == shot.rounds).unwrap();
        let active = active_detectors(&shot.defects(&layout, None).unwrap().0);
        if active.len() > 8 {
            continue;
        }
        let weights: Vec<f64> = g.edges.iter().map(|e| e.weight()).collect();
        let (flip, w, _) = expected(min_weight_by_matching(g.num_detectors(), &plain(g, &weights), &active)).unwrap();
        let r = Decoder::new(g).unwrap().decode(&active).unwrap();
        assert_eq!(r.flip, flip, "shot {}", shot.shot_id);
        assert!(close(r.weight, w), "shot {}: {} vs {w}", shot.shot_id, r.weight);
        checked += 1;
    }
    assert!(checked > 2000);
}

#[test]
fn overrides_do_not_leak_between_shots() {
    let g = generator_graph(&CodeLayout::surface13(), &NoiseParams::lower_bound(), 3).unwrap();
    let decoder = Decoder::new(&g).unwrap();
    let mut rng = substream(3, "isolation", 0);
    for _ in 0..50 {
        let a: Vec<usize> = (0..g.num_detectors()).filter(|_| rng.random::<f64>() < 0.15).collect();
        let b: Vec<usize> = (0..g.num_detectors()).filter(|_| rng.random::<f64>() < 0.15).collect();
        let alone = decoder.decode(&b).unwrap();
        let mut sw = ShotWeights::new();
        for k in 0..g.edges.len() {
            if rng.random::<f64>() < 0.3 {
                sw.set(k, rng.random_range(-2.0..10.0));
            }
        }
        decoder.decode_with(&a, &sw).unwrap();
        assert_eq!(decoder.decode(&b).unwrap(), alone);
    }
}

#[test]
fn base_valued_overrides_are_bit_identical_to_hard() {
    let g = generator_graph(&CodeLayout::surface13(), &NoiseParams::lower_bound(), 4).unwrap();
    let decoder = Decoder::new(&g).unwrap();
    let mut all = ShotWeights::new();
    for k in 0..decoder.num_edges() {
        all.set(k, decoder.base_weight(k));
    }
    let mut rng = substream(4, "identity", 0);
    for _ in 0..100 {
        let d: Vec<usize> = (0..g.num_detectors()).filter(|_| rng.random::<f64>() < 0.1).collect();
        assert_eq!(decoder.decode_with(&d, &all).unwrap(), decoder.decode(&d).unwrap());
    }
}

/// Toy graph: detectors 0 and 1 joined directly (no flip) or through the
/// boundary (flip). Per-shot weights set the two explanation probabilities.
#[test]
fn toy_confidence_is_calibrated() {
    let edge = |endpoints, logical_flip| Edge {
        endpoints,
        p: 0.1,
        kind: EdgeKind::DataQubitError,
        logical_flip,
        source_measurements: vec![],
        toggles: vec![],
    };
    // One round of one ancilla: detectors 0 and 1, boundary 2.
    let g = DecodingGraph::new(1, 1, vec![edge([0, 1], false), edge([0, 2], true), edge([1, 2], false)]);
    let decoder = Decoder::new(&g).unwrap();
    let mut rng = substream(5, "calibration", 0);
    let mut buckets = vec![(0u64, 0u64, 0.0f64); 10];
    for _ in 0..100_000 {
        let p_keep: f64 = rng.random_range(0.01..0.4);
        let p_flip: f64 = rng.random_range(0.01..0.4);
        let mut sw = ShotWeights::new();
        sw.set(0, ((1.0 - p_keep) / p_keep).ln());
        sw.set(1, ((1.0 - p_flip) / p_flip).ln());
        sw.set(2, 0.0);
        let r = decoder.decode_with(&[0, 1], &sw).unwrap();
        // Odds of the two explanations are p/(1-p); y is their normalized ratio.
        let odds = |p: f64| p / (1.0 - p);
        let exact = odds(p_flip) / (odds(p_flip) + odds(p_keep));
        assert!((r.confidence - exact).abs() < 1e-12);
        let flipped = rng.random::<f64>() < exact;
        let b = ((r.confidence * 10.0) as usize).min(9);
        buckets[b].0 += 1;
        buckets[b].1 += flipped as u64;
        buckets[b].2 += r.confidence;
    }
    for (n, f, s) in buckets.into_iter().filter(|b| b.0 > 100) {
        let mean = s / n as f64;
        let frac = f as f64 / n as f64;
        let se = (mean * (1.0 - mean) / n as f64).sqrt();
        assert!((frac - mean).abs() < 3.0 * se, "{frac} vs {mean} over {n}");
    }
}

fn analog_config(sep: f64, sigma: f64, shots: u64, seed: u64) -> (CodeLayout, SimConfig) {
    let layout = CodeLayout::surface13();
    let mut config = SimConfig::new(shots, seed);
    config.readout = Some(ModelSet::synthetic(
        layout.ancillas.iter().chain(&layout.data_qubits).map(String::as_str),
        sep,
        sigma,
    ));
    config.leakage = LeakageParams::none();
    config.rounds = vec![2, 4];
    (layout, config)
}

#[test]
fn soft_equals_hard_for_perfect_readout() {
    let (layout, config) = analog_config(1.0, 1e-4, 80, 8);
    let data = simulate(&layout, &config).unwrap().shots;
    let models = QubitModels::new(&layout, config.readout.as_ref().unwrap()).unwrap();
    for &r in &config.rounds {
        let g = softdec_core::code::build_noise_floor_graph(&layout, &config.noise, r).unwrap();
        let hard = ShotDecoder::hard(&g, Some(models.clone())).unwrap();
        let soft = ShotDecoder::soft(&g, models.clone(), &data).unwrap();
        for shot in data.iter().filter(|s| s.rounds == r) {
            assert_eq!(
                hard.decode(&layout, shot).unwrap().flip,
                soft.decode(&layout, shot).unwrap().flip,
                "shot {}",
                shot.shot_id
            );
        }
    }
}

#[test]
fn soft_information_rescues_a_hard_failure() {
    // Readout with about 2% assignment error.
    let (layout, config) = analog_config(4.1, 1.0, 150, 9);
    let data = simulate(&layout, &config).unwrap().shots;
    let models = QubitModels::new(&layout, config.readout.as_ref().unwrap()).unwrap();
    let g = softdec_core::code::build_noise_floor_graph(&layout, &config.noise, 4).unwrap();
    let hard = ShotDecoder::hard(&g, Some(models.clone())).unwrap();
    let soft_decoder = ShotDecoder::soft(&g, models.clone(), &data).unwrap();
    let ShotDecoder::Soft(soft) = &soft_decoder else { unreachable!() };
    let mut rescued = 0;
    for shot in data.iter().filter(|s| s.rounds == 4) {
        let h = hard.decode(&layout, shot).unwrap();
        let s = soft_decoder.decode(&layout, shot).unwrap();
        if h.success() || !s.success() {
            continue;
        }
        rescued += 1;
        // The soft answer is the exact minimum under the per-shot weights.
        let overrides = soft.weights(shot).unwrap();
        let weights: Vec<f64> = (0..g.edges.len())
            .map(|k| overrides.get(k).unwrap_or_else(|| g.edges[k].weight()))
            .collect();
        assert!(weights.iter().all(|&w| w >= 0.0));
        let active = active_detectors(&shot.defects(&layout, Some(&models)).unwrap().0);
        let (flip, w, _) = expected(min_weight_by_matching(g.num_detectors(), &plain(&g, &weights), &active)).unwrap();
        assert_eq!(s.flip, flip);
        assert!(close(s.weight, w));
    }
    assert!(rescued > 0);
}

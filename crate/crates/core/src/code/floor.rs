//! Noise-floor graph: propagate every single fault of the circuit noise
//! model through the parity-check schedule and merge faults with identical
//! detector signatures into edges.
//!
//! Each round applies H to the ancillas, the CZ layers of the schedule, H
//! again, and a non-resetting ancilla measurement during which the data
//! qubits idle and receive the transversal logical pulse. The pulse itself
//! is tracked in the Pauli frame and only its gate error is modelled.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;

use super::graph::{DecodingGraph, Edge, EdgeKind, MeasurementKey};
use super::layout::CodeLayout;
use super::noise::NoiseParams;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    H(usize),
    Cz(usize, usize),
    Measure { qubit: usize, index: usize },
}

#[derive(Debug, Clone, Copy)]
enum Channel {
    /// Independent X, Y, Z with the given probabilities.
    Pauli1 { qubit: usize, probs: [f64; 3] },
    /// Uniform two-qubit depolarizing noise of total strength `p`.
    Depol2 { a: usize, b: usize, p: f64 },
    /// Misclassification of a recorded outcome.
    Classification { index: usize, p: f64 },
}

struct Circuit {
    ops: Vec<Op>,
    /// Each fault acts just before the op at the given position.
    faults: Vec<(usize, Channel)>,
    num_qubits: usize,
}

/// Pauli on one qubit as (x, z) components.
const PAULIS: [(bool, bool); 3] = [(true, false), (true, true), (false, true)];

fn build_circuit(layout: &CodeLayout, noise: &NoiseParams, rounds: usize) -> Circuit {
    let nd = layout.num_data();
    let na = layout.num_ancillas();
    let anc = |a: usize| nd + a;
    let mut ops = Vec::new();
    let mut faults = Vec::new();
    let depol1 = |p: f64| [p / 3.0; 3];

    for q in 0..nd + na {
        faults.push((0, Channel::Pauli1 { qubit: q, probs: [noise.p_reset, 0.0, 0.0] }));
    }
    let single_layer = |ops: &mut Vec<Op>, faults: &mut Vec<(usize, Channel)>| {
        for a in 0..na {
            ops.push(Op::H(anc(a)));
        }
        let pos = ops.len();
        for a in 0..na {
            faults.push((pos, Channel::Pauli1 { qubit: anc(a), probs: depol1(noise.p_1q) }));
        }
        for q in 0..nd {
            faults.push((pos, Channel::Pauli1 { qubit: q, probs: noise.idle_twirl(noise.t_1q_ns) }));
        }
    };
    for r in 0..rounds {
        single_layer(&mut ops, &mut faults);
        for layer in &layout.cz_schedule {
            let mut busy = vec![false; nd + na];
            for &(a, q) in layer {
                ops.push(Op::Cz(anc(a), q));
                busy[anc(a)] = true;
                busy[q] = true;
            }
            let pos = ops.len();
            for &(a, q) in layer {
                faults.push((pos, Channel::Depol2 { a: anc(a), b: q, p: noise.p_2q }));
            }
            for (q, _) in busy.iter().enumerate().filter(|(_, b)| !**b) {
                faults.push((pos, Channel::Pauli1 { qubit: q, probs: noise.idle_twirl(noise.t_2q_ns) }));
            }
        }
        single_layer(&mut ops, &mut faults);
        let pos = ops.len();
        for a in 0..na {
            faults.push((pos, Channel::Pauli1 { qubit: anc(a), probs: depol1(noise.p_meas_qubit) }));
        }
        for a in 0..na {
            let index = r * na + a;
            ops.push(Op::Measure { qubit: anc(a), index });
            faults.push((pos, Channel::Classification { index, p: noise.p_meas_class }));
        }
        // Data qubits idle through the measurement and receive the logical pulse.
        let pos = ops.len();
        for q in 0..nd {
            faults.push((pos, Channel::Pauli1 { qubit: q, probs: noise.idle_twirl(noise.t_meas_ns) }));
            faults.push((pos, Channel::Pauli1 { qubit: q, probs: depol1(noise.p_1q) }));
        }
    }
    let pos = ops.len();
    for q in 0..nd {
        faults.push((pos, Channel::Pauli1 { qubit: q, probs: depol1(noise.p_meas_qubit) }));
    }
    for q in 0..nd {
        let index = rounds * na + q;
        ops.push(Op::Measure { qubit: q, index });
        faults.push((pos, Channel::Classification { index, p: noise.p_meas_class }));
    }
    Circuit {
        ops,
        faults,
        num_qubits: nd + na,
    }
}

/// Measurement flips caused by single-qubit Pauli components, memoized.
struct Propagator<'a> {
    circuit: &'a Circuit,
    cache: HashMap<(usize, usize, bool, bool), Vec<usize>>,
}

impl<'a> Propagator<'a> {
    fn effect(&mut self, pos: usize, qubit: usize, pauli: (bool, bool)) -> Vec<usize> {
        if let Some(v) = self.cache.get(&(pos, qubit, pauli.0, pauli.1)) {
            return v.clone();
        }
        let mut x = vec![false; self.circuit.num_qubits];
        let mut z = vec![false; self.circuit.num_qubits];
        x[qubit] = pauli.0;
        z[qubit] = pauli.1;
        let mut flips = Vec::new();
        for op in &self.circuit.ops[pos..] {
            match *op {
                Op::H(q) => std::mem::swap(&mut x[q], &mut z[q]),
                Op::Cz(a, b) => {
                    z[a] ^= x[b];
                    z[b] ^= x[a];
                }
                Op::Measure { qubit, index } => {
                    if x[qubit] {
                        flips.push(index);
                    }
                    // The outcome is recorded; the phase is irrelevant
                    // afterwards and the state is not reset.
                    z[qubit] = false;
                }
            }
        }
        self.cache.insert((pos, qubit, pauli.0, pauli.1), flips.clone());
        flips
    }
}

fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = a.iter().chain(b).copied().collect();
    set.into_iter()
        .filter(|v| a.contains(v) != b.contains(v))
        .collect()
}

/// Maps measurement flips to detector flips and the logical observable.
pub(crate) struct DetectorMap<'a> {
    layout: &'a CodeLayout,
    rounds: usize,
}

impl<'a> DetectorMap<'a> {
    pub(crate) fn new(layout: &'a CodeLayout, rounds: usize) -> Self {
        Self { layout, rounds }
    }

    pub(crate) fn key(&self, index: usize) -> MeasurementKey {
        let na = self.layout.num_ancillas();
        if index < self.rounds * na {
            MeasurementKey::Ancilla {
                ancilla: index % na,
                round: index / na + 1,
            }
        } else {
            MeasurementKey::Data {
                qubit: index - self.rounds * na,
            }
        }
    }

    /// Sorted detector indices and logical flip for a set of flipped measurements.
    pub(crate) fn signature(&self, flips: &[usize]) -> (Vec<usize>, bool) {
        let na = self.layout.num_ancillas();
        let r_max = self.rounds;
        let det = |a: usize, r: usize| (r - 1) * na + a;
        let mut toggled = BTreeSet::new();
        let mut toggle = |d: usize| {
            if !toggled.remove(&d) {
                toggled.insert(d);
            }
        };
        let mut logical = false;
        for &m in flips {
            match self.key(m) {
                MeasurementKey::Ancilla { ancilla, round } => {
                    toggle(det(ancilla, round));
                    if round + 2 <= r_max {
                        toggle(det(ancilla, round + 2));
                    }
                    if round + 1 >= r_max {
                        toggle(det(ancilla, r_max + 1));
                    }
                }
                MeasurementKey::Data { qubit } => {
                    for a in self.layout.checks_of(qubit) {
                        toggle(det(a, r_max + 1));
                    }
                    if self.layout.logical_support.contains(&qubit) {
                        logical = !logical;
                    }
                }
            }
        }
        (toggled.into_iter().collect(), logical)
    }
}

#[derive(Default)]
struct Accum {
    p: f64,
    has_class: bool,
    has_qubit: bool,
    sources: BTreeSet<MeasurementKey>,
    /// Most probable qubit mechanism: (probability, flipped measurements).
    qubit_rep: Option<(f64, Vec<usize>)>,
    class_rep: Option<Vec<usize>>,
}

struct Term {
    p: f64,
    flips: Vec<usize>,
    class_source: Option<usize>,
}

fn xor_prob(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p)
}

/// Build the decoding graph implied by circuit-level noise `params`.
///
/// Every fault location contributes to the edge set even if its probability
/// is zero, so graphs built from different parameters share the same edges.
pub fn build_noise_floor_graph(layout: &CodeLayout, params: &NoiseParams, rounds: usize) -> Result<DecodingGraph> {
    params.validate()?;
    if rounds == 0 {
        return Err(invalid("at least one round is required"));
    }
    let circuit = build_circuit(layout, params, rounds);
    let dmap = DetectorMap::new(layout, rounds);
    let mut prop = Propagator {
        circuit: &circuit,
        cache: HashMap::new(),
    };
    let mut global: BTreeMap<(Vec<usize>, bool), Accum> = BTreeMap::new();
    let mut undetectable = 0.0;
    let mut dropped = 0usize;

    for &(pos, channel) in &circuit.faults {
        // Each term is a list of independently-merged components.
        let mut terms: Vec<Vec<Term>> = Vec::new();
        match channel {
            Channel::Pauli1 { qubit, probs } => {
                for (k, &pauli) in PAULIS.iter().enumerate() {
                    terms.push(vec![Term {
                        p: probs[k],
                        flips: prop.effect(pos, qubit, pauli),
                        class_source: None,
                    }]);
                }
            }
            Channel::Depol2 { a, b, p } => {
                let options = [None, Some(PAULIS[0]), Some(PAULIS[1]), Some(PAULIS[2])];
                for pa in options {
                    for pb in options {
                        if pa.is_none() && pb.is_none() {
                            continue;
                        }
                        let fa = pa.map(|x| prop.effect(pos, a, x)).unwrap_or_default();
                        let fb = pb.map(|x| prop.effect(pos, b, x)).unwrap_or_default();
                        let joint = xor_sorted(&fa, &fb);
                        let p15 = p / 15.0;
                        if dmap.signature(&joint).0.len() <= 2 {
                            terms.push(vec![Term { p: p15, flips: joint, class_source: None }]);
                        } else {
                            // Decompose into the single-qubit parts.
                            terms.push(vec![
                                Term { p: p15, flips: fa, class_source: None },
                                Term { p: p15, flips: fb, class_source: None },
                            ]);
                        }
                    }
                }
            }
            Channel::Classification { index, p } => terms.push(vec![Term {
                p,
                flips: vec![index],
                class_source: Some(index),
            }]),
        }

        let mut local: BTreeMap<(Vec<usize>, bool), Accum> = BTreeMap::new();
        for term in terms.into_iter().flatten() {
            let (sig, logical) = dmap.signature(&term.flips);
            if sig.is_empty() {
                if logical {
                    undetectable += term.p;
                }
                continue;
            }
            if sig.len() > 2 {
                dropped += 1;
                continue;
            }
            let acc = local.entry((sig, logical)).or_default();
            acc.p += term.p;
            match term.class_source {
                Some(index) => {
                    acc.has_class = true;
                    acc.sources.insert(dmap.key(index));
                    acc.class_rep.get_or_insert_with(|| term.flips.clone());
                }
                None => {
                    acc.has_qubit = true;
                    if acc.qubit_rep.as_ref().is_none_or(|(bp, _)| term.p > *bp) {
                        acc.qubit_rep = Some((term.p, term.flips.clone()));
                    }
                }
            }
        }
        for (key, acc) in local {
            let g = global.entry(key).or_default();
            g.p = xor_prob(g.p, acc.p);
            g.has_class |= acc.has_class;
            g.has_qubit |= acc.has_qubit;
            g.sources.extend(acc.sources);
            if let Some((p, flips)) = acc.qubit_rep {
                if g.qubit_rep.as_ref().is_none_or(|(bp, _)| p > *bp) {
                    g.qubit_rep = Some((p, flips));
                }
            }
            if g.class_rep.is_none() {
                g.class_rep = acc.class_rep;
            }
        }
    }
    if undetectable > 0.0 {
        warn!("faults with total probability {undetectable:.3e} flip the logical without any defect");
    }
    if dropped > 0 {
        warn!("{dropped} fault components trigger more than two detectors and were dropped");
    }

    // Resolve parallel edges that disagree on the logical flip.
    let mut by_sig: BTreeMap<Vec<usize>, (bool, Accum)> = BTreeMap::new();
    for ((sig, logical), acc) in global {
        match by_sig.get(&sig) {
            Some((_, other)) => {
                warn!("detector signature {sig:?} occurs with both logical values; keeping the more probable");
                if acc.p > other.p {
                    by_sig.insert(sig, (logical, acc));
                }
            }
            None => {
                by_sig.insert(sig, (logical, acc));
            }
        }
    }

    let na = layout.num_ancillas();
    let boundary = (rounds + 1) * na;
    let edges = by_sig
        .into_iter()
        .map(|(sig, (logical, acc))| {
            let endpoints = if sig.len() == 1 { [sig[0], boundary] } else { [sig[0], sig[1]] };
            let kind = classify(&sig, &acc, na);
            let sources: Vec<MeasurementKey> = acc.sources.iter().copied().collect();
            if sources.len() > 2 {
                warn!("edge {endpoints:?} has {} classification sources", sources.len());
            }
            let rep = acc.qubit_rep.map(|(_, f)| f).or(acc.class_rep).unwrap_or_default();
            Edge {
                endpoints,
                p: acc.p,
                kind,
                logical_flip: logical,
                source_measurements: sources,
                toggles: rep.iter().map(|&m| dmap.key(m)).collect(),
            }
        })
        .collect();
    Ok(DecodingGraph::new(rounds, na, edges))
}

fn classify(sig: &[usize], acc: &Accum, na: usize) -> EdgeKind {
    match (acc.has_class, acc.has_qubit) {
        (true, false) => EdgeKind::ClassificationError,
        (true, true) => EdgeKind::FinalRoundCombined,
        _ => {
            if sig.len() == 1 {
                return EdgeKind::DataQubitError;
            }
            let (a0, r0) = (sig[0] % na, sig[0] / na);
            let (a1, r1) = (sig[1] % na, sig[1] / na);
            if r0 == r1 {
                EdgeKind::DataQubitError
            } else if a0 == a1 && r1 == r0 + 1 {
                EdgeKind::AncillaQubitError
            } else {
                EdgeKind::Hook
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only_classification() -> NoiseParams {
        NoiseParams {
            p_meas_class: 0.01,
            ..NoiseParams::noiseless()
        }
    }

    #[test]
    fn classification_only_params() {
        let l = CodeLayout::surface13();
        let g = build_noise_floor_graph(&l, &only_classification(), 6).unwrap();
        for e in &g.edges {
            match e.kind {
                EdgeKind::ClassificationError => assert_eq!(e.p, 0.01),
                EdgeKind::FinalRoundCombined => assert!(e.p > 0.0),
                _ => assert_eq!(e.p, 0.0, "{e:?}"),
            }
        }
        assert!(g.edges.iter().any(|e| e.kind == EdgeKind::ClassificationError));
    }

    #[test]
    fn bulk_classification_edges_skip_a_round() {
        let l = CodeLayout::surface13();
        let g = build_noise_floor_graph(&l, &NoiseParams::lower_bound(), 5).unwrap();
        for e in g.edges.iter().filter(|e| e.kind == EdgeKind::ClassificationError) {
            let (a, b) = (g.detectors[e.endpoints[0]], g.detectors[e.endpoints[1]]);
            assert_eq!(a.ancilla, b.ancilla);
            assert_eq!(b.round, a.round + 2);
            assert_eq!(e.source_measurements.len(), 1);
        }
        for e in g.edges.iter().filter(|e| e.kind == EdgeKind::AncillaQubitError) {
            let (a, b) = (g.detectors[e.endpoints[0]], g.detectors[e.endpoints[1]]);
            assert_eq!((a.ancilla, b.round), (b.ancilla, a.round + 1));
        }
    }

    #[test]
    fn graph_is_deterministic_and_structural() {
        let l = CodeLayout::surface13();
        let a = build_noise_floor_graph(&l, &NoiseParams::lower_bound(), 4).unwrap();
        let b = build_noise_floor_graph(&l, &NoiseParams::lower_bound(), 4).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let z = build_noise_floor_graph(&l, &NoiseParams::noiseless(), 4).unwrap();
        let ends = |g: &DecodingGraph| g.edges.iter().map(|e| (e.endpoints, e.kind)).collect::<Vec<_>>();
        assert_eq!(ends(&a), ends(&z));
    }

    #[test]
    fn boundary_edges_carry_the_logical_row() {
        let l = CodeLayout::surface13();
        let g = build_noise_floor_graph(&l, &NoiseParams::lower_bound(), 3).unwrap();
        let b = g.boundary();
        let logical_of = |anc: usize, round: usize| {
            let d = g.detector_index(anc, round);
            g.edges[g.find_edge(d, b).unwrap()].logical_flip
        };
        // Z2 (D3) and Z3 (D1, D2) touch the logical row, Z1 and Z4 do not.
        assert!(!logical_of(0, 2));
        assert!(logical_of(1, 2));
        assert!(logical_of(2, 2));
        assert!(!logical_of(3, 2));
    }

    #[test]
    fn final_round_degenerate_pairs_have_two_sources() {
        let l = CodeLayout::surface13();
        let g = build_noise_floor_graph(&l, &NoiseParams::lower_bound(), 2).unwrap();
        let z3_final = g.detector_index(2, 3);
        let e = &g.edges[g.find_edge(z3_final, g.boundary()).unwrap()];
        assert_eq!(e.kind, EdgeKind::FinalRoundCombined);
        assert_eq!(
            e.source_measurements,
            vec![MeasurementKey::Data { qubit: 0 }, MeasurementKey::Data { qubit: 1 }]
        );
    }
}

//! Minimum-weight perfect matching with both logical classes.
//!
//! The bulk detector graph is 2-coloured so that, after relabelling, only
//! boundary edges carry a logical flip. The boundary is then split into a
//! "no flip" node B0 and a "flip" node B1, and the lightest correction in
//! each logical class is a minimum-weight T-join: the defects, plus B1 when
//! the class needs an odd number of flipping boundary edges, plus B0 to fix
//! the overall parity. Each T-join is solved exactly as a perfect matching
//! on shortest-path distances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::blossom::max_weight_matching;
use crate::code::DecodingGraph;
use crate::error::{invalid, Error, Result};

/// Fixed-point scale used to hand path lengths to the integer matcher.
const WEIGHT_SCALE: f64 = 1e9;
/// Weight differences below this are treated as ties between the classes.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Per-shot weight overrides layered on top of a shared base graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotWeights {
    pub overrides: BTreeMap<usize, f64>,
}

impl ShotWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, edge: usize, weight: f64) {
        self.overrides.insert(edge, weight);
    }

    pub fn get(&self, edge: usize) -> Option<f64> {
        self.overrides.get(&edge).copied()
    }

    pub fn extend(&mut self, other: ShotWeights) {
        self.overrides.extend(other.overrides);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Predicted logical flip.
    pub flip: u8,
    /// Estimated probability that the logical flipped.
    pub confidence: f64,
    /// Matched node pairs; the boundary appears as the graph's boundary index.
    pub matched_pairs: Vec<(usize, usize)>,
    /// Weight of the chosen correction.
    pub weight: f64,
    /// Lightest correction in the other logical class, if one exists.
    pub complementary_weight: Option<f64>,
}

/// Probability of a logical flip implied by the two class weights.
///
/// The winning class has confidence `1 / (1 + exp(-(w_comp - w_best)))`.
pub fn confidence(flip: u8, best: f64, complementary: Option<f64>) -> f64 {
    let win = match complementary {
        Some(c) => 1.0 / (1.0 + (-(c - best)).exp()),
        None => 1.0,
    };
    if flip == 1 {
        win
    } else {
        1.0 - win
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A decoding graph prepared for repeated matching.
#[derive(Debug, Clone)]
pub struct Decoder {
    num_detectors: usize,
    boundary: usize,
    endpoints: Vec<[usize; 2]>,
    logical: Vec<bool>,
    base_weights: Vec<f64>,
    /// Colour of each detector; boundary edges are relabelled by it.
    color: Vec<bool>,
    /// Adjacency on detectors plus B0 (= num_detectors) and B1.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Decoder {
    pub fn new(graph: &DecodingGraph) -> Result<Self> {
        graph.validate()?;
        let n = graph.num_detectors();
        let boundary = graph.boundary();
        let endpoints: Vec<[usize; 2]> = graph.edges.iter().map(|e| e.endpoints).collect();
        let logical: Vec<bool> = graph.edges.iter().map(|e| e.logical_flip).collect();

        let mut bulk: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
        for (k, [a, b]) in endpoints.iter().copied().enumerate() {
            if b != boundary {
                bulk[a].push((b, logical[k]));
                bulk[b].push((a, logical[k]));
            }
        }
        let mut color: Vec<Option<bool>> = vec![None; n];
        for start in 0..n {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                let cu = color[u].unwrap();
                for &(v, l) in &bulk[u] {
                    let want = cu ^ l;
                    match color[v] {
                        None => {
                            color[v] = Some(want);
                            stack.push(v);
                        }
                        Some(cv) if cv != want => {
                            return Err(invalid(
                                "bulk edges carry an inconsistent logical flip around a cycle",
                            ))
                        }
                        _ => {}
                    }
                }
            }
        }
        let color: Vec<bool> = color.into_iter().map(|c| c.unwrap()).collect();

        let mut adjacency = vec![Vec::new(); n + 2];
        for (k, [a, b]) in endpoints.iter().copied().enumerate() {
            let b = if b == boundary {
                n + usize::from(logical[k] ^ color[a])
            } else {
                b
            };
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }
        Ok(Self {
            num_detectors: n,
            boundary,
            endpoints,
            logical,
            base_weights: graph.edges.iter().map(|e| e.weight()).collect(),
            color,
            adjacency,
        })
    }

    pub fn base_weight(&self, edge: usize) -> f64 {
        self.base_weights[edge]
    }

    pub fn num_edges(&self) -> usize {
        self.endpoints.len()
    }

    /// Decode with the graph's own weights.
    pub fn decode(&self, defects: &[usize]) -> Result<DecodeResult> {
        self.decode_with(defects, &ShotWeights::new())
    }

    /// Decode with per-shot weight overrides, which may be negative.
    pub fn decode_with(&self, defects: &[usize], weights: &ShotWeights) -> Result<DecodeResult> {
        let n = self.num_detectors;
        let mut active = vec![false; n];
        for &d in defects {
            if d >= n {
                return Err(invalid(format!("defect {d} is not a detector of the graph")));
            }
            active[d] ^= true;
        }
        let mut w: Vec<f64> = self.base_weights.clone();
        for (&k, &v) in &weights.overrides {
            if !v.is_finite() {
                return Err(invalid(format!("weight override for edge {k} is not finite")));
            }
            w[k] = v;
        }
        // Negative edges are taken as already applied.
        let mut offset = 0.0;
        let mut flip_offset = false;
        for (k, wk) in w.iter_mut().enumerate() {
            if *wk < 0.0 {
                let [a, b] = self.endpoints[k];
                active[a] ^= true;
                if b != self.boundary {
                    active[b] ^= true;
                }
                offset += *wk;
                flip_offset ^= self.logical[k];
                *wk = -*wk;
            }
        }
        let sources: Vec<usize> = (0..n).filter(|&v| active[v]).collect();
        let color_parity = sources.iter().fold(false, |acc, &v| acc ^ self.color[v]);

        let mut dist_rows: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let row = |s: usize, rows: &mut BTreeMap<usize, Vec<f64>>| {
            rows.entry(s).or_insert_with(|| self.dijkstra(s, &w)).clone()
        };

        let mut classes: [Option<(f64, Vec<(usize, usize)>)>; 2] = [None, None];
        for class in 0..2u8 {
            let need_b1 = (class == 1) ^ flip_offset ^ color_parity;
            let mut terminals = sources.clone();
            if need_b1 {
                terminals.push(n + 1);
            }
            if terminals.len() % 2 == 1 {
                terminals.push(n);
            }
            if need_b1 && self.adjacency[n + 1].is_empty() {
                continue;
            }
            let rows: Vec<Vec<f64>> = terminals.iter().map(|&t| row(t, &mut dist_rows)).collect();
            classes[class as usize] = self
                .match_terminals(&terminals, &rows)
                .map(|(weight, pairs)| (weight + offset, pairs));
        }

        let (flip, best, comp) = match (&classes[0], &classes[1]) {
            (None, None) => {
                return Err(Error::DisconnectedDefect(format!(
                    "defects {sources:?} cannot be matched in either logical class"
                )))
            }
            (Some(c0), None) => (0u8, c0, None),
            (None, Some(c1)) => (1u8, c1, None),
            (Some(c0), Some(c1)) => {
                if (c0.0 - c1.0).abs() <= TIE_TOLERANCE || c1.0 < c0.0 {
                    (1u8, c1, Some(c0.0))
                } else {
                    (0u8, c0, Some(c1.0))
                }
            }
        };
        let tie = comp.is_some_and(|c| (c - best.0).abs() <= TIE_TOLERANCE);
        let y = if tie { 0.5 } else { confidence(flip, best.0, comp) };
        let to_graph = |v: usize| if v >= n { self.boundary } else { v };
        Ok(DecodeResult {
            flip,
            confidence: y,
            matched_pairs: best.1.iter().map(|&(a, b)| (to_graph(a), to_graph(b))).collect(),
            weight: best.0,
            complementary_weight: comp,
        })
    }

    fn dijkstra(&self, source: usize, w: &[f64]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.num_detectors + 2];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry { dist: 0.0, node: source });
        while let Some(Entry { dist: d, node: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, k) in &self.adjacency[u] {
                let nd = d + w[k];
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry { dist: nd, node: v });
                }
            }
        }
        dist
    }

    /// Minimum-weight perfect matching of `terminals` under the distance
    /// rows; `None` when no perfect matching exists.
    fn match_terminals(&self, terminals: &[usize], rows: &[Vec<f64>]) -> Option<(f64, Vec<(usize, usize)>)> {
        let t = terminals.len();
        if t == 0 {
            return Some((0.0, Vec::new()));
        }
        let mut pairs = Vec::new();
        let mut max_int = 0i64;
        for i in 0..t {
            for j in i + 1..t {
                let d = rows[i][terminals[j]];
                if d.is_finite() {
                    let di = (d * WEIGHT_SCALE).round() as i64;
                    max_int = max_int.max(di);
                    pairs.push((i, j, di));
                }
            }
        }
        let edges: Vec<(usize, usize, i64)> = pairs
            .iter()
            .map(|&(i, j, di)| (i, j, 2 * (max_int + 1 - di)))
            .collect();
        let mate = max_weight_matching(t, &edges, true);
        let mut total = 0.0;
        let mut matched = Vec::new();
        for i in 0..t {
            let j = mate[i]?;
            if i < j {
                total += rows[i][terminals[j]];
                matched.push((terminals[i], terminals[j]));
            }
        }
        Some((total, matched))
    }
}

/// Decode `defects` on `graph` with its own weights.
pub fn mwpm_decode(graph: &DecodingGraph, defects: &[usize]) -> Result<DecodeResult> {
    Decoder::new(graph)?.decode(defects)
}

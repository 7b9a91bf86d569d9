//! Edge probabilities estimated from defect correlations.
//!
//! For two detectors joined by an edge of probability `p`, with all other
//! mechanisms independent,
//!
//! ```text
//! p = 1/2 - 1/2 sqrt(1 - 4 (<di dj> - <di><dj>) / (1 - 2<di> - 2<dj> + 4<di dj>))
//! ```
//!
//! A boundary edge takes whatever flip probability is left at its detector
//! once the bulk edges are accounted for. Estimates are floored by a
//! reference graph so that sparse statistics cannot produce near-zero edges.

use log::warn;

use super::graph::{DecodingGraph, P_MAX};
use crate::error::{Error, Result};

/// Minimum number of shots accepted by [`estimate_pij_graph`].
pub const MIN_PIJ_SHOTS: u64 = 1000;

/// Sufficient statistics for the estimator: shot count, per-detector defect
/// counts, and joint counts for every bulk edge of the reference graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectStats {
    pub shots: u64,
    pub single: Vec<u64>,
    /// Joint defect counts aligned with the reference graph's edge list;
    /// boundary edges keep zero.
    pub pair: Vec<u64>,
}

impl DefectStats {
    pub fn new(graph: &DecodingGraph) -> Self {
        Self {
            shots: 0,
            single: vec![0; graph.num_detectors()],
            pair: vec![0; graph.edges.len()],
        }
    }

    /// Add one shot's defect bits, indexed like the graph's detectors.
    pub fn add(&mut self, graph: &DecodingGraph, defects: &[u8]) {
        debug_assert_eq!(defects.len(), self.single.len());
        self.shots += 1;
        for (s, &d) in self.single.iter_mut().zip(defects) {
            *s += d as u64;
        }
        let boundary = graph.boundary();
        for (count, e) in self.pair.iter_mut().zip(&graph.edges) {
            let [a, b] = e.endpoints;
            if b != boundary && defects[a] & defects[b] == 1 {
                *count += 1;
            }
        }
    }

    /// Combine statistics gathered on disjoint shot sets.
    pub fn merge(&mut self, other: &DefectStats) {
        self.shots += other.shots;
        for (a, b) in self.single.iter_mut().zip(&other.single) {
            *a += b;
        }
        for (a, b) in self.pair.iter_mut().zip(&other.pair) {
            *a += b;
        }
    }
}

/// Closed-form probability of the edge between two detectors from their
/// first and second moments; NaN when the moments admit no solution.
pub fn pij_bulk(di: f64, dj: f64, dij: f64) -> f64 {
    let den = 1.0 - 2.0 * di - 2.0 * dj + 4.0 * dij;
    let disc = 1.0 - 4.0 * (dij - di * dj) / den;
    if !(den > 0.0) || !(disc >= 0.0) {
        return f64::NAN;
    }
    0.5 - 0.5 * disc.sqrt()
}

/// Boundary probability that makes the combined flip probability at a
/// detector equal its mean defect rate, given the other incident edges.
pub fn pij_boundary(di: f64, other_incident: &[f64]) -> f64 {
    let prod: f64 = other_incident.iter().map(|p| 1.0 - 2.0 * p).product();
    0.5 * (1.0 - (1.0 - 2.0 * di) / prod)
}

/// Re-estimate every edge of `floor` from defect statistics, never going
/// below the floor probability.
pub fn estimate_pij_graph(stats: &DefectStats, floor: &DecodingGraph) -> Result<DecodingGraph> {
    if stats.shots < MIN_PIJ_SHOTS {
        return Err(Error::DatasetTooSmall {
            got: stats.shots as usize,
            need: MIN_PIJ_SHOTS as usize,
        });
    }
    let n = stats.shots as f64;
    let mean: Vec<f64> = stats.single.iter().map(|&c| c as f64 / n).collect();
    let boundary = floor.boundary();

    let mut raw = vec![f64::NAN; floor.edges.len()];
    for (k, e) in floor.edges.iter().enumerate() {
        let [a, b] = e.endpoints;
        if b != boundary {
            raw[k] = pij_bulk(mean[a], mean[b], stats.pair[k] as f64 / n);
        }
    }
    // Bulk estimates enter the boundary solve as non-negative values.
    let usable = |p: f64| if p.is_nan() { 0.0 } else { p.clamp(0.0, P_MAX) };
    let mut incident: Vec<Vec<f64>> = vec![Vec::new(); boundary];
    for (k, e) in floor.edges.iter().enumerate() {
        let [a, b] = e.endpoints;
        if b != boundary {
            incident[a].push(usable(raw[k]));
            incident[b].push(usable(raw[k]));
        }
    }
    for (k, e) in floor.edges.iter().enumerate() {
        let [a, b] = e.endpoints;
        if b == boundary {
            raw[k] = pij_boundary(mean[a], &incident[a]);
        }
    }

    let mut out = floor.clone();
    for (e, est) in out.edges.iter_mut().zip(raw) {
        let mut p = if est.is_nan() { e.p } else { est.max(e.p) };
        if p > 0.5 {
            warn!("edge {:?} estimated at p = {p:.4}; clamping below 0.5", e.endpoints);
            p = P_MAX;
        }
        e.p = p;
    }
    Ok(out)
}

/// Mean defect rate per ancilla and round (`rates[ancilla][round - 1]`).
pub fn defect_rates(defects: &[Vec<u8>], num_ancillas: usize) -> Result<Vec<Vec<f64>>> {
    let first = defects
        .first()
        .ok_or_else(|| Error::InvalidInput("defect dataset is empty".into()))?;
    if first.len() % num_ancillas != 0 || defects.iter().any(|d| d.len() != first.len()) {
        return Err(Error::ShapeMismatch("defect vectors have inconsistent lengths".into()));
    }
    let rounds = first.len() / num_ancillas;
    let mut sums = vec![0u64; first.len()];
    for d in defects {
        for (s, &v) in sums.iter_mut().zip(d) {
            *s += v as u64;
        }
    }
    let n = defects.len() as f64;
    Ok((0..num_ancillas)
        .map(|a| (0..rounds).map(|r| sums[r * num_ancillas + a] as f64 / n).collect())
        .collect())
}

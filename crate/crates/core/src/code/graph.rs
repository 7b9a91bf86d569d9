//! Decoding graphs: detector nodes, a single boundary node, and weighted
//! edges labelled by the error mechanisms that produce them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{from_json_str, invalid, io, Result};

/// Smallest probability used when converting an edge to a matching weight.
pub const P_MIN: f64 = 1e-12;
/// Largest probability used when converting an edge to a matching weight.
pub const P_MAX: f64 = 0.5 - 1e-9;

/// A detector: the comparison of an ancilla's syndrome in consecutive rounds.
/// Rounds run from 1 to R + 1, the last built from data-qubit outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DetectorId {
    pub ancilla: usize,
    pub round: usize,
}

/// A measurement whose analog outcome can be used to reweight an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKey {
    Ancilla { ancilla: usize, round: usize },
    Data { qubit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    DataQubitError,
    AncillaQubitError,
    ClassificationError,
    FinalRoundCombined,
    Hook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Node indices; the boundary is `DecodingGraph::boundary()`.
    pub endpoints: [usize; 2],
    pub p: f64,
    pub kind: EdgeKind,
    pub logical_flip: bool,
    /// Measurements whose misclassification triggers this edge.
    pub source_measurements: Vec<MeasurementKey>,
    /// Measurements whose true outcome flips when the dominant physical
    /// mechanism of this edge occurs; used by the sampler.
    #[serde(default)]
    pub toggles: Vec<MeasurementKey>,
}

impl Edge {
    /// Matching weight `log((1 - p) / p)` with `p` clamped to `[P_MIN, P_MAX]`.
    pub fn weight(&self) -> f64 {
        probability_weight(self.p)
    }
}

pub fn probability_weight(p: f64) -> f64 {
    let p = p.clamp(P_MIN, P_MAX);
    ((1.0 - p) / p).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingGraph {
    pub rounds: usize,
    pub num_ancillas: usize,
    pub detectors: Vec<DetectorId>,
    pub edges: Vec<Edge>,
}

impl DecodingGraph {
    pub fn new(rounds: usize, num_ancillas: usize, edges: Vec<Edge>) -> Self {
        let detectors = (1..=rounds + 1)
            .flat_map(|round| (0..num_ancillas).map(move |ancilla| DetectorId { ancilla, round }))
            .collect();
        Self {
            rounds,
            num_ancillas,
            detectors,
            edges,
        }
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    /// Index of the virtual boundary node.
    pub fn boundary(&self) -> usize {
        self.detectors.len()
    }

    pub fn detector_index(&self, ancilla: usize, round: usize) -> usize {
        (round - 1) * self.num_ancillas + ancilla
    }

    pub fn is_boundary_edge(&self, e: &Edge) -> bool {
        e.endpoints[1] == self.boundary()
    }

    /// Edge index between two nodes, if any.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a <= b { [a, b] } else { [b, a] };
        self.edges.iter().position(|e| e.endpoints == key)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.boundary();
        if self.detectors.len() != (self.rounds + 1) * self.num_ancillas {
            return Err(invalid("detector list does not match rounds and ancillas"));
        }
        for (k, e) in self.edges.iter().enumerate() {
            let [a, b] = e.endpoints;
            if a >= b || b > n {
                return Err(invalid(format!("edge {k} has invalid endpoints {a}, {b}")));
            }
            if !(0.0..=1.0).contains(&e.p) {
                return Err(invalid(format!("edge {k} has probability {}", e.p)));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        let g: DecodingGraph = from_json_str(path, &text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_is_positive_and_decreasing() {
        let mut last = f64::INFINITY;
        for k in 1..500 {
            let p = k as f64 / 1000.0;
            let w = probability_weight(p);
            assert!(w > 0.0 && w < last);
            last = w;
        }
    }
}

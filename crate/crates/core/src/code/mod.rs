//! The Surface-13 bit-flip code: layout, detectors without reset, decoding
//! graphs from circuit noise, and graphs estimated from defect statistics.

mod detectors;
mod floor;
mod graph;
mod layout;
mod noise;
mod pij;

pub use detectors::detectors_no_reset;
pub use floor::build_noise_floor_graph;
pub use graph::{probability_weight, DecodingGraph, DetectorId, Edge, EdgeKind, MeasurementKey, P_MAX, P_MIN};
pub use layout::{format_bits, parse_bits, CodeLayout, SURFACE13_INITIAL_STATES};
pub use noise::NoiseParams;
pub use pij::{defect_rates, estimate_pij_graph, pij_boundary, pij_bulk, DefectStats, MIN_PIJ_SHOTS};

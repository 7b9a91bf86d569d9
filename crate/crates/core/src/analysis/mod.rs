//! Logical fidelity, decay fits, post-selection and report files.

mod fidelity;
mod postselect;
mod report;

pub use fidelity::{fidelity, fit_logical, FidelityPoint, FitOptions, LogicalFit};
pub use postselect::{
    confidence_histogram, postselect_confidence, postselect_leakage, BinStats, ConfidenceHistogram, LeakageSelection,
    PostselectMode, PostselectResult,
};
pub use report::{
    read_decoded, write_decoded, write_fidelity_csv, write_histogram_csv, write_leakage_csv, write_retained_csv, DecodeHeader, FitSummary,
};

use serde::{Deserialize, Serialize};

/// Decoder output for one shot, with what is needed to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedShot {
    pub shot_id: u64,
    pub rounds: usize,
    pub initial_state: String,
    /// Logical parity of the prepared state.
    pub z_in: u8,
    /// Measured logical parity of the final data qubits.
    pub z_out: u8,
    /// Predicted logical flip `b`.
    pub flip: u8,
    /// Decoder estimate `y` of the probability that the logical flipped.
    pub confidence: f64,
    pub weight: f64,
    /// Lightest correction of the opposite logical class.
    #[serde(default)]
    pub complementary_weight: Option<f64>,
}

impl DecodedShot {
    /// The run succeeds when `z_in ^ z_out ^ b == 0`.
    pub fn success(&self) -> bool {
        self.z_in ^ self.z_out ^ self.flip == 0
    }

    /// Whether the logical actually flipped according to the data.
    pub fn observed_flip(&self) -> u8 {
        self.z_in ^ self.z_out
    }
}

//! Hard and soft minimum-weight perfect-matching decoding.

mod blossom;
mod mwpm;
mod soft;

pub use blossom::max_weight_matching;
pub use mwpm::{confidence, mwpm_decode, DecodeResult, Decoder, ShotWeights, TIE_TOLERANCE};
pub use soft::{
    bulk_classification_weight, combine_classification_errors, combined_final_weight, misclassification_odds,
    remove_classification_error, shot_classification_error, ClassificationStats, SoftDecoder,
};

use crate::error::{invalid, Result};

/// Combine soft outputs by averaging their log-odds.
pub fn ensemble(confidences: &[f64]) -> Result<f64> {
    if confidences.is_empty() {
        return Err(invalid("cannot ensemble an empty list of confidences"));
    }
    let mean = confidences
        .iter()
        .map(|&y| {
            let y = y.clamp(1e-12, 1.0 - 1e-12);
            ((1.0 - y) / y).ln()
        })
        .sum::<f64>()
        / confidences.len() as f64;
    Ok(1.0 / (1.0 + mean.exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_fixtures() {
        assert!((ensemble(&[0.2, 0.8]).unwrap() - 0.5).abs() < 1e-12);
        assert!((ensemble(&[0.3, 0.3, 0.3]).unwrap() - 0.3).abs() < 1e-12);
        let expected = 1.0 / (1.0 + 9f64.powf(-2.0 / 3.0));
        assert!((ensemble(&[0.9, 0.9, 0.5]).unwrap() - expected).abs() < 1e-12);
        assert!(ensemble(&[]).is_err());
    }
}

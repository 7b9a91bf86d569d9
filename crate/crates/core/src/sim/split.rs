//! Stratified train/validation/test splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::record::ShotRecord;
use crate::error::{invalid, Result};
use crate::rng::substream;

/// Split shots into train, validation and test sets, separately within each
/// (initial state, rounds) cell. Each cell contributes `round(f * n)` shots
/// to the first two sets; the test set takes the rest when the fractions
/// sum to one and `round(f * n)` otherwise. Outputs keep the input order.
pub fn heralded_split(shots: &[ShotRecord], fractions: [f64; 3], seed: u64) -> Result<[Vec<ShotRecord>; 3]> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(invalid("split fractions must lie in [0, 1]"));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(invalid(format!("split fractions sum to {total} > 1")));
    }
    let complete = (total - 1.0).abs() <= 1e-12;

    let mut cells: BTreeMap<(usize, &str), Vec<usize>> = BTreeMap::new();
    for (k, s) in shots.iter().enumerate() {
        cells.entry((s.rounds, s.initial_state.as_str())).or_default().push(k);
    }
    let mut label = vec![3u8; shots.len()];
    for ((rounds, state), mut idx) in cells {
        let n = idx.len();
        let mut rng = substream(seed, &format!("split/{rounds}/{state}"), 0);
        idx.shuffle(&mut rng);
        let n0 = (fractions[0] * n as f64).round() as usize;
        let n1 = ((fractions[1] * n as f64).round() as usize).min(n - n0);
        let n2 = if complete {
            n - n0 - n1
        } else {
            ((fractions[2] * n as f64).round() as usize).min(n - n0 - n1)
        };
        for (j, &k) in idx.iter().enumerate() {
            label[k] = if j < n0 {
                0
            } else if j < n0 + n1 {
                1
            } else if j < n0 + n1 + n2 {
                2
            } else {
                3
            };
        }
    }
    let mut out: [Vec<ShotRecord>; 3] = Default::default();
    for (s, &l) in shots.iter().zip(&label) {
        if l < 3 {
            out[l as usize].push(s.clone());
        }
    }
    Ok(out)
}

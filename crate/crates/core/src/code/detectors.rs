//! Detectors for repeated parity checks without ancilla reset.
//!
//! Without reset the ancilla accumulates syndromes, so the syndrome of
//! round r is `m_r ^ m_{r-1}` and the detector compares consecutive
//! syndromes: `d_r = m_r ^ m_{r-2}` with `m_0 = m_{-1} = 0`. The final
//! detector compares the syndrome recomputed from the data-qubit outcomes
//! with the last ancilla syndrome.

use super::layout::CodeLayout;
use crate::error::{Error, Result};

/// Defect bits for hardened ancilla outcomes `ancilla[r][i]` (rounds
/// 1..=R stored at index r - 1) and final data outcomes. The result is
/// indexed `(round - 1) * num_ancillas + ancilla` for rounds 1..=R+1.
pub fn detectors_no_reset(layout: &CodeLayout, ancilla: &[Vec<u8>], final_data: &[u8]) -> Result<Vec<u8>> {
    let na = layout.num_ancillas();
    let rounds = ancilla.len();
    if rounds == 0 {
        return Err(Error::ShapeMismatch("at least one round of ancilla outcomes is required".into()));
    }
    if let Some(r) = ancilla.iter().position(|row| row.len() != na) {
        return Err(Error::ShapeMismatch(format!(
            "round {} has {} ancilla outcomes, expected {na}",
            r + 1,
            ancilla[r].len()
        )));
    }
    if final_data.len() != layout.num_data() {
        return Err(Error::ShapeMismatch(format!(
            "{} final data outcomes, expected {}",
            final_data.len(),
            layout.num_data()
        )));
    }
    let m = |r: usize, i: usize| if r == 0 { 0 } else { ancilla[r - 1][i] };
    let mut out = Vec::with_capacity((rounds + 1) * na);
    for r in 1..=rounds {
        for i in 0..na {
            let prev2 = if r >= 2 { m(r - 2, i) } else { 0 };
            out.push(m(r, i) ^ prev2);
        }
    }
    for i in 0..na {
        let last_syndrome = m(rounds, i) ^ m(rounds - 1, i);
        out.push(layout.stabilizer_parity(i, final_data) ^ last_syndrome);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quiet_outcomes_give_no_defects() {
        let l = CodeLayout::surface13();
        let d = detectors_no_reset(&l, &vec![vec![0; 4]; 5], &[0; 9]).unwrap();
        assert_eq!(d, vec![0; 24]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let l = CodeLayout::surface13();
        assert!(detectors_no_reset(&l, &[vec![0; 3]], &[0; 9]).is_err());
        assert!(detectors_no_reset(&l, &[vec![0; 4]], &[0; 8]).is_err());
        assert!(detectors_no_reset(&l, &[], &[0; 9]).is_err());
    }
}

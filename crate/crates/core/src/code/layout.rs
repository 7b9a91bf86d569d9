//! The Surface-13 layout: nine data qubits, four Z-type ancillas, and the
//! order in which each ancilla interacts with its data qubits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The 16 prepared computational states, written as bits of D1..D9.
pub const SURFACE13_INITIAL_STATES: [&str; 16] = [
    "000000000", "000000011", "000110101", "000110110", "011011000", "011011011", "011101101", "011101110",
    "101011000", "101011011", "101101101", "101101110", "110000000", "110000011", "110110101", "110110110",
];

/// Qubit layout and parity-check schedule, indexed internally by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LayoutFile", into = "LayoutFile")]
pub struct CodeLayout {
    pub data_qubits: Vec<String>,
    pub ancillas: Vec<String>,
    /// Data-qubit indices checked by each ancilla.
    pub stabilizer_support: Vec<Vec<usize>>,
    /// Data-qubit indices whose parity is the logical Z observable.
    pub logical_support: Vec<usize>,
    /// Data-qubit pairs that are checked by exactly the same ancillas.
    pub degenerate_pairs: Vec<(usize, usize)>,
    /// Layers of simultaneous CZ gates, each a list of (ancilla, data) pairs.
    pub cz_schedule: Vec<Vec<(usize, usize)>>,
}

/// On-disk form of [`CodeLayout`], using qubit names instead of indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutFile {
    data_qubits: Vec<String>,
    ancillas: Vec<String>,
    stabilizer_support: Vec<(String, Vec<String>)>,
    logical_support: Vec<String>,
    cz_schedule: Vec<Vec<(String, String)>>,
}

impl CodeLayout {
    pub fn surface13() -> Self {
        let d = |i: usize| i - 1;
        let z = |i: usize| i - 1;
        Self::new(
            (1..=9).map(|i| format!("D{i}")).collect(),
            (1..=4).map(|i| format!("Z{i}")).collect(),
            vec![
                vec![d(4), d(7)],
                vec![d(3), d(6)],
                vec![d(1), d(2), d(4), d(5)],
                vec![d(5), d(6), d(8), d(9)],
            ],
            vec![d(1), d(2), d(3)],
            vec![
                vec![(z(3), d(2)), (z(4), d(6)), (z(1), d(7)), (z(2), d(3))],
                vec![(z(3), d(1)), (z(4), d(9)), (z(1), d(4)), (z(2), d(6))],
                vec![(z(3), d(5)), (z(4), d(8))],
                vec![(z(3), d(4)), (z(4), d(5))],
            ],
        )
        .expect("built-in layout is valid")
    }

    pub fn new(
        data_qubits: Vec<String>,
        ancillas: Vec<String>,
        stabilizer_support: Vec<Vec<usize>>,
        logical_support: Vec<usize>,
        cz_schedule: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let mut layout = Self {
            data_qubits,
            ancillas,
            stabilizer_support,
            logical_support,
            degenerate_pairs: Vec::new(),
            cz_schedule,
        };
        layout.degenerate_pairs = layout.find_degenerate_pairs();
        layout.validate()?;
        Ok(layout)
    }

    pub fn num_data(&self) -> usize {
        self.data_qubits.len()
    }

    pub fn num_ancillas(&self) -> usize {
        self.ancillas.len()
    }

    /// Ancillas checking data qubit `q`.
    pub fn checks_of(&self, q: usize) -> Vec<usize> {
        (0..self.num_ancillas())
            .filter(|&a| self.stabilizer_support[a].contains(&q))
            .collect()
    }

    fn find_degenerate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for a in 0..self.num_data() {
            for b in a + 1..self.num_data() {
                if self.checks_of(a) == self.checks_of(b) {
                    pairs.push((a, b));
                }
            }
        }
        pairs
    }

    fn validate(&self) -> Result<()> {
        let nd = self.num_data();
        let na = self.num_ancillas();
        if self.stabilizer_support.len() != na {
            return Err(invalid("one stabilizer support per ancilla is required"));
        }
        if self.stabilizer_support.iter().flatten().chain(&self.logical_support).any(|&q| q >= nd) {
            return Err(invalid("support refers to an unknown data qubit"));
        }
        for q in 0..nd {
            if self.checks_of(q).is_empty() {
                return Err(invalid(format!("data qubit {} is not checked by any ancilla", self.data_qubits[q])));
            }
        }
        let mut scheduled: Vec<Vec<usize>> = vec![Vec::new(); na];
        for layer in &self.cz_schedule {
            let mut busy = vec![false; na + nd];
            for &(a, q) in layer {
                if a >= na || q >= nd {
                    return Err(invalid("CZ schedule refers to an unknown qubit"));
                }
                if busy[a] || busy[na + q] {
                    return Err(invalid("a qubit appears twice in one CZ layer"));
                }
                busy[a] = true;
                busy[na + q] = true;
                scheduled[a].push(q);
            }
        }
        for (a, sched) in scheduled.iter_mut().enumerate() {
            sched.sort_unstable();
            let mut support = self.stabilizer_support[a].clone();
            support.sort_unstable();
            if *sched != support {
                return Err(invalid(format!(
                    "CZ schedule of {} does not match its stabilizer support",
                    self.ancillas[a]
                )));
            }
        }
        Ok(())
    }

    /// Parity of `bits` over the support of ancilla `a`.
    pub fn stabilizer_parity(&self, a: usize, bits: &[u8]) -> u8 {
        self.stabilizer_support[a].iter().fold(0, |acc, &q| acc ^ bits[q])
    }

    pub fn logical_parity(&self, bits: &[u8]) -> u8 {
        self.logical_support.iter().fold(0, |acc, &q| acc ^ bits[q])
    }

    /// The prepared states, as data-qubit bit vectors.
    pub fn initial_states(&self) -> Vec<Vec<u8>> {
        SURFACE13_INITIAL_STATES.iter().map(|s| parse_bits(s)).collect()
    }

    fn data_index(&self, name: &str) -> Result<usize> {
        self.data_qubits
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown data qubit {name}")))
    }

    fn ancilla_index(&self, name: &str) -> Result<usize> {
        self.ancillas
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(format!("unknown ancilla {name}")))
    }

    /// Short stable fingerprint of the layout, embedded in dataset headers.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("layout serializes");
        crate::config_hash_of(text.as_bytes())
    }
}

pub fn parse_bits(s: &str) -> Vec<u8> {
    s.bytes().map(|b| b - b'0').collect()
}

pub fn format_bits(bits: &[u8]) -> String {
    bits.iter().map(|&b| char::from(b'0' + b)).collect()
}

impl TryFrom<LayoutFile> for CodeLayout {
    type Error = crate::Error;

    fn try_from(f: LayoutFile) -> Result<Self> {
        let shell = CodeLayout {
            data_qubits: f.data_qubits.clone(),
            ancillas: f.ancillas.clone(),
            stabilizer_support: Vec::new(),
            logical_support: Vec::new(),
            degenerate_pairs: Vec::new(),
            cz_schedule: Vec::new(),
        };
        let mut support = vec![Vec::new(); shell.num_ancillas()];
        for (anc, qs) in &f.stabilizer_support {
            let a = shell.ancilla_index(anc)?;
            support[a] = qs.iter().map(|q| shell.data_index(q)).collect::<Result<_>>()?;
        }
        let logical = f.logical_support.iter().map(|q| shell.data_index(q)).collect::<Result<_>>()?;
        let schedule = f
            .cz_schedule
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|(a, q)| Ok((shell.ancilla_index(a)?, shell.data_index(q)?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        CodeLayout::new(f.data_qubits, f.ancillas, support, logical, schedule)
    }
}

impl From<CodeLayout> for LayoutFile {
    fn from(l: CodeLayout) -> Self {
        let dn = |q: usize| l.data_qubits[q].clone();
        let an = |a: usize| l.ancillas[a].clone();
        LayoutFile {
            stabilizer_support: l
                .stabilizer_support
                .iter()
                .enumerate()
                .map(|(a, qs)| (an(a), qs.iter().map(|&q| dn(q)).collect()))
                .collect(),
            logical_support: l.logical_support.iter().map(|&q| dn(q)).collect(),
            cz_schedule: l
                .cz_schedule
                .iter()
                .map(|layer| layer.iter().map(|&(a, q)| (an(a), dn(q))).collect())
                .collect(),
            data_qubits: l.data_qubits.clone(),
            ancillas: l.ancillas.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_states_are_stabilizer_and_logical_eigenstates() {
        let l = CodeLayout::surface13();
        for s in l.initial_states() {
            for a in 0..4 {
                assert_eq!(l.stabilizer_parity(a, &s), 0, "{}", format_bits(&s));
            }
            assert_eq!(l.logical_parity(&s), 0);
        }
    }

    #[test]
    fn degenerate_pairs_are_d1_d2_and_d8_d9() {
        let l = CodeLayout::surface13();
        assert_eq!(l.degenerate_pairs, vec![(0, 1), (7, 8)]);
    }

    #[test]
    fn layout_json_round_trips() {
        let l = CodeLayout::surface13();
        let text = serde_json::to_string(&l).unwrap();
        assert!(text.contains("\"Z3\",[\"D1\",\"D2\",\"D4\",\"D5\"]"));
        let back: CodeLayout = serde_json::from_str(&text).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn schedule_must_cover_supports() {
        let l = CodeLayout::surface13();
        let mut sched = l.cz_schedule.clone();
        sched[3].pop();
        let err = CodeLayout::new(
            l.data_qubits.clone(),
            l.ancillas.clone(),
            l.stabilizer_support.clone(),
            l.logical_support.clone(),
            sched,
        );
        assert!(err.is_err());
    }
}

//! Shot records: one run of the memory experiment with its readout data.

use serde::{Deserialize, Serialize};

use crate::code::{detectors_no_reset, parse_bits, CodeLayout};
use crate::error::{Error, Result};
use crate::readout::{IqSample, ModelSet, ReadoutModel, States};

/// Readout of one shot, either analog or already classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Analog {
        /// `ancilla_iq[r][i]` for rounds 1..=R.
        ancilla_iq: Vec<Vec<IqSample>>,
        final_data_iq: Vec<IqSample>,
    },
    Hard {
        ancilla: Vec<Vec<u8>>,
        final_data: Vec<u8>,
    },
}

/// Ground truth retained by the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    /// Indices of generator-graph edges that fired.
    pub fired_edges: Vec<usize>,
    pub logical_flip: bool,
    /// True state (0, 1, or 2 when leaked) of every ancilla measurement.
    pub ancilla_states: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_id: u64,
    pub rounds: usize,
    /// Prepared data-qubit state as bits of D1..D9.
    pub initial_state: String,
    pub readout: Readout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
}

/// Classified outcomes of a shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardOutcomes {
    pub ancilla: Vec<Vec<u8>>,
    pub final_data: Vec<u8>,
}

/// Readout models resolved against a layout's qubit order.
#[derive(Debug, Clone)]
pub struct QubitModels {
    pub ancilla: Vec<ReadoutModel>,
    pub data: Vec<ReadoutModel>,
}

impl QubitModels {
    pub fn new(layout: &CodeLayout, models: &ModelSet) -> Result<Self> {
        let pick = |names: &[String]| -> Result<Vec<ReadoutModel>> {
            names.iter().map(|n| models.get(n).cloned()).collect()
        };
        Ok(Self {
            ancilla: pick(&layout.ancillas)?,
            data: pick(&layout.data_qubits)?,
        })
    }
}

impl ShotRecord {
    pub fn initial_bits(&self) -> Vec<u8> {
        parse_bits(&self.initial_state)
    }

    pub fn has_iq(&self) -> bool {
        matches!(self.readout, Readout::Analog { .. })
    }

    /// Analog samples, or [`Error::MissingIq`] for classified datasets.
    pub fn iq(&self) -> Result<(&[Vec<IqSample>], &[IqSample])> {
        match &self.readout {
            Readout::Analog {
                ancilla_iq,
                final_data_iq,
            } => Ok((ancilla_iq, final_data_iq)),
            Readout::Hard { .. } => Err(Error::MissingIq),
        }
    }

    fn check_shape(&self, layout: &CodeLayout) -> Result<()> {
        let (na, nd) = (layout.num_ancillas(), layout.num_data());
        let (rows, row_len, fin) = match &self.readout {
            Readout::Analog {
                ancilla_iq,
                final_data_iq,
            } => (ancilla_iq.len(), ancilla_iq.iter().map(Vec::len).collect::<Vec<_>>(), final_data_iq.len()),
            Readout::Hard { ancilla, final_data } => {
                (ancilla.len(), ancilla.iter().map(Vec::len).collect(), final_data.len())
            }
        };
        if rows != self.rounds || row_len.iter().any(|&l| l != na) || fin != nd || self.initial_state.len() != nd {
            return Err(Error::ShapeMismatch(format!(
                "shot {} does not match {} rounds of {na} ancillas and {nd} data qubits",
                self.shot_id, self.rounds
            )));
        }
        Ok(())
    }

    /// Two-state classification of every measurement.
    pub fn harden(&self, layout: &CodeLayout, models: Option<&QubitModels>) -> Result<HardOutcomes> {
        self.check_shape(layout)?;
        match &self.readout {
            Readout::Hard { ancilla, final_data } => Ok(HardOutcomes {
                ancilla: ancilla.clone(),
                final_data: final_data.clone(),
            }),
            Readout::Analog {
                ancilla_iq,
                final_data_iq,
            } => {
                let m = models.ok_or_else(|| Error::InvalidInput("analog readout needs readout models".into()))?;
                let ancilla = ancilla_iq
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(&m.ancilla)
                            .map(|(&z, model)| model.harden(z, States::Two))
                            .collect::<Result<Vec<u8>>>()
                    })
                    .collect::<Result<_>>()?;
                let final_data = final_data_iq
                    .iter()
                    .zip(&m.data)
                    .map(|(&z, model)| model.harden(z, States::Two))
                    .collect::<Result<_>>()?;
                Ok(HardOutcomes { ancilla, final_data })
            }
        }
    }

    /// Defect bits (see [`detectors_no_reset`]) and the measured logical parity.
    pub fn defects(&self, layout: &CodeLayout, models: Option<&QubitModels>) -> Result<(Vec<u8>, u8)> {
        let hard = self.harden(layout, models)?;
        let defects = detectors_no_reset(layout, &hard.ancilla, &hard.final_data)?;
        Ok((defects, layout.logical_parity(&hard.final_data)))
    }

    /// True if any measurement of the shot is classified as |2>.
    pub fn any_leakage(&self, models: &QubitModels) -> Result<bool> {
        let (anc, data) = self.iq()?;
        for row in anc {
            for (&z, model) in row.iter().zip(&models.ancilla) {
                if model.leakage_flag(z)? {
                    return Ok(true);
                }
            }
        }
        for (&z, model) in data.iter().zip(&models.data) {
            if model.leakage_flag(z)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Indices of the set bits of a defect vector.
pub fn active_detectors(defects: &[u8]) -> Vec<usize> {
    defects
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 1)
        .map(|(i, _)| i)
        .collect()
}

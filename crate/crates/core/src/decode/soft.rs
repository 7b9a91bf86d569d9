//! Soft-information edge weights.
//!
//! Bulk classification edges take their weight from the analog sample of
//! their single source measurement:
//! `w = -log(P'(z|1-s) / P'(z|s))` where `s` is the hardened label and `P'`
//! keeps only the dominant Gaussian of each state.
//!
//! Final-round edges mix qubit errors with classification errors of one or
//! two measurements. Their average classification part `c` (from the
//! training data) is removed from the edge probability to leave the qubit
//! part `q = (p - c) / (1 - 2c)`, and the per-shot classification odds are
//! recombined with it: the edge fires iff an odd number of its independent
//! causes occur.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::mwpm::{DecodeResult, Decoder, ShotWeights};
use crate::code::{DecodingGraph, EdgeKind, MeasurementKey, P_MAX, P_MIN};
use crate::error::{invalid, Error, Result};
use crate::readout::{IqSample, ReadoutModel, States};
use crate::sim::{QubitModels, ShotRecord};

/// Total classification error of an edge triggered by any odd number of
/// independent misclassifications with probabilities `cs`.
pub fn combine_classification_errors(cs: &[f64]) -> f64 {
    0.5 * (1.0 - cs.iter().map(|c| 1.0 - 2.0 * c).product::<f64>())
}

/// Qubit-error part of an edge of total probability `p` whose
/// classification part is `c`.
pub fn remove_classification_error(p: f64, c: f64) -> Result<f64> {
    if c >= 0.5 {
        return Err(Error::ClassificationDominates { edge: usize::MAX, c });
    }
    Ok((p - c) / (1.0 - 2.0 * c))
}

/// Weight of an edge whose independent causes have odds `lq` (qubit error)
/// and `ls` (per-shot misclassification odds): `-log(P(odd) / P(even))`.
pub fn combined_final_weight(lq: f64, ls: &[f64]) -> f64 {
    // Track unnormalized (even, odd) parity weights.
    let (mut even, mut odd) = (1.0, lq);
    for &l in ls {
        (even, odd) = (even + odd * l, odd + even * l);
    }
    -(odd / even).ln()
}

/// Odds that the measurement was misclassified, `P'(z|1-s) / P'(z|s)`,
/// with `s` the hardened two-state label. Clamped to the odds of
/// [`P_MIN`] and their inverse so that weights stay finite.
pub fn misclassification_odds(model: &ReadoutModel, z: IqSample) -> Result<f64> {
    let s = model.harden(z, States::Two)?;
    let min = P_MIN / (1.0 - P_MIN);
    let ratio = model.mix1d.dominant_flip_ratio(model.project(z), s);
    Ok(if ratio.is_nan() { 1.0 } else { ratio.clamp(min, min.recip()) })
}

/// Bulk classification weight of a measurement.
pub fn bulk_classification_weight(model: &ReadoutModel, z: IqSample) -> Result<f64> {
    Ok(-misclassification_odds(model, z)?.ln())
}

/// Per-shot misclassification probability under the dominant-peak model:
/// the smaller of the two prior-weighted posteriors.
pub fn shot_classification_error(model: &ReadoutModel, z: IqSample) -> f64 {
    let zt = model.project(z);
    let norm = model.priors[0] + model.priors[1];
    let l0 = (model.priors[0] / norm).ln() + model.mix1d.dominant_ln_pdf(zt, 0);
    let l1 = (model.priors[1] / norm).ln() + model.mix1d.dominant_ln_pdf(zt, 1);
    // min(P0, P1) = 1 / (1 + exp(|l0 - l1|)).
    1.0 / (1.0 + (l0 - l1).abs().exp())
}

fn sample_of(shot: &ShotRecord, key: MeasurementKey) -> Result<IqSample> {
    let (anc, data) = shot.iq()?;
    let z = match key {
        MeasurementKey::Ancilla { ancilla, round } => anc.get(round - 1).and_then(|row| row.get(ancilla)),
        MeasurementKey::Data { qubit } => data.get(qubit),
    };
    z.copied()
        .ok_or_else(|| Error::ShapeMismatch(format!("shot {} has no sample for {key:?}", shot.shot_id)))
}

fn model_of(models: &QubitModels, key: MeasurementKey) -> &ReadoutModel {
    match key {
        MeasurementKey::Ancilla { ancilla, .. } => &models.ancilla[ancilla],
        MeasurementKey::Data { qubit } => &models.data[qubit],
    }
}

/// Mean per-shot classification error `c^k` of every measurement feeding a
/// final-round edge, accumulated over a reference (training) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationStats {
    pub rounds: usize,
    pub shots: u64,
    pub keys: Vec<MeasurementKey>,
    pub sums: Vec<f64>,
}

impl ClassificationStats {
    pub fn new(graph: &DecodingGraph) -> Self {
        let mut keys: Vec<MeasurementKey> = graph
            .edges
            .iter()
            .filter(|e| e.kind == EdgeKind::FinalRoundCombined)
            .flat_map(|e| e.source_measurements.iter().copied())
            .collect();
        keys.sort();
        keys.dedup();
        Self {
            rounds: graph.rounds,
            shots: 0,
            sums: vec![0.0; keys.len()],
            keys,
        }
    }

    pub fn add(&mut self, models: &QubitModels, shot: &ShotRecord) -> Result<()> {
        if shot.rounds != self.rounds {
            return Err(invalid(format!(
                "shot {} has {} rounds, statistics are for {}",
                shot.shot_id, shot.rounds, self.rounds
            )));
        }
        for (k, &key) in self.keys.iter().enumerate() {
            let z = sample_of(shot, key)?;
            self.sums[k] += shot_classification_error(model_of(models, key), z);
        }
        self.shots += 1;
        Ok(())
    }

    /// Append statistics gathered on a later, disjoint block of shots.
    pub fn merge(&mut self, other: &ClassificationStats) {
        self.shots += other.shots;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
    }

    pub fn mean(&self, key: MeasurementKey) -> Option<f64> {
        if self.shots == 0 {
            return None;
        }
        let k = self.keys.binary_search(&key).ok()?;
        Some(self.sums[k] / self.shots as f64)
    }

    pub fn means(&self) -> BTreeMap<MeasurementKey, f64> {
        self.keys.iter().filter_map(|&k| Some((k, self.mean(k)?))).collect()
    }
}

#[derive(Debug, Clone)]
struct FinalEdge {
    edge: usize,
    sources: Vec<MeasurementKey>,
    lq: f64,
}

/// Decoder that reweights classification-sensitive edges per shot.
#[derive(Debug, Clone)]
pub struct SoftDecoder {
    decoder: Decoder,
    models: QubitModels,
    bulk: Vec<(usize, MeasurementKey)>,
    finals: Vec<FinalEdge>,
}

impl SoftDecoder {
    pub fn new(graph: &DecodingGraph, models: QubitModels, stats: &ClassificationStats) -> Result<Self> {
        let decoder = Decoder::new(graph)?;
        let mut bulk = Vec::new();
        let mut finals = Vec::new();
        let mut clamped = 0usize;
        for (k, e) in graph.edges.iter().enumerate() {
            match e.kind {
                EdgeKind::ClassificationError => {
                    if e.source_measurements.len() != 1 {
                        return Err(invalid(format!(
                            "bulk classification edge {k} has {} source measurements",
                            e.source_measurements.len()
                        )));
                    }
                    bulk.push((k, e.source_measurements[0]));
                }
                EdgeKind::FinalRoundCombined => {
                    let cs = e
                        .source_measurements
                        .iter()
                        .map(|&key| {
                            stats
                                .mean(key)
                                .ok_or_else(|| invalid(format!("no classification statistics for {key:?}")))
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let c = combine_classification_errors(&cs);
                    let q = remove_classification_error(e.p, c).map_err(|_| Error::ClassificationDominates { edge: k, c })?;
                    let q_used = q.clamp(P_MIN, P_MAX);
                    if q_used != q {
                        clamped += 1;
                    }
                    finals.push(FinalEdge {
                        edge: k,
                        sources: e.source_measurements.clone(),
                        lq: q_used / (1.0 - q_used),
                    });
                }
                _ => {}
            }
        }
        if clamped > 0 {
            warn!("{clamped} final-round edges had a qubit-error part outside [0, 0.5) and were clamped");
        }
        Ok(Self {
            decoder,
            models,
            bulk,
            finals,
        })
    }

    /// Per-shot overrides for bulk classification edges.
    pub fn bulk_weights(&self, shot: &ShotRecord) -> Result<ShotWeights> {
        let mut w = ShotWeights::new();
        for &(edge, key) in &self.bulk {
            let z = sample_of(shot, key)?;
            w.set(edge, bulk_classification_weight(model_of(&self.models, key), z)?);
        }
        Ok(w)
    }

    /// Per-shot overrides for final-round combined edges.
    pub fn final_weights(&self, shot: &ShotRecord) -> Result<ShotWeights> {
        let mut w = ShotWeights::new();
        for f in &self.finals {
            let ls = f
                .sources
                .iter()
                .map(|&key| misclassification_odds(model_of(&self.models, key), sample_of(shot, key)?))
                .collect::<Result<Vec<f64>>>()?;
            w.set(f.edge, combined_final_weight(f.lq, &ls));
        }
        Ok(w)
    }

    pub fn weights(&self, shot: &ShotRecord) -> Result<ShotWeights> {
        let mut w = self.bulk_weights(shot)?;
        w.extend(self.final_weights(shot)?);
        Ok(w)
    }

    /// Decode a shot given its (hardened) active detectors.
    pub fn decode(&self, shot: &ShotRecord, active: &[usize]) -> Result<DecodeResult> {
        self.decoder.decode_with(active, &self.weights(shot)?)
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn models(&self) -> &QubitModels {
        &self.models
    }
}

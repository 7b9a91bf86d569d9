//! End-to-end steps shared by the command-line tool and the test suites:
//! defect statistics, graphs estimated from training data, and decoding of
//! whole datasets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DecodedShot;
use crate::code::{build_noise_floor_graph, estimate_pij_graph, CodeLayout, DecodingGraph, DefectStats, NoiseParams};
use crate::decode::{ClassificationStats, Decoder, SoftDecoder};
use crate::error::{invalid, Result};
use crate::sim::{active_detectors, QubitModels, ShotRecord};

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Hard,
    Soft,
}

impl DecodeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeMode::Hard => "hard",
            DecodeMode::Soft => "soft",
        }
    }
}

fn with_rounds(shots: &[ShotRecord], rounds: usize) -> impl Iterator<Item = &ShotRecord> {
    shots.iter().filter(move |s| s.rounds == rounds)
}

/// Defect statistics of the shots with `graph.rounds` rounds.
pub fn defect_stats(
    layout: &CodeLayout,
    graph: &DecodingGraph,
    shots: &[ShotRecord],
    models: Option<&QubitModels>,
) -> Result<DefectStats> {
    let selected: Vec<&ShotRecord> = with_rounds(shots, graph.rounds).collect();
    let parts = selected
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = DefectStats::new(graph);
            for shot in chunk {
                s.add(graph, &shot.defects(layout, models)?.0);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = DefectStats::new(graph);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Mean classification errors over the shots with `graph.rounds` rounds.
pub fn classification_stats(
    graph: &DecodingGraph,
    shots: &[ShotRecord],
    models: &QubitModels,
) -> Result<ClassificationStats> {
    let selected: Vec<&ShotRecord> = with_rounds(shots, graph.rounds).collect();
    let parts = selected
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = ClassificationStats::new(graph);
            for shot in chunk {
                s.add(models, shot)?;
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    // Merge in chunk order so the floating-point sums do not depend on
    // the number of threads.
    let mut total = ClassificationStats::new(graph);
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

/// Noise-floor graph re-estimated from the training shots with `rounds`
/// rounds.
pub fn estimate_graph(
    layout: &CodeLayout,
    floor_noise: &NoiseParams,
    rounds: usize,
    training: &[ShotRecord],
    models: Option<&QubitModels>,
) -> Result<DecodingGraph> {
    let floor = build_noise_floor_graph(layout, floor_noise, rounds)?;
    let stats = defect_stats(layout, &floor, training, models)?;
    estimate_pij_graph(&stats, &floor)
}

/// A decoder for one round count.
pub enum ShotDecoder {
    Hard { decoder: Decoder, models: Option<QubitModels> },
    Soft(SoftDecoder),
}

impl ShotDecoder {
    pub fn hard(graph: &DecodingGraph, models: Option<QubitModels>) -> Result<Self> {
        Ok(Self::Hard {
            decoder: Decoder::new(graph)?,
            models,
        })
    }

    /// Soft decoder whose classification statistics come from `training`.
    pub fn soft(graph: &DecodingGraph, models: QubitModels, training: &[ShotRecord]) -> Result<Self> {
        let stats = classification_stats(graph, training, &models)?;
        Ok(Self::Soft(SoftDecoder::new(graph, models, &stats)?))
    }

    fn readout_models(&self) -> Option<&QubitModels> {
        match self {
            Self::Hard { models, .. } => models.as_ref(),
            Self::Soft(s) => Some(s.models()),
        }
    }

    pub fn decode(&self, layout: &CodeLayout, shot: &ShotRecord) -> Result<DecodedShot> {
        let (defects, z_out) = shot.defects(layout, self.readout_models())?;
        let active = active_detectors(&defects);
        let result = match self {
            Self::Hard { decoder, .. } => decoder.decode(&active)?,
            Self::Soft(s) => s.decode(shot, &active)?,
        };
        Ok(DecodedShot {
            shot_id: shot.shot_id,
            rounds: shot.rounds,
            initial_state: shot.initial_state.clone(),
            z_in: layout.logical_parity(&shot.initial_bits()),
            z_out,
            flip: result.flip,
            confidence: result.confidence,
            weight: result.weight,
            complementary_weight: result.complementary_weight,
        })
    }
}

/// Decode every shot with the decoder for its round count, in input order.
pub fn decode_shots(
    layout: &CodeLayout,
    decoders: &[(usize, ShotDecoder)],
    shots: &[ShotRecord],
) -> Result<Vec<DecodedShot>> {
    shots
        .par_iter()
        .map(|shot| {
            let (_, d) = decoders
                .iter()
                .find(|(r, _)| *r == shot.rounds)
                .ok_or_else(|| invalid(format!("no decoder for {} rounds (shot {})", shot.rounds, shot.shot_id)))?;
            d.decode(layout, shot)
        })
        .collect()
}

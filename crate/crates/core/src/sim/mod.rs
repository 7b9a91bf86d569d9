//! Synthetic Surface-13 memory-experiment data.
//!
//! Shots are drawn from an edge-level generative model: every qubit-error
//! edge of a generator graph fires independently and toggles the true
//! outcomes of the measurements it affects. Analog samples are then drawn
//! from the readout model of each measured state, so classification errors
//! only appear when the samples are hardened. Without readout models the
//! dataset is classified directly and outcomes flip with `p_meas_class`.
//!
//! Leakage is a synthetic model: an unleaked ancilla leaks at a
//! measurement with probability `p_leak`; a leaked ancilla reads from the
//! |2> cloud and seeps back before each later measurement with probability
//! `p_seep`, returning to a random computational state.

mod dataset;
mod record;
mod split;

pub use dataset::{read_dataset, write_dataset, Dataset, DatasetFormat, DatasetHeader, DatasetWriter, DATASET_VERSION};
pub use record::{active_detectors, HardOutcomes, QubitModels, Readout, ShotRecord, Truth};
pub use split::heralded_split;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{build_noise_floor_graph, format_bits, CodeLayout, DecodingGraph, EdgeKind, MeasurementKey, NoiseParams};
use crate::error::{invalid, Result};
use crate::readout::{Calibration, IqSample, ModelSet, ReadoutModel};
use crate::rng::substream;

/// Number of shots generated per parallel work item.
pub const CHUNK_SHOTS: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageParams {
    /// Probability that an unleaked ancilla leaks at a measurement.
    pub p_leak: f64,
    /// Probability that a leaked ancilla returns before a measurement.
    pub p_seep: f64,
}

impl Default for LeakageParams {
    fn default() -> Self {
        Self {
            p_leak: 0.0014,
            p_seep: 0.1,
        }
    }
}

impl LeakageParams {
    pub fn none() -> Self {
        Self {
            p_leak: 0.0,
            p_seep: 1.0,
        }
    }
}

fn default_rounds() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub noise: NoiseParams,
    /// Analog readout models; `None` produces classified outcomes.
    #[serde(default)]
    pub readout: Option<ModelSet>,
    #[serde(default)]
    pub leakage: LeakageParams,
    #[serde(default = "default_rounds")]
    pub rounds: Vec<usize>,
    /// Shots per (initial state, rounds) cell.
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub keep_truth: bool,
}

impl SimConfig {
    pub fn new(shots: u64, seed: u64) -> Self {
        Self {
            noise: NoiseParams::default(),
            readout: None,
            leakage: LeakageParams::default(),
            rounds: default_rounds(),
            shots,
            seed,
            keep_truth: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        let LeakageParams { p_leak, p_seep } = self.leakage;
        if !(0.0..=1.0).contains(&p_leak) || !(0.0..=1.0).contains(&p_seep) {
            return Err(invalid("leakage probabilities must lie in [0, 1]"));
        }
        if p_leak > 0.0 && p_seep == 0.0 {
            return Err(invalid("p_seep must be positive when leakage is enabled"));
        }
        if self.rounds.is_empty() || self.rounds.contains(&0) {
            return Err(invalid("rounds must be a nonempty list of positive integers"));
        }
        if let Some(set) = &self.readout {
            for m in set.models.values() {
                m.validate()?;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        crate::config_hash_of(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    pub fn total_shots(&self, layout: &CodeLayout) -> u64 {
        self.rounds.len() as u64 * layout.initial_states().len() as u64 * self.shots
    }
}

/// Graph whose qubit-error edges drive the sampler: the noise-floor graph
/// without classification errors.
pub fn generator_graph(layout: &CodeLayout, noise: &NoiseParams, rounds: usize) -> Result<DecodingGraph> {
    let params = NoiseParams {
        p_meas_class: 0.0,
        ..*noise
    };
    build_noise_floor_graph(layout, &params, rounds)
}

/// Draws individual shots for a fixed layout, readout and leakage model.
#[derive(Debug, Clone)]
pub struct Sampler {
    layout: CodeLayout,
    models: Option<QubitModels>,
    p_meas_class: f64,
    leakage: LeakageParams,
    keep_truth: bool,
}

impl Sampler {
    pub fn new(layout: &CodeLayout, config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let models = config.readout.as_ref().map(|set| QubitModels::new(layout, set)).transpose()?;
        if let Some(m) = &models {
            if let Some(bad) = m.ancilla.iter().chain(&m.data).find(|q| q.mix2d.is_none()) {
                return Err(invalid(format!("qubit {} needs a three-state model to be simulated", bad.qubit_id)));
            }
        }
        Ok(Self {
            layout: layout.clone(),
            models,
            p_meas_class: config.noise.p_meas_class,
            leakage: config.leakage,
            keep_truth: config.keep_truth,
        })
    }

    pub fn layout(&self) -> &CodeLayout {
        &self.layout
    }

    /// One shot prepared in `initial` (data-qubit bits).
    pub fn sample_shot<R: Rng + ?Sized>(
        &self,
        graph: &DecodingGraph,
        initial: &[u8],
        shot_id: u64,
        rng: &mut R,
    ) -> Result<ShotRecord> {
        let rounds = graph.rounds;
        let na = self.layout.num_ancillas();
        let mut anc = vec![vec![0u8; na]; rounds];
        let mut data = initial.to_vec();
        let mut fired = Vec::new();
        let mut logical = false;
        for (k, e) in graph.edges.iter().enumerate() {
            if e.kind == EdgeKind::ClassificationError || e.p <= 0.0 {
                continue;
            }
            if rng.random::<f64>() < e.p {
                fired.push(k);
                logical ^= e.logical_flip;
                for &m in &e.toggles {
                    match m {
                        MeasurementKey::Ancilla { ancilla, round } => anc[round - 1][ancilla] ^= 1,
                        MeasurementKey::Data { qubit } => data[qubit] ^= 1,
                    }
                }
            }
        }

        // True measured states including leakage.
        let mut states = anc.clone();
        if self.leakage.p_leak > 0.0 {
            for i in 0..na {
                let mut leaked = false;
                let mut offset = 0u8;
                for row in states.iter_mut() {
                    if leaked && rng.random::<f64>() < self.leakage.p_seep {
                        leaked = false;
                        offset ^= rng.random::<bool>() as u8;
                    }
                    if !leaked && rng.random::<f64>() < self.leakage.p_leak {
                        leaked = true;
                    }
                    row[i] = if leaked { 2 } else { row[i] ^ offset };
                }
            }
        }

        let readout = match &self.models {
            Some(m) => Readout::Analog {
                ancilla_iq: states
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(&m.ancilla)
                            .map(|(&s, model)| model.sample_iq(s, rng))
                            .collect::<Result<Vec<IqSample>>>()
                    })
                    .collect::<Result<_>>()?,
                final_data_iq: data
                    .iter()
                    .zip(&m.data)
                    .map(|(&s, model)| model.sample_iq(s, rng))
                    .collect::<Result<_>>()?,
            },
            None => {
                let mut classify = |s: u8| -> u8 {
                    // A leaked ancilla reads as |1> on a two-state discriminator.
                    let bit = s.min(1);
                    bit ^ (rng.random::<f64>() < self.p_meas_class) as u8
                };
                let ancilla = states.iter().map(|row| row.iter().map(|&s| classify(s)).collect()).collect();
                let final_data = data.iter().map(|&s| classify(s)).collect();
                Readout::Hard { ancilla, final_data }
            }
        };

        Ok(ShotRecord {
            shot_id,
            rounds,
            initial_state: format_bits(initial),
            readout,
            truth: self.keep_truth.then(|| Truth {
                fired_edges: fired,
                logical_flip: logical,
                ancilla_states: states,
            }),
        })
    }
}

/// Position of a shot in the dataset enumeration: rounds-major, then
/// initial state, then repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotIndex {
    pub rounds_index: usize,
    pub state_index: usize,
    pub repetition: u64,
}

pub fn shot_index(shot_id: u64, num_states: usize, shots: u64) -> ShotIndex {
    let per_rounds = num_states as u64 * shots;
    let within = shot_id % per_rounds;
    ShotIndex {
        rounds_index: (shot_id / per_rounds) as usize,
        state_index: (within / shots) as usize,
        repetition: within % shots,
    }
}

/// Streams a full simulated dataset in shot-id order.
pub struct Simulation {
    config: SimConfig,
    sampler: Sampler,
    graphs: Vec<DecodingGraph>,
    states: Vec<Vec<u8>>,
}

impl Simulation {
    pub fn new(layout: &CodeLayout, config: &SimConfig) -> Result<Self> {
        let sampler = Sampler::new(layout, config)?;
        let graphs = config
            .rounds
            .iter()
            .map(|&r| generator_graph(layout, &config.noise, r))
            .collect::<Result<_>>()?;
        Ok(Self {
            config: config.clone(),
            sampler,
            graphs,
            states: layout.initial_states(),
        })
    }

    pub fn total_shots(&self) -> u64 {
        self.config.rounds.len() as u64 * self.states.len() as u64 * self.config.shots
    }

    /// Generator graph for each entry of the configured rounds list.
    pub fn graphs(&self) -> &[DecodingGraph] {
        &self.graphs
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader::new(&self.sampler.layout, &self.config)
    }

    pub fn shot(&self, shot_id: u64) -> Result<ShotRecord> {
        let idx = shot_index(shot_id, self.states.len(), self.config.shots);
        let mut rng = substream(self.config.seed, "sim/shot", shot_id);
        self.sampler
            .sample_shot(&self.graphs[idx.rounds_index], &self.states[idx.state_index], shot_id, &mut rng)
    }

    /// Generate shots `range` in parallel; the result is in shot-id order.
    pub fn shots(&self, range: std::ops::Range<u64>) -> Result<Vec<ShotRecord>> {
        let chunks: Vec<(u64, u64)> = (range.start..range.end)
            .step_by(CHUNK_SHOTS as usize)
            .map(|s| (s, (s + CHUNK_SHOTS).min(range.end)))
            .collect();
        let parts = chunks
            .par_iter()
            .map(|&(a, b)| (a..b).map(|id| self.shot(id)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    pub fn run(&self) -> Result<Vec<ShotRecord>> {
        self.shots(0..self.total_shots())
    }

    /// Generate and write the dataset in blocks so memory stays bounded.
    pub fn write(&self, writer: &mut DatasetWriter) -> Result<()> {
        let total = self.total_shots();
        let block = CHUNK_SHOTS * 64;
        let mut start = 0;
        while start < total {
            let end = (start + block).min(total);
            for shot in self.shots(start..end)? {
                writer.write(&shot)?;
            }
            start = end;
        }
        Ok(())
    }
}

/// Run a simulation entirely in memory.
pub fn simulate(layout: &CodeLayout, config: &SimConfig) -> Result<Dataset> {
    let sim = Simulation::new(layout, config)?;
    Ok(Dataset {
        header: sim.header(),
        shots: sim.run()?,
    })
}

/// Write a simulated dataset to `path` without holding it in memory.
pub fn generate_dataset(
    layout: &CodeLayout,
    config: &SimConfig,
    path: &std::path::Path,
    format: DatasetFormat,
) -> Result<()> {
    let sim = Simulation::new(layout, config)?;
    let mut writer = DatasetWriter::create(path, format, &sim.header())?;
    sim.write(&mut writer)?;
    writer.finish()
}

/// Synthetic calibration clouds for every model in `models`.
///
/// With `decay_beta`, |1> samples come from forward-simulated decay during
/// the integration window along the projection axis instead of the mixture.
pub fn generate_calibration(
    models: &ModelSet,
    samples: usize,
    states: usize,
    decay_beta: Option<f64>,
    seed: u64,
) -> Result<Calibration> {
    let mut out = Calibration::new();
    for (q, model) in &models.models {
        let mut per_state = std::collections::BTreeMap::new();
        for s in 0..states as u8 {
            let mut rng = substream(seed, &format!("calibration/{q}/{s}"), 0);
            let cloud = (0..samples)
                .map(|_| calibration_sample(model, s, decay_beta, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            per_state.insert(s.to_string(), cloud);
        }
        out.insert(q.clone(), per_state);
    }
    Ok(out)
}

fn calibration_sample<R: Rng + ?Sized>(
    model: &ReadoutModel,
    state: u8,
    decay_beta: Option<f64>,
    rng: &mut R,
) -> Result<IqSample> {
    match decay_beta {
        Some(beta) if state < 2 => {
            let noise = model.sample_iq(0, rng)?;
            let m = model.mix2d.as_ref().expect("sampler models have three states");
            let frac = if state == 0 {
                0.0
            } else {
                crate::readout::decay_fraction(beta, rng)
            };
            // Noise around |0>, shifted by the time-averaged signal.
            let shift = [frac * (m.mu[1][0] - m.mu[0][0]), frac * (m.mu[1][1] - m.mu[0][1])];
            Ok(IqSample::new(noise.i_volt + shift[0], noise.q_volt + shift[1]))
        }
        _ => model.sample_iq(state, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::detectors_no_reset;

    #[test]
    fn generator_toggles_reproduce_edge_signatures() {
        let layout = CodeLayout::surface13();
        for rounds in [1, 2, 3, 5] {
            let g = generator_graph(&layout, &NoiseParams::lower_bound(), rounds).unwrap();
            let initial = vec![0u8; 9];
            for e in g.edges.iter().filter(|e| e.kind != EdgeKind::ClassificationError) {
                let mut anc = vec![vec![0u8; 4]; rounds];
                let mut data = initial.clone();
                for &m in &e.toggles {
                    match m {
                        MeasurementKey::Ancilla { ancilla, round } => anc[round - 1][ancilla] ^= 1,
                        MeasurementKey::Data { qubit } => data[qubit] ^= 1,
                    }
                }
                let d = detectors_no_reset(&layout, &anc, &data).unwrap();
                let active = active_detectors(&d);
                let expected: Vec<usize> = e.endpoints.iter().copied().filter(|&n| n != g.boundary()).collect();
                assert_eq!(active, expected, "edge {e:?}");
                assert_eq!(layout.logical_parity(&data) == 1, e.logical_flip, "edge {e:?}");
            }
        }
    }

    #[test]
    fn shot_index_enumeration() {
        assert_eq!(
            shot_index(16 * 3 + 5, 16, 3),
            ShotIndex {
                rounds_index: 1,
                state_index: 1,
                repetition: 2
            }
        );
    }

    #[test]
    fn noiseless_shots_have_no_defects() {
        let layout = CodeLayout::surface13();
        let mut config = SimConfig::new(2, 7);
        config.noise = NoiseParams::noiseless();
        config.leakage = LeakageParams::none();
        config.rounds = vec![3];
        config.readout = Some(ModelSet::synthetic(
            layout.ancillas.iter().chain(&layout.data_qubits).map(String::as_str),
            1.0,
            1e-6,
        ));
        let data = simulate(&layout, &config).unwrap();
        let models = QubitModels::new(&layout, config.readout.as_ref().unwrap()).unwrap();
        assert_eq!(data.shots.len(), 32);
        for shot in &data.shots {
            let (d, logical) = shot.defects(&layout, Some(&models)).unwrap();
            assert!(d.iter().all(|&x| x == 0));
            assert_eq!(logical, 0);
            assert!(!shot.truth.as_ref().unwrap().logical_flip);
        }
    }

    #[test]
    fn certain_edge_always_fires() {
        let layout = CodeLayout::surface13();
        let mut config = SimConfig::new(1, 3);
        config.noise = NoiseParams::noiseless();
        config.leakage = LeakageParams::none();
        let sampler = Sampler::new(&layout, &config).unwrap();
        let mut g = generator_graph(&layout, &NoiseParams::lower_bound(), 2).unwrap();
        let k = g.edges.iter().position(|e| e.kind == EdgeKind::DataQubitError && e.logical_flip).unwrap();
        for (j, e) in g.edges.iter_mut().enumerate() {
            e.p = if j == k { 1.0 } else { 0.0 };
        }
        let mut rng = substream(0, "test", 0);
        for id in 0..20 {
            let shot = sampler.sample_shot(&g, &[0; 9], id, &mut rng).unwrap();
            let (d, logical) = shot.defects(&layout, None).unwrap();
            let expected: Vec<usize> = g.edges[k].endpoints.iter().copied().filter(|&n| n != g.boundary()).collect();
            assert_eq!(active_detectors(&d), expected);
            assert_eq!(logical, 1);
            assert!(shot.truth.unwrap().logical_flip);
        }
    }
}

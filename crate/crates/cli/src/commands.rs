//! One function per subcommand. Each reads its inputs from the output
//! directory unless given explicit paths and returns the files it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use softdec_core::analysis::{
    confidence_histogram, fidelity, fit_logical, postselect_confidence, postselect_leakage, read_decoded,
    write_decoded, write_fidelity_csv, write_histogram_csv, write_leakage_csv, write_retained_csv, DecodeHeader,
    DecodedShot, FitOptions, FitSummary, PostselectMode,
};
use softdec_core::code::{build_noise_floor_graph, CodeLayout, DecodingGraph};
use softdec_core::error::from_json_str;
use softdec_core::pipeline::{decode_shots, estimate_graph, DecodeMode, ShotDecoder};
use softdec_core::readout::{
    fit_amplitude_damping, fit_three_state, fit_two_state_with, read_calibration, write_calibration, FitBackend,
    ModelSet,
};
use softdec_core::sim::{
    generate_calibration, generate_dataset, heralded_split, read_dataset, write_dataset, Dataset, DatasetHeader,
    QubitModels,
};
use softdec_core::{Error, Result};

use crate::config::PipelineConfig;

/// An error together with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { code: 1, error }
    }
}

fn fit_failure(error: Error) -> Failure {
    Failure { code: 2, error }
}

pub type CmdResult<T = Vec<PathBuf>> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gaussian,
    Ampdamp,
    Histogram,
}

/// Decoding graphs per number of rounds, as written by `build-graph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub config_hash: String,
    /// Whether edge probabilities were estimated from training data.
    pub estimated: bool,
    pub graphs: Vec<DecodingGraph>,
}

impl GraphFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let file: GraphFile = from_json_str(path, &text)?;
        for g in &file.graphs {
            g.validate()?;
        }
        Ok(file)
    }
}

fn ensure_out(cfg: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::Io {
        path: cfg.out.clone(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn is_analog(data: &Dataset) -> bool {
    data.shots.first().is_some_and(|s| s.iq().is_ok())
}

/// Models from the config, falling back to the ones echoed in the dataset
/// header by the simulator.
fn resolve_models(cfg: &PipelineConfig, header: &DatasetHeader, layout: &CodeLayout) -> Result<QubitModels> {
    let set = match cfg.models(layout)? {
        Some(set) => set,
        None => match header.config.get("readout") {
            Some(v) if !v.is_null() => serde_json::from_value::<ModelSet>(v.clone())?,
            _ => {
                return Err(Error::InvalidInput(
                    "analog data needs readout models (readout.models in the config)".into(),
                ))
            }
        },
    };
    QubitModels::new(layout, &set)
}

fn optional_models(cfg: &PipelineConfig, data: &Dataset, layout: &CodeLayout) -> Result<Option<QubitModels>> {
    if is_analog(data) {
        resolve_models(cfg, &data.header, layout).map(Some)
    } else {
        Ok(None)
    }
}

pub fn calibrate(cfg: &PipelineConfig, calib: &Path, states: usize, kind: ModelKind) -> CmdResult {
    let data = read_calibration(calib)?;
    if data.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no qubits in calibration file", calib.display())).into());
    }
    if !(2..=3).contains(&states) {
        return Err(Error::InvalidInput(format!("--states must be 2 or 3, got {states}")).into());
    }
    let mut set = ModelSet {
        config_hash: cfg.hash(),
        models: BTreeMap::new(),
    };
    for (qubit, clouds) in &data {
        let cloud = |s: &str| -> Result<&[_]> {
            clouds
                .get(s)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::InvalidInput(format!("{qubit}: no calibration samples for state {s}")))
        };
        let (c0, c1) = (cloud("0")?, cloud("1")?);
        let backend = if kind == ModelKind::Histogram {
            FitBackend::Histogram
        } else {
            FitBackend::Em
        };
        let mut model = fit_two_state_with(qubit, c0, c1, backend).map_err(fit_failure)?;
        if states == 3 {
            model.mix2d = fit_three_state(qubit, c0, c1, cloud("2")?).map_err(fit_failure)?.mix2d;
        }
        if kind == ModelKind::Ampdamp {
            model.amp_damp = Some(fit_amplitude_damping(c0, c1).map_err(fit_failure)?);
        }
        info!("{qubit}: fitted separation {:.3}", (model.mix1d.mu1 - model.mix1d.mu0).abs() / model.mix1d.sigma);
        set.models.insert(qubit.clone(), model);
    }
    ensure_out(cfg)?;
    let path = cfg.path("models.json");
    set.write(&path)?;
    Ok(vec![path])
}

pub fn generate_calibration_data(
    cfg: &PipelineConfig,
    samples: usize,
    states: usize,
    beta: Option<f64>,
) -> CmdResult {
    let layout = cfg.layout()?;
    let models = cfg
        .models(&layout)?
        .ok_or_else(|| Error::InvalidInput("calibration data needs readout models or readout.separation".into()))?;
    let seed = cfg.seed.ok_or_else(|| Error::InvalidInput("calibration data needs a seed".into()))?;
    let data = generate_calibration(&models, samples, states, beta, seed)?;
    ensure_out(cfg)?;
    let path = cfg.path("calibration.json");
    write_calibration(&path, &data)?;
    Ok(vec![path])
}

pub fn simulate(cfg: &PipelineConfig) -> CmdResult {
    let layout = cfg.layout()?;
    let sim = cfg.sim_config(&layout)?;
    ensure_out(cfg)?;
    let path = cfg.dataset_path("dataset");
    info!("simulating {} shots", sim.total_shots(&layout));
    generate_dataset(&layout, &sim, &path, cfg.format)?;
    Ok(vec![path])
}

pub fn split(cfg: &PipelineConfig, dataset: Option<&Path>) -> CmdResult {
    let src = dataset.map_or_else(|| cfg.dataset_path("dataset"), Path::to_path_buf);
    let data = read_dataset(&src)?;
    let seed = cfg.seed.ok_or_else(|| Error::InvalidInput("split needs a seed".into()))?;
    let parts = heralded_split(&data.shots, cfg.split, seed)?;
    ensure_out(cfg)?;
    let mut written = Vec::new();
    for (name, shots) in ["train", "val", "test"].into_iter().zip(parts) {
        let path = cfg.dataset_path(name);
        info!("{name}: {} shots", shots.len());
        let part = Dataset {
            header: data.header.clone(),
            shots,
        };
        write_dataset(&path, &part, cfg.format)?;
        written.push(path);
    }
    Ok(written)
}

pub fn build_graph(cfg: &PipelineConfig, train: Option<&Path>, floor_only: bool) -> CmdResult {
    let layout = cfg.layout()?;
    let graphs = if floor_only {
        cfg.rounds
            .iter()
            .map(|&r| build_noise_floor_graph(&layout, &cfg.noise, r))
            .collect::<Result<Vec<_>>>()?
    } else {
        let src = train.map_or_else(|| cfg.dataset_path("train"), Path::to_path_buf);
        let data = read_dataset(&src)?;
        let models = optional_models(cfg, &data, &layout)?;
        let rounds: std::collections::BTreeSet<usize> = data.shots.iter().map(|s| s.rounds).collect();
        rounds
            .into_iter()
            .map(|r| estimate_graph(&layout, &cfg.noise, r, &data.shots, models.as_ref()))
            .collect::<Result<Vec<_>>>()?
    };
    ensure_out(cfg)?;
    let path = cfg.path("graphs.json");
    write_json(
        &path,
        &GraphFile {
            config_hash: cfg.hash(),
            estimated: !floor_only,
            graphs,
        },
    )?;
    Ok(vec![path])
}

pub fn decoded_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.path(&format!("decoded_{}.jsonl", cfg.mode.as_str()))
}

pub fn decode(cfg: &PipelineConfig, dataset: Option<&Path>, train: Option<&Path>, graphs: Option<&Path>) -> CmdResult {
    let layout = cfg.layout()?;
    let src = dataset.map_or_else(|| cfg.dataset_path("test"), Path::to_path_buf);
    let data = read_dataset(&src)?;
    if cfg.mode == DecodeMode::Soft && data.shots.iter().any(|s| s.iq().is_err()) {
        return Err(Error::MissingIq.into());
    }
    let graph_path = graphs.map_or_else(|| cfg.path("graphs.json"), Path::to_path_buf);
    let file = GraphFile::read(&graph_path)?;
    let models = optional_models(cfg, &data, &layout)?;
    let training = match cfg.mode {
        DecodeMode::Soft => {
            let p = train.map_or_else(|| cfg.dataset_path("train"), Path::to_path_buf);
            read_dataset(&p)?.shots
        }
        DecodeMode::Hard => Vec::new(),
    };
    let needed: std::collections::BTreeSet<usize> = data.shots.iter().map(|s| s.rounds).collect();
    let mut decoders = Vec::new();
    for r in needed {
        let graph = file
            .graphs
            .iter()
            .find(|g| g.rounds == r)
            .ok_or_else(|| Error::InvalidInput(format!("{}: no graph for {r} rounds", graph_path.display())))?;
        let decoder = match cfg.mode {
            DecodeMode::Hard => ShotDecoder::hard(graph, models.clone())?,
            DecodeMode::Soft => ShotDecoder::soft(graph, models.clone().ok_or(Error::MissingIq)?, &training)?,
        };
        decoders.push((r, decoder));
    }
    info!("decoding {} shots ({})", data.shots.len(), cfg.mode.as_str());
    let shots = decode_shots(&layout, &decoders, &data.shots)?;
    ensure_out(cfg)?;
    let path = decoded_path(cfg);
    let header = DecodeHeader::new(cfg.hash(), cfg.mode.as_str(), data.header.config_hash.clone());
    write_decoded(&path, &header, &shots)?;
    Ok(vec![path])
}

fn read_results(cfg: &PipelineConfig, decoded: Option<&Path>) -> Result<Vec<DecodedShot>> {
    let path = decoded.map_or_else(|| decoded_path(cfg), Path::to_path_buf);
    Ok(read_decoded(&path)?.1)
}

fn fit_summary(cfg: &PipelineConfig, shots: &[DecodedShot]) -> CmdResult<FitSummary> {
    let points = fidelity(shots)?;
    let opts = FitOptions {
        min_rounds: cfg.min_rounds,
    };
    let fit = fit_logical(&points, &opts).map_err(fit_failure)?;
    Ok(FitSummary::new(&fit, points, cfg.hash(), cfg.echo()))
}

pub fn fit(cfg: &PipelineConfig, decoded: Option<&Path>) -> CmdResult {
    let shots = read_results(cfg, decoded)?;
    let dir = cfg.report_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let points = fidelity(&shots)?;
    let csv = dir.join("fidelity_vs_R.csv");
    write_fidelity_csv(&csv, &cfg.hash(), &points)?;
    let summary = fit_summary(cfg, &shots)?;
    info!("eps_L = {:.5} +- {:.5}", summary.eps_l, summary.eps_l_sigma);
    let json = dir.join("fit_summary.json");
    summary.write(&json)?;
    Ok(vec![csv, json])
}

pub fn postselect(cfg: &PipelineConfig, decoded: Option<&Path>, mode: Option<PostselectMode>) -> CmdResult {
    let mode = mode
        .or(cfg.postselect)
        .ok_or_else(|| Error::InvalidInput("no post-selection mode (--ps-mode or \"postselect\" in the config)".into()))?;
    let shots = read_results(cfg, decoded)?;
    let hash = cfg.hash();
    let dir = cfg.report_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut written = Vec::new();

    let hist = confidence_histogram(&shots, cfg.histogram_bins)?;
    for (r, bins) in &hist.per_round {
        let p = dir.join(format!("confidence_hist_R{r}.csv"));
        write_histogram_csv(&p, &hash, bins)?;
        written.push(p);
    }

    let result = postselect_confidence(&shots, mode)?;
    let p = dir.join("retained_fraction.csv");
    write_retained_csv(&p, &hash, &result)?;
    written.push(p);

    let kept_rounds = result.kept.iter().map(|s| s.rounds).collect::<std::collections::BTreeSet<_>>();
    if kept_rounds.len() >= 3 {
        match fit_summary(cfg, &result.kept) {
            Ok(mut summary) => {
                summary.retained = Some(
                    result
                        .counts
                        .keys()
                        .filter_map(|&r| result.retained_fraction(r).map(|f| (r, f)))
                        .collect(),
                );
                let p = dir.join("fit_summary_postselected.json");
                summary.write(&p)?;
                written.push(p);
            }
            Err(f) => warn!("no fit after post-selection: {}", f.error),
        }
    }
    Ok(written)
}

pub fn postselect_leakage_cmd(cfg: &PipelineConfig, dataset: Option<&Path>) -> CmdResult {
    let layout = cfg.layout()?;
    let src = dataset.map_or_else(|| cfg.dataset_path("test"), Path::to_path_buf);
    let data = read_dataset(&src)?;
    if data.shots.iter().any(|s| s.iq().is_err()) {
        return Err(Error::InvalidInput("leakage post-selection requires IQ data".into()).into());
    }
    let models = resolve_models(cfg, &data.header, &layout)?;
    let selection = postselect_leakage(&data.shots, &models)?;
    ensure_out(cfg)?;
    let csv = cfg.path("leakage_retained.csv");
    write_leakage_csv(&csv, &cfg.hash(), &selection.retained)?;
    let kept = cfg.dataset_path("leakage_kept");
    write_dataset(
        &kept,
        &Dataset {
            header: data.header,
            shots: selection.kept,
        },
        cfg.format,
    )?;
    Ok(vec![csv, kept])
}

/// Simulate, split, estimate graphs, decode, fit and, when configured,
/// post-select.
pub fn run(cfg: &PipelineConfig) -> CmdResult {
    let mut written = simulate(cfg)?;
    written.extend(split(cfg, None)?);
    written.extend(build_graph(cfg, None, false)?);
    written.extend(decode(cfg, None, None, None)?);
    written.extend(fit(cfg, None)?);
    if cfg.postselect.is_some() {
        written.extend(postselect(cfg, None, None)?);
    }
    Ok(written)
}

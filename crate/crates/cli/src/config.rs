//! Pipeline configuration: JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use softdec_core::analysis::PostselectMode;
use softdec_core::code::{CodeLayout, NoiseParams};
use softdec_core::error::from_json_str;
use softdec_core::pipeline::DecodeMode;
use softdec_core::readout::ModelSet;
use softdec_core::sim::{DatasetFormat, LeakageParams, SimConfig};
use softdec_core::{config_hash_of, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    /// Model file written by `calibrate`.
    pub models: Option<PathBuf>,
    /// Synthetic Gaussian readout with this |0>-|1> separation, used when no
    /// model file is given.
    pub separation: Option<f64>,
    pub sigma: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            models: None,
            separation: None,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Layout JSON; the built-in Surface-13 layout when absent.
    pub layout: Option<PathBuf>,
    pub noise: NoiseParams,
    pub readout: ReadoutConfig,
    pub leakage: LeakageParams,
    pub seed: Option<u64>,
    pub rounds: Vec<usize>,
    /// Shots per (initial state, rounds) cell.
    pub shots: u64,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub mode: DecodeMode,
    pub postselect: Option<PostselectMode>,
    /// Smallest round count included in the fit.
    pub min_rounds: Option<usize>,
    pub histogram_bins: usize,
    pub format: DatasetFormat,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            layout: None,
            noise: NoiseParams::default(),
            readout: ReadoutConfig::default(),
            leakage: LeakageParams::default(),
            seed: None,
            rounds: vec![1, 2, 4, 8, 16],
            shots: 1000,
            split: [0.4, 0.1, 0.5],
            mode: DecodeMode::Hard,
            postselect: None,
            min_rounds: None,
            histogram_bins: 20,
            format: DatasetFormat::Jsonl,
            out: PathBuf::from("out"),
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rounds: Option<Vec<usize>>,
    pub shots: Option<u64>,
    pub mode: Option<DecodeMode>,
    pub format: Option<DatasetFormat>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                from_json_str(p, &text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(s) = flags.seed {
            cfg.seed = Some(s);
        }
        if let Some(r) = &flags.rounds {
            cfg.rounds = r.clone();
        }
        if let Some(n) = flags.shots {
            cfg.shots = n;
        }
        if let Some(m) = flags.mode {
            cfg.mode = m;
        }
        if let Some(f) = flags.format {
            cfg.format = f;
        }
        if let Some(o) = &flags.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }

    /// The config as hashed and echoed into reports: the output directory is
    /// blanked so the same run written to two places is byte-identical.
    fn portable(&self) -> Self {
        Self {
            out: PathBuf::new(),
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON of [`Self::portable`].
    pub fn hash(&self) -> String {
        config_hash_of(serde_json::to_string(&self.portable()).expect("config serializes").as_bytes())
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self.portable()).expect("config serializes")
    }

    pub fn layout(&self) -> Result<CodeLayout> {
        match &self.layout {
            None => Ok(CodeLayout::surface13()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                from_json_str(p, &text)
            }
        }
    }

    /// Readout models named by the config, if any.
    pub fn models(&self, layout: &CodeLayout) -> Result<Option<ModelSet>> {
        if let Some(p) = &self.readout.models {
            return ModelSet::read(p).map(Some);
        }
        Ok(self.readout.separation.map(|sep| {
            let qubits = layout.ancillas.iter().chain(&layout.data_qubits).map(String::as_str);
            ModelSet::synthetic(qubits, sep, self.readout.sigma)
        }))
    }

    pub fn sim_config(&self, layout: &CodeLayout) -> Result<SimConfig> {
        let seed = self
            .seed
            .ok_or_else(|| Error::InvalidInput("simulation needs a seed (--seed or \"seed\" in the config)".into()))?;
        let config = SimConfig {
            noise: self.noise,
            readout: self.models(layout)?,
            leakage: self.leakage,
            rounds: self.rounds.clone(),
            shots: self.shots,
            seed,
            keep_truth: true,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// `<out>/<stem>.<ext>` for datasets in the configured format.
    pub fn dataset_path(&self, stem: &str) -> PathBuf {
        self.out.join(format!("{stem}.{}", self.format.extension()))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join(format!("report_{}", self.mode.as_str()))
    }
}

pub fn parse_rounds(s: &str) -> std::result::Result<Vec<usize>, String> {
    let rounds: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad round count {t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if rounds.is_empty() || rounds.contains(&0) {
        return Err("rounds must be positive".into());
    }
    Ok(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 5, "shots": 20, "rounds": [1, 3]}"#).unwrap();
        let flags = Overrides {
            shots: Some(7),
            ..Default::default()
        };
        let c = PipelineConfig::load(Some(&p), &flags).unwrap();
        assert_eq!((c.seed, c.shots, c.rounds.clone()), (Some(5), 7, vec![1, 3]));
        assert_eq!(c.histogram_bins, 20);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"noise": {"p_1q": "x"}}"#).unwrap();
        let e = PipelineConfig::load(Some(&p), &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("noise.p_1q"), "{e}");
        std::fs::write(&p, r#"{"readout": {"sepration": 3}}"#).unwrap();
        let e = PipelineConfig::load(Some(&p), &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("readout"), "{e}");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            out: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let c = PipelineConfig { shots: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rounds_list() {
        assert_eq!(parse_rounds("1,2, 4").unwrap(), vec![1, 2, 4]);
        assert!(parse_rounds("1,0").is_err());
        assert!(parse_rounds("a").is_err());
    }
}

//! Report files. Every CSV starts with a `# config_hash=<hex>` comment line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BinStats, DecodedShot, FidelityPoint, LogicalFit, PostselectResult};
use crate::error::{from_json_str, io, Error, Result};

pub const DECODE_FORMAT: &str = "softdec-decode";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub mode: String,
    pub dataset_config_hash: String,
}

impl DecodeHeader {
    pub fn new(config_hash: String, mode: &str, dataset_config_hash: String) -> Self {
        Self {
            format: DECODE_FORMAT.into(),
            version: 1,
            config_hash,
            mode: mode.into(),
            dataset_config_hash,
        }
    }
}

/// Write decoder output as JSON Lines: the header, then one shot per line.
pub fn write_decoded(path: &Path, header: &DecodeHeader, shots: &[DecodedShot]) -> Result<()> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |v: String| writeln!(w, "{v}").map_err(|e| io(path, e));
    put(serde_json::to_string(header)?)?;
    for s in shots {
        put(serde_json::to_string(s)?)?;
    }
    w.flush().map_err(|e| io(path, e))
}

pub fn read_decoded(path: &Path) -> Result<(DecodeHeader, Vec<DecodedShot>)> {
    let file = File::open(path).map_err(|e| io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Schema {
            path: format!("{}:header", path.display()),
            message: "empty decode file".into(),
        })?
        .map_err(|e| io(path, e))?;
    let header: DecodeHeader = from_json_str(path, &first)?;
    if header.format != DECODE_FORMAT {
        return Err(Error::Schema {
            path: format!("{}:format", path.display()),
            message: format!("expected {DECODE_FORMAT:?}"),
        });
    }
    let mut shots = Vec::new();
    for line in lines {
        let line = line.map_err(|e| io(path, e))?;
        if !line.is_empty() {
            shots.push(from_json_str(path, &line)?);
        }
    }
    Ok((header, shots))
}

fn csv_writer(path: &Path, config_hash: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# config_hash={config_hash}").map_err(|e| io(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| io(path, e.into_error()))?;
    inner.flush().map_err(|e| io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `rounds,fidelity,sigma,shots`
pub fn write_fidelity_csv(path: &Path, config_hash: &str, points: &[FidelityPoint]) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    w.write_record(["rounds", "fidelity", "sigma", "shots"])?;
    for p in points {
        w.write_record([p.rounds.to_string(), p.fidelity.to_string(), p.sigma.to_string(), p.shots.to_string()])?;
    }
    finish(path, w)
}

/// `rounds,total,discarded,retained_fraction,threshold`
pub fn write_retained_csv(path: &Path, config_hash: &str, result: &PostselectResult) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    w.write_record(["rounds", "total", "discarded", "retained_fraction", "threshold"])?;
    for (&r, &(n, d)) in &result.counts {
        w.write_record([
            r.to_string(),
            n.to_string(),
            d.to_string(),
            opt(result.retained_fraction(r)),
            opt(result.thresholds.get(&r).copied().flatten()),
        ])?;
    }
    finish(path, w)
}

/// `bin_lo,bin_hi,count,flips,flip_fraction,mean_y,success_fraction`
pub fn write_histogram_csv(path: &Path, config_hash: &str, bins: &[BinStats]) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    w.write_record(["bin_lo", "bin_hi", "count", "flips", "flip_fraction", "mean_y", "success_fraction"])?;
    for b in bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.count.to_string(),
            b.flips.to_string(),
            opt(b.flip_fraction()),
            opt(b.mean_y()),
            opt(b.success_fraction()),
        ])?;
    }
    finish(path, w)
}

/// `rounds,retained_fraction` after leakage post-selection.
pub fn write_leakage_csv(path: &Path, config_hash: &str, retained: &BTreeMap<usize, f64>) -> Result<()> {
    let mut w = csv_writer(path, config_hash)?;
    w.write_record(["rounds", "retained_fraction"])?;
    for (r, f) in retained {
        w.write_record([r.to_string(), f.to_string()])?;
    }
    finish(path, w)
}

/// JSON summary of a logical-error fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub eps_l: f64,
    pub eps_l_sigma: f64,
    pub r0: f64,
    pub r0_sigma: f64,
    pub covariance: [[f64; 2]; 2],
    pub chi2: f64,
    pub points: Vec<FidelityPoint>,
    /// Retained fraction per round count when post-selection was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained: Option<BTreeMap<usize, f64>>,
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl FitSummary {
    pub fn new(fit: &LogicalFit, points: Vec<FidelityPoint>, config_hash: String, config: serde_json::Value) -> Self {
        Self {
            eps_l: fit.eps_l,
            eps_l_sigma: fit.eps_sigma(),
            r0: fit.r0,
            r0_sigma: fit.r0_sigma(),
            covariance: fit.covariance,
            chi2: fit.chi2,
            points,
            retained: None,
            config_hash,
            config,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| io(path, e))
    }
}

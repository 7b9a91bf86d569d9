//! Dataset files: a header followed by shot records, as JSON Lines or as a
//! compact little-endian binary stream. The layouts are specified in
//! `docs/formats.md`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::record::{Readout, ShotRecord, Truth};
use super::SimConfig;
use crate::code::{format_bits, parse_bits, CodeLayout};
use crate::error::{from_json_str, io, Error, Result};
use crate::readout::IqSample;

pub const DATASET_VERSION: u32 = 1;
pub const DATASET_FORMAT: &str = "softdec-dataset";
const BINARY_MAGIC: &[u8; 4] = b"SDDS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    #[default]
    Jsonl,
    Binary,
}

impl DatasetFormat {
    /// Conventional file extension, without the dot.
    pub fn extension(self) -> &'static str {
        match self {
            DatasetFormat::Jsonl => "jsonl",
            DatasetFormat::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub layout_hash: String,
    pub config_hash: String,
    /// Echo of the configuration that produced the data.
    pub config: serde_json::Value,
}

impl DatasetHeader {
    pub fn new(layout: &CodeLayout, config: &SimConfig) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            layout_hash: layout.hash(),
            config_hash: config.hash(),
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub shots: Vec<ShotRecord>,
}

/// Ordered sink for shot records.
pub struct DatasetWriter {
    out: BufWriter<File>,
    path: PathBuf,
    format: DatasetFormat,
}

impl DatasetWriter {
    pub fn create(path: &Path, format: DatasetFormat, header: &DatasetHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            format,
        };
        let json = serde_json::to_string(header)?;
        match format {
            DatasetFormat::Jsonl => w.put(format!("{json}\n").as_bytes())?,
            DatasetFormat::Binary => {
                let mut buf = Vec::with_capacity(json.len() + 12);
                buf.extend_from_slice(BINARY_MAGIC);
                buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
                buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
                buf.extend_from_slice(json.as_bytes());
                w.put(&buf)?;
            }
        }
        Ok(w)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.out.write_all(bytes).map_err(|e| io(&self.path, e))
    }

    pub fn write(&mut self, shot: &ShotRecord) -> Result<()> {
        match self.format {
            DatasetFormat::Jsonl => {
                let mut line = serde_json::to_vec(shot)?;
                line.push(b'\n');
                self.put(&line)
            }
            DatasetFormat::Binary => {
                let body = encode_binary(shot)?;
                let mut buf = Vec::with_capacity(body.len() + 4);
                buf.extend_from_slice(&(body.len() as u32).to_le_bytes());
                buf.extend_from_slice(&body);
                self.put(&buf)
            }
        }
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| io(&self.path, e))
    }
}

pub fn write_dataset(path: &Path, dataset: &Dataset, format: DatasetFormat) -> Result<()> {
    let mut w = DatasetWriter::create(path, format, &dataset.header)?;
    for shot in &dataset.shots {
        w.write(shot)?;
    }
    w.finish()
}

/// Read a dataset in either format, detected from the first bytes.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io(path, e))?;
    let mut r = BufReader::new(file);
    let starts_binary = r.fill_buf().map_err(|e| io(path, e))?.starts_with(BINARY_MAGIC);
    if starts_binary {
        read_binary(path, r)
    } else {
        read_jsonl(path, r)
    }
}

fn read_jsonl(path: &Path, r: BufReader<File>) -> Result<Dataset> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| schema(path, "header", "empty dataset file"))?
        .map_err(|e| io(path, e))?;
    let header: DatasetHeader = from_json_str(path, &first)?;
    check_header(path, &header)?;
    let mut shots = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let shot: ShotRecord = from_json_str(path, &line).map_err(|e| match e {
            Error::Schema { path: p, message } => Error::Schema {
                path: p,
                message: format!("record {}: {message}", n + 1),
            },
            other => other,
        })?;
        shots.push(shot);
    }
    Ok(Dataset { header, shots })
}

fn schema(path: &Path, field: &str, message: &str) -> Error {
    Error::Schema {
        path: format!("{}:{field}", path.display()),
        message: message.into(),
    }
}

fn check_header(path: &Path, header: &DatasetHeader) -> Result<()> {
    if header.format != DATASET_FORMAT {
        return Err(schema(path, "format", &format!("expected {DATASET_FORMAT:?}")));
    }
    if header.version != DATASET_VERSION {
        return Err(schema(path, "version", &format!("unsupported version {}", header.version)));
    }
    Ok(())
}

fn read_binary(path: &Path, mut r: BufReader<File>) -> Result<Dataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| io(path, e))?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 4,
        path,
    };
    let version = c.u32()?;
    if version != DATASET_VERSION {
        return Err(schema(path, "version", &format!("unsupported version {version}")));
    }
    let len = c.u32()? as usize;
    let text = std::str::from_utf8(c.take(len)?).map_err(|_| schema(path, "header", "not UTF-8"))?;
    let header: DatasetHeader = from_json_str(path, text)?;
    check_header(path, &header)?;
    let mut shots = Vec::new();
    while c.pos < bytes.len() {
        let len = c.u32()? as usize;
        let body = c.take(len)?;
        shots.push(decode_binary(path, body)?);
    }
    Ok(Dataset { header, shots })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| schema(self.path, "record", "truncated binary record"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

const KIND_ANALOG: u8 = 0;
const KIND_HARD: u8 = 1;
const FLAG_TRUTH: u8 = 1;

fn encode_binary(shot: &ShotRecord) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    b.extend_from_slice(&shot.shot_id.to_le_bytes());
    b.extend_from_slice(&(shot.rounds as u32).to_le_bytes());
    let bits = parse_bits(&shot.initial_state);
    b.extend_from_slice(&(bits.len() as u16).to_le_bytes());
    b.extend_from_slice(&bits);
    let (kind, na, nd) = match &shot.readout {
        Readout::Analog {
            ancilla_iq,
            final_data_iq,
        } => (KIND_ANALOG, ancilla_iq.first().map_or(0, Vec::len), final_data_iq.len()),
        Readout::Hard { ancilla, final_data } => (KIND_HARD, ancilla.first().map_or(0, Vec::len), final_data.len()),
    };
    b.push(kind);
    b.push(if shot.truth.is_some() { FLAG_TRUTH } else { 0 });
    b.extend_from_slice(&(na as u16).to_le_bytes());
    b.extend_from_slice(&(nd as u16).to_le_bytes());
    fn rect<T>(rows: &[Vec<T>], n: usize, m: usize) -> bool {
        rows.len() == n && rows.iter().all(|r| r.len() == m)
    }
    match &shot.readout {
        Readout::Analog {
            ancilla_iq,
            final_data_iq,
        } => {
            if !rect(ancilla_iq, shot.rounds, na) {
                return Err(Error::ShapeMismatch(format!("shot {} has ragged readout", shot.shot_id)));
            }
            for z in ancilla_iq.iter().flatten().chain(final_data_iq) {
                b.extend_from_slice(&z.i_volt.to_le_bytes());
                b.extend_from_slice(&z.q_volt.to_le_bytes());
            }
        }
        Readout::Hard { ancilla, final_data } => {
            if !rect(ancilla, shot.rounds, na) {
                return Err(Error::ShapeMismatch(format!("shot {} has ragged readout", shot.shot_id)));
            }
            b.extend(ancilla.iter().flatten().chain(final_data));
        }
    }
    if let Some(t) = &shot.truth {
        b.push(t.logical_flip as u8);
        b.extend_from_slice(&(t.fired_edges.len() as u32).to_le_bytes());
        for &e in &t.fired_edges {
            b.extend_from_slice(&(e as u32).to_le_bytes());
        }
        if !rect(&t.ancilla_states, shot.rounds, na) {
            return Err(Error::ShapeMismatch(format!("shot {} has ragged truth", shot.shot_id)));
        }
        b.extend(t.ancilla_states.iter().flatten());
    }
    Ok(b)
}

fn decode_binary(path: &Path, body: &[u8]) -> Result<ShotRecord> {
    let mut c = Cursor { bytes: body, pos: 0, path };
    let shot_id = c.u64()?;
    let rounds = c.u32()? as usize;
    let nbits = c.u16()? as usize;
    let initial_state = format_bits(c.take(nbits)?);
    let kind = c.u8()?;
    let flags = c.u8()?;
    let na = c.u16()? as usize;
    let nd = c.u16()? as usize;
    let readout = match kind {
        KIND_ANALOG => {
            let mut iq = |n: usize| -> Result<Vec<IqSample>> { (0..n).map(|_| Ok(IqSample::new(c.f64()?, c.f64()?))).collect() };
            let ancilla_iq = (0..rounds).map(|_| iq(na)).collect::<Result<_>>()?;
            let final_data_iq = iq(nd)?;
            Readout::Analog {
                ancilla_iq,
                final_data_iq,
            }
        }
        KIND_HARD => {
            let ancilla = (0..rounds).map(|_| Ok(c.take(na)?.to_vec())).collect::<Result<_>>()?;
            let final_data = c.take(nd)?.to_vec();
            Readout::Hard { ancilla, final_data }
        }
        k => return Err(schema(path, "record.kind", &format!("unknown readout kind {k}"))),
    };
    let truth = if flags & FLAG_TRUTH != 0 {
        let logical_flip = c.u8()? != 0;
        let n = c.u32()? as usize;
        let fired_edges = (0..n).map(|_| Ok(c.u32()? as usize)).collect::<Result<_>>()?;
        let ancilla_states = (0..rounds).map(|_| Ok(c.take(na)?.to_vec())).collect::<Result<_>>()?;
        Some(Truth {
            fired_edges,
            logical_flip,
            ancilla_states,
        })
    } else {
        None
    };
    if c.pos != body.len() {
        return Err(schema(path, "record", "trailing bytes in binary record"));
    }
    Ok(ShotRecord {
        shot_id,
        rounds,
        initial_state,
        readout,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::ModelSet;
    use crate::sim::{simulate, SimConfig};

    fn small(analog: bool) -> Dataset {
        let layout = CodeLayout::surface13();
        let mut config = SimConfig::new(3, 11);
        config.rounds = vec![1, 3];
        if analog {
            config.readout = Some(ModelSet::synthetic(
                layout.ancillas.iter().chain(&layout.data_qubits).map(String::as_str),
                4.0,
                1.0,
            ));
        }
        config.leakage.p_leak = 0.2;
        simulate(&layout, &config).unwrap()
    }

    #[test]
    fn both_formats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for analog in [false, true] {
            let data = small(analog);
            for format in [DatasetFormat::Jsonl, DatasetFormat::Binary] {
                let path = dir.path().join("d");
                write_dataset(&path, &data, format).unwrap();
                assert_eq!(read_dataset(&path).unwrap(), data);
            }
        }
    }

    #[test]
    fn empty_dataset_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = small(false);
        data.shots.clear();
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &data, DatasetFormat::Jsonl).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(read_dataset(&path).unwrap(), data);
    }

    #[test]
    fn bad_record_reports_field_path() {
        let dir = tempfile::tempdir().unwrap();
        let data = small(false);
        let path = dir.path().join("d.jsonl");
        write_dataset(&path, &data, DatasetFormat::Jsonl).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let broken = text.replacen("\"rounds\":1", "\"rounds\":\"one\"", 1);
        std::fs::write(&path, broken).unwrap();
        match read_dataset(&path) {
            Err(Error::Schema { path, .. }) => assert!(path.ends_with(":rounds"), "{path}"),
            other => panic!("{other:?}"),
        }
    }
}

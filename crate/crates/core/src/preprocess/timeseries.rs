use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PreprocessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
}

impl ChannelInfo {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            axis: None,
            position: None,
        }
    }
}

/// Multichannel sampled acceleration record (m/s²), channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    pub channels: Vec<ChannelInfo>,
    /// `data[c][k]` is sample `k` of channel `c`.
    pub data: Vec<Vec<f64>>,
    /// Sampling frequency, Hz.
    pub fs: f64,
    /// Record start offset, s.
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Binary,
}

impl InputFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("f64bin") | Some("json") => InputFormat::Binary,
            _ => InputFormat::Csv,
        }
    }
}

/// JSON sidecar describing a `.f64bin` record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryHeader {
    pub fs: f64,
    #[serde(default)]
    pub t0: f64,
    pub channels: Vec<ChannelInfo>,
    pub n_samples: usize,
}

impl TimeSeriesSet {
    /// Builds a validated set.
    pub fn new(channels: Vec<ChannelInfo>, data: Vec<Vec<f64>>, fs: f64) -> Result<Self, PreprocessError> {
        let ts = Self {
            channels,
            data,
            fs,
            t0: 0.0,
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.fs
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    pub fn channel_index(&self, id: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.id == id)
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(PreprocessError::InvalidSamplingRate(self.fs));
        }
        if self.channels.len() != self.data.len() || self.data.is_empty() {
            return Err(PreprocessError::InconsistentColumnCount {
                row: 0,
                expected: self.channels.len(),
                found: self.data.len(),
            });
        }
        let n = self.n_samples();
        if n < 2 {
            return Err(PreprocessError::RecordTooShort { needed: 2, got: n });
        }
        for (c, ch) in self.data.iter().enumerate() {
            if ch.len() != n {
                return Err(PreprocessError::RaggedChannels {
                    channel: self.channels[c].id.clone(),
                    expected: n,
                    found: ch.len(),
                });
            }
            if let Some(k) = ch.iter().position(|x| !x.is_finite()) {
                return Err(PreprocessError::NonFiniteSample {
                    row: k,
                    column: c,
                });
            }
        }
        Ok(())
    }

    /// Keeps samples with time in `[start, stop)` seconds relative to `t0`.
    pub fn trim(&self, start: Option<f64>, stop: Option<f64>) -> Result<Self, PreprocessError> {
        let n = self.n_samples();
        let i0 = start.map_or(0, |s| ((s * self.fs).round().max(0.0) as usize).min(n));
        let i1 = stop.map_or(n, |s| ((s * self.fs).round().max(0.0) as usize).min(n));
        if i1 < i0 + 2 {
            return Err(PreprocessError::RecordTooShort {
                needed: 2,
                got: i1.saturating_sub(i0),
            });
        }
        Ok(Self {
            channels: self.channels.clone(),
            data: self.data.iter().map(|ch| ch[i0..i1].to_vec()).collect(),
            fs: self.fs,
            t0: self.t0 + i0 as f64 / self.fs,
        })
    }

    /// Writes the canonical CSV layout: `fs=<Hz>[,t0=<s>]`, channel ids, rows.
    pub fn write_csv(&self, path: &Path) -> Result<(), PreprocessError> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(out, "fs={},t0={}", self.fs, self.t0)?;
        let ids: Vec<&str> = self.channels.iter().map(|c| c.id.as_str()).collect();
        writeln!(out, "{}", ids.join(","))?;
        let mut line = String::new();
        for k in 0..self.n_samples() {
            line.clear();
            for (c, ch) in self.data.iter().enumerate() {
                if c > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:e}", ch[k]));
            }
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<stem>.f64bin` (row-major little-endian f64) and `<stem>.json`.
    pub fn write_binary(&self, bin_path: &Path) -> Result<(), PreprocessError> {
        let header = BinaryHeader {
            fs: self.fs,
            t0: self.t0,
            channels: self.channels.clone(),
            n_samples: self.n_samples(),
        };
        fs::write(
            bin_path.with_extension("json"),
            serde_json::to_vec_pretty(&header).map_err(|e| PreprocessError::Header(e.to_string()))?,
        )?;
        let mut bytes = Vec::with_capacity(self.n_samples() * self.n_channels() * 8);
        for k in 0..self.n_samples() {
            for ch in &self.data {
                bytes.extend_from_slice(&ch[k].to_le_bytes());
            }
        }
        fs::write(bin_path.with_extension("f64bin"), bytes)?;
        Ok(())
    }
}

/// Reads a record from disk and validates it.
pub fn load_timeseries(path: &Path, format: InputFormat) -> Result<TimeSeriesSet, PreprocessError> {
    match format {
        InputFormat::Csv => load_csv(path),
        InputFormat::Binary => load_binary(path),
    }
}

fn parse_header_line(line: &str) -> Result<(f64, f64), PreprocessError> {
    let mut fs = None;
    let mut t0 = 0.0;
    for field in line.split(',') {
        let Some((key, value)) = field.split_once('=') else {
            return Err(PreprocessError::MissingHeader(format!("expected key=value, got `{field}`")));
        };
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| PreprocessError::MissingHeader(format!("bad number in `{field}`")))?;
        match key.trim() {
            "fs" => fs = Some(value),
            "t0" => t0 = value,
            other => return Err(PreprocessError::MissingHeader(format!("unknown header key `{other}`"))),
        }
    }
    let fs = fs.ok_or_else(|| PreprocessError::MissingHeader("no fs=<Hz> entry".into()))?;
    Ok((fs, t0))
}

fn load_csv(path: &Path) -> Result<TimeSeriesSet, PreprocessError> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let first = first.trim();
    if !first.starts_with("fs=") && !first.contains("fs=") {
        return Err(PreprocessError::MissingHeader("first line must declare fs=<Hz>".into()));
    }
    let (fs, t0) = parse_header_line(first)?;

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let ids: Vec<String> = rdr
        .headers()
        .map_err(|e| PreprocessError::MissingHeader(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if ids.is_empty() || ids.iter().any(String::is_empty) {
        return Err(PreprocessError::MissingHeader("channel id line is empty".into()));
    }
    let p = ids.len();
    let mut data = vec![Vec::new(); p];
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| PreprocessError::Header(e.to_string()))?;
        if record.len() != p {
            return Err(PreprocessError::InconsistentColumnCount {
                row,
                expected: p,
                found: record.len(),
            });
        }
        for (column, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| PreprocessError::NonFiniteSample { row, column })?;
            if !x.is_finite() {
                return Err(PreprocessError::NonFiniteSample { row, column });
            }
            data[column].push(x);
        }
    }
    let ts = TimeSeriesSet {
        channels: ids.into_iter().map(ChannelInfo::new).collect(),
        data,
        fs,
        t0,
    };
    ts.validate()?;
    Ok(ts)
}

fn load_binary(path: &Path) -> Result<TimeSeriesSet, PreprocessError> {
    let header_path = path.with_extension("json");
    let header: BinaryHeader = serde_json::from_slice(&fs::read(&header_path)?)
        .map_err(|e| PreprocessError::MissingHeader(format!("{}: {e}", header_path.display())))?;
    let bytes = fs::read(path.with_extension("f64bin"))?;
    let p = header.channels.len();
    let expected = header.n_samples * p * 8;
    if bytes.len() != expected {
        return Err(PreprocessError::InconsistentColumnCount {
            row: bytes.len() / (8 * p.max(1)),
            expected,
            found: bytes.len(),
        });
    }
    let mut data = vec![Vec::with_capacity(header.n_samples); p];
    for (i, chunk) in bytes.chunks_exact(8).enumerate() {
        let x = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        let (row, column) = (i / p, i % p);
        if !x.is_finite() {
            return Err(PreprocessError::NonFiniteSample { row, column });
        }
        data[column].push(x);
    }
    let ts = TimeSeriesSet {
        channels: header.channels,
        data,
        fs: header.fs,
        t0: header.t0,
    };
    ts.validate()?;
    Ok(ts)
}

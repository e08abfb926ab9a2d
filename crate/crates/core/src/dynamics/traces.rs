use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SystemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub label: String,
    pub seed: u64,
    pub config: SystemConfig,
}

/// Sampled displacements of the three cantilevers.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    /// Hz.
    pub sample_rate: f64,
    /// Time of the first sample (s).
    pub start_time: f64,
    /// Displacements about equilibrium (m).
    pub traces: [Vec<f64>; 3],
    pub metadata: TraceMetadata,
}

#[derive(Serialize, Deserialize)]
struct Row {
    t_s: f64,
    x1_m: f64,
    x2_m: f64,
    x3_m: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    sample_rate_hz: f64,
    start_time_s: f64,
    samples: usize,
    #[serde(flatten)]
    metadata: TraceMetadata,
}

impl TraceSet {
    pub fn len(&self) -> usize {
        self.traces[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 / self.sample_rate
    }

    /// Trace of cantilever `index` (1-based).
    pub fn trace(&self, index: usize) -> &[f64] {
        &self.traces[index - 1]
    }

    /// Last `duration` seconds of every trace.
    pub fn tail(&self, duration: f64) -> TraceSet {
        let n = ((duration * self.sample_rate).round() as usize).min(self.len());
        let skip = self.len() - n;
        TraceSet {
            sample_rate: self.sample_rate,
            start_time: self.time(skip),
            traces: std::array::from_fn(|i| self.traces[i][skip..].to_vec()),
            metadata: self.metadata.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.traces.iter().any(|t| t.len() != n) {
            return Err(Error::Length("traces have different lengths".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::domain("sample rate must be positive"));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for k in 0..self.len() {
            w.serialize(Row {
                t_s: self.time(k),
                x1_m: self.traces[0][k],
                x2_m: self.traces[1][k],
                x3_m: self.traces[2][k],
            })?;
        }
        if self.is_empty() {
            w.write_record(["t_s", "x1_m", "x2_m", "x3_m"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let sidecar = Sidecar {
            sample_rate_hz: self.sample_rate,
            start_time_s: self.start_time,
            samples: self.len(),
            metadata: self.metadata.clone(),
        };
        serde_json::to_writer_pretty(writer, &sidecar)?;
        Ok(())
    }

    /// Path of the JSON sidecar that accompanies a trace CSV.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes `path` (CSV) and its JSON sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_csv(BufWriter::new(File::create(path)?))?;
        let mut side = BufWriter::new(File::create(Self::sidecar_path(path))?);
        self.write_json(&mut side)?;
        side.flush()?;
        Ok(())
    }

    pub fn read<R: Read, S: Read>(csv_reader: R, sidecar: S) -> Result<Self> {
        let side: Sidecar = serde_json::from_reader(sidecar)?;
        let mut traces: [Vec<f64>; 3] = Default::default();
        for row in csv::Reader::from_reader(csv_reader).deserialize() {
            let row: Row = row?;
            traces[0].push(row.x1_m);
            traces[1].push(row.x2_m);
            traces[2].push(row.x3_m);
        }
        if traces[0].len() != side.samples {
            return Err(Error::Length(format!(
                "sidecar announces {} samples, CSV holds {}",
                side.samples,
                traces[0].len()
            )));
        }
        let set = TraceSet {
            sample_rate: side.sample_rate_hz,
            start_time: side.start_time_s,
            traces,
            metadata: side.metadata,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read(
            BufReader::new(File::open(path)?),
            BufReader::new(File::open(Self::sidecar_path(path))?),
        )
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// A sampled 1-D trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    rate: f64,
    label: String,
}

/// JSON sidecar describing a raw `f32` sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub rate: f64,
    #[serde(default)]
    pub label: String,
}

impl Signal {
    pub fn new(samples: Vec<f64>, rate: f64, label: impl Into<String>) -> Result<Self> {
        ensure(rate.is_finite() && rate > 0.0, || format!("sample rate {rate} must be positive"))?;
        ensure(!samples.is_empty(), || "signal has no samples".into())?;
        ensure(samples.iter().all(|v| v.is_finite()), || "signal contains non-finite samples".into())?;
        Ok(Self { samples, rate, label: label.into() })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One value per row from the first column; a non-numeric first row is
    /// treated as a header.
    pub fn read_csv(path: &Path, rate: f64, label: impl Into<String>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let mut samples = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let field = rec.get(0).unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) => samples.push(v),
                Err(_) if i == 0 => {}
                Err(_) => {
                    return Err(Error::format(format!("{}: row {} is not a number: {field:?}", path.display(), i + 1)))
                }
            }
        }
        Self::new(samples, rate, label)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["value"]).map_err(|e| csv_err(path, e))?;
        for v in &self.samples {
            w.write_record([format!("{v}")]).map_err(|e| csv_err(path, e))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sidecar location for a raw sample file: same path with a `.json`
    /// extension.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Little-endian `f32` samples plus the JSON sidecar for rate and label.
    pub fn read_raw(path: &Path) -> Result<Self> {
        let side_path = Self::sidecar_path(path);
        let side: Sidecar = serde_json::from_slice(&std::fs::read(&side_path)?)
            .map_err(|e| Error::format(format!("{}: {e}", side_path.display())))?;
        let bytes = std::fs::read(path)?;
        ensure(bytes.len() % 4 == 0, || format!("{}: length {} is not a multiple of 4", path.display(), bytes.len()))?;
        let samples = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        Self::new(samples, side.rate, side.label)
    }

    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.samples.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
        std::fs::write(path, bytes)?;
        let side = Sidecar { rate: self.rate, label: self.label.clone() };
        std::fs::write(Self::sidecar_path(path), serde_json::to_vec(&side).expect("sidecar serializes"))?;
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.len() as f64
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("{}: {other:?}", path.display())),
    }
}

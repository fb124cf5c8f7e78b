use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::signal::Signal;
use crate::error::{ensure, Result};
use crate::kernel::{ComplexGrid, Fft1d};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftParams {
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl StftParams {
    pub fn new(window: usize, hop: usize, fft_size: usize) -> Result<Self> {
        let p = Self { window, hop, fft_size };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.window >= 1 && self.hop >= 1, || "window and hop must be positive".into())?;
        ensure(self.window <= self.fft_size, || {
            format!("window {} exceeds FFT size {}", self.window, self.fft_size)
        })
    }

    /// Window 256 / hop 64 / FFT 256 for biosignal rates (>= 128 Hz), window
    /// 64 / hop 16 / FFT 64 for slow channels such as fNIRS.
    pub fn for_rate(rate: f64) -> Self {
        if rate >= 128.0 {
            Self { window: 256, hop: 64, fft_size: 256 }
        } else {
            Self { window: 64, hop: 16, fft_size: 64 }
        }
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `floor((len - window) / hop) + 1`, or a single frame when the signal
    /// is shorter than one window.
    pub fn frames(&self, len: usize) -> usize {
        if len < self.window {
            1
        } else {
            (len - self.window) / self.hop + 1
        }
    }
}

/// Periodic Hann window, `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len).map(|n| 0.5 - 0.5 * libm::cos(2.0 * PI * n as f64 / len as f64)).collect()
}

/// One-sided short-time spectrum, `frames x bins`.
#[derive(Clone, Debug)]
pub struct StftMatrix {
    pub params: StftParams,
    pub rate: f64,
    pub spectrum: ComplexGrid<f64>,
    /// `sum w[n]^2` of the analysis window.
    pub window_energy: f64,
}

impl StftMatrix {
    pub fn frames(&self) -> usize {
        self.spectrum.rows()
    }

    pub fn bins(&self) -> usize {
        self.spectrum.cols()
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.spectrum.get(frame, bin)
    }
}

/// Hann-windowed frames, each zero-padded from `window` to `fft_size`
/// samples, transformed to their one-sided spectrum. A signal shorter than
/// one window yields a single frame padded with zeros.
pub fn stft(sig: &Signal, params: StftParams) -> Result<StftMatrix> {
    params.validate()?;
    let x = sig.samples();
    let frames = params.frames(x.len());
    let bins = params.bins();
    let w = hann(params.window);
    let plan = Fft1d::<f64>::new(params.fft_size)?;
    let mut spectrum = ComplexGrid::zeros(frames, bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); params.fft_size];
    for f in 0..frames {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let start = f * params.hop;
        for n in 0..params.window {
            if let Some(&v) = x.get(start + n) {
                buf[n] = Complex64::new(v * w[n], 0.0);
            }
        }
        plan.forward(&mut buf);
        for (k, &z) in buf[..bins].iter().enumerate() {
            spectrum.set(f, k, z);
        }
    }
    Ok(StftMatrix { params, rate: sig.rate(), spectrum, window_energy: w.iter().map(|v| v * v).sum() })
}

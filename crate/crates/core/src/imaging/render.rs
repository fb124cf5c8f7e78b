use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::colormap::{unit_to_index, Colormap};
use super::raster::{RasterImage, IMAGE_SIZE};
use super::signal::Signal;
use super::stft::{stft, StftMatrix, StftParams};
use crate::error::{Error, Result};

/// dB value assigned to zero (and any lower) power.
pub const PSD_FLOOR_DB: f64 = -120.0;

/// Plot margin of the waveform renderer, in pixels.
const MARGIN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderKind {
    Wave,
    Angle,
    Phase,
    Psd,
}

impl std::str::FromStr for RenderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wave" => Ok(Self::Wave),
            "angle" => Ok(Self::Angle),
            "phase" => Ok(Self::Phase),
            "psd" => Ok(Self::Psd),
            other => Err(Error::contract(format!("unknown kind {other:?} (expected wave, angle, phase or psd)"))),
        }
    }
}

pub fn render(sig: &Signal, kind: RenderKind, params: StftParams, cmap: &Colormap) -> Result<RasterImage> {
    match kind {
        RenderKind::Wave => Ok(render_waveform(sig)),
        RenderKind::Angle => render_spectrogram_angle(sig, params, cmap),
        RenderKind::Phase => render_spectrogram_phase(sig, params, cmap),
        RenderKind::Psd => render_spectrogram_psd(sig, params, cmap),
    }
}

/// White 1-pixel polyline on black. Amplitude is min-max scaled into rows
/// `8..=215` (top = maximum); samples are spread evenly over columns
/// `8..=215`. A constant signal draws row 112.
pub fn render_waveform(sig: &Signal) -> RasterImage {
    let x = sig.samples();
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (IMAGE_SIZE - 1 - 2 * MARGIN) as f64;
    let row = |v: f64| -> i64 {
        if hi > lo {
            (MARGIN as f64 + (hi - v) / (hi - lo) * span).round() as i64
        } else {
            (IMAGE_SIZE / 2) as i64
        }
    };
    let col = |i: usize| -> i64 {
        if x.len() > 1 {
            (MARGIN as f64 + i as f64 * span / (x.len() - 1) as f64).round() as i64
        } else {
            MARGIN as i64
        }
    };
    let mut img = RasterImage::black();
    let white = [255, 255, 255];
    let mut prev = (col(0), row(x[0]));
    img.set(prev.1 as usize, prev.0 as usize, white);
    for (i, &v) in x.iter().enumerate().skip(1) {
        let next = (col(i), row(v));
        for (c, r) in bresenham(prev, next) {
            img.set(r as usize, c as usize, white);
        }
        prev = next;
    }
    img
}

/// Integer line from `a` to `b` inclusive, as `(x, y)` points.
fn bresenham(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut pts = Vec::with_capacity((dx - dy) as usize + 1);
    loop {
        pts.push((x, y));
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    pts
}

/// Nearest-neighbour resampling of a `frames x bins` matrix to the image:
/// time runs along columns, frequency up the rows (bin 0 at the bottom).
/// `index(frame, bin)` returns the colormap index of each cell.
fn paint(frames: usize, bins: usize, cmap: &Colormap, index: impl Fn(usize, usize) -> u8) -> RasterImage {
    let n = IMAGE_SIZE;
    let mut img = RasterImage::black();
    for r in 0..n {
        let bin = ((2 * (n - 1 - r) + 1) * bins) / (2 * n);
        for c in 0..n {
            let frame = ((2 * c + 1) * frames) / (2 * n);
            img.set(r, c, cmap.entry(index(frame, bin)));
        }
    }
    img
}

/// Image row whose nearest-neighbour source is `bin` (the lowest such row).
pub fn row_of_bin(bin: usize, bins: usize) -> Option<usize> {
    let n = IMAGE_SIZE;
    (0..n).rev().find(|&r| ((2 * (n - 1 - r) + 1) * bins) / (2 * n) == bin)
}

/// Principal phase `atan2(im, re)` per cell, with `atan2(0, 0) = 0`.
pub fn angle_matrix(m: &StftMatrix) -> Vec<Vec<f64>> {
    (0..m.frames())
        .map(|f| {
            (0..m.bins())
                .map(|k| {
                    let z = m.get(f, k);
                    if z.re == 0.0 && z.im == 0.0 {
                        0.0
                    } else {
                        libm::atan2(z.im, z.re)
                    }
                })
                .collect()
        })
        .collect()
}

/// Adds multiples of `2 pi` so successive differences lie in `[-pi, pi]`.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let d = p - phase[i - 1];
            if d > PI {
                offset -= 2.0 * PI * ((d + PI) / (2.0 * PI)).floor();
            } else if d < -PI {
                offset += 2.0 * PI * ((-d + PI) / (2.0 * PI)).floor();
            }
        }
        out.push(p + offset);
    }
    out
}

/// Angle matrix unwrapped along frequency within each frame.
pub fn unwrapped_phase_matrix(m: &StftMatrix) -> Vec<Vec<f64>> {
    angle_matrix(m).iter().map(|row| unwrap_phase(row)).collect()
}

/// One-sided PSD `|X|^2 / (rate * sum w^2)`, interior bins doubled.
pub fn psd_matrix(m: &StftMatrix) -> Vec<Vec<f64>> {
    let norm = m.rate * m.window_energy;
    let nyquist = if m.params.fft_size % 2 == 0 { Some(m.bins() - 1) } else { None };
    (0..m.frames())
        .map(|f| {
            (0..m.bins())
                .map(|k| {
                    let p = m.get(f, k).norm_sqr() / norm;
                    if k == 0 || Some(k) == nyquist {
                        p
                    } else {
                        2.0 * p
                    }
                })
                .collect()
        })
        .collect()
}

fn to_db(p: f64) -> f64 {
    if p > 0.0 {
        (10.0 * libm::log10(p)).max(PSD_FLOOR_DB)
    } else {
        PSD_FLOOR_DB
    }
}

/// Min-max over the whole matrix; `None` when it is constant.
fn range(m: &[Vec<f64>]) -> Option<(f64, f64)> {
    let lo = m.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = m.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi > lo).then_some((lo, hi))
}

fn paint_normalized(values: &[Vec<f64>], cmap: &Colormap) -> RasterImage {
    let (frames, bins) = (values.len(), values[0].len());
    match range(values) {
        Some((lo, hi)) => paint(frames, bins, cmap, |f, k| unit_to_index((values[f][k] - lo) / (hi - lo))),
        None => paint(frames, bins, cmap, |_, _| 0),
    }
}

/// Principal angle mapped linearly from `[-pi, pi]` onto the colormap.
pub fn render_spectrogram_angle(sig: &Signal, params: StftParams, cmap: &Colormap) -> Result<RasterImage> {
    let a = angle_matrix(&stft(sig, params)?);
    Ok(paint(a.len(), a[0].len(), cmap, |f, k| unit_to_index((a[f][k] + PI) / (2.0 * PI))))
}

/// Frequency-unwrapped phase, min-max normalized per image.
pub fn render_spectrogram_phase(sig: &Signal, params: StftParams, cmap: &Colormap) -> Result<RasterImage> {
    Ok(paint_normalized(&unwrapped_phase_matrix(&stft(sig, params)?), cmap))
}

/// PSD in dB (floor -120 dB), min-max normalized per image.
pub fn render_spectrogram_psd(sig: &Signal, params: StftParams, cmap: &Colormap) -> Result<RasterImage> {
    let db: Vec<Vec<f64>> = psd_matrix(&stft(sig, params)?).iter().map(|r| r.iter().map(|&p| to_db(p)).collect()).collect();
    Ok(paint_normalized(&db, cmap))
}

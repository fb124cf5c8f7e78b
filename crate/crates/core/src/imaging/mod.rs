//! Rasterization of 1-D physiological signals into fixed-size images:
//! waveform plots and angle, unwrapped-phase and PSD spectrograms.

pub mod colormap;
pub mod raster;
pub mod render;
pub mod signal;
pub mod stft;

pub use colormap::Colormap;
pub use raster::{RasterImage, IMAGE_SIZE};
pub use render::{
    angle_matrix, psd_matrix, render, row_of_bin, render_spectrogram_angle, render_spectrogram_phase, render_spectrogram_psd,
    render_waveform, unwrap_phase, unwrapped_phase_matrix, RenderKind, PSD_FLOOR_DB,
};
pub use signal::Signal;
pub use stft::{stft, StftMatrix, StftParams};

use super::types::{FnirsEmbedding, FrameEmbedding, FusedEmbedding, GsrEmbedding, PooledEmbedding, Span, VideoEmbedding};
use crate::error::{ensure, Result};
use crate::heads::{encode_video, VideoEncoderConfig};
use crate::kernel::Tensor;
use crate::nn::ParamStore;

/// Order-preserving concatenation: element `j*160 + k` is frame `j`, value `k`.
pub fn concat_frame_embeddings(frames: &[FrameEmbedding]) -> Result<VideoEmbedding> {
    ensure(!frames.is_empty(), || "cannot concatenate zero frames".into())?;
    VideoEmbedding::new(frames.iter().flat_map(|f| f.values().iter().copied()).collect())
}

/// Elementwise sum of the frame embeddings.
pub fn sum_frame_embeddings(frames: &[FrameEmbedding]) -> Result<PooledEmbedding> {
    ensure(!frames.is_empty(), || "cannot sum zero frames".into())?;
    let mut acc = frames[0].values().to_vec();
    for f in &frames[1..] {
        acc.iter_mut().zip(f.values()).for_each(|(a, &b)| *a += b);
    }
    PooledEmbedding::new(acc)
}

/// Sums per-channel waveform embeddings into one fNIRS vector.
pub fn fnirs_aggregate(channels: &[FrameEmbedding]) -> Result<FnirsEmbedding> {
    let pooled = sum_frame_embeddings(channels)?;
    FnirsEmbedding::new(pooled.into_values(), channels.len())
}

pub fn fuse_add(a: &[f32], b: &[f32]) -> Result<Vec<f32>> {
    ensure(a.len() == b.len(), || format!("cannot add embeddings of length {} and {}", a.len(), b.len()))?;
    Ok(a.iter().zip(b).map(|(&x, &y)| x + y).collect())
}

/// Concatenates at least two named parts, recording each part's span.
pub fn fuse_concat(parts: &[(&str, &[f32])]) -> Result<FusedEmbedding> {
    ensure(parts.len() >= 2, || format!("concatenation needs at least 2 parts, got {}", parts.len()))?;
    let mut values = Vec::with_capacity(parts.iter().map(|p| p.1.len()).sum());
    let mut provenance = Vec::with_capacity(parts.len());
    for (source, v) in parts {
        provenance.push(Span { source: source.to_string(), start: values.len(), len: v.len() });
        values.extend_from_slice(v);
    }
    Ok(FusedEmbedding { values, provenance })
}

/// Arithmetic mean of probability vectors.
pub fn fuse_decision(probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    ensure(!probs.is_empty(), || "decision fusion of zero sources".into())?;
    let k = probs[0].len();
    for (i, p) in probs.iter().enumerate() {
        ensure(p.len() == k, || format!("source {i} has {} classes, source 0 has {k}", p.len()))?;
        ensure(p.iter().all(|&v| v >= 0.0 && v.is_finite()), || format!("source {i} has negative entries"))?;
        let s: f64 = p.iter().sum();
        ensure((s - 1.0).abs() <= 1e-6, || format!("source {i} sums to {s}, not 1"))?;
    }
    let n = probs.len() as f64;
    Ok((0..k).map(|c| probs.iter().map(|p| p[c]).sum::<f64>() / n).collect())
}

/// Sums the three video embeddings, encodes the sum to the encoder's output
/// width, and appends it after the GSR embedding.
pub fn multimodal_biovid_fuse(
    gsr: &GsrEmbedding,
    rgb: &VideoEmbedding,
    thermal: &VideoEmbedding,
    depth: &VideoEmbedding,
    cfg: &VideoEncoderConfig,
    encoder: &ParamStore<f32>,
) -> Result<FusedEmbedding> {
    let a = fuse_add(rgb.values(), thermal.values())?;
    let summed = fuse_add(&a, depth.values())?;
    let n = summed.len();
    let encoded = encode_video(cfg, encoder, &Tensor::new(vec![n], summed)?)?;
    fuse_concat(&[("gsr", gsr.values()), ("video", encoded.data())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_rejects_mismatch_and_non_distributions() {
        assert!(fuse_decision(&[vec![1.0, 0.0], vec![0.2, 0.3, 0.5]]).is_err());
        assert!(fuse_decision(&[vec![0.7, 0.7]]).is_err());
        assert!(fuse_decision(&[vec![1.5, -0.5]]).is_err());
    }

    #[test]
    fn concat_needs_two_parts() {
        assert!(fuse_concat(&[("a", &[1.0])]).is_err());
    }
}

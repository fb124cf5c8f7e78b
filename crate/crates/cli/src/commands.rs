use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use painformer::backbone::{attention_map, embed, init_params, BackboneConfig};
use painformer::embedding::{
    concat_frame_embeddings, fuse_add, fuse_concat, fuse_decision, multimodal_biovid_fuse, FrameEmbedding,
    FusedEmbedding, GsrEmbedding, VideoEmbedding,
};
use painformer::formats::{
    backbone_meta, checkpoint_backbone, read_checkpoint, read_embedding, write_checkpoint, write_embedding,
    META_BACKBONE, META_TASKS,
};
use painformer::heads::{init_mixer, init_video_encoder, MixerConfig, VideoEncoderConfig};
use painformer::imaging::{render, Colormap, RasterImage, RenderKind, Signal, StftParams, IMAGE_SIZE};
use painformer::kernel::Tensor;
use painformer::nn::ParamStore;
use painformer::training::{
    generate_synthetic_tasks, run_loso, train_toy_multitask, write_trace, AdamW, Classifier, MultitaskMode,
    ProbeConfig, ScheduleConfig, TaskSpec, TrainConfig,
};
use serde_json::json;

use crate::args::*;
use crate::error::{output, CliError, CliResult};

/// Reference parameter counts of the published models.
const REFERENCE_BACKBONE: usize = 19_600_000;
const REFERENCE_MIXER: usize = 9_850_000;
const REFERENCE_VIDEO: usize = 3_370_000;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn print_line(line: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| CliError::Internal(format!("stdout: {e}")))
}

fn print_json(v: &serde_json::Value) -> CliResult<()> {
    print_line(&serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?)
}

fn read_signal(path: &Path, rate: Option<f64>) -> CliResult<Signal> {
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("signal").to_string();
    if !path.is_file() {
        return Err(usage(format!("cannot read signal {}: no such file", path.display())));
    }
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let rate = rate.ok_or_else(|| usage("--rate is required for CSV input"))?;
        Ok(Signal::read_csv(path, rate, label)?)
    } else {
        let sig = Signal::read_raw(path)?;
        match rate {
            Some(r) if r != sig.rate() => Err(usage(format!("--rate {r} contradicts the sidecar rate {}", sig.rate()))),
            _ => Ok(sig),
        }
    }
}

pub fn rasterize(a: &RasterizeArgs) -> CliResult<()> {
    let kind: RenderKind = a.kind.parse()?;
    let cmap = Colormap::by_name(&a.colormap)?;
    let sig = read_signal(&a.input, a.rate)?;
    let auto = StftParams::for_rate(sig.rate());
    let params = StftParams::new(
        a.window.unwrap_or(auto.window),
        a.hop.unwrap_or(auto.hop),
        a.fft_size.unwrap_or(a.window.unwrap_or(auto.fft_size)),
    )?;
    let img = render(&sig, kind, params, &cmap)?;
    output(&a.out, img.save(&a.out))?;
    print_line(&a.out.display().to_string())
}

/// Backbone from a checkpoint, or the default layout initialized from `seed`.
fn load_backbone(checkpoint: Option<&Path>, seed: u64) -> CliResult<(BackboneConfig, ParamStore<f32>)> {
    let (cfg, params) = match checkpoint {
        Some(p) => {
            let params = read_checkpoint(p)?;
            (checkpoint_backbone(&params)?, params)
        }
        None => {
            let cfg = BackboneConfig::default();
            let params = init_params(&cfg, seed)?;
            (cfg, params)
        }
    };
    if cfg.image_size != IMAGE_SIZE || cfg.in_channels != 3 {
        return Err(usage(format!(
            "checkpoint expects {0}x{0}x{1} images, inputs are {IMAGE_SIZE}x{IMAGE_SIZE}x3",
            cfg.image_size, cfg.in_channels
        )));
    }
    Ok((cfg, params))
}

fn image_paths(path: &Path) -> CliResult<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| usage(format!("reading {}: {e}", path.display())))?.path();
        let ext = p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("ppm" | "png")) {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no .ppm or .png images in {}", path.display())));
    }
    Ok(paths)
}

pub fn embed_images(a: &EmbedArgs, seed: u64) -> CliResult<()> {
    let paths = image_paths(&a.image)?;
    let (cfg, params) = load_backbone(a.checkpoint.as_deref(), seed)?;
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let img = RasterImage::load(p)?;
        let e = embed(&cfg, &params, &img.to_tensor::<f32>())?;
        frames.push(FrameEmbedding::new(e.into_data())?);
    }
    let n = frames.len();
    let t = if a.unify {
        let v = concat_frame_embeddings(&frames)?;
        Tensor::new(vec![v.values().len()], v.values().to_vec())?
    } else if a.image.is_dir() {
        let d = frames[0].values().len();
        Tensor::new(vec![n, d], frames.into_iter().flat_map(FrameEmbedding::into_values).collect())?
    } else {
        let v = frames.remove(0).into_values();
        Tensor::new(vec![v.len()], v)?
    };
    output(&a.out, write_embedding(&a.out, &t))?;
    print_line(&a.out.display().to_string())
}

fn stem(p: &Path) -> String {
    p.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string()
}

fn write_fused(out: &Path, fused: &FusedEmbedding) -> CliResult<()> {
    let t = Tensor::new(vec![fused.values.len()], fused.values.clone())?;
    output(out, write_embedding(out, &t))?;
    let spans: Vec<_> =
        fused.provenance.iter().map(|s| json!({"source": s.source, "start": s.start, "len": s.len})).collect();
    let sidecar = out.with_extension("json");
    output(&sidecar, fs::write(&sidecar, serde_json::to_vec_pretty(&json!({ "spans": spans })).expect("json")))
}

pub fn fuse(a: &FuseArgs, seed: u64) -> CliResult<()> {
    let inputs: Vec<Tensor<f32>> = a.inputs.iter().map(|p| read_embedding(p)).collect::<Result<_, _>>()?;
    match a.mode {
        FuseMode::Add => {
            if inputs.len() < 2 {
                return Err(usage("add needs at least 2 inputs"));
            }
            let mut acc = inputs[0].data().to_vec();
            for t in &inputs[1..] {
                if t.shape() != inputs[0].shape() {
                    return Err(usage(format!("cannot add embeddings of dims {:?} and {:?}", inputs[0].shape(), t.shape())));
                }
                acc = fuse_add(&acc, t.data())?;
            }
            output(&a.out, write_embedding(&a.out, &Tensor::new(inputs[0].shape().to_vec(), acc)?))?;
        }
        FuseMode::Concat => {
            let names: Vec<String> = a.inputs.iter().map(|p| stem(p)).collect();
            let parts: Vec<(&str, &[f32])> = names.iter().map(String::as_str).zip(inputs.iter().map(|t| t.data())).collect();
            write_fused(&a.out, &fuse_concat(&parts)?)?;
        }
        FuseMode::Decision => {
            let probs: Vec<Vec<f64>> = inputs.iter().map(|t| t.data().iter().map(|&v| v as f64).collect()).collect();
            let fused = fuse_decision(&probs)?;
            let n = fused.len();
            let t = Tensor::new(vec![n], fused.into_iter().map(|v| v as f32).collect())?;
            output(&a.out, write_embedding(&a.out, &t))?;
        }
        FuseMode::BiovidMultimodal => {
            let [gsr, rgb, thermal, depth] = inputs.as_slice() else {
                return Err(usage(format!("biovid-multimodal takes GSR, RGB, thermal and depth inputs, got {}", inputs.len())));
            };
            let cfg = VideoEncoderConfig::default();
            let encoder = match &a.checkpoint {
                Some(p) => read_checkpoint(p)?,
                None => init_video_encoder(&cfg, seed)?,
            };
            let video = |t: &Tensor<f32>| VideoEmbedding::new(t.data().to_vec());
            let fused = multimodal_biovid_fuse(
                &GsrEmbedding::new(gsr.data().to_vec())?,
                &video(rgb)?,
                &video(thermal)?,
                &video(depth)?,
                &cfg,
                &encoder,
            )?;
            write_fused(&a.out, &fused)?;
        }
    }
    print_line(&a.out.display().to_string())
}

pub fn train_toy(a: &TrainToyArgs, seed: u64) -> CliResult<()> {
    let mode = match a.weighting.as_str() {
        "standard" => MultitaskMode::Standard,
        "verbatim" => MultitaskMode::Verbatim,
        other => return Err(usage(format!("unknown weighting {other:?} (expected standard or verbatim)"))),
    };
    let cfg = BackboneConfig::toy();
    let specs: Vec<TaskSpec> =
        a.classes.iter().map(|&k| TaskSpec::new(k, a.subjects, a.samples, a.separation)).collect();
    let tasks = generate_synthetic_tasks(&specs, cfg.image_size, cfg.in_channels, seed)?;
    let train = TrainConfig {
        schedule: ScheduleConfig {
            base_lr: a.lr,
            warmup_epochs: a.warmup,
            cooldown_epochs: a.cooldown,
            total_epochs: a.epochs,
            steps_per_epoch: a.steps_per_epoch,
            min_lr_ratio: 0.01,
        },
        optimizer: AdamW { weight_decay: a.weight_decay, ..AdamW::default() },
        batch_size: a.batch,
        label_smoothing: a.label_smoothing,
        drop_path: a.drop_path,
        dropout: a.dropout,
        mode,
        holdout_subjects: a.holdout,
    };
    let out = train_toy_multitask(&cfg, &tasks, &train, seed)?;
    if let Some(path) = &a.metrics {
        let file = output(path, fs::File::create(path))?;
        output(path, write_trace(&out.trace, std::io::BufWriter::new(file)))?;
    }
    if let Some(path) = &a.checkpoint {
        let mut params = out.params.clone();
        params.insert(META_BACKBONE, backbone_meta(&cfg))?;
        let classes: Vec<f32> = a.classes.iter().map(|&k| k as f32).collect();
        params.insert(META_TASKS, Tensor::new(vec![classes.len()], classes)?)?;
        output(path, write_checkpoint(path, &params))?;
    }
    print_json(&json!({
        "steps": out.trace.len(),
        "final_loss": out.final_loss,
        "accuracy": out.accuracy,
        "w": out.trace.last().map(|r| r.w.clone()),
    }))
}

pub fn loso(a: &LosoArgs, seed: u64) -> CliResult<()> {
    let spec = TaskSpec::new(a.classes, a.subjects, a.samples, a.separation);
    let task = generate_synthetic_tasks(&[spec], a.side, a.channels, seed)?.remove(0);
    let (x, y, s) = (task.features(), task.labels(), task.subjects());
    let classifier = match a.classifier {
        ClassifierKind::Probe => Classifier::Probe(ProbeConfig::default()),
        ClassifierKind::Centroid => Classifier::Centroid,
    };
    let report = run_loso(&x, &y, &s, a.classes, &classifier, seed)?;
    let baseline = run_loso(&x, &y, &s, a.classes, &Classifier::Centroid, seed)?;
    print_json(&json!({
        "classifier": format!("{:?}", a.classifier).to_lowercase(),
        "folds": report.folds,
        "mean": report.mean,
        "baseline": baseline.mean,
    }))
}

pub fn attention(a: &AttentionArgs, seed: u64) -> CliResult<()> {
    let cmap = Colormap::by_name(&a.colormap)?;
    let (cfg, params) = load_backbone(a.checkpoint.as_deref(), seed)?;
    let img = RasterImage::load(&a.image)?;
    let map = attention_map(&cfg, &params, &img.to_tensor::<f32>(), a.head)?;
    let pixels: Vec<u8> = map.data().iter().flat_map(|&v| cmap.map(v as f64)).collect();
    let heat = RasterImage::from_pixels(pixels)?;
    output(&a.out, heat.save(&a.out))?;
    print_line(&a.out.display().to_string())
}

pub fn params(a: &ParamsArgs, seed: u64) -> CliResult<()> {
    let cfg = BackboneConfig::default();
    let backbone = init_params::<f32>(&cfg, seed)?;
    let mixer = init_mixer::<f32>(&MixerConfig::new(a.classes), seed)?;
    let video = init_video_encoder::<f32>(&VideoEncoderConfig::default(), seed)?;
    let mut parts = vec![("patch".to_string(), backbone.count_prefix("patch."))];
    for s in 1..=cfg.stages.len() {
        parts.push((format!("stage{s}"), backbone.count_prefix(&format!("stage{s}."))));
    }
    let rows = [
        ("backbone", backbone.num_scalars(), REFERENCE_BACKBONE),
        ("mixer", mixer.num_scalars(), REFERENCE_MIXER),
        ("video-encoder", video.num_scalars(), REFERENCE_VIDEO),
    ];
    if a.json {
        let modules: Vec<_> = rows
            .iter()
            .map(|(n, c, r)| json!({"module": n, "params": c, "reference": r, "ratio": *c as f64 / *r as f64}))
            .collect();
        let backbone_parts: Vec<_> = parts.iter().map(|(n, c)| json!({"part": n, "params": c})).collect();
        return print_json(&json!({"modules": modules, "backbone_parts": backbone_parts}));
    }
    print_line(&format!("{:<16}{:>12}{:>12}{:>8}", "module", "params", "reference", "ratio"))?;
    for (name, count, reference) in rows {
        print_line(&format!("{name:<16}{count:>12}{reference:>12}{:>8.3}", count as f64 / reference as f64))?;
        if name == "backbone" {
            for (part, c) in &parts {
                print_line(&format!("  {part:<14}{c:>12}"))?;
            }
        }
    }
    Ok(())
}

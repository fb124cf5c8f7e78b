//! Acceptance run: every criterion at its stated tolerance, one result line
//! each. Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use painformer::backbone::{forward, init_params, spectral_gate, BackboneConfig, StageConfig};
use painformer::embedding::{
    augment_basic, augment_masking, concat_frame_embeddings, fnirs_aggregate, fuse_add, fuse_concat, fuse_decision,
    multimodal_biovid_fuse, sum_frame_embeddings, FrameEmbedding, GsrEmbedding, NoiseStd, VideoEmbedding,
};
use painformer::heads::{encode_video, init_mixer, init_video_encoder, mix, MixerConfig, VideoEncoderConfig};
use painformer::imaging::{
    render_spectrogram_phase, render_spectrogram_psd, render_waveform, Colormap, RasterImage, Signal, StftParams,
};
use painformer::kernel::{check_gradients, fft2, ifft2, relative_error, ComplexGrid, FourierPlan, Tape, Tensor, Var};
use painformer::nn::regularize::{dropout, droppath};
use painformer::nn::{Graph, Mode, ParamStore};
use painformer::training::{
    generate_synthetic_tasks, loso_split, multitask_loss, multitask_loss_grad, multitask_loss_tape,
    train_toy_multitask, MultitaskMode, NearestCentroid, TaskSpec, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-scale..scale))
}

fn grid(rng: &mut ChaCha8Rng, m: usize, n: usize) -> ComplexGrid<f64> {
    let re = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let im = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ComplexGrid::new(m, n, re, im).unwrap()
}

fn double_sum(x: &ComplexGrid<f64>, inverse: bool) -> Vec<Complex64> {
    let (m, n) = (x.rows(), x.cols());
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = Vec::with_capacity(m * n);
    for u in 0..m {
        for v in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..m {
                for c in 0..n {
                    let phase = sign * 2.0 * PI * ((u * r) as f64 / m as f64 + (v * c) as f64 / n as f64);
                    acc += x.get(r, c) * Complex64::from_polar(1.0, phase);
                }
            }
            out.push(if inverse { acc / (m * n) as f64 } else { acc });
        }
    }
    out
}

fn grid_diff(a: &ComplexGrid<f64>, b: impl Fn(usize, usize) -> Complex64) -> f64 {
    let mut worst = 0.0f64;
    for u in 0..a.rows() {
        for v in 0..a.cols() {
            worst = worst.max((a.get(u, v) - b(u, v)).norm());
        }
    }
    worst
}

fn fft_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_direct = 0.0f64;
    for m in 1..=8 {
        for n in 1..=8 {
            let plan = FourierPlan::<f64>::new(m, n).unwrap();
            let x = grid(&mut rng, m, n);
            let want = double_sum(&x, false);
            worst_direct = worst_direct.max(grid_diff(&fft2(&x, &plan).unwrap(), |u, v| want[u * n + v]));
            let want = double_sum(&x, true);
            worst_direct = worst_direct.max(grid_diff(&ifft2(&x, &plan).unwrap(), |u, v| want[u * n + v]));
        }
    }
    check!(worst_direct < 1e-9, "direct sum deviation {worst_direct:e}");
    let (mut worst_trip, mut worst_parseval) = (0.0f64, 0.0f64);
    for m in 1..=16 {
        for n in 1..=16 {
            let plan = FourierPlan::<f64>::new(m, n).unwrap();
            let x = grid(&mut rng, m, n);
            let f = fft2(&x, &plan).unwrap();
            let back = ifft2(&f, &plan).unwrap();
            worst_trip = worst_trip.max(grid_diff(&back, |u, v| x.get(u, v)));
            let energy = |g: &ComplexGrid<f64>| {
                (0..m).flat_map(|u| (0..n).map(move |v| (u, v))).map(|(u, v)| g.get(u, v).norm_sqr()).sum::<f64>()
            };
            let (ex, ef) = (energy(&x), energy(&f));
            worst_parseval = worst_parseval.max((ef / (m * n) as f64 - ex).abs() / ex);
        }
    }
    check!(worst_trip < 1e-9, "roundtrip deviation {worst_trip:e}");
    check!(worst_parseval < 1e-9, "Parseval deviation {worst_parseval:e}");
    let t = start.elapsed();
    check!(t < Duration::from_secs(5), "took {t:?}");
    Ok(format!("direct {worst_direct:.1e}, roundtrip {worst_trip:.1e}, Parseval {worst_parseval:.1e}, {t:.2?}"))
}

type Build = Box<dyn for<'t> Fn(&mut Tape<'t, f64>, &[Var]) -> painformer::Result<Var>>;

/// Weighted sum with a distinct slope per output coordinate.
fn probe(t: &mut Tape<'_, f64>, y: Var) -> painformer::Result<Var> {
    let shape = t.shape(y).to_vec();
    let w = t.constant(Tensor::from_fn(&shape, |i| ((i * 7 % 11) as f64 - 5.0) / 5.0 + 0.3));
    let p = t.mul(y, w)?;
    Ok(t.sum(p))
}

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor<f64>>, Build)> {
    let a = rand_t(rng, &[3, 4], 1.0);
    let b = rand_t(rng, &[3, 4], 1.0);
    let w = rand_t(rng, &[4, 2], 1.0);
    let bias = rand_t(rng, &[2], 1.0);
    let img = rand_t(rng, &[5, 4, 3], 1.0);
    let dk = rand_t(rng, &[3, 3, 3], 1.0);
    let ck = rand_t(rng, &[3, 3, 3, 2], 1.0);
    let z = rand_t(rng, &[3, 4, 2, 2], 1.0);
    let kf = rand_t(rng, &[3, 4, 2, 2], 1.0);
    let gamma = rand_t(rng, &[4], 1.0);
    let elu_in = a.map(|x| if x.abs() < 0.05 { x + 0.2 } else { x });
    vec![
        ("add", vec![a.clone(), b.clone()], Box::new(|t, v| { let y = t.add(v[0], v[1])?; probe(t, y) })),
        ("mul", vec![a.clone(), b.clone()], Box::new(|t, v| { let y = t.mul(v[0], v[1])?; probe(t, y) })),
        ("add_bias", vec![w.clone(), bias.clone()], Box::new(|t, v| { let y = t.add_bias(v[0], v[1])?; probe(t, y) })),
        ("scale", vec![a.clone()], Box::new(|t, v| { let y = t.scale(v[0], -1.3); probe(t, y) })),
        ("matmul", vec![a.clone(), w.clone()], Box::new(|t, v| { let y = t.matmul(v[0], v[1])?; probe(t, y) })),
        ("linear", vec![a.clone(), w.clone(), bias.clone()], Box::new(|t, v| { let y = t.linear(v[0], v[1], Some(v[2]))?; probe(t, y) })),
        ("transpose", vec![a.clone()], Box::new(|t, v| { let y = t.transpose(v[0])?; probe(t, y) })),
        ("reshape", vec![a.clone()], Box::new(|t, v| { let y = t.reshape(v[0], &[2, 6])?; probe(t, y) })),
        ("slice/concat", vec![a.clone(), b.clone()], Box::new(|t, v| { let s = t.slice_cols(v[0], 1, 2)?; let y = t.concat_cols(&[v[1], s])?; probe(t, y) })),
        ("gelu", vec![a.clone()], Box::new(|t, v| { let y = t.gelu(v[0]); probe(t, y) })),
        ("elu", vec![elu_in], Box::new(|t, v| { let y = t.elu(v[0]); probe(t, y) })),
        ("exp", vec![a.clone()], Box::new(|t, v| { let y = t.exp(v[0]); probe(t, y) })),
        ("softmax_rows", vec![a.clone()], Box::new(|t, v| { let y = t.softmax_rows(v[0]); probe(t, y) })),
        ("layer_norm", vec![a.clone(), gamma.clone(), gamma.map(|x| x * 0.5)], Box::new(|t, v| { let y = t.layer_norm(v[0], v[1], v[2])?; probe(t, y) })),
        ("depthwise_conv2d", vec![img.clone(), dk], Box::new(|t, v| { let y = t.depthwise_conv2d(v[0], v[1], 1, 1)?; probe(t, y) })),
        ("conv2d", vec![img.clone(), ck], Box::new(|t, v| { let y = t.conv2d(v[0], v[1], 2, 1)?; probe(t, y) })),
        ("patchify", vec![rand_t(rng, &[4, 6, 2], 1.0)], Box::new(|t, v| { let y = t.patchify(v[0], 2)?; probe(t, y) })),
        ("to_complex", vec![img.clone()], Box::new(|t, v| { let y = t.to_complex(v[0]); probe(t, y) })),
        ("complex_re", vec![z.clone()], Box::new(|t, v| { let y = t.complex_re(v[0])?; probe(t, y) })),
        ("complex_mul", vec![z.clone(), kf], Box::new(|t, v| { let y = t.complex_mul(v[0], v[1])?; probe(t, y) })),
        ("fft2", vec![z.clone()], Box::new(|t, v| { let y = t.fft2(v[0])?; probe(t, y) })),
        ("ifft2", vec![z], Box::new(|t, v| { let y = t.ifft2(v[0])?; probe(t, y) })),
        ("mean_rows", vec![a.clone()], Box::new(|t, v| { let y = t.mean_rows(v[0]); probe(t, y) })),
        ("sum", vec![a.clone()], Box::new(|t, v| Ok(t.sum(v[0])))),
        ("cross_entropy", vec![rand_t(rng, &[5], 1.0)], Box::new(|t, v| t.cross_entropy(v[0], 3, 0.1))),
    ]
}

/// Worst relative error of graph adjoints against central differences over
/// every tensor in `store`.
fn store_gradient_error<F>(store: &ParamStore<f64>, f: F) -> (f64, String)
where
    F: for<'a> Fn(&mut Graph<'a, f64>) -> painformer::Result<Var>,
{
    let eps = 1e-5;
    let eval = |s: &ParamStore<f64>| {
        let mut g = Graph::eval(s);
        let out = f(&mut g).unwrap();
        g.value(out).data()[0]
    };
    let mut g = Graph::trainable(store);
    let out = f(&mut g).unwrap();
    let grads = g.gradients(out).unwrap();
    let mut worst = (0.0, String::new());
    for (name, value) in store.iter() {
        let mut probe = store.clone();
        let mut fd = Tensor::zeros(value.shape());
        for i in 0..value.numel() {
            let orig = value.data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = orig + eps;
            let up = eval(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig - eps;
            let down = eval(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig;
            fd.data_mut()[i] = (up - down) / (2.0 * eps);
        }
        let got = if grads.contains(name) { grads.get(name).unwrap().clone() } else { Tensor::zeros(value.shape()) };
        let err = relative_error(&got, &fd);
        if err > worst.0 {
            worst = (err, name.to_string());
        }
    }
    worst
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = (0.0f64, "");
    let cases = op_cases(&mut rng);
    let n_ops = cases.len();
    for (name, inputs, build) in cases {
        let err = check_gradients(&inputs, 1e-5, |t, v| build(t, v)).unwrap().worst();
        if err > worst.0 {
            worst = (err, name);
        }
    }
    check!(worst.0 < 1e-4, "op {} relative error {:e}", worst.1, worst.0);

    let cfg = BackboneConfig { image_size: 8, patch_size: 2, in_channels: 3, mlp_ratio: 4, stages: vec![StageConfig::new(1, 1, 2, 4)] };
    let mut store = init_params::<f64>(&cfg, 10).unwrap();
    for (_, t) in store.iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    store.insert("image", rand_t(&mut rng, &[8, 8, 3], 1.0)).unwrap();
    let (err, name) = store_gradient_error(&store, |g| {
        let x = g.param("image")?;
        let out = forward(g, &cfg, x, &mut Mode::Eval)?;
        let w = g.input(Tensor::from_fn(&[4], |i| i as f64 - 1.3));
        let p = g.tape.mul(out.embedding, w)?;
        Ok(g.tape.sum(p))
    });
    check!(err < 1e-4, "tiny backbone {name}: {err:e}");
    let t = start.elapsed();
    check!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!("{n_ops} ops worst {:.1e} ({}), tiny backbone {err:.1e}, {t:.2?}", worst.0, worst.1))
}

fn dimension_contract() -> Outcome {
    let cfg = BackboneConfig::default();
    let params = init_params::<f32>(&cfg, 3).unwrap();
    let image = Tensor::from_fn(&[224, 224, 3], |i| ((i * 37 % 101) as f32) / 101.0);
    let mut g = Graph::eval(&params);
    let x = g.input(image);
    let out = forward(&mut g, &cfg, x, &mut Mode::Eval).map_err(|e| e.to_string())?;
    let want: Vec<Vec<usize>> =
        vec![vec![224, 224, 3], vec![14, 14, 64], vec![7, 7, 128], vec![4, 4, 320], vec![2, 2, 160], vec![160]];
    check!(out.boundaries == want, "pipeline {:?}", out.boundaries);
    Ok("224x224x3 -> 14x14x64 -> 7x7x128 -> 4x4x320 -> 2x2x160 -> 160".into())
}

/// Backbone count from the stage table alone.
fn closed_form_backbone(cfg: &BackboneConfig) -> usize {
    let r = cfg.mlp_ratio;
    let mut total = cfg.patch_dim() * cfg.stages[0].dim + cfg.stages[0].dim;
    for (s, st) in cfg.stages.iter().enumerate() {
        let d = st.dim;
        let side = cfg.grid(s);
        let mlp = (d * r * d + r * d) + (r * d * d + d);
        let spectral = 4 * d + side * side * d * 2 + mlp + 10 * r * d;
        let attention = 4 * d + 4 * (d * d + d) + mlp;
        total += side * side * d + st.spectral_layers * spectral + st.attention_layers * attention;
        if let Some(next) = cfg.stages.get(s + 1) {
            total += 9 * d * next.dim + next.dim;
        }
    }
    total
}

fn parameter_report() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_painformer")).args(["params", "--json"]).output().unwrap();
    check!(out.status.success(), "params exited {:?}", out.status.code());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let modules = json["modules"].as_array().ok_or("no modules")?;
    let golden = [17_569_216u64, 10_599_810, 2_943_848];
    let reference = [19.60e6, 9.85e6, 3.37e6];
    let mut parts = Vec::new();
    for ((m, &g), &r) in modules.iter().zip(&golden).zip(&reference) {
        let count = m["params"].as_u64().ok_or("missing count")?;
        check!(count == g, "{} count {count}, golden {g}", m["module"]);
        let ratio = count as f64 / r;
        check!((ratio - 1.0).abs() <= 0.25, "{} ratio {ratio:.3}", m["module"]);
        parts.push(format!("{} {count} ({ratio:.3}x)", m["module"].as_str().unwrap_or("?")));
    }
    let cfg = BackboneConfig::default();
    check!(closed_form_backbone(&cfg) as u64 == golden[0], "closed form {}", closed_form_backbone(&cfg));
    let stores = [
        init_mixer::<f32>(&MixerConfig::new(2), 0).unwrap().num_scalars(),
        init_video_encoder::<f32>(&VideoEncoderConfig::default(), 0).unwrap().num_scalars(),
    ];
    check!(stores[0] as u64 == golden[1] && stores[1] as u64 == golden[2], "head stores {stores:?}");
    Ok(parts.join(", "))
}

fn frames(rng: &mut ChaCha8Rng, m: usize) -> Vec<FrameEmbedding> {
    (0..m).map(|_| FrameEmbedding::new((0..160).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()).collect()
}

fn embedding_dimensions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let fs = frames(&mut rng, 138);
    let video = concat_frame_embeddings(&fs).unwrap();
    check!(video.values().len() == 138 * 160 && video.values().len() == 22080, "unified {}", video.values().len());
    for (j, f) in fs.iter().enumerate() {
        check!(&video.values()[j * 160..(j + 1) * 160] == f.values(), "frame {j} misplaced");
    }
    let gsr = GsrEmbedding::new(frames(&mut rng, 1).remove(0).into_values()).unwrap();
    let vcfg = VideoEncoderConfig::default();
    let enc = init_video_encoder::<f32>(&vcfg, 5).unwrap();
    let fused = multimodal_biovid_fuse(&gsr, &video, &video, &video, &vcfg, &enc).unwrap();
    check!(fused.values.len() == 200, "fused {}", fused.values.len());
    check!(&fused.values[..160] == gsr.values(), "GSR not at 0..159");
    let pooled = sum_frame_embeddings(&fs[..5]).unwrap();
    let fnirs = fnirs_aggregate(&fs[..22]).unwrap();
    check!(pooled.values().len() == 160 && fnirs.values().len() == 160, "pooled lengths");
    let mcfg = MixerConfig::new(2);
    let mixer = init_mixer::<f32>(&mcfg, 5).unwrap();
    let (emb, logits) = mix(&mcfg, &mixer, &Tensor::from_fn(&[3, 160], |i| (i as f32 * 0.01).sin())).unwrap();
    check!(emb.numel() == 512 && logits.numel() == 2, "mixer {:?}", emb.shape());
    let v = encode_video(&vcfg, &enc, &Tensor::new(vec![22080], video.values().to_vec()).unwrap()).unwrap();
    check!(v.numel() == 40, "video encoder {:?}", v.shape());
    Ok("22080, 200 (GSR 0..159), 160, 160, 512, 40".into())
}

fn spectral_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f32;
    for (h, w, d) in [(14, 14, 64), (7, 7, 128), (4, 4, 320), (2, 2, 160), (5, 3, 7)] {
        let k = Tensor::<f32>::from_fn(&[h, w, d, 2], |i| if i % 2 == 0 { 1.0 } else { 0.0 });
        let z = rand_t(&mut rng, &[h, w, d], 2.0).cast::<f32>();
        let empty = ParamStore::new();
        let mut g = Graph::eval(&empty);
        let (zv, kv) = (g.input(z.clone()), g.input(k));
        let y = spectral_gate(&mut g, zv, kv).unwrap();
        worst = worst.max(g.value(y).max_abs_diff(&z));
    }
    check!(worst < 1e-6, "max deviation {worst:e}");
    Ok(format!("max deviation {worst:.1e}"))
}

fn multitask_suite() -> Outcome {
    let losses: Vec<f64> = (0..14).map(|i| 0.05 + 0.3 * i as f64).collect();
    for mode in [MultitaskMode::Standard, MultitaskMode::Verbatim] {
        let total = multitask_loss(&losses, &[0.0; 14], mode).unwrap();
        check!(total == losses.iter().sum::<f64>(), "{mode:?} w=0 gives {total}");
    }
    let frozen = [0.3, 0.8, 1.9];
    let mut w = vec![0.0; 3];
    for _ in 0..20_000 {
        let (dw, _) = multitask_loss_grad(&frozen, &w, MultitaskMode::Standard).unwrap();
        w.iter_mut().zip(&dw).for_each(|(wi, g)| *wi -= 0.05 * g);
    }
    let stat = w.iter().zip(&frozen).map(|(wi, l)| (wi - l.ln()).abs()).fold(0.0, f64::max);
    check!(stat < 1e-4, "stationary deviation {stat:e}");
    let l = vec![0.4, 1.3, 0.05, 2.2];
    let wv = vec![0.3, -0.7, 1.1, 0.0];
    let mut worst = 0.0f64;
    for mode in [MultitaskMode::Standard, MultitaskMode::Verbatim] {
        let (dw, _) = multitask_loss_grad(&l, &wv, mode).unwrap();
        let mut tape = Tape::new();
        let lv = tape.constant(Tensor::new(vec![4], l.clone()).unwrap());
        let wvar = tape.leaf(Tensor::new(vec![4], wv.clone()).unwrap());
        let out = multitask_loss_tape(&mut tape, lv, wvar, mode).unwrap();
        let tape_dw = tape.backward(out).unwrap().get(wvar);
        for i in 0..4 {
            let h = 1e-6;
            let mut up = wv.clone();
            up[i] += h;
            let mut down = wv.clone();
            down[i] -= h;
            let fd = (multitask_loss(&l, &up, mode).unwrap() - multitask_loss(&l, &down, mode).unwrap()) / (2.0 * h);
            let scale = fd.abs().max(1.0);
            worst = worst.max((dw[i] - fd).abs() / scale).max((tape_dw.data()[i] - fd).abs() / scale);
        }
    }
    check!(worst < 1e-5, "gradient error {worst:e}");
    Ok(format!("w=0 exact, stationary {stat:.1e}, gradients {worst:.1e}"))
}

fn toy_convergence() -> Outcome {
    let start = Instant::now();
    let specs = [TaskSpec::new(2, 10, 20, 4.0), TaskSpec::new(3, 10, 20, 4.0), TaskSpec::new(4, 10, 20, 4.0)];
    let tasks = generate_synthetic_tasks(&specs, 32, 3, 7).unwrap();
    let train = TrainConfig::default();
    check!(train.schedule.total_steps() <= 300, "{} steps", train.schedule.total_steps());
    let mut ceiling = Vec::new();
    for t in &tasks {
        let (tr, te): (Vec<usize>, Vec<usize>) = (0..t.samples.len()).partition(|&i| t.samples[i].subject < 8);
        let xs: Vec<&[f32]> = tr.iter().map(|&i| t.samples[i].image.data()).collect();
        let ys: Vec<usize> = tr.iter().map(|&i| t.samples[i].label).collect();
        let m = NearestCentroid::fit(&xs, &ys, t.classes).unwrap();
        let hits = te.iter().filter(|&&i| m.predict(t.samples[i].image.data()) == t.samples[i].label).count();
        ceiling.push(hits as f64 / te.len() as f64);
    }
    check!(ceiling.iter().all(|&c| c >= 0.9), "centroid ceiling {ceiling:?} below the threshold");
    let out = train_toy_multitask(&BackboneConfig::toy(), &tasks, &train, 7).unwrap();
    check!(out.accuracy.iter().all(|&a| a >= 0.9), "accuracy {:?}", out.accuracy);
    let t = start.elapsed();
    check!(t < Duration::from_secs(300), "took {t:?}");
    Ok(format!("accuracy {:?} in {} steps (centroid ceiling {ceiling:?}), {t:.1?}", out.accuracy, out.trace.len()))
}

fn sha(img: &RasterImage) -> String {
    hex::encode(Sha256::digest(img.to_ppm()))
}

fn rasterizer_goldens() -> Outcome {
    let (rate, len) = (512.0, 2816);
    let p = StftParams::for_rate(rate);
    let gray = Colormap::gray();
    let zero = Signal::new(vec![0.0; len], rate, "zero").unwrap();
    let sine = Signal::new((0..len).map(|n| (2.0 * PI * 8.0 * n as f64 / rate).sin()).collect(), rate, "sine").unwrap();
    let ramp = Signal::new((0..len).map(|n| if n % 256 == 40 { 1.0 } else { 0.0 }).collect(), rate, "ramp").unwrap();
    let render = || {
        [
            sha(&render_waveform(&zero)),
            sha(&render_spectrogram_psd(&sine, p, &gray).unwrap()),
            sha(&render_spectrogram_phase(&ramp, p, &gray).unwrap()),
        ]
    };
    let got = render();
    let want = [
        "ed0702595e68709cb2f303c0f06debdf1325279aac7697941a6db7e5d44dc266",
        "1c9130806b5fbaeb153fe35b5dfa416836e2d83a25d5bfd5bed266a2384d91af",
        "bfd62f884b7964bc8f4277c444ff033fe085a160bdc116aa24a26bb649d2d038",
    ];
    for (name, (g, w)) in ["waveform", "psd", "phase"].iter().zip(got.iter().zip(want)) {
        check!(g == w, "{name} hash {g}");
    }
    check!(render() == got, "repeat run differs");
    let psd = render_spectrogram_psd(&sine, p, &gray).unwrap();
    let row_sum = |r: usize| (0..224).map(|c| psd.get(r, c)[0] as u32).sum::<u32>();
    let brightest = (0..224).max_by_key(|&r| row_sum(r)).unwrap();
    let bin = ((2 * (223 - brightest) + 1) * p.bins()) / 448;
    check!(bin == 4, "brightest row {brightest} maps to bin {bin}");
    Ok("waveform, psd (brightest bin 4), phase ramp match; repeat identical".into())
}

fn augmentation_contracts() -> Outcome {
    let e: Vec<f32> = (0..160).map(|i| (i as f32 * 0.3).sin() + 1.5).collect();
    for seed in 0..1000 {
        let out = augment_masking(&e, seed).unwrap();
        let zeroed = out.iter().filter(|&&v| v == 0.0).count();
        check!((16..=32).contains(&zeroed), "seed {seed}: span {zeroed}");
    }
    let flipped = augment_basic(&e, 1.0, NoiseStd::Absolute(0.0), 1).unwrap();
    check!(flipped.iter().zip(&e).all(|(a, b)| a.to_bits() == (-b).to_bits()), "flip is not exact negation");
    let x = Tensor::from_fn(&[6, 5], |i| (i as f32 * 0.7).cos());
    for rate in [0.1, 0.5, 0.9] {
        check!(dropout(&x, rate, 3, false).unwrap() == x, "dropout eval at {rate}");
        check!(droppath(&x, rate, 3, false).unwrap() == x, "droppath eval at {rate}");
    }
    let params = init_params::<f32>(&BackboneConfig::toy(), 4).unwrap();
    let img = Tensor::from_fn(&[32, 32, 3], |i| (i % 17) as f32 / 17.0);
    let run = || {
        let mut g = Graph::eval(&params);
        let xv = g.input(img.clone());
        let out = forward(&mut g, &BackboneConfig::toy(), xv, &mut Mode::Eval).unwrap();
        g.value(out.embedding).clone()
    };
    check!(run() == run(), "eval forward not reproducible");
    Ok("1000 spans within [16, 32] at D=160; flip exact; eval identities bit-exact".into())
}

fn loso_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for k in 2..=87usize {
        let repeats = if k <= 12 { 4 } else { 1 };
        for _ in 0..repeats {
            let n = k + rng.random_range(0..3 * k);
            let mut subjects: Vec<usize> = (0..k).collect();
            subjects.extend((k..n).map(|_| rng.random_range(0..k)));
            let folds = loso_split(&subjects).unwrap();
            check!(folds.len() == k, "{k} subjects gave {} folds", folds.len());
            let mut tested = vec![0; n];
            for f in &folds {
                let mut seen = vec![0; n];
                f.train.iter().chain(&f.test).for_each(|&i| seen[i] += 1);
                check!(seen.iter().all(|&c| c == 1), "fold {} is not a partition", f.subject);
                check!(f.test.iter().all(|&i| subjects[i] == f.subject), "fold {} leaks", f.subject);
                check!(f.train.iter().all(|&i| subjects[i] != f.subject), "fold {} trains on test subject", f.subject);
                f.test.iter().for_each(|&i| tested[i] += 1);
            }
            check!(tested.iter().all(|&c| c == 1), "samples not tested exactly once");
            checked += 1;
        }
    }
    check!(loso_split(&[0, 0, 0]).is_err(), "single subject accepted");
    // exhaustive over all subject assignments of up to 5 samples
    for n in 2..=5usize {
        for code in 0..n.pow(n as u32) {
            let subjects: Vec<usize> = (0..n).map(|i| (code / n.pow(i as u32)) % n).collect();
            if subjects.iter().all(|&s| s == subjects[0]) {
                continue;
            }
            let folds = loso_split(&subjects).unwrap();
            let total: usize = folds.iter().map(|f| f.test.len()).sum();
            check!(total == n && folds.iter().all(|f| f.train.len() + f.test.len() == n), "{subjects:?}");
        }
    }
    Ok(format!("{checked} datasets with 2..=87 subjects, exhaustive up to 5 samples"))
}

fn fusion_oracle() -> Outcome {
    let d = fuse_decision(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    check!(d == vec![0.5, 0.5], "decision {d:?}");
    let srcs = vec![vec![0.1, 0.6, 0.3], vec![0.5, 0.2, 0.3], vec![0.3, 0.3, 0.4]];
    let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    let base = argmax(&fuse_decision(&srcs).unwrap());
    for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        let p: Vec<Vec<f64>> = perm.iter().map(|&i| srcs[i].clone()).collect();
        check!(argmax(&fuse_decision(&p).unwrap()) == base, "argmax changed under {perm:?}");
    }
    let x: Vec<f32> = (0..160).map(|i| i as f32 * 0.25 - 3.0).collect();
    let y: Vec<f32> = (0..160).map(|i| (i as f32).sqrt()).collect();
    check!(fuse_add(&x, &[0.0; 160]).unwrap() == x, "add identity");
    check!(fuse_add(&x, &y).unwrap() == fuse_add(&y, &x).unwrap(), "add commutes");
    let v: Vec<f32> = (0..40).map(|i| i as f32).collect();
    let c = fuse_concat(&[("gsr", &x), ("video", &v)]).unwrap();
    check!(c.values.len() == 200 && c.split() == vec![("gsr", x.as_slice()), ("video", v.as_slice())], "concat split");
    let zero = VideoEmbedding::new(vec![0.0; 22080]).unwrap();
    check!(fuse_add(zero.values(), zero.values()).unwrap().iter().all(|&z| z == 0.0), "zero sum");
    Ok("[1,0]+[0,1] -> [0.5,0.5]; argmax stable over 6 orders; add/concat identities".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("FFT oracle suite", fft_suite),
        ("gradient suite", gradient_suite),
        ("backbone dimension contract", dimension_contract),
        ("parameter report", parameter_report),
        ("embedding dimension identities", embedding_dimensions),
        ("spectral gate identity", spectral_identity),
        ("multi-task loss suite", multitask_suite),
        ("toy multi-task convergence", toy_convergence),
        ("rasterizer goldens", rasterizer_goldens),
        ("augmentation contracts", augmentation_contracts),
        ("LOSO partition", loso_partition),
        ("fusion oracle", fusion_oracle),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

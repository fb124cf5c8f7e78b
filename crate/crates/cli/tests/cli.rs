use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use painformer::formats::{read_embedding, write_embedding};
use painformer::imaging::RasterImage;
use painformer::kernel::Tensor;
use sha2::{Digest, Sha256};

const ZERO_WAVE_SHA: &str = "ed0702595e68709cb2f303c0f06debdf1325279aac7697941a6db7e5d44dc266";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_painformer")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = run(args);
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_csv(dir: &Path, name: &str, values: impl Iterator<Item = f64>) -> PathBuf {
    let p = dir.join(name);
    let text: Vec<String> = values.map(|v| v.to_string()).collect();
    std::fs::write(&p, text.join("\n")).unwrap();
    p
}

fn sine_csv(dir: &Path) -> PathBuf {
    let w = 2.0 * std::f64::consts::PI * 8.0 / 512.0;
    write_csv(dir, "sine.csv", (0..2816).map(|n| (w * n as f64).sin()))
}

#[test]
fn rasterize_zero_wave_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "zero.csv", (0..512).map(|_| 0.0));
    let out = dir.path().join("z.ppm");
    let stdout = ok(&["rasterize", "--input", s(&input), "--kind", "wave", "--out", s(&out), "--rate", "512"]);
    assert_eq!(stdout.trim(), s(&out));
    assert_eq!(hex::encode(Sha256::digest(std::fs::read(&out).unwrap())), ZERO_WAVE_SHA);
}

#[test]
fn rasterize_psd_brightest_row_is_bin_four() {
    let dir = tempfile::tempdir().unwrap();
    let input = sine_csv(dir.path());
    let a = dir.path().join("a.ppm");
    let b = dir.path().join("b.png");
    let common = ["--input", s(&input), "--kind", "psd", "--rate", "512", "--window", "256", "--hop", "64"];
    ok(&[&["rasterize"][..], &common, &["--out", s(&a)]].concat());
    let img = RasterImage::load(&a).unwrap();
    let row_sum = |r: usize| (0..224).map(|c| img.get(r, c)[0] as u64).sum::<u64>();
    let brightest = (0..224).max_by_key(|&r| row_sum(r)).unwrap();
    // nearest-neighbour source bin of that row
    assert_eq!(((2 * (223 - brightest) + 1) * 129) / 448, 4);
    let bin_row = painformer::imaging::row_of_bin(4, 129).unwrap();
    assert_eq!(row_sum(bin_row), row_sum(brightest));
    // same invocation twice, and PNG decodes to the same pixels
    let first = std::fs::read(&a).unwrap();
    ok(&[&["rasterize"][..], &common, &["--out", s(&a)]].concat());
    assert_eq!(std::fs::read(&a).unwrap(), first);
    ok(&[&["rasterize"][..], &common, &["--out", s(&b)]].concat());
    assert_eq!(RasterImage::load(&b).unwrap(), img);
}

#[test]
fn rasterize_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "x.csv", (0..300).map(|i| i as f64));
    let out = dir.path().join("o.ppm");
    let missing = dir.path().join("missing.csv");
    let (c, err) = code(&["rasterize", "--input", s(&missing), "--kind", "wave", "--out", s(&out), "--rate", "1"]);
    assert_eq!(c, 2);
    assert!(err.contains("missing.csv"));
    let (c, _) = code(&["rasterize", "--input", s(&input), "--kind", "bogus", "--out", s(&out), "--rate", "1"]);
    assert_eq!(c, 2);
    let (c, _) = code(&["rasterize", "--input", s(&input), "--kind", "wave", "--out", s(&out)]);
    assert_eq!(c, 2);
    let (c, _) = code(&["rasterize", "--kind", "wave"]);
    assert_eq!(c, 2);
    assert!(!out.exists());
}

fn frames_dir(dir: &Path, n: usize) -> PathBuf {
    let frames = dir.join("frames");
    std::fs::create_dir(&frames).unwrap();
    let input = sine_csv(dir);
    let first = frames.join("f000.ppm");
    ok(&["rasterize", "--input", s(&input), "--kind", "psd", "--out", s(&first), "--rate", "512"]);
    for i in 1..n {
        std::fs::copy(&first, frames.join(format!("f{i:03}.ppm"))).unwrap();
    }
    frames
}

#[test]
fn embed_single_and_unified() {
    let dir = tempfile::tempdir().unwrap();
    let frames = frames_dir(dir.path(), 138);
    let one = dir.path().join("one.pfem");
    ok(&["embed", "--image", s(&frames.join("f000.ppm")), "--out", s(&one), "--seed", "4"]);
    let e = read_embedding(&one).unwrap();
    assert_eq!(e.shape(), &[160]);

    let video = dir.path().join("video.pfem");
    ok(&["embed", "--image", s(&frames), "--unify", "--out", s(&video), "--seed", "4"]);
    let v = read_embedding(&video).unwrap();
    assert_eq!(v.shape(), &[22080]);
    // identical frames: every 160-block equals the single-image embedding
    for chunk in v.data().chunks(160) {
        assert_eq!(chunk, e.data());
    }
    let stacked = dir.path().join("stacked.pfem");
    ok(&["embed", "--image", s(&frames), "--out", s(&stacked), "--seed", "4"]);
    assert_eq!(read_embedding(&stacked).unwrap().shape(), &[138, 160]);
}

#[test]
fn embed_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let frames = frames_dir(dir.path(), 1);
    let ckpt = dir.path().join("toy.pfck");
    ok(&["train-toy", "--epochs", "3", "--warmup", "1", "--cooldown", "1", "--steps-per-epoch", "1", "--checkpoint", s(&ckpt)]);
    let out = dir.path().join("e.pfem");
    let (c, err) = code(&["embed", "--image", s(&frames), "--checkpoint", s(&ckpt), "--out", s(&out)]);
    assert_eq!(c, 2);
    assert!(err.contains("32x32x3"), "{err}");
}

fn pfem(dir: &Path, name: &str, values: Vec<f32>) -> PathBuf {
    let p = dir.join(name);
    let n = values.len();
    write_embedding(&p, &Tensor::new(vec![n], values).unwrap()).unwrap();
    p
}

#[test]
fn fuse_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let x: Vec<f32> = (0..160).map(|i| (i as f32 * 0.1).cos()).collect();
    let gsr = pfem(d, "gsr.pfem", x.clone());
    let zero = pfem(d, "zero.pfem", vec![0.0; 160]);
    let video = pfem(d, "video.pfem", (0..40).map(|i| i as f32).collect());
    let out = d.join("out.pfem");

    ok(&["fuse", "--mode", "add", "--input", s(&gsr), "--input", s(&zero), "--out", s(&out)]);
    assert_eq!(read_embedding(&out).unwrap().data(), x.as_slice());

    ok(&["fuse", "--mode", "concat", "--input", s(&gsr), "--input", s(&video), "--out", s(&out)]);
    let c = read_embedding(&out).unwrap();
    assert_eq!(c.shape(), &[200]);
    assert_eq!(&c.data()[..160], x.as_slice());
    let spans: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("out.json")).unwrap()).unwrap();
    assert_eq!(spans["spans"][1]["start"], 160);

    let p = pfem(d, "p.pfem", vec![1.0, 0.0]);
    let q = pfem(d, "q.pfem", vec![0.0, 1.0]);
    ok(&["fuse", "--mode", "decision", "--input", s(&p), "--input", s(&q), "--out", s(&out)]);
    assert_eq!(read_embedding(&out).unwrap().data(), &[0.5, 0.5]);

    let (c, err) = code(&["fuse", "--mode", "add", "--input", s(&gsr), "--input", s(&video), "--out", s(&out)]);
    assert_eq!(c, 2);
    assert!(err.contains("160") && err.contains("40"), "{err}");

    let unified = pfem(d, "rgb.pfem", vec![0.01; 22080]);
    ok(&["fuse", "--mode", "biovid-multimodal", "--input", s(&gsr), "--input", s(&unified), "--input", s(&unified),
        "--input", s(&unified), "--out", s(&out)]);
    let f = read_embedding(&out).unwrap();
    assert_eq!(f.shape(), &[200]);
    assert_eq!(&f.data()[..160], x.as_slice());
}

#[test]
fn train_toy_writes_trace_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("m.jsonl");
    let ckpt = dir.path().join("t.pfck");
    let args = ["train-toy", "--epochs", "4", "--warmup", "1", "--cooldown", "1", "--steps-per-epoch", "2",
        "--seed", "9", "--metrics", s(&metrics), "--checkpoint", s(&ckpt)];
    let first: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(first["steps"], 8);
    assert_eq!(first["accuracy"].as_array().unwrap().len(), 3);
    let lines = std::fs::read_to_string(&metrics).unwrap();
    assert_eq!(lines.lines().count(), 8);
    for l in lines.lines() {
        let r: serde_json::Value = serde_json::from_str(l).unwrap();
        for key in ["step", "lr", "loss", "w", "accuracy"] {
            assert!(r.get(key).is_some(), "{key}");
        }
    }
    let ck = std::fs::read(&ckpt).unwrap();
    let trace = std::fs::read(&metrics).unwrap();
    let second: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(first, second);
    assert_eq!(std::fs::read(&ckpt).unwrap(), ck);
    assert_eq!(std::fs::read(&metrics).unwrap(), trace);
}

#[test]
fn loso_reports_folds_against_baseline() {
    let report: serde_json::Value = serde_json::from_str(&ok(&["loso", "--subjects", "5", "--seed", "2"])).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 5);
    let mean = report["mean"]["accuracy"].as_f64().unwrap();
    let base = report["baseline"]["accuracy"].as_f64().unwrap();
    assert!(mean >= base, "{mean} < {base}");
    for key in ["accuracy", "recall", "f1"] {
        assert!(report["mean"][key].is_f64());
    }
    let (c, _) = code(&["loso", "--subjects", "1"]);
    assert_eq!(c, 2);
}

#[test]
fn attention_map_is_full_size() {
    let dir = tempfile::tempdir().unwrap();
    let frames = frames_dir(dir.path(), 1);
    let out = dir.path().join("att.ppm");
    ok(&["attention", "--image", s(&frames.join("f000.ppm")), "--out", s(&out), "--head", "3"]);
    let img = RasterImage::load(&out).unwrap();
    let gray = painformer::imaging::Colormap::gray();
    // every pixel is a colormap entry and the map spans the full range
    let mut seen = [false; 256];
    for r in 0..224 {
        for c in 0..224 {
            let px = img.get(r, c);
            let idx = (0..=255u8).find(|&i| gray.entry(i) == px).expect("pixel from colormap");
            seen[idx as usize] = true;
        }
    }
    assert!(seen[0] && seen[255]);
    let (c, _) = code(&["attention", "--image", s(&frames.join("f000.ppm")), "--out", s(&out), "--head", "16"]);
    assert_eq!(c, 2);
}

#[test]
fn params_prints_counts_and_references() {
    let table = ok(&["params"]);
    let backbone = table.lines().find(|l| l.starts_with("backbone")).unwrap();
    assert!(backbone.contains("17569216") && backbone.contains("19600000"), "{backbone}");
    let json: serde_json::Value = serde_json::from_str(&ok(&["params", "--json"])).unwrap();
    let counts: Vec<u64> = json["modules"].as_array().unwrap().iter().map(|m| m["params"].as_u64().unwrap()).collect();
    assert_eq!(counts, vec![17_569_216, 10_599_810, 2_943_848]);
}

#[test]
fn config_file_fills_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 2, "loso.subjects": 3, "params.json": true, "fuse.mode": "add"}"#).unwrap();
    let from_file: serde_json::Value = serde_json::from_str(&ok(&["loso", "--config", s(&cfg)])).unwrap();
    assert_eq!(from_file["folds"].as_array().unwrap().len(), 3);
    let explicit: serde_json::Value = serde_json::from_str(&ok(&["loso", "--subjects", "3", "--seed", "2"])).unwrap();
    assert_eq!(from_file, explicit);
    // flags win over the file
    let over: serde_json::Value =
        serde_json::from_str(&ok(&["--config", s(&cfg), "loso", "--subjects", "4"])).unwrap();
    assert_eq!(over["folds"].as_array().unwrap().len(), 4);
    assert!(ok(&["params", "--config", s(&cfg)]).trim_start().starts_with('{'));

    std::fs::write(&cfg, r#"{"loso.nope": 1}"#).unwrap();
    assert_eq!(code(&["loso", "--config", s(&cfg)]).0, 2);
    std::fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(code(&["loso", "--config", s(&cfg)]).0, 2);
    assert_eq!(code(&["loso", "--config", s(&dir.path().join("absent.json"))]).0, 2);
}

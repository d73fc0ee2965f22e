use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tfcn::config::{RunConfig, RunPaths};
use tfcn::dsp::{compute_norm_stats, lps, stft, StftConfig, Waveform};
use tfcn::io::{load_normalizer, read_wav, write_wav, CorpusManifest};
use tfcn::network::{build_model, passthrough_model, save_checkpoint, CausalityMode, Checkpoint, ModelConfig};
use tfcn::training::TrainConfig;

fn tfcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfcn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> (String, String) {
    (
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let o = tfcn(&[
        "synth", "--out-dir", p(dir), "--n-utts", &n.to_string(), "--seed", &seed.to_string(),
        "--min-secs", "1", "--max-secs", "1.5",
    ]);
    assert!(o.status.success(), "{:?}", text(&o));
    dir.join("manifest.json")
}

fn tiny_config(dir: &Path, manifest: &Path, stats: &Path, out: &Path) -> PathBuf {
    let mut cfg = RunConfig::new(
        ModelConfig::tfcn().with_blocks(2, 3),
        RunPaths {
            train_manifest: manifest.to_path_buf(),
            valid_manifest: None,
            stats: stats.to_path_buf(),
            output_dir: out.to_path_buf(),
        },
    );
    cfg.train = TrainConfig {
        segment_samples: 4096,
        batch_size: 4,
        max_epochs: 2,
        initial_lr: 1e-2,
        ..TrainConfig::default()
    };
    cfg.seed = 5;
    let path = dir.join("run.json");
    cfg.save(&path).unwrap();
    path
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(tfcn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tfcn(&["probe"]).status.code(), Some(1));
    assert_eq!(tfcn(&["report", "--variant", "TFCN_X"]).status.code(), Some(1));
    assert_eq!(tfcn(&["--help"]).status.code(), Some(0));
}

#[test]
fn report_matches_known_counts() {
    let (out, _) = text(&tfcn(&["report"]));
    assert!(out.contains("parameters   92803"), "{out}");
    assert!(out.contains("past 1023 frames") && out.contains("future 1023 frames"), "{out}");

    let o = tfcn(&["report", "--variant", "TFCN_D", "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let n = doc["parameters"].as_f64().unwrap();
    assert_eq!(n, 1_417_859.0);
    assert!((n / 1.38e6 - 1.0).abs() < 0.10);

    let o = tfcn(&["report", "--causality", "causal", "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["receptive_field"]["future_frames"], 0);
    assert_eq!(doc["receptive_field"]["past_frames"], 2046);

    let o = tfcn(&["report", "--causality", "semi:3", "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["receptive_field"]["future_frames"], 3);
    assert_eq!(doc["receptive_field"]["future_ms"], 48.0);

    let o = tfcn(&["report", "--causality", "semi:2000"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn probe_passes_and_fails_at_the_right_look_ahead() {
    let dir = tempfile::tempdir().unwrap();
    let save = |name: &str, mode: CausalityMode| {
        let cfg = ModelConfig::tfcn().with_blocks(2, 4).with_causality(mode);
        let path = dir.path().join(name);
        save_checkpoint(&path, &Checkpoint::new(build_model(&cfg, 1).unwrap())).unwrap();
        path
    };
    let causal = save("causal.ckpt", CausalityMode::Causal);
    let semi = save("semi3.ckpt", CausalityMode::SemiCausal { look_ahead_frames: 3 });
    let full = save("noncausal.ckpt", CausalityMode::NonCausal);

    let probe = |ck: &Path, l: &str| tfcn(&["probe", "--checkpoint", p(ck), "--look-ahead", l, "--frames", "48"]);
    assert_eq!(probe(&causal, "0").status.code(), Some(0));
    assert_eq!(probe(&semi, "3").status.code(), Some(0));
    let o = probe(&semi, "2");
    assert_eq!(o.status.code(), Some(3), "{:?}", text(&o));
    assert!(text(&o).0.contains("LEAK"));
    assert_eq!(probe(&full, "0").status.code(), Some(3));
    assert_eq!(probe(&dir.path().join("nope.ckpt"), "0").status.code(), Some(2));
}

#[test]
fn synth_is_deterministic_and_hits_its_snr() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = synth(a.path(), 6, 11);
    synth(b.path(), 6, 11);
    let m = CorpusManifest::load(&ma).unwrap();
    assert_eq!(m.pairs.len(), 6);
    for pair in &m.pairs {
        for rel in [&pair.clean, &pair.noisy] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap());
        }
        let clean = read_wav(&m.resolve(&pair.clean)).unwrap();
        let noisy = read_wav(&m.resolve(&pair.noisy)).unwrap();
        let (mut s, mut e) = (0.0f64, 0.0f64);
        for (&c, &n) in clean.samples.iter().zip(&noisy.samples) {
            s += (c as f64).powi(2);
            e += (n as f64 - c as f64).powi(2);
        }
        let measured = 10.0 * (s / e).log10();
        let label = pair.snr_db.unwrap();
        assert!([0.0, 5.0, 10.0, 15.0].contains(&label));
        assert!((measured - label).abs() < 0.5, "{measured} vs {label}");
    }
    assert_eq!(fs::read(&ma).unwrap(), fs::read(b.path().join("manifest.json")).unwrap());

    let empty = tempfile::tempdir().unwrap();
    let m = CorpusManifest::load(&synth(empty.path(), 0, 1)).unwrap();
    assert!(m.pairs.is_empty());
}

#[test]
fn stats_match_library_and_ignore_order() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 3, 2);
    let out = dir.path().join("stats.bin");
    let o = tfcn(&["stats", "--manifest", p(&manifest), "--out", p(&out)]);
    assert!(o.status.success(), "{:?}", text(&o));

    let mut m = CorpusManifest::load(&manifest).unwrap();
    m.pairs.reverse();
    let reversed = dir.path().join("reversed.json");
    m.save(&reversed).unwrap();
    let out_r = dir.path().join("stats_r.bin");
    assert!(tfcn(&["stats", "--manifest", p(&reversed), "--out", p(&out_r)]).status.success());

    let (a, b) = (load_normalizer(&out).unwrap(), load_normalizer(&out_r).unwrap());
    let oracle = {
        let feats: Vec<_> = m
            .load_pairs()
            .unwrap()
            .iter()
            .map(|p| lps(&stft(&p.noisy, &StftConfig::default()).unwrap()))
            .collect();
        compute_norm_stats(feats.iter()).unwrap()
    };
    for n in [&b, &oracle] {
        for (x, y) in a.mean.iter().chain(&a.std).zip(n.mean.iter().chain(&n.std)) {
            assert!((x - y).abs() <= 1e-5 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    let empty = tempfile::tempdir().unwrap();
    let em = synth(empty.path(), 0, 1);
    assert_eq!(tfcn(&["stats", "--manifest", p(&em), "--out", p(&out)]).status.code(), Some(1));
}

#[test]
fn train_without_stats_exits_2_naming_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 2, 3);
    let stats = dir.path().join("missing-stats.bin");
    let cfg = tiny_config(dir.path(), &manifest, &stats, &dir.path().join("run"));
    let o = tfcn(&["train", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("missing-stats.bin"), "{:?}", text(&o));
}

#[test]
fn bad_config_key_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"version":1,"model":{"variant":"TFCN"},"train":{"batch_sise":4},
           "paths":{"train_manifest":"m.json","stats":"s.bin","output_dir":"o"}}"#,
    )
    .unwrap();
    let o = tfcn(&["train", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o).1;
    assert!(err.contains("train") && err.contains("batch_sise"), "{err}");
}

fn history(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn toy_training_run_then_resume_and_enhance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), 4, 4);
    let stats = dir.path().join("stats.bin");
    assert!(tfcn(&["stats", "--manifest", p(&manifest), "--out", p(&stats)]).status.success());

    let full = dir.path().join("full");
    let cfg = tiny_config(dir.path(), &manifest, &stats, &full);
    let o = tfcn(&["train", "--config", p(&cfg)]);
    assert!(o.status.success(), "{:?}", text(&o));
    let h_full = history(&full.join("history.csv"));
    let epochs: Vec<usize> = h_full.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(epochs, vec![1, 2]);
    assert!(full.join("best.ckpt").exists() && full.join("latest.ckpt").exists());
    assert!(RunConfig::load(&full.join("config.json")).is_ok());

    // one epoch, then resume to two
    let split = dir.path().join("split");
    let o = tfcn(&["train", "--config", p(&cfg), "--output-dir", p(&split), "--max-epochs", "1"]);
    assert!(o.status.success(), "{:?}", text(&o));
    let o = tfcn(&[
        "train", "--config", p(&cfg), "--output-dir", p(&split),
        "--resume", p(&split.join("latest.ckpt")),
    ]);
    assert!(o.status.success(), "{:?}", text(&o));
    let h_split = history(&split.join("history.csv"));
    assert_eq!(h_split.len(), 2);
    for (a, b) in h_full.iter().zip(&h_split) {
        let (x, y): (f64, f64) = (a[1].parse().unwrap(), b[1].parse().unwrap());
        assert!((x - y).abs() <= 1e-5, "{x} vs {y}");
    }

    // the trained checkpoint carries its statistics
    let noisy = CorpusManifest::load(&manifest).unwrap().resolve(Path::new("noisy/utt0000.wav"));
    let out = dir.path().join("enhanced.wav");
    let o = tfcn(&["enhance", "--checkpoint", p(&full.join("best.ckpt")), p(&noisy), p(&out)]);
    assert!(o.status.success(), "{:?}", text(&o));
    let n_in = read_wav(&noisy).unwrap().len();
    let frames = (n_in - 512) / 256 + 1;
    assert_eq!(read_wav(&out).unwrap().len(), 256 * (frames - 1) + 512);

    let o = tfcn(&["eval", "--checkpoint", p(&full.join("best.ckpt")), "--manifest", p(&manifest), "--json"]);
    assert!(o.status.success(), "{:?}", text(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["utterances"].as_array().unwrap().len(), 4);
    assert!(doc["mean_loss"].as_f64().unwrap().is_finite());
}

#[test]
fn enhance_silence_and_streaming() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ModelConfig::tfcn().with_blocks(1, 2).with_causality(CausalityMode::Causal);
    let mut ck = Checkpoint::new(passthrough_model(&cfg).unwrap());
    ck.set_normalizer(&tfcn::dsp::Normalizer::identity(256));
    let ckpt = dir.path().join("pass.ckpt");
    save_checkpoint(&ckpt, &ck).unwrap();

    let silent = dir.path().join("silence.wav");
    write_wav(&silent, &Waveform::new(vec![0.0; 16_000], 16_000)).unwrap();
    let out = dir.path().join("out.wav");
    assert!(tfcn(&["enhance", "--checkpoint", p(&ckpt), p(&silent), p(&out)]).status.success());
    assert!(read_wav(&out).unwrap().rms() < 1e-4);

    let speechy = dir.path().join("in.wav");
    let x: Vec<f32> = (0..8000).map(|i| 0.3 * (i as f32 * 0.07).sin() * (i as f32 * 0.001).cos()).collect();
    write_wav(&speechy, &Waveform::new(x, 16_000)).unwrap();
    let (a, b) = (dir.path().join("batch.wav"), dir.path().join("stream.wav"));
    assert!(tfcn(&["enhance", "--checkpoint", p(&ckpt), p(&speechy), p(&a)]).status.success());
    assert!(tfcn(&["enhance", "--checkpoint", p(&ckpt), "--streaming", p(&speechy), p(&b)]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let corrupt = dir.path().join("corrupt.wav");
    fs::write(&corrupt, b"RIFFxxxxWAVEfmt garbage").unwrap();
    assert_eq!(tfcn(&["enhance", "--checkpoint", p(&ckpt), p(&corrupt), p(&out)]).status.code(), Some(1));
    assert_eq!(
        tfcn(&["enhance", "--checkpoint", p(&ckpt), p(&dir.path().join("absent.wav")), p(&out)]).status.code(),
        Some(2)
    );
}

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use tfcn::config::RunConfig;
use tfcn::dsp::{compute_norm_stats, lps, stft, LpsMatrix, StftConfig, SAMPLE_RATE};
use tfcn::enhance::{protect_peak, Enhancer};
use tfcn::eval::evaluate_pairs;
use tfcn::io::{load_normalizer, read_wav_16k, save_normalizer, write_wav, CorpusManifest};
use tfcn::network::{
    build_model, load_checkpoint, plan_padding, probe_causality, receptive_field, Checkpoint, ModelConfig,
    Variant,
};
use tfcn::synth::{write_corpus, SynthConfig};
use tfcn::training::{prepare_segments, prepare_utterances, segment_corpus, Trainer};
use tfcn::Error;

use crate::{Command, EnhanceArgs, EvalArgs, ProbeArgs, ReportArgs, StatsArgs, SynthArgs, TrainArgs};

const FRAME_MS: f64 = 256.0 * 1000.0 / SAMPLE_RATE as f64;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Missing(String),
    Contract(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Missing(_) => 2,
            Failure::Contract(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Missing(m) | Failure::Contract(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                Failure::Missing(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a),
        Command::Enhance(a) => enhance(a),
        Command::Report(a) => report(a),
        Command::Probe(a) => probe(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
    }
}

fn load_config(path: &Path) -> Result<(RunConfig, PathBuf), Failure> {
    let cfg = RunConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn noisy_lps(manifest: &CorpusManifest) -> Result<Vec<LpsMatrix>, Failure> {
    let stft_cfg = StftConfig::default();
    let pairs = manifest.load_pairs()?;
    Ok(pairs
        .iter()
        .map(|p| stft(&p.noisy, &stft_cfg).map(|s| lps(&s)))
        .collect::<Result<_, _>>()?)
}

fn stats(a: StatsArgs) -> CmdResult {
    let from_config = a.config.as_deref().map(load_config).transpose()?;
    let paths = from_config.as_ref().map(|(c, base)| c.paths.resolved(base));
    let manifest = a
        .manifest
        .or_else(|| paths.as_ref().map(|p| p.train_manifest.clone()))
        .ok_or_else(|| Failure::Usage("stats needs --manifest or --config".into()))?;
    let out = a
        .out
        .or_else(|| paths.as_ref().map(|p| p.stats.clone()))
        .ok_or_else(|| Failure::Usage("stats needs --out or --config".into()))?;
    let m = CorpusManifest::load(&manifest)?;
    if m.pairs.is_empty() {
        return Err(Failure::Usage(format!("{}: manifest lists no pairs", manifest.display())));
    }
    let features = noisy_lps(&m)?;
    let norm = compute_norm_stats(features.iter())?;
    save_normalizer(&out, &norm)?;
    let frames: usize = features.iter().map(LpsMatrix::frames).sum();
    println!("wrote {} ({} bins from {} frames of {} files)", out.display(), norm.bins(), frames, m.pairs.len());
    Ok(())
}

fn train(a: TrainArgs) -> CmdResult {
    let (mut cfg, base) = load_config(&a.config)?;
    // Paths in the file are relative to the file, flag paths to the
    // working directory.
    cfg.paths = cfg.paths.resolved(&base);
    if let Some(d) = a.output_dir {
        cfg.paths.output_dir = d;
    }
    if let Some(s) = a.stats {
        cfg.paths.stats = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.data_seed {
        cfg.train.seed = s;
    }
    if let Some(n) = a.max_epochs {
        cfg.train.max_epochs = n;
    }
    if let Some(n) = a.max_steps {
        cfg.train.max_steps = Some(n);
    }
    if let Some(lr) = a.lr {
        cfg.train.initial_lr = lr;
    }
    if let Some(n) = a.batch_size {
        cfg.train.batch_size = n;
    }
    if let Some(n) = a.segment_samples {
        cfg.train.segment_samples = n;
    }
    if let Some(c) = a.causality {
        cfg.model.causality = c;
    }
    cfg.validate()?;
    let paths = cfg.paths.clone();

    let norm = load_normalizer(&paths.stats)?;
    let train_pairs = CorpusManifest::load(&paths.train_manifest)?.load_pairs()?;
    let segments = segment_corpus(&train_pairs, cfg.train.segment_samples, &cfg.stft)?;
    if segments.is_empty() {
        return Err(Failure::Usage("training corpus yields no segments".into()));
    }
    let train_set = prepare_segments(&segments, &norm, &cfg.stft)?;
    let valid_set = match &paths.valid_manifest {
        Some(p) => prepare_utterances(&CorpusManifest::load(p)?.load_pairs()?, &norm, &cfg.stft)?,
        None => {
            log::info!("no validation manifest; the schedule follows the training loss");
            Vec::new()
        }
    };

    let mut trainer = match &a.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.model.config() != &cfg.model {
                return Err(Failure::Usage(format!(
                    "{}: checkpoint model differs from the configured one",
                    path.display()
                )));
            }
            Trainer::resume(ckpt, norm, cfg.train.clone())?
        }
        None => Trainer::new(build_model(&cfg.model, cfg.seed)?, norm, cfg.train.clone())?,
    };
    fs::create_dir_all(&paths.output_dir).map_err(|e| Failure::Usage(format!("{}: {e}", paths.output_dir.display())))?;
    cfg.save(&paths.output_dir.join("config.json"))?;
    log::info!(
        "{} parameters, {} segments, {} validation utterances",
        trainer.model.num_params(),
        train_set.len(),
        valid_set.len()
    );
    trainer.fit(&train_set, &valid_set, Some(&paths.output_dir))?;
    println!(
        "{} epochs, {} steps, best monitored loss {:.5}; outputs in {}",
        trainer.epochs_done(),
        trainer.steps,
        trainer.schedule.best_val_loss,
        paths.output_dir.display()
    );
    Ok(())
}

fn enhancer_for(checkpoint: &Path, stats: Option<&Path>) -> Result<Enhancer, Failure> {
    let ckpt = load_checkpoint(checkpoint)?;
    let norm = stats.map(load_normalizer).transpose()?;
    Ok(Enhancer::from_checkpoint(&ckpt, norm)?)
}

fn enhance(a: EnhanceArgs) -> CmdResult {
    let enhancer = enhancer_for(&a.checkpoint, a.stats.as_deref())?;
    let input = read_wav_16k(&a.input)?;
    let result = if a.streaming {
        let mut s = enhancer.stream()?;
        let mut out = s.push(&input.samples)?;
        out.extend(s.finish()?);
        protect_peak(out)
    } else {
        enhancer.enhance(&input)?
    };
    write_wav(&a.output, &result.wave)?;
    println!(
        "wrote {} ({} samples{})",
        a.output.display(),
        result.wave.len(),
        result.peak_gain.map(|g| format!(", scaled by {g:.4} to avoid clipping")).unwrap_or_default()
    );
    Ok(())
}

fn report_model(a: &ReportArgs) -> Result<ModelConfig, Failure> {
    let mut cfg = if let Some(p) = &a.config {
        load_config(p)?.0.model
    } else if let Some(p) = &a.checkpoint {
        load_checkpoint(p)?.model.config().clone()
    } else {
        let v = a.variant.as_deref().unwrap_or("TFCN");
        let variant: Variant = serde_json::from_value(serde_json::Value::String(v.to_string()))
            .map_err(|_| Failure::Usage(format!("unknown variant `{v}` (expected TFCN, TFCN_D or TCN_LPS)")))?;
        ModelConfig::preset(variant)
    };
    if let Some(c) = a.causality {
        cfg.causality = c;
    }
    if a.repeats.is_some() || a.blocks_per_repeat.is_some() {
        let r = a.repeats.unwrap_or(cfg.repeated_blocks);
        let m = a.blocks_per_repeat.unwrap_or(cfg.dilated_blocks_per_repeat);
        cfg = cfg.with_blocks(r, m);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(a: ReportArgs) -> CmdResult {
    let cfg = report_model(&a)?;
    let params = tfcn::network::param_count(&cfg);
    let rf = receptive_field(&cfg)?;
    let plan = plan_padding(&cfg)?;
    if a.json {
        let doc = serde_json::json!({
            "model": cfg,
            "parameters": params,
            "receptive_field": {
                "past_frames": rf.past_frames,
                "future_frames": rf.future_frames,
                "past_ms": rf.past_frames as f64 * FRAME_MS,
                "future_ms": rf.future_frames as f64 * FRAME_MS,
                "freq_span": rf.freq_span,
            },
            "pad_plan": plan.layers,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
        return Ok(());
    }
    println!("variant      {}", cfg.variant);
    println!("causality    {:?}", cfg.causality);
    println!("blocks       {} x {}", cfg.repeated_blocks, cfg.dilated_blocks_per_repeat);
    println!("parameters   {params}");
    println!(
        "receptive    past {} frames ({:.0} ms), future {} frames ({:.0} ms), {} bins",
        rf.past_frames,
        rf.past_frames as f64 * FRAME_MS,
        rf.future_frames,
        rf.future_frames as f64 * FRAME_MS,
        rf.freq_span
    );
    println!();
    println!("{:<24} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6} {:>5}", "layer", "kernel", "dilation", "left", "right", "f-lo", "f-hi", "clip");
    for l in &plan.layers {
        println!(
            "{:<24} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6} {:>5}",
            l.name,
            format!("{}x{}", l.kernel.0, l.kernel.1),
            format!("{}x{}", l.dilation.0, l.dilation.1),
            l.left_t,
            l.right_t,
            l.left_f,
            l.right_f,
            l.clip_right
        );
    }
    Ok(())
}

fn probe(a: ProbeArgs) -> CmdResult {
    let ckpt: Checkpoint = load_checkpoint(&a.checkpoint)?;
    let report = probe_causality(&ckpt.model, a.frames, a.look_ahead, a.trials, a.seed)?;
    let verdict = if report.holds(a.tolerance) { "pass" } else { "LEAK" };
    println!(
        "look-ahead {} frames: max leak {:.3e} over {} trials (tolerance {:.0e}): {verdict}",
        a.look_ahead, report.max_leak, report.trials, a.tolerance
    );
    if report.holds(a.tolerance) {
        Ok(())
    } else {
        Err(Failure::Contract(format!(
            "output depends on input more than {} frames ahead",
            a.look_ahead
        )))
    }
}

fn synth(a: SynthArgs) -> CmdResult {
    let mut cfg = SynthConfig::default();
    if let Some(s) = a.min_secs {
        cfg.min_secs = s;
    }
    if let Some(s) = a.max_secs {
        cfg.max_secs = s;
    }
    let m = write_corpus(&a.out_dir, a.n_utts, a.seed, &cfg)?;
    println!(
        "wrote {} pairs ({:.1} s) and {}",
        m.pairs.len(),
        m.total_duration_secs,
        a.out_dir.join("manifest.json").display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let enhancer = enhancer_for(&a.checkpoint, a.stats.as_deref())?;
    let pairs = CorpusManifest::load(&a.manifest)?.load_pairs()?;
    let r = evaluate_pairs(&enhancer, &pairs)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
        return Ok(());
    }
    for u in &r.utterances {
        println!(
            "{:<40} loss {:>8.4}  segSNR {:>7.2} -> {:>7.2} dB",
            u.name, u.loss, u.seg_snr_noisy, u.seg_snr_enhanced
        );
    }
    println!(
        "mean loss {:.4}; segmental SNR {:.2} -> {:.2} dB ({:+.2} dB) over {} utterances",
        r.mean_loss,
        r.mean_seg_snr_noisy,
        r.mean_seg_snr_enhanced,
        r.seg_snr_improvement(),
        r.utterances.len()
    );
    Ok(())
}

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use reverbkit::corpus::{load_train_items, read_manifest, ItemRecord, MANIFEST_NAME};
use reverbkit::degrade::DEFAULT_SWITCH_PROBABILITY;
use reverbkit::eval::reverberance_proxy;
use reverbkit::model::{
    read_feature, train as train_model, write_feature, AdamConfig, ModelConfig, ReverbFeature,
    ReverbModel, TrainConfig, DEFAULT_FEATURE_DIM, DEFAULT_HIDDEN,
};
use reverbkit::signal::log_mel;
use reverbkit::wav::read_wav;
use reverbkit::{LogMelConfig, LogMelSpectrogram};

use crate::config::{manifest_for_file, write_run_manifest};

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Corpus directory written by `synth-corpus`.
    #[arg(long)]
    corpus: PathBuf,
    /// Leave out the last N utterances of the corpus.
    #[arg(long, default_value_t = 0)]
    holdout_utterances: usize,
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 5000)]
    warmup: u64,
    /// Probability of the clean-target branch.
    #[arg(long, default_value_t = DEFAULT_SWITCH_PROBABILITY)]
    q: f64,
    /// Seeds both initialisation and batch sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reverb feature dimension.
    #[arg(long, default_value_t = DEFAULT_FEATURE_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    #[arg(long, default_value_t = LogMelConfig::DEFAULT_N_MELS)]
    n_mels: usize,
    /// Also save the model every N steps as `<output>.stepN`.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Per-step loss CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

/// Everything besides the weights that inference needs, stored in the
/// checkpoint header.
fn checkpoint_extra(mel: &LogMelConfig, sample_rate: u32, cfg: &TrainConfig) -> serde_json::Value {
    json!({ "mel": mel, "sample_rate": sample_rate, "train": cfg })
}

pub fn train(a: TrainArgs) -> Result<()> {
    let manifest = a.corpus.join(MANIFEST_NAME);
    let records: Vec<ItemRecord> = read_manifest(&manifest)?;
    let first = records
        .first()
        .with_context(|| format!("{} is empty", manifest.display()))?;
    let n_utts = first.config.n_utterances;
    let sample_rate = first.config.sample_rate;
    ensure!(
        a.holdout_utterances < n_utts,
        "cannot hold out {} of {n_utts} utterances",
        a.holdout_utterances
    );
    let keep = n_utts - a.holdout_utterances;
    let records: Vec<ItemRecord> = records.into_iter().filter(|r| r.utterance < keep).collect();

    let mut mel = LogMelConfig::for_rate(sample_rate);
    mel.n_mels = a.n_mels;
    let items = load_train_items(&a.corpus, &records, &mel)?;
    let mut mcfg = ModelConfig::new(a.n_mels);
    mcfg.hidden = a.hidden;
    mcfg.feature_dim = a.dim;
    let model = ReverbModel::init(mcfg, a.seed)?;
    let cfg = TrainConfig {
        q: a.q,
        steps: a.steps,
        batch: a.batch,
        seed: a.seed,
        adam: AdamConfig {
            lr: a.lr,
            warmup: a.warmup,
            ..AdamConfig::default()
        },
    };
    let extra = checkpoint_extra(&mel, sample_rate, &cfg);
    log::info!("training on {} items for {} steps", items.len(), a.steps);

    let (model, report) = train_model(&items, model, &cfg, |step, loss, m| {
        if step % 100 == 0 {
            log::info!("step {step} loss {loss:.4}");
        }
        if a.checkpoint_every
            .is_some_and(|e| e > 0 && (step + 1) % e == 0)
        {
            let mut p = a.output.as_os_str().to_owned();
            p.push(format!(".step{}", step + 1));
            m.save(Path::new(&p), extra.clone())?;
        }
        Ok(())
    })?;
    model.save(&a.output, extra)?;

    if let Some(p) = &a.loss_csv {
        let mut csv = String::from("step,loss\n");
        for (i, l) in report.losses.iter().enumerate() {
            writeln!(csv, "{},{l}", i + 1)?;
        }
        fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?;
    }
    println!(
        "{}",
        json!({
            "items": items.len(),
            "steps": a.steps,
            "first_loss": report.losses.first(),
            "final_loss": report.losses.last(),
            "clean_branches": report.clean_branches,
            "reverb_branches": report.reverb_branches,
            "parameters": model.parameter_count(),
        })
    );
    write_run_manifest(&manifest_for_file(&a.output), "train", &a)
}

/// Model plus the log-mel settings it was trained with.
fn load_model(path: &Path) -> Result<(ReverbModel, LogMelConfig, u32)> {
    let (model, extra) = ReverbModel::load(path)?;
    let mel: LogMelConfig =
        serde_json::from_value(extra.get("mel").cloned().unwrap_or_default())
            .with_context(|| format!("{}: checkpoint has no log-mel settings", path.display()))?;
    let sr = extra
        .get("sample_rate")
        .and_then(|v| v.as_u64())
        .with_context(|| format!("{}: checkpoint has no sample rate", path.display()))?;
    Ok((model, mel, sr as u32))
}

fn wav_log_mel(path: &Path, mel: &LogMelConfig, sample_rate: u32) -> Result<LogMelSpectrogram> {
    let w = read_wav(path)?;
    ensure!(
        w.sample_rate() == sample_rate,
        "{} is {} Hz but the model expects {sample_rate} Hz",
        path.display(),
        w.sample_rate()
    );
    Ok(log_mel(&w, mel)?)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Degraded or reverberant speech WAV.
    #[arg(long)]
    input: PathBuf,
    /// Reverb feature file (.rvbf).
    #[arg(short, long)]
    output: PathBuf,
}

pub fn encode(a: EncodeArgs) -> Result<()> {
    let (model, mel, sr) = load_model(&a.model)?;
    let m = wav_log_mel(&a.input, &mel, sr)?;
    let c = model.encode(&m)?;
    write_feature(&a.output, &c)?;
    println!(
        "{}",
        json!({ "dim": c.dim(), "norm": c.distance(&ReverbFeature::zeros(c.dim())) })
    );
    write_run_manifest(&manifest_for_file(&a.output), "encode", &a)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DecodeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Clean speech WAV to condition.
    #[arg(long)]
    clean: PathBuf,
    /// Reverb feature (.rvbf); the zero feature when omitted.
    #[arg(long)]
    feature: Option<PathBuf>,
    /// JSON with the decoded log-mel frames and a reverberance summary.
    #[arg(short, long)]
    output: PathBuf,
}

pub fn decode_demo(a: DecodeArgs) -> Result<()> {
    let (model, mel, sr) = load_model(&a.model)?;
    let clean = wav_log_mel(&a.clean, &mel, sr)?;
    let c = match &a.feature {
        Some(p) => read_feature(p)?,
        None => ReverbFeature::zeros(model.config.feature_dim),
    };
    let decoded = model.decode(&clean, &c)?;
    let proxy = reverberance_proxy(&decoded, &clean)?;
    let frames: Vec<&[f64]> = decoded.frames().collect();
    let out = json!({
        "n_frames": decoded.n_frames(),
        "n_mels": decoded.n_mels(),
        "frame_hop": decoded.frame_hop(),
        "sample_rate": decoded.sample_rate(),
        "reverberance_proxy": proxy,
        "log_mel": frames,
    });
    fs::write(&a.output, serde_json::to_string(&out)? + "\n")
        .with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "{}",
        json!({ "n_frames": decoded.n_frames(), "reverberance_proxy": proxy })
    );
    write_run_manifest(&manifest_for_file(&a.output), "decode-demo", &a)
}

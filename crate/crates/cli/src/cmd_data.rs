use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{ArgAction, Args, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use reverbkit::corpus::{
    read_manifest, write_corpus, write_manifest, CorpusConfig, ItemRecord, MANIFEST_NAME,
};
use reverbkit::degrade::{
    format_chain, make_training_example, parse_chain, DegradationSpec, DEFAULT_SWITCH_PROBABILITY,
};
use reverbkit::metrics::{gpe_from_tracks, mcd, pitch_track, GPE_THRESHOLD};
use reverbkit::rng::stream_rng;
use reverbkit::synth;
use reverbkit::wav::{read_wav, write_wav, WavEncoding};
use reverbkit::{LogMelConfig, Rir, RirMeta, Waveform};

use crate::config::{manifest_for_dir, manifest_for_file, write_run_manifest};

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Train,
    Eval,
}

impl Preset {
    fn degradation(self, seed: u64) -> DegradationSpec {
        match self {
            Preset::Train => DegradationSpec::train(seed),
            Preset::Eval => DegradationSpec::eval(seed),
        }
    }
}

fn pair(v: &[f64], what: &str) -> Result<(f64, f64)> {
    ensure!(v.len() == 2, "{what} needs 2 values, got {}", v.len());
    Ok((v[0], v[1]))
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DegradeArgs {
    /// Clean speech WAVs.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required_unless_present = "speech_dir")]
    clean: Vec<PathBuf>,
    /// Directory of clean speech WAVs, added to `--clean`.
    #[arg(long)]
    speech_dir: Option<PathBuf>,
    /// RIR WAVs.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, required_unless_present = "rir_dir")]
    rir: Vec<PathBuf>,
    #[arg(long)]
    rir_dir: Option<PathBuf>,
    /// Noise WAVs; white noise is synthesised when none are given.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    noise: Vec<PathBuf>,
    #[arg(long)]
    noise_dir: Option<PathBuf>,
    /// Probability of the clean-target branch.
    #[arg(long, default_value_t = DEFAULT_SWITCH_PROBABILITY)]
    q: f64,
    #[arg(long, value_enum, default_value = "train")]
    preset: Preset,
    /// SNR range `lo:hi` (or `lo,hi`) in dB, overriding the preset.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Artifact chain such as `alaw,lowpass:4000`, overriding the preset.
    #[arg(long)]
    chain: Option<String>,
    /// Apply the whole chain rather than one artifact drawn from it.
    #[arg(long)]
    all_artifacts: bool,
    /// Number of examples (default: one per clean file).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, or the manifest path if it ends in `.jsonl`.
    #[arg(short, long, alias = "out")]
    output: PathBuf,
}

/// Sorted `*.wav` files in `dir`.
fn wavs_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn parse_range(s: &str, what: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s
        .split_once(':')
        .or_else(|| s.split_once(','))
        .with_context(|| format!("{what} expects lo:hi, got `{s}`"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .with_context(|| format!("{what}: bad number `{v}`"))
    };
    Ok((num(lo)?, num(hi)?))
}

#[derive(Serialize)]
struct DegradeRecord {
    index: usize,
    clean: PathBuf,
    rir: PathBuf,
    noise: Option<PathBuf>,
    reverb_active: bool,
    snr_db: f64,
    chain: String,
    rir_meta: Option<RirMeta>,
    input: PathBuf,
    target: PathBuf,
}

pub fn degrade(a: DegradeArgs) -> Result<()> {
    let mut spec = a.preset.degradation(a.seed);
    if let Some(s) = &a.snr {
        spec.snr_db_range = parse_range(s, "--snr")?;
    }
    if let Some(c) = &a.chain {
        spec.artifact_chain = parse_chain(c)?;
    }
    spec.pick_one = !a.all_artifacts;
    spec.validate()?;
    ensure!((0.0..=1.0).contains(&a.q), "--q {} outside [0, 1]", a.q);

    let (out_dir, manifest) = if a.output.extension().is_some_and(|x| x == "jsonl") {
        let dir = a
            .output
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        (dir.to_path_buf(), a.output.clone())
    } else {
        (a.output.clone(), a.output.join(MANIFEST_NAME))
    };
    let mut clean_paths = a.clean.clone();
    let mut rir_paths = a.rir.clone();
    let mut noise_paths = a.noise.clone();
    for (dir, list) in [
        (&a.speech_dir, &mut clean_paths),
        (&a.rir_dir, &mut rir_paths),
        (&a.noise_dir, &mut noise_paths),
    ] {
        if let Some(d) = dir {
            list.extend(wavs_in(d)?);
        }
    }
    ensure!(!clean_paths.is_empty(), "no clean speech files");
    ensure!(!rir_paths.is_empty(), "no RIR files");

    let cleans: Vec<Waveform> = clean_paths
        .iter()
        .map(read_wav)
        .collect::<reverbkit::Result<_>>()?;
    let rirs: Vec<Rir> = rir_paths
        .iter()
        .map(Rir::load)
        .collect::<reverbkit::Result<_>>()?;
    let noises: Vec<Waveform> = noise_paths
        .iter()
        .map(read_wav)
        .collect::<reverbkit::Result<_>>()?;
    let count = a.count.unwrap_or(cleans.len());
    for sub in ["input", "target"] {
        let p = out_dir.join(sub);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))?;
    }

    let records: Vec<DegradeRecord> = (0..count)
        .into_par_iter()
        .map(|k| -> Result<DegradeRecord> {
            let mut rng = stream_rng(a.seed, k as u64);
            let ci = rng.random_range(0..cleans.len());
            let ri = rng.random_range(0..rirs.len());
            let s = &cleans[ci];
            let (noise, noise_path) = if noises.is_empty() {
                (
                    synth::noise(&mut rng, s.sample_rate(), s.duration_secs() + 1.0)?,
                    None,
                )
            } else {
                let ni = rng.random_range(0..noises.len());
                (noises[ni].clone(), Some(noise_paths[ni].clone()))
            };
            let ex = make_training_example(s, &rirs[ri], &noise, &spec, a.q, &mut rng)?;
            let input = PathBuf::from("input").join(format!("{k:05}.wav"));
            let target = PathBuf::from("target").join(format!("{k:05}.wav"));
            write_wav(out_dir.join(&input), &ex.input, WavEncoding::Float32)?;
            write_wav(out_dir.join(&target), &ex.target, WavEncoding::Float32)?;
            Ok(DegradeRecord {
                index: k,
                clean: clean_paths[ci].clone(),
                rir: rir_paths[ri].clone(),
                noise: noise_path,
                reverb_active: ex.reverb_active,
                snr_db: ex.snr_db,
                chain: format_chain(&ex.chain),
                rir_meta: ex.rir_meta,
                input,
                target,
            })
        })
        .collect::<Result<_>>()?;
    write_manifest(&manifest, &records)?;
    let clean_branch = records.iter().filter(|r| !r.reverb_active).count();
    println!(
        "{}",
        json!({ "examples": count, "clean_branch": clean_branch })
    );
    write_run_manifest(&manifest_for_file(&manifest), "degrade", &a)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "train")]
    preset: Preset,
    #[arg(long)]
    utterances: Option<usize>,
    #[arg(long)]
    rirs: Option<usize>,
    #[arg(long)]
    fs: Option<u32>,
    /// RT60 range `lo,hi` in seconds.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    rt60_range: Option<Vec<f64>>,
    /// Utterance duration range `lo,hi` in seconds.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    utterance_secs: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rebuild a single item described by this corpus manifest.
    #[arg(long, requires = "item")]
    from_manifest: Option<PathBuf>,
    #[arg(long, requires = "from_manifest")]
    item: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn synth_corpus(a: SynthArgs) -> Result<()> {
    if let (Some(m), Some(i)) = (&a.from_manifest, a.item) {
        let records: Vec<ItemRecord> = read_manifest(m)?;
        let rec = records
            .iter()
            .find(|r| r.index == i)
            .with_context(|| format!("item {i} not in {}", m.display()))?;
        let it = rec.regenerate()?;
        for (rel, w) in [
            (&rec.clean, &it.clean),
            (&rec.reverberant, &it.reverberant),
            (&rec.degraded, &it.degraded),
        ] {
            let p = a.output.join(rel);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            write_wav(&p, w, WavEncoding::Float32)?;
        }
        write_manifest(
            &a.output.join(MANIFEST_NAME),
            std::slice::from_ref(&it.record),
        )?;
        println!("{}", json!({ "item": i, "output": a.output }));
        return write_run_manifest(&manifest_for_dir(&a.output), "synth-corpus", &a);
    }

    let mut cfg = match a.preset {
        Preset::Train => CorpusConfig::train(a.seed),
        Preset::Eval => CorpusConfig::eval(a.seed),
    };
    if let Some(n) = a.utterances {
        cfg.n_utterances = n;
    }
    if let Some(n) = a.rirs {
        cfg.n_rirs = n;
    }
    if let Some(fs) = a.fs {
        cfg.sample_rate = fs;
    }
    if let Some(r) = &a.rt60_range {
        cfg.rt60_range = pair(r, "--rt60-range")?;
    }
    if let Some(r) = &a.utterance_secs {
        cfg.utterance_secs = pair(r, "--utterance-secs")?;
    }
    cfg.validate()?;
    let records = write_corpus(&cfg, &a.output)?;
    println!("{}", json!({ "items": records.len(), "output": a.output }));
    write_run_manifest(&manifest_for_dir(&a.output), "synth-corpus", &a)
}

#[derive(Args, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvaluateArgs {
    /// JSONL manifest of reference audio.
    #[arg(long)]
    ref_manifest: PathBuf,
    /// JSONL manifest of hypothesis audio.
    #[arg(long)]
    hyp_manifest: PathBuf,
    /// Record field holding the reference WAV path.
    #[arg(long, default_value = "path")]
    ref_field: String,
    /// Record field holding the hypothesis WAV path.
    #[arg(long, default_value = "path")]
    hyp_field: String,
    /// Per-utterance CSV with a final `mean` row.
    #[arg(short, long)]
    output: PathBuf,
}

/// `id -> absolute WAV path`, in manifest order. Ids come from `id` or
/// `index`; relative paths are resolved against the manifest directory.
fn manifest_paths(path: &Path, field: &str) -> Result<Vec<(String, PathBuf)>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let records: Vec<Value> = read_manifest(path)?;
    records
        .iter()
        .enumerate()
        .map(|(line, r)| {
            let id = match r.get("id").or_else(|| r.get("index")) {
                Some(Value::String(s)) => s.clone(),
                Some(v @ Value::Number(_)) => v.to_string(),
                _ => bail!("{} line {}: no `id` or `index`", path.display(), line + 1),
            };
            let p = r.get(field).and_then(Value::as_str).with_context(|| {
                format!(
                    "{} line {}: no string field `{field}`",
                    path.display(),
                    line + 1
                )
            })?;
            Ok((id, base.join(p)))
        })
        .collect()
}

struct Score {
    id: String,
    mcd: f64,
    gpe: f64,
    ref_voiced: usize,
    hyp_voiced: usize,
    jointly_voiced: usize,
    gross_errors: usize,
}

fn score(id: String, r: &Path, h: &Path) -> Result<Score> {
    let reference = read_wav(r)?;
    let hypothesis = read_wav(h)?;
    let cfg = LogMelConfig::for_rate(reference.sample_rate());
    let m = mcd(&reference, &hypothesis, &cfg).with_context(|| format!("utterance {id}"))?;
    let rt = pitch_track(&reference)?;
    let ht = pitch_track(&hypothesis)?;
    let g = gpe_from_tracks(&rt, &ht, GPE_THRESHOLD);
    Ok(Score {
        id,
        mcd: m,
        gpe: g.gpe,
        ref_voiced: rt.iter().filter(|f| f.voiced).count(),
        hyp_voiced: ht.iter().filter(|f| f.voiced).count(),
        jointly_voiced: g.jointly_voiced,
        gross_errors: g.gross_errors,
    })
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let refs = manifest_paths(&a.ref_manifest, &a.ref_field)?;
    let hyps: std::collections::HashMap<String, PathBuf> =
        manifest_paths(&a.hyp_manifest, &a.hyp_field)?
            .into_iter()
            .collect();
    let pairs: Vec<(String, PathBuf, PathBuf)> = refs
        .into_iter()
        .map(|(id, r)| {
            let h = hyps
                .get(&id)
                .with_context(|| format!("utterance {id} missing from hypothesis manifest"))?;
            Ok((id, r, h.clone()))
        })
        .collect::<Result<_>>()?;
    ensure!(!pairs.is_empty(), "reference manifest is empty");
    let scores: Vec<Score> = pairs
        .into_par_iter()
        .map(|(id, r, h)| score(id, &r, &h))
        .collect::<Result<_>>()?;

    let mut csv = String::from("id,mcd_db,gpe,ref_voiced,hyp_voiced,jointly_voiced,gross_errors\n");
    for s in &scores {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.id, s.mcd, s.gpe, s.ref_voiced, s.hyp_voiced, s.jointly_voiced, s.gross_errors
        )?;
    }
    let n = scores.len() as f64;
    let mean_mcd = scores.iter().map(|s| s.mcd).sum::<f64>() / n;
    let voiced: Vec<&Score> = scores.iter().filter(|s| s.jointly_voiced > 0).collect();
    let mean_gpe = if voiced.is_empty() {
        0.0
    } else {
        voiced.iter().map(|s| s.gpe).sum::<f64>() / voiced.len() as f64
    };
    let total = |f: fn(&Score) -> usize| scores.iter().map(f).sum::<usize>();
    writeln!(
        csv,
        "mean,{mean_mcd},{mean_gpe},{},{},{},{}",
        total(|s| s.ref_voiced),
        total(|s| s.hyp_voiced),
        total(|s| s.jointly_voiced),
        total(|s| s.gross_errors)
    )?;
    fs::write(&a.output, csv).with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "{}",
        json!({ "utterances": scores.len(), "mean_mcd_db": mean_mcd, "mean_gpe": mean_gpe })
    );
    write_run_manifest(&manifest_for_file(&a.output), "evaluate", &a)
}

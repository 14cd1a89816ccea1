//! Synthetic corpora of (clean, reverberant, degraded) triples.
//!
//! Item `i` pairs utterance `i / n_rirs` with RIR `i % n_rirs`. Every
//! random draw comes from a stream keyed by the corpus seed and the item,
//! utterance or RIR index, so any item can be rebuilt on its own from its
//! manifest record.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{RoomSampler, UniformRoomPrior};
use crate::degrade::{degrade, ArtifactKind, DegradationSpec};
use crate::error::{Error, Result};
use crate::model::TrainItem;
use crate::rir::{absorption_for_rt60, random_placement, simulate_rir, Rir, RoomSpec};
use crate::rng::substream_rng;
use crate::signal::{convolve, log_mel, LogMelConfig, Waveform};
use crate::synth;
use crate::wav::{read_wav, write_wav, WavEncoding};

const SPEECH: u64 = 1;
const ROOM: u64 = 2;
const NOISE: u64 = 3;
const DEGRADE: u64 = 4;
const MIN_WALL_DISTANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_utterances: usize,
    pub n_rirs: usize,
    pub sample_rate: u32,
    pub utterance_secs: (f64, f64),
    /// RIR `r` targets an RT60 spaced evenly over this range.
    pub rt60_range: (f64, f64),
    pub room_prior: UniformRoomPrior,
    /// SNR range, artifact chain and the corpus seed.
    pub degradation: DegradationSpec,
}

impl CorpusConfig {
    pub fn train(seed: u64) -> Self {
        Self {
            n_utterances: 40,
            n_rirs: 8,
            sample_rate: 16_000,
            utterance_secs: (1.2, 2.0),
            rt60_range: (0.1, 1.5),
            room_prior: UniformRoomPrior::default(),
            degradation: DegradationSpec::train(seed),
        }
    }

    pub fn eval(seed: u64) -> Self {
        Self {
            degradation: DegradationSpec::eval(seed),
            ..Self::train(seed)
        }
    }

    pub fn seed(&self) -> u64 {
        self.degradation.seed
    }

    pub fn len(&self) -> usize {
        self.n_utterances * self.n_rirs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid(
                "corpus needs at least one utterance and one RIR",
            ));
        }
        let (a, b) = self.utterance_secs;
        if !(a > 0.0 && a <= b) {
            return Err(Error::invalid(format!(
                "utterance duration range ({a}, {b})"
            )));
        }
        let (lo, hi) = self.rt60_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::invalid(format!("RT60 range ({lo}, {hi})")));
        }
        self.degradation.validate()
    }

    pub fn rt60_target(&self, rir: usize) -> f64 {
        let (lo, hi) = self.rt60_range;
        if self.n_rirs == 1 {
            lo
        } else {
            lo + (hi - lo) * rir as f64 / (self.n_rirs - 1) as f64
        }
    }

    pub fn utterance(&self, u: usize) -> Result<Waveform> {
        let mut rng = substream_rng(self.seed(), u as u64, SPEECH);
        let (a, b) = self.utterance_secs;
        let secs = if a == b { a } else { rng.random_range(a..b) };
        synth::speech(&mut rng, self.sample_rate, secs)
    }

    pub fn rir(&self, r: usize) -> Result<Rir> {
        let mut rng = substream_rng(self.seed(), r as u64, ROOM);
        let dims = self.room_prior.sample_dims(&mut rng);
        let alpha = absorption_for_rt60(dims, self.rt60_target(r))?.alpha;
        let room = RoomSpec::new(dims, alpha, self.sample_rate)?;
        let (src, mic) = random_placement(&room, &mut rng, MIN_WALL_DISTANCE)?;
        let rir = simulate_rir(&room, &src, &mic)?;
        let mut meta = rir.meta().cloned().expect("simulated RIRs carry metadata");
        meta.seed = Some(self.seed());
        Ok(rir.with_meta(meta))
    }

    /// Builds item `index` from scratch.
    pub fn item(&self, index: usize) -> Result<CorpusItem> {
        if index >= self.len() {
            return Err(Error::invalid(format!(
                "item {index} outside corpus of {}",
                self.len()
            )));
        }
        let (u, r) = (index / self.n_rirs, index % self.n_rirs);
        let clean = self.utterance(u)?;
        let rir = self.rir(r)?;
        self.item_from_parts(index, clean, &rir)
    }

    fn item_from_parts(&self, index: usize, clean: Waveform, rir: &Rir) -> Result<CorpusItem> {
        let (u, r) = (index / self.n_rirs, index % self.n_rirs);
        let seed = self.seed();
        let noise = synth::noise(
            &mut substream_rng(seed, index as u64, NOISE),
            self.sample_rate,
            clean.duration_secs() + 1.0,
        )?;
        let mut rng = substream_rng(seed, index as u64, DEGRADE);
        let snr_db = self.degradation.draw_snr(&mut rng);
        let chain = self.degradation.draw_chain(&mut rng);
        let reverberant = convolve(&clean, rir)?;
        let degraded = degrade(&clean, rir, &noise, snr_db, &chain, &mut rng)?;
        Ok(CorpusItem {
            record: ItemRecord {
                index,
                utterance: u,
                rir: r,
                rt60_target: self.rt60_target(r),
                snr_db,
                chain,
                rir_meta: rir.meta().cloned(),
                clean: item_path("clean", index),
                reverberant: item_path("reverberant", index),
                degraded: item_path("degraded", index),
                rir_path: rir_path(r),
                config: self.clone(),
            },
            clean,
            reverberant,
            degraded,
        })
    }

    /// All items, generated in parallel; utterances and RIRs are built once.
    pub fn items(&self) -> Result<Vec<CorpusItem>> {
        self.validate()?;
        let utterances: Vec<Waveform> = (0..self.n_utterances)
            .into_par_iter()
            .map(|u| self.utterance(u))
            .collect::<Result<_>>()?;
        let rirs: Vec<Rir> = (0..self.n_rirs)
            .into_par_iter()
            .map(|r| self.rir(r))
            .collect::<Result<_>>()?;
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                self.item_from_parts(
                    i,
                    utterances[i / self.n_rirs].clone(),
                    &rirs[i % self.n_rirs],
                )
            })
            .collect()
    }
}

fn item_path(kind: &str, index: usize) -> PathBuf {
    PathBuf::from(kind).join(format!("{index:05}.wav"))
}

fn rir_path(r: usize) -> PathBuf {
    PathBuf::from("rirs").join(format!("rir_{r:03}.wav"))
}

/// One manifest line. Paths are relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub index: usize,
    pub utterance: usize,
    pub rir: usize,
    pub rt60_target: f64,
    pub snr_db: f64,
    pub chain: Vec<ArtifactKind>,
    pub rir_meta: Option<crate::rir::RirMeta>,
    pub clean: PathBuf,
    pub reverberant: PathBuf,
    pub degraded: PathBuf,
    pub rir_path: PathBuf,
    pub config: CorpusConfig,
}

impl ItemRecord {
    /// Rebuilds the item this record describes.
    pub fn regenerate(&self) -> Result<CorpusItem> {
        self.config.item(self.index)
    }
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub record: ItemRecord,
    pub clean: Waveform,
    pub reverberant: Waveform,
    pub degraded: Waveform,
}

impl CorpusItem {
    /// Log-mel triple with the clean signal zero-padded to the reverberant
    /// length.
    pub fn train_item(&self, cfg: &LogMelConfig) -> Result<TrainItem> {
        train_item(&self.clean, &self.reverberant, &self.degraded, cfg)
    }
}

pub fn train_item(
    clean: &Waveform,
    reverberant: &Waveform,
    degraded: &Waveform,
    cfg: &LogMelConfig,
) -> Result<TrainItem> {
    let padded = clean.resized(reverberant.len());
    Ok(TrainItem {
        clean: log_mel(&padded, cfg)?,
        reverberant: log_mel(reverberant, cfg)?,
        degraded: log_mel(degraded, cfg)?,
    })
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Writes all items and their manifest under `dir`. WAVs are float32 so
/// regenerated items compare bit-for-bit.
pub fn write_corpus(cfg: &CorpusConfig, dir: &Path) -> Result<Vec<ItemRecord>> {
    let items = cfg.items()?;
    for sub in ["clean", "reverberant", "degraded", "rirs"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    for r in 0..cfg.n_rirs {
        cfg.rir(r)?.save(dir.join(rir_path(r)))?;
    }
    items.par_iter().try_for_each(|it| -> Result<()> {
        write_wav(dir.join(&it.record.clean), &it.clean, WavEncoding::Float32)?;
        write_wav(
            dir.join(&it.record.reverberant),
            &it.reverberant,
            WavEncoding::Float32,
        )?;
        write_wav(
            dir.join(&it.record.degraded),
            &it.degraded,
            WavEncoding::Float32,
        )
    })?;
    let records: Vec<ItemRecord> = items.into_iter().map(|it| it.record).collect();
    write_manifest(&dir.join(MANIFEST_NAME), &records)?;
    Ok(records)
}

pub fn write_manifest<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Reads the WAVs of `records` (relative to `dir`) and computes log-mel
/// triples, in record order.
pub fn load_train_items(
    dir: &Path,
    records: &[ItemRecord],
    cfg: &LogMelConfig,
) -> Result<Vec<TrainItem>> {
    records
        .par_iter()
        .map(|r| {
            let clean = read_wav(dir.join(&r.clean))?;
            let reverberant = read_wav(dir.join(&r.reverberant))?;
            let degraded = read_wav(dir.join(&r.degraded))?;
            train_item(&clean, &reverberant, &degraded, cfg)
        })
        .collect()
}

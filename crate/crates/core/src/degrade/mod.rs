//! Noisy observations `x = A(s ∗ r + n)` and supervised pairs with the
//! stochastic clean/reverberant target switch.

mod codec;

pub use codec::{
    alaw_decode, alaw_encode, apply_artifact, format_chain, parse_chain, ulaw_decode, ulaw_encode,
    ArtifactKind, LOWPASS_SECTIONS,
};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rir::{Rir, RirMeta};
use crate::signal::{convolve, mix_at_snr, Waveform};

/// Probability of the clean-target branch used in training.
pub const DEFAULT_SWITCH_PROBABILITY: f64 = 0.1;
pub const TRAIN_SNR_RANGE_DB: (f64, f64) = (5.0, 30.0);
pub const EVAL_SNR_RANGE_DB: (f64, f64) = (-5.0, 20.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub snr_db_range: (f64, f64),
    pub artifact_chain: Vec<ArtifactKind>,
    /// Apply one artifact drawn uniformly from the chain instead of all of
    /// them in order.
    #[serde(default)]
    pub pick_one: bool,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn train(seed: u64) -> Self {
        Self {
            snr_db_range: TRAIN_SNR_RANGE_DB,
            artifact_chain: vec![
                ArtifactKind::ALaw,
                ArtifactKind::MuLaw,
                ArtifactKind::LowPass { cutoff_hz: 6000.0 },
                ArtifactKind::BitCrush { bits: 10 },
            ],
            pick_one: true,
            seed,
        }
    }

    pub fn eval(seed: u64) -> Self {
        Self {
            snr_db_range: EVAL_SNR_RANGE_DB,
            ..Self::train(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.snr_db_range;
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::invalid(format!("SNR range ({lo}, {hi}) is empty")));
        }
        Ok(())
    }

    pub fn draw_snr<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.snr_db_range;
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    }

    /// The artifacts to apply for one example.
    pub fn draw_chain<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<ArtifactKind> {
        if self.pick_one {
            self.artifact_chain
                .choose(rng)
                .cloned()
                .into_iter()
                .collect()
        } else {
            self.artifact_chain.clone()
        }
    }
}

/// Reverberates `s` with `r`, adds `n` at `snr_db`, then applies `chain` in
/// order. The noise is circularly shifted by a random offset before being
/// cropped or tiled to the reverberant length. Output samples are clamped to
/// [-1, 1].
pub fn degrade<R: Rng + ?Sized>(
    s: &Waveform,
    r: &Rir,
    n: &Waveform,
    snr_db: f64,
    chain: &[ArtifactKind],
    rng: &mut R,
) -> Result<Waveform> {
    let reverberant = convolve(s, r)?;
    degrade_reverberant(&reverberant, n, snr_db, chain, rng)
}

fn degrade_reverberant<R: Rng + ?Sized>(
    reverberant: &Waveform,
    n: &Waveform,
    snr_db: f64,
    chain: &[ArtifactKind],
    rng: &mut R,
) -> Result<Waveform> {
    let noise = if n.is_empty() {
        n.clone()
    } else {
        let offset = rng.random_range(0..n.len());
        let mut rotated = n.samples()[offset..].to_vec();
        rotated.extend_from_slice(&n.samples()[..offset]);
        Waveform::new(rotated, n.sample_rate())?
    };
    let mut x = mix_at_snr(reverberant, &noise, snr_db)?.signal;
    for kind in chain {
        x = apply_artifact(&x, kind)?;
    }
    let clipped = x.samples().iter().filter(|v| v.abs() > 1.0).count();
    if clipped > 0 {
        log::warn!(
            "clipping {clipped} of {} samples after artifact chain",
            x.len()
        );
    }
    Ok(Waveform::from_parts(
        x.samples().iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        x.sample_rate(),
    ))
}

/// `true` selects the reverberant target: a uniform draw `u ∈ [0, 1)` with
/// `u >= q`, so the clean branch is taken with probability `q`.
pub fn draw_reverb_branch<R: Rng + ?Sized>(q: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u >= q
}

#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub input: Waveform,
    /// `s ∗ r` when `reverb_active`, otherwise `s` zero-padded to the input
    /// length.
    pub target: Waveform,
    pub reverb_active: bool,
    pub snr_db: f64,
    pub chain: Vec<ArtifactKind>,
    pub rir_meta: Option<RirMeta>,
}

pub fn make_training_example<R: Rng + ?Sized>(
    s: &Waveform,
    r: &Rir,
    n: &Waveform,
    spec: &DegradationSpec,
    q: f64,
    rng: &mut R,
) -> Result<TrainingExample> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!(
            "switch probability {q} outside [0, 1]"
        )));
    }
    spec.validate()?;
    let reverb_active = draw_reverb_branch(q, rng);
    let snr_db = spec.draw_snr(rng);
    let chain = spec.draw_chain(rng);
    let reverberant = convolve(s, r)?;
    let input = degrade_reverberant(&reverberant, n, snr_db, &chain, rng)?;
    let target = if reverb_active {
        reverberant
    } else {
        s.resized(input.len())
    };
    Ok(TrainingExample {
        input,
        target,
        reverb_active,
        snr_db,
        chain,
        rir_meta: r.meta().cloned(),
    })
}

use std::f64::consts::{LN_10, PI};

use crate::error::{Error, Result};
use crate::signal::{log_mel, LogMelConfig, Waveform};

pub const N_MFCC: usize = 13;
/// Allowed relative length difference between reference and hypothesis.
pub const DURATION_TOLERANCE: f64 = 0.1;

/// Orthonormal DCT-II, keeping the first `n_out` coefficients.
pub fn dct_ii_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Mel-frequency cepstral coefficients, one row of `n_coef` values per
/// log-mel frame. With the orthonormal DCT a constant log-mel frame `v`
/// gives `c0 = sqrt(n_mels)·v` and zeros elsewhere.
pub fn mfcc(w: &Waveform, cfg: &LogMelConfig, n_coef: usize) -> Result<Vec<Vec<f64>>> {
    if n_coef == 0 || n_coef > cfg.n_mels {
        return Err(Error::invalid(format!(
            "{n_coef} cepstral coefficients from {} mel bands",
            cfg.n_mels
        )));
    }
    let mel = log_mel(w, cfg)?;
    Ok(mel.frames().map(|f| dct_ii_ortho(f, n_coef)).collect())
}

pub(crate) fn check_durations(a: usize, b: usize) -> Result<()> {
    let longer = a.max(b) as f64;
    if (a as f64 - b as f64).abs() > DURATION_TOLERANCE * longer {
        return Err(Error::DurationMismatch {
            left: a,
            right: b,
            tolerance_pct: DURATION_TOLERANCE * 100.0,
        });
    }
    Ok(())
}

/// Frame-averaged `(10/ln 10)·sqrt(2·Σ_{d≥1} (c_d − ĉ_d)²)`, skipping `c0`,
/// over the frames both sequences share.
pub fn mcd_from_cepstra(reference: &[Vec<f64>], hypothesis: &[Vec<f64>]) -> f64 {
    let n = reference.len().min(hypothesis.len());
    if n == 0 {
        return 0.0;
    }
    let k = 10.0 / LN_10 * 2f64.sqrt();
    reference[..n]
        .iter()
        .zip(&hypothesis[..n])
        .map(|(r, h)| {
            let sq: f64 = r.iter().zip(h).skip(1).map(|(a, b)| (a - b).powi(2)).sum();
            k * sq.sqrt()
        })
        .sum::<f64>()
        / n as f64
}

/// Mel-cepstral distortion in dB between time-aligned signals.
pub fn mcd(reference: &Waveform, hypothesis: &Waveform, cfg: &LogMelConfig) -> Result<f64> {
    if reference.sample_rate() != hypothesis.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: reference.sample_rate(),
            right: hypothesis.sample_rate(),
        });
    }
    check_durations(reference.len(), hypothesis.len())?;
    let n = reference.len().min(hypothesis.len());
    let r = mfcc(&reference.resized(n), cfg, N_MFCC)?;
    let h = mfcc(&hypothesis.resized(n), cfg, N_MFCC)?;
    Ok(mcd_from_cepstra(&r, &h))
}

use serde::{Deserialize, Serialize};

use super::stft::{stft, StftParams};
use super::Waveform;
use crate::error::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale between 0 Hz and
/// Nyquist, with unit peak gain.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    /// Row-major `n_mels × n_bins`.
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::invalid("n_mels must be at least 1"));
        }
        let n_bins = fft_size / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;

        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= center {
                    (f - lo) / (center - lo)
                } else if f > center && f < hi {
                    (hi - f) / (hi - center)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = w;
            }
        }
        Ok(Self {
            n_mels,
            n_bins,
            weights,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Mel energies of one power-spectrum frame.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        debug_assert_eq!(power.len(), self.n_bins);
        for (m, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = self
                .row(m)
                .iter()
                .zip(power)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, p)| w * p)
                .sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMelConfig {
    pub stft: StftParams,
    pub n_mels: usize,
    pub floor: f64,
}

impl LogMelConfig {
    pub const DEFAULT_N_MELS: usize = 128;
    pub const DEFAULT_FLOOR: f64 = 1e-10;

    pub fn for_rate(sample_rate: u32) -> Self {
        Self {
            stft: StftParams::for_rate(sample_rate),
            n_mels: Self::DEFAULT_N_MELS,
            floor: Self::DEFAULT_FLOOR,
        }
    }
}

/// `frames × n_mels` natural-log mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    n_frames: usize,
    n_mels: usize,
    frame_hop: usize,
    sample_rate: u32,
    data: Vec<f64>,
}

impl LogMelSpectrogram {
    pub fn from_frames(
        data: Vec<f64>,
        n_mels: usize,
        frame_hop: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        if n_mels == 0 || !data.len().is_multiple_of(n_mels) {
            return Err(Error::DimensionMismatch {
                expected: n_mels,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("log-mel spectrogram"));
        }
        Ok(Self {
            n_frames: data.len() / n_mels,
            n_mels,
            frame_hop,
            sample_rate,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame_hop(&self) -> usize {
        self.frame_hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_mels)
    }

    /// Zero-pads (with `fill`) or truncates to `n_frames`.
    pub fn with_frames(&self, n_frames: usize, fill: f64) -> Self {
        let mut data = self.data.clone();
        data.resize(n_frames * self.n_mels, fill);
        Self {
            n_frames,
            data,
            ..*self
        }
    }
}

pub fn log_mel(w: &Waveform, cfg: &LogMelConfig) -> Result<LogMelSpectrogram> {
    if !(cfg.floor > 0.0) {
        return Err(Error::invalid("log-mel floor must be positive"));
    }
    let fb = MelFilterbank::new(cfg.n_mels, cfg.stft.fft_size, w.sample_rate())?;
    let spec = stft(w, &cfg.stft)?;
    let mut data = vec![0.0; spec.n_frames * cfg.n_mels];
    let mut power = vec![0.0; spec.n_bins];
    for (t, out) in data.chunks_exact_mut(cfg.n_mels).enumerate() {
        for (p, c) in power.iter_mut().zip(spec.frame(t)) {
            *p = c.norm_sqr();
        }
        fb.apply(&power, out);
        for v in out.iter_mut() {
            *v = v.max(cfg.floor).ln();
        }
    }
    Ok(LogMelSpectrogram {
        n_frames: spec.n_frames,
        n_mels: cfg.n_mels,
        frame_hop: cfg.stft.hop,
        sample_rate: w.sample_rate(),
        data,
    })
}

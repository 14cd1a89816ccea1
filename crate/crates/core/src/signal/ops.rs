use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::Waveform;
use crate::error::{Error, Result};
use crate::rir::Rir;

/// Below this many multiply-adds the direct loop is faster than the FFT.
const DIRECT_CONV_LIMIT: usize = 4096;

/// Full linear convolution, `a.len() + b.len() - 1` samples.
pub fn convolve_samples(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 8 || a.len() * b.len() <= DIRECT_CONV_LIMIT {
        let mut out = vec![0.0; out_len];
        for (i, x) in a.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            for (o, y) in out[i..].iter_mut().zip(b) {
                *o += x * y;
            }
        }
        return out;
    }

    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let lift = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = lift(a);
    let mut fb = lift(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

pub fn convolve(w: &Waveform, r: &Rir) -> Result<Waveform> {
    let taps = r.taps();
    if w.sample_rate() != taps.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: w.sample_rate(),
            right: taps.sample_rate(),
        });
    }
    if w.is_empty() {
        return Err(Error::EmptySignal);
    }
    Ok(Waveform::from_parts(
        convolve_samples(w.samples(), taps.samples()),
        w.sample_rate(),
    ))
}

/// Result of [`mix_at_snr`]: the mixture and the gain applied to the noise.
#[derive(Debug, Clone)]
pub struct Mix {
    pub signal: Waveform,
    pub noise_gain: f64,
}

/// Adds `n` to `s` scaled so that the speech-to-noise power ratio over the
/// mixed region equals `snr_db`. The noise is cropped or tiled from its
/// first sample to the speech length; `f64::INFINITY` returns `s` unchanged.
pub fn mix_at_snr(s: &Waveform, n: &Waveform, snr_db: f64) -> Result<Mix> {
    if s.sample_rate() != n.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: s.sample_rate(),
            right: n.sample_rate(),
        });
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("invalid SNR {snr_db}")));
    }
    let p_s = s.power();
    if !(p_s > 0.0) {
        return Err(Error::ZeroEnergy("speech"));
    }
    if snr_db == f64::INFINITY {
        return Ok(Mix {
            signal: s.clone(),
            noise_gain: 0.0,
        });
    }
    if n.is_empty() {
        return Err(Error::ZeroEnergy("noise"));
    }
    let fitted: Vec<f64> = n.samples().iter().copied().cycle().take(s.len()).collect();
    let p_n = fitted.iter().map(|x| x * x).sum::<f64>() / fitted.len() as f64;
    if !(p_n > 0.0) {
        return Err(Error::ZeroEnergy("noise"));
    }
    let gain = (p_s / (p_n * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = s
        .samples()
        .iter()
        .zip(&fitted)
        .map(|(a, b)| a + gain * b)
        .collect();
    Ok(Mix {
        signal: Waveform::from_parts(mixed, s.sample_rate()),
        noise_gain: gain,
    })
}

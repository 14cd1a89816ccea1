//! Synthetic speech-like signals and background noise.
//!
//! Utterances alternate short pauses with syllables. Voiced syllables are
//! harmonic series on a gliding f0 shaped by a vowel formant envelope;
//! unvoiced ones are high-passed noise bursts.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Formant centre frequencies (Hz) for a handful of vowels.
const VOWELS: [[f64; 3]; 5] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
];
const FORMANT_BANDWIDTHS: [f64; 3] = [90.0, 110.0, 150.0];
const FORMANT_GAINS: [f64; 3] = [1.0, 0.6, 0.3];
const PEAK: f64 = 0.5;
/// Background level of the recording, relative to full scale.
const NOISE_FLOOR: f64 = 1e-4;
const RAMP_S: f64 = 0.02;

fn formant_envelope(f: f64, formants: &[f64; 3]) -> f64 {
    let tilt = 1.0 / (1.0 + f / 1500.0);
    let res: f64 = formants
        .iter()
        .zip(FORMANT_BANDWIDTHS)
        .zip(FORMANT_GAINS)
        .map(|((fc, bw), g)| g / (1.0 + ((f - fc) / bw).powi(2)))
        .sum();
    tilt * (0.05 + res)
}

fn ramp(i: usize, len: usize, ramp_len: usize) -> f64 {
    let r = ramp_len.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= r {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / r as f64).cos()
    }
}

/// Speech-like utterance of `secs` seconds, peak-normalized to 0.5.
pub fn speech<R: Rng + ?Sized>(rng: &mut R, sample_rate: u32, secs: f64) -> Result<Waveform> {
    if !(secs > 0.0) || sample_rate == 0 {
        return Err(Error::invalid(
            "utterance duration and sample rate must be positive",
        ));
    }
    let fs = sample_rate as f64;
    let n = (secs * fs).round() as usize;
    let mut x = vec![0.0; n];
    let base_f0: f64 = rng.random_range(90.0..220.0);
    let f_max = (0.45 * fs).min(5000.0);
    let ramp_len = (RAMP_S * fs) as usize;

    let mut t = (rng.random_range(0.03..0.1) * fs) as usize;
    while t < n {
        let len = ((rng.random_range(0.12..0.35) * fs) as usize).min(n - t);
        if len < 2 * ramp_len {
            break;
        }
        let gain = rng.random_range(0.5..1.0);
        if rng.random_bool(0.8) {
            let formants = VOWELS[rng.random_range(0..VOWELS.len())];
            let start_f0: f64 = base_f0 * rng.random_range(0.9..1.15);
            let end_f0 = base_f0 * rng.random_range(0.8..1.05);
            let vib_rate = rng.random_range(3.0..6.0);
            let mut phase = rng.random_range(0.0..2.0 * PI);
            let n_harm = (f_max / start_f0.min(end_f0)) as usize;
            let amps: Vec<f64> = (1..=n_harm)
                .map(|k| formant_envelope(k as f64 * 0.5 * (start_f0 + end_f0), &formants))
                .collect();
            for i in 0..len {
                let u = i as f64 / len as f64;
                let f0 = (start_f0 + (end_f0 - start_f0) * u)
                    * (1.0 + 0.02 * (2.0 * PI * vib_rate * i as f64 / fs).sin());
                phase += 2.0 * PI * f0 / fs;
                let mut v = 0.0;
                for (k, a) in amps.iter().enumerate() {
                    if (k + 1) as f64 * f0 < f_max {
                        v += a * ((k + 1) as f64 * phase).sin();
                    }
                }
                x[t + i] += gain * ramp(i, len, ramp_len) * v;
            }
        } else {
            let mut prev = 0.0;
            for i in 0..len {
                let w: f64 = StandardNormal.sample(rng);
                x[t + i] += 0.3 * gain * ramp(i, len, ramp_len) * (w - prev);
                prev = w;
            }
        }
        t += len + (rng.random_range(0.05..0.2) * fs) as usize;
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { PEAK / peak } else { 0.0 };
    for v in x.iter_mut() {
        let floor: f64 = StandardNormal.sample(rng);
        *v = *v * scale + NOISE_FLOOR * floor;
    }
    Waveform::new(x, sample_rate)
}

/// Coloured background noise (a mix of white and low-passed noise) with
/// unit RMS scaled to 0.1.
pub fn noise<R: Rng + ?Sized>(rng: &mut R, sample_rate: u32, secs: f64) -> Result<Waveform> {
    if !(secs > 0.0) || sample_rate == 0 {
        return Err(Error::invalid(
            "noise duration and sample rate must be positive",
        ));
    }
    let n = ((secs * sample_rate as f64).round() as usize).max(1);
    let pole = rng.random_range(0.8..0.99);
    let mix = rng.random_range(0.1..0.6);
    let mut lp = 0.0;
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            lp = pole * lp + (1.0 - pole) * w;
            mix * w + (1.0 - mix) * lp * 4.0
        })
        .collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= 0.1 / rms);
    Waveform::new(x, sample_rate)
}

//! YIN pitch tracking and gross pitch error.

use serde::{Deserialize, Serialize};

use super::mcd::check_durations;
use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const PITCH_FRAME_S: f64 = 0.040;
pub const PITCH_HOP_S: f64 = 0.010;
pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 500.0;
/// Minimum `1 − d'(τ)` for a frame to count as voiced.
pub const VOICING_CLARITY: f64 = 0.5;
/// Absolute threshold for picking the first dip of the normalized difference.
const YIN_THRESHOLD: f64 = 0.15;
pub const GPE_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchFrame {
    pub f0_hz: f64,
    pub voiced: bool,
    pub clarity: f64,
}

/// Per-frame f0 with 40 ms frames and a 10 ms hop.
pub fn pitch_track(w: &Waveform) -> Result<Vec<PitchFrame>> {
    if w.is_empty() {
        return Err(Error::EmptySignal);
    }
    let fs = w.sample_rate() as f64;
    let frame = (PITCH_FRAME_S * fs).round() as usize;
    let hop = (PITCH_HOP_S * fs).round() as usize;
    let tau_min = (fs / F0_MAX_HZ).floor().max(2.0) as usize;
    let tau_max = (fs / F0_MIN_HZ).ceil() as usize;
    if tau_max + 2 >= frame {
        return Err(Error::invalid(format!(
            "sample rate {fs} too low for pitch tracking"
        )));
    }
    let window = frame - tau_max - 1;

    let x = w.samples();
    let n_frames = if x.len() < frame {
        1
    } else {
        (x.len() - frame) / hop + 1
    };
    let mut buf = vec![0.0; frame];
    let mut diff = vec![0.0; tau_max + 2];
    let mut out = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        buf.iter_mut().for_each(|v| *v = 0.0);
        let start = t * hop;
        let end = (start + frame).min(x.len());
        buf[..end - start].copy_from_slice(&x[start..end]);
        out.push(yin_frame(&buf, window, tau_min, tau_max, fs, &mut diff));
    }
    Ok(out)
}

const UNVOICED: PitchFrame = PitchFrame {
    f0_hz: 0.0,
    voiced: false,
    clarity: 0.0,
};

fn yin_frame(
    frame: &[f64],
    window: usize,
    tau_min: usize,
    tau_max: usize,
    fs: f64,
    d: &mut [f64],
) -> PitchFrame {
    let energy: f64 = frame[..window].iter().map(|v| v * v).sum();
    if energy < 1e-10 * window as f64 {
        return UNVOICED;
    }
    // Cumulative-mean-normalized difference d'(τ), with d'(0) = 1.
    d[0] = 1.0;
    let mut running = 0.0;
    for tau in 1..=tau_max + 1 {
        let raw: f64 = (0..window)
            .map(|j| (frame[j] - frame[j + tau]).powi(2))
            .sum();
        running += raw;
        d[tau] = if running > 0.0 {
            raw * tau as f64 / running
        } else {
            1.0
        };
    }

    let mut best = None;
    let mut tau = tau_min;
    while tau <= tau_max {
        if d[tau] < YIN_THRESHOLD {
            while tau < tau_max && d[tau + 1] < d[tau] {
                tau += 1;
            }
            best = Some(tau);
            break;
        }
        tau += 1;
    }
    let tau = best.unwrap_or_else(|| {
        (tau_min..=tau_max)
            .min_by(|a, b| d[*a].total_cmp(&d[*b]))
            .unwrap()
    });

    // Parabolic refinement of the dip.
    let (a, b, c) = (d[tau - 1], d[tau], d[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let period = tau as f64 + shift;
    let f0 = fs / period;
    let clarity = 1.0 - b.min(1.0);
    PitchFrame {
        f0_hz: f0,
        voiced: clarity > VOICING_CLARITY && (F0_MIN_HZ..=F0_MAX_HZ).contains(&f0),
        clarity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpeReport {
    pub gpe: f64,
    pub jointly_voiced: usize,
    pub gross_errors: usize,
    /// No frame was voiced in both tracks; `gpe` is reported as 0.
    pub no_voiced_frames: bool,
}

/// Gross pitch error over frames voiced in both tracks.
pub fn gpe_from_tracks(
    reference: &[PitchFrame],
    hypothesis: &[PitchFrame],
    threshold: f64,
) -> GpeReport {
    let mut joint = 0;
    let mut gross = 0;
    for (r, h) in reference.iter().zip(hypothesis) {
        if r.voiced && h.voiced {
            joint += 1;
            if (h.f0_hz - r.f0_hz).abs() / r.f0_hz > threshold {
                gross += 1;
            }
        }
    }
    GpeReport {
        gpe: if joint == 0 {
            0.0
        } else {
            gross as f64 / joint as f64
        },
        jointly_voiced: joint,
        gross_errors: gross,
        no_voiced_frames: joint == 0,
    }
}

pub fn gpe(reference: &Waveform, hypothesis: &Waveform, threshold: f64) -> Result<GpeReport> {
    if reference.sample_rate() != hypothesis.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: reference.sample_rate(),
            right: hypothesis.sample_rate(),
        });
    }
    check_durations(reference.len(), hypothesis.len())?;
    Ok(gpe_from_tracks(
        &pitch_track(reference)?,
        &pitch_track(hypothesis)?,
        threshold,
    ))
}

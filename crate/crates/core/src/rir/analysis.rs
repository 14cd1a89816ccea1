//! Schroeder decay analysis and direct-to-reverberant ratio.

use super::Rir;
use crate::error::{Error, Result};

/// Floor applied to the energy decay curve where the residual energy is zero.
pub const EDC_FLOOR_DB: f64 = -120.0;
/// Length of the direct-sound segment following the main peak.
pub const DRR_DIRECT_WINDOW_S: f64 = 0.008;
/// Pre-roll ahead of the main peak counted as direct sound.
pub const DRR_PRE_WINDOW_S: f64 = 0.0005;
const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -25.0;

/// Schroeder backward integral in dB, normalized so the first value is 0 dB.
pub fn energy_decay_curve(r: &Rir) -> Result<Vec<f64>> {
    edc_of(r.samples())
}

pub(crate) fn edc_of(samples: &[f64]) -> Result<Vec<f64>> {
    let mut tail = vec![0.0; samples.len()];
    let mut acc = 0.0;
    for (t, x) in tail.iter_mut().zip(samples).rev() {
        acc += x * x;
        *t = acc;
    }
    let total = acc;
    if !(total > 0.0) {
        return Err(Error::ZeroEnergy("RIR"));
    }
    Ok(tail
        .into_iter()
        .map(|e| {
            if e > 0.0 {
                (10.0 * (e / total).log10()).max(EDC_FLOOR_DB)
            } else {
                EDC_FLOOR_DB
            }
        })
        .collect())
}

/// Reverberation time from a least-squares line through the −5 to −25 dB
/// part of the decay curve, extrapolated to 60 dB.
pub fn rt60(r: &Rir) -> Result<f64> {
    let edc = energy_decay_curve(r)?;
    let fs = r.sample_rate() as f64;
    let reached = edc.iter().copied().fold(0.0, f64::min);
    let insufficient = || Error::InsufficientDecay {
        needed_db: FIT_END_DB,
        reached_db: reached,
    };
    let start = edc
        .iter()
        .position(|&e| e <= FIT_START_DB)
        .ok_or_else(insufficient)?;
    let end = edc
        .iter()
        .position(|&e| e <= FIT_END_DB)
        .ok_or_else(insufficient)?;
    if end < start + 2 {
        return Err(insufficient());
    }

    let n = (end - start) as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in edc[start..end].iter().enumerate() {
        let t = (start + i) as f64 / fs;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    if !(slope < 0.0) {
        return Err(insufficient());
    }
    Ok(-60.0 / slope)
}

/// Index of the largest-magnitude tap, earliest on ties.
pub fn direct_path_index(r: &Rir) -> Result<usize> {
    let mut best = 0;
    let mut peak = 0.0;
    for (i, x) in r.samples().iter().enumerate() {
        if x.abs() > peak {
            peak = x.abs();
            best = i;
        }
    }
    if peak == 0.0 {
        return Err(Error::ZeroEnergy("RIR"));
    }
    Ok(best)
}

/// Direct-to-reverberant ratio in dB. Direct energy covers
/// `[t_d − 0.5 ms, t_d + direct_window]` around the main peak `t_d`; everything
/// after is reverberant. Returns `+∞` when there is no late energy.
pub fn drr(r: &Rir, direct_window: f64) -> Result<f64> {
    if !(direct_window >= 0.0) {
        return Err(Error::invalid(format!("direct window {direct_window} s")));
    }
    let td = direct_path_index(r)?;
    let fs = r.sample_rate() as f64;
    let w = (direct_window * fs).round() as usize;
    let pre = (DRR_PRE_WINDOW_S * fs).round() as usize;
    let x = r.samples();
    let split = (td + w + 1).min(x.len());
    let direct: f64 = x[td.saturating_sub(pre)..split].iter().map(|v| v * v).sum();
    let late: f64 = x[split..].iter().map(|v| v * v).sum();
    if late == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (direct / late).log10())
}

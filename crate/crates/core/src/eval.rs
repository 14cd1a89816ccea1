//! Post-training probes: feature clustering, target closeness and a
//! reverberance proxy on decoded spectrograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ReverbFeature;
use crate::signal::LogMelSpectrogram;

fn frame_log_energy(frame: &[f64]) -> f64 {
    let max = frame.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + frame.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean log-energy of `decoded` over the quieter half of the frames (ranked
/// by `clean` energy) minus its mean over the louder half. Reverberation
/// fills pauses, so the value grows with reverberance.
pub fn reverberance_proxy(decoded: &LogMelSpectrogram, clean: &LogMelSpectrogram) -> Result<f64> {
    if decoded.n_frames() != clean.n_frames() || decoded.n_mels() != clean.n_mels() {
        return Err(Error::DimensionMismatch {
            expected: clean.data().len(),
            actual: decoded.data().len(),
        });
    }
    let n = clean.n_frames();
    if n < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let energy: Vec<f64> = clean.frames().map(frame_log_energy).collect();
    order.sort_by(|a, b| energy[*a].total_cmp(&energy[*b]).then(a.cmp(b)));
    let half = n / 2;
    let mean = |idx: &[usize]| {
        idx.iter()
            .map(|&t| frame_log_energy(decoded.frame(t)))
            .sum::<f64>()
            / idx.len() as f64
    };
    Ok(mean(&order[..half]) - mean(&order[n - half..]))
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: a.len(),
        });
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let cov: f64 = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| (x - mean) * (y - mean))
        .sum();
    let va: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mean).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Mean distance between features of different utterances through the
    /// same RIR.
    pub same_rir: f64,
    /// Mean distance between features of the same utterance through
    /// different RIRs.
    pub different_rir: f64,
}

/// `features[i]` belongs to utterance `utterance[i]` and RIR `rir[i]`.
pub fn cluster_report(
    features: &[ReverbFeature],
    utterance: &[usize],
    rir: &[usize],
) -> Result<ClusterReport> {
    if features.len() != utterance.len() || features.len() != rir.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: utterance.len().min(rir.len()),
        });
    }
    let (mut same, mut n_same, mut diff, mut n_diff) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            let d = features[i].distance(&features[j]);
            if rir[i] == rir[j] && utterance[i] != utterance[j] {
                same += d;
                n_same += 1;
            } else if rir[i] != rir[j] && utterance[i] == utterance[j] {
                diff += d;
                n_diff += 1;
            }
        }
    }
    if n_same == 0 || n_diff == 0 {
        return Err(Error::invalid("need repeated utterances and repeated RIRs"));
    }
    Ok(ClusterReport {
        same_rir: same / n_same as f64,
        different_rir: diff / n_diff as f64,
    })
}

pub fn mse(a: &LogMelSpectrogram, b: &LogMelSpectrogram) -> Result<f64> {
    if a.data().len() != b.data().len() {
        return Err(Error::DimensionMismatch {
            expected: a.data().len(),
            actual: b.data().len(),
        });
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / a.data().len() as f64)
}

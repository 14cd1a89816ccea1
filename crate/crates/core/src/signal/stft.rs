use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann, so that hop = frame/4 overlap-adds to a constant.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftParams {
    pub frame_length: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: Window,
}

impl StftParams {
    /// 50 ms Hann frames with a 12.5 ms hop.
    pub fn for_rate(sample_rate: u32) -> Self {
        let frame_length = (sample_rate as usize * 50).div_ceil(1000);
        let hop = (sample_rate as usize * 25).div_ceil(2000);
        Self {
            frame_length,
            hop,
            fft_size: frame_length.next_power_of_two(),
            window: Window::Hann,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.hop == 0 {
            return Err(Error::invalid("frame length and hop must be positive"));
        }
        if self.fft_size < self.frame_length {
            return Err(Error::invalid(format!(
                "fft size {} shorter than frame length {}",
                self.fft_size, self.frame_length
            )));
        }
        if self.hop > self.frame_length {
            return Err(Error::invalid(format!(
                "hop {} exceeds frame length {}",
                self.hop, self.frame_length
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of frames needed to cover `len` samples, the last one
    /// zero-padded when partial.
    pub fn n_frames(&self, len: usize) -> usize {
        if len <= self.frame_length {
            1
        } else {
            (len - self.frame_length).div_ceil(self.hop) + 1
        }
    }
}

/// One-sided complex spectrogram, row-major `frames × bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub n_frames: usize,
    pub n_bins: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }
}

pub fn stft(w: &Waveform, p: &StftParams) -> Result<Spectrogram> {
    if w.is_empty() {
        return Err(Error::EmptySignal);
    }
    p.validate()?;
    let window = p.window.coefficients(p.frame_length);
    let n_frames = p.n_frames(w.len());
    let n_bins = p.n_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(p.fft_size);
    let samples = w.samples();

    let mut data = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); p.fft_size];
    for t in 0..n_frames {
        let start = t * p.hop;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, (b, wv)) in buf.iter_mut().zip(&window).enumerate() {
            if let Some(x) = samples.get(start + i) {
                b.re = x * wv;
            }
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        n_frames,
        n_bins,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_sided_energy(frame: &[Complex64], fft_size: usize) -> f64 {
        let last = fft_size / 2;
        frame
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let m = if k == 0 || k == last { 1.0 } else { 2.0 };
                m * c.norm_sqr()
            })
            .sum::<f64>()
            / fft_size as f64
    }

    #[test]
    fn default_params_at_24k() {
        let p = StftParams::for_rate(24_000);
        assert_eq!(p.frame_length, 1200);
        assert_eq!(p.hop, 300);
        assert_eq!(p.fft_size, 2048);
        p.validate().unwrap();
    }

    #[test]
    fn rejects_bad_params_and_empty_input() {
        let w = Waveform::new(vec![0.0; 10], 8000).unwrap();
        let mut p = StftParams::for_rate(8000);
        p.fft_size = p.frame_length - 1;
        assert!(stft(&w, &p).is_err());
        let mut p = StftParams::for_rate(8000);
        p.hop = p.frame_length + 1;
        assert!(stft(&w, &p).is_err());
        let empty = Waveform::new(vec![], 8000).unwrap();
        assert!(matches!(
            stft(&empty, &StftParams::for_rate(8000)),
            Err(Error::EmptySignal)
        ));
    }

    #[test]
    fn frame_count_covers_signal() {
        let p = StftParams {
            frame_length: 8,
            hop: 4,
            fft_size: 8,
            window: Window::Hann,
        };
        assert_eq!(p.n_frames(3), 1);
        assert_eq!(p.n_frames(8), 1);
        assert_eq!(p.n_frames(12), 2);
        assert_eq!(p.n_frames(13), 3);
    }

    #[test]
    fn bin_centered_sine_concentrates_in_one_bin() {
        let n = 256;
        let k0 = 17;
        let samples: Vec<f64> = (0..n * 4)
            .map(|i| (2.0 * PI * k0 as f64 * i as f64 / n as f64).sin())
            .collect();
        let w = Waveform::new(samples, 16_000).unwrap();
        let p = StftParams {
            frame_length: n,
            hop: n,
            fft_size: n,
            window: Window::Rectangular,
        };
        let s = stft(&w, &p).unwrap();
        assert_eq!(s.n_frames, 4);
        for t in 0..s.n_frames {
            let frame = s.frame(t);
            let total: f64 = frame.iter().map(|c| c.norm_sqr()).sum();
            assert!(frame[k0].norm_sqr() / total > 1.0 - 1e-12);
        }
    }

    #[test]
    fn zero_input_gives_zero_spectrum() {
        let w = Waveform::zeros(5000, 24_000);
        let s = stft(&w, &StftParams::for_rate(24_000)).unwrap();
        assert!(s.data.iter().all(|c| c.norm_sqr() == 0.0));
    }

    #[test]
    fn parseval_rectangular_non_overlapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..24_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 24_000).unwrap();
        let p = StftParams {
            frame_length: 1000,
            hop: 1000,
            fft_size: 1024,
            window: Window::Rectangular,
        };
        let s = stft(&w, &p).unwrap();
        let spectral: f64 = (0..s.n_frames)
            .map(|t| one_sided_energy(s.frame(t), p.fft_size))
            .sum();
        let direct = w.energy();
        assert!(((spectral - direct) / direct).abs() < 1e-6);
    }

    #[test]
    fn parseval_hann_quarter_hop() {
        // Periodic Hann at hop = N/4 has a squared-window overlap sum of
        // 3N / (8 hop) = 1.5 everywhere away from the edges, so the test
        // signal is silent over the first and last frame.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = StftParams {
            frame_length: 1200,
            hop: 300,
            fft_size: 2048,
            window: Window::Hann,
        };
        let samples: Vec<f64> = (0..24_000)
            .map(|i| {
                if i < p.frame_length || i >= 24_000 - p.frame_length {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        let w = Waveform::new(samples, 24_000).unwrap();
        let s = stft(&w, &p).unwrap();
        let spectral: f64 = (0..s.n_frames)
            .map(|t| one_sided_energy(s.frame(t), p.fft_size))
            .sum::<f64>()
            / 1.5;
        let direct = w.energy();
        assert!(((spectral - direct) / direct).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..3000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 24_000).unwrap();
        let p = StftParams::for_rate(24_000);
        let a = stft(&w, &p).unwrap();
        let b = stft(&w, &p).unwrap();
        assert!(a
            .data
            .iter()
            .zip(&b.data)
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }
}

//! Reverb encoder and feature-conditioned log-mel decoder.
//!
//! The encoder maps a degraded log-mel sequence to a fixed-size feature
//! `c`: two per-frame dense layers, a depthwise temporal convolution, two
//! more dense layers, mean pooling over time and a linear head. The decoder
//! is frame-local: each clean frame is concatenated with `c` and passed
//! through three dense layers whose output is added to the clean frame.

mod adam;
mod io;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{read_feature, read_feature_bytes, write_feature, write_feature_bytes};
pub use train::{train, TrainConfig, TrainItem, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::degrade::draw_reverb_branch;
use crate::error::{Error, Result};
use crate::signal::LogMelSpectrogram;

pub const CONV_KERNEL: usize = 5;
pub const DEFAULT_FEATURE_DIM: usize = 16;
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_mels: usize,
    pub hidden: usize,
    pub feature_dim: usize,
    /// Inputs are fed to the networks as `(m − mel_center) / mel_scale`.
    pub mel_center: f64,
    pub mel_scale: f64,
}

impl ModelConfig {
    pub fn new(n_mels: usize) -> Self {
        Self {
            n_mels,
            hidden: DEFAULT_HIDDEN,
            feature_dim: DEFAULT_FEATURE_DIM,
            mel_center: -8.0,
            mel_scale: 6.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mels == 0 || self.hidden == 0 || self.feature_dim == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if !(self.mel_scale > 0.0) || !self.mel_center.is_finite() {
            return Err(Error::invalid(
                "mel normalization must be finite with positive scale",
            ));
        }
        Ok(())
    }
}

/// Fixed-size reverb feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverbFeature(Vec<f64>);

impl ReverbFeature {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty feature"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature"));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (inputs + outputs) as f64).sqrt();
        Self {
            weight: Tensor::from_fn(inputs, outputs, |_, _| rng.random_range(-a..a)),
            bias: Tensor::zeros(1, outputs),
        }
    }

    fn apply(tape: &mut Tape, p: &[Var], x: Var) -> Var {
        let y = tape.matmul(x, p[0]);
        tape.add_row(y, p[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoder {
    pub pre: [Dense; 2],
    pub conv_weight: Tensor,
    pub conv_bias: Tensor,
    pub post: [Dense; 2],
    pub head: Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDecoder {
    pub layers: [Dense; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverbModel {
    pub config: ModelConfig,
    pub encoder: ToyEncoder,
    pub decoder: ToyDecoder,
}

/// Leaf variables of one model bound to a tape, in parameter order.
struct Bound {
    vars: Vec<Var>,
    n_encoder: usize,
}

impl Bound {
    fn encoder(&self) -> &[Var] {
        &self.vars[..self.n_encoder]
    }

    fn decoder(&self) -> &[Var] {
        &self.vars[self.n_encoder..]
    }
}

impl ReverbModel {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, h, d) = (config.n_mels, config.hidden, config.feature_dim);
        let a = (3.0 / CONV_KERNEL as f64).sqrt();
        let encoder = ToyEncoder {
            pre: [Dense::init(m, h, &mut rng), Dense::init(h, h, &mut rng)],
            conv_weight: Tensor::from_fn(CONV_KERNEL, h, |_, _| rng.random_range(-a..a)),
            conv_bias: Tensor::zeros(1, h),
            post: [Dense::init(h, h, &mut rng), Dense::init(h, h, &mut rng)],
            head: Dense::init(h, d, &mut rng),
        };
        let decoder = ToyDecoder {
            layers: [
                Dense::init(m + d, h, &mut rng),
                Dense::init(h, h, &mut rng),
                Dense::init(h, m, &mut rng),
            ],
        };
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }

    fn encoder_params(&self) -> Vec<(&'static str, &Tensor)> {
        let e = &self.encoder;
        vec![
            ("encoder.pre0.weight", &e.pre[0].weight),
            ("encoder.pre0.bias", &e.pre[0].bias),
            ("encoder.pre1.weight", &e.pre[1].weight),
            ("encoder.pre1.bias", &e.pre[1].bias),
            ("encoder.conv.weight", &e.conv_weight),
            ("encoder.conv.bias", &e.conv_bias),
            ("encoder.post0.weight", &e.post[0].weight),
            ("encoder.post0.bias", &e.post[0].bias),
            ("encoder.post1.weight", &e.post[1].weight),
            ("encoder.post1.bias", &e.post[1].bias),
            ("encoder.head.weight", &e.head.weight),
            ("encoder.head.bias", &e.head.bias),
        ]
    }

    /// Named parameter tensors; encoder first, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out = self.encoder_params();
        let d = &self.decoder.layers;
        out.extend([
            ("decoder.l0.weight", &d[0].weight),
            ("decoder.l0.bias", &d[0].bias),
            ("decoder.l1.weight", &d[1].weight),
            ("decoder.l1.bias", &d[1].bias),
            ("decoder.l2.weight", &d[2].weight),
            ("decoder.l2.bias", &d[2].bias),
        ]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let e = &mut self.encoder;
        let [p0, p1] = &mut e.pre;
        let [q0, q1] = &mut e.post;
        let [d0, d1, d2] = &mut self.decoder.layers;
        vec![
            &mut p0.weight,
            &mut p0.bias,
            &mut p1.weight,
            &mut p1.bias,
            &mut e.conv_weight,
            &mut e.conv_bias,
            &mut q0.weight,
            &mut q0.bias,
            &mut q1.weight,
            &mut q1.bias,
            &mut e.head.weight,
            &mut e.head.bias,
            &mut d0.weight,
            &mut d0.bias,
            &mut d1.weight,
            &mut d1.bias,
            &mut d2.weight,
            &mut d2.bias,
        ]
    }

    pub fn n_encoder_params(&self) -> usize {
        self.encoder_params().len()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.data().len()).sum()
    }

    fn bind(&self, tape: &mut Tape) -> Bound {
        let vars = self
            .params()
            .into_iter()
            .map(|(_, t)| tape.leaf(t.clone()))
            .collect();
        Bound {
            vars,
            n_encoder: self.n_encoder_params(),
        }
    }

    fn mel_leaf(&self, tape: &mut Tape, m: &LogMelSpectrogram) -> Result<Var> {
        if m.n_mels() != self.config.n_mels {
            return Err(Error::DimensionMismatch {
                expected: self.config.n_mels,
                actual: m.n_mels(),
            });
        }
        if m.n_frames() == 0 {
            return Err(Error::EmptySignal);
        }
        Ok(tape.leaf(Tensor::new(m.n_frames(), m.n_mels(), m.data().to_vec())?))
    }

    fn normalize(&self, tape: &mut Tape, x: Var) -> Var {
        let s = 1.0 / self.config.mel_scale;
        tape.affine(x, s, -self.config.mel_center * s)
    }

    /// Per-frame encoder outputs before pooling, `(T − 4) × hidden`.
    fn encoder_frames(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let frames = tape.value(x).rows();
        if frames < CONV_KERNEL {
            return Err(Error::TooShort {
                needed: CONV_KERNEL,
                actual: frames,
            });
        }
        let mut h = self.normalize(tape, x);
        for l in [&p[0..2], &p[2..4]] {
            let y = Dense::apply(tape, l, h);
            h = tape.tanh(y);
        }
        h = tape.depthwise_conv(h, p[4], p[5]);
        for l in [&p[6..8], &p[8..10]] {
            let y = Dense::apply(tape, l, h);
            h = tape.tanh(y);
        }
        Ok(h)
    }

    fn encoder_head(&self, tape: &mut Tape, p: &[Var], frames: Var) -> Var {
        let pooled = tape.mean_rows(frames);
        Dense::apply(tape, &p[10..12], pooled)
    }

    fn decoder_forward(&self, tape: &mut Tape, p: &[Var], clean: Var, c: Var) -> Var {
        let n = self.normalize(tape, clean);
        let mut h = tape.concat_broadcast(n, c);
        for l in [&p[0..2], &p[2..4]] {
            let y = Dense::apply(tape, l, h);
            h = tape.tanh(y);
        }
        let out = Dense::apply(tape, &p[4..6], h);
        let scaled = tape.affine(out, self.config.mel_scale, 0.0);
        tape.add(clean, scaled)
    }

    pub fn encode(&self, m: &LogMelSpectrogram) -> Result<ReverbFeature> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let x = self.mel_leaf(&mut tape, m)?;
        let frames = self.encoder_frames(&mut tape, b.encoder(), x)?;
        let c = self.encoder_head(&mut tape, b.encoder(), frames);
        ReverbFeature::new(tape.value(c).data().to_vec())
    }

    /// Encoder activations for every valid convolution position, before
    /// mean pooling.
    pub fn frame_embeddings(&self, m: &LogMelSpectrogram) -> Result<Tensor> {
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let x = self.mel_leaf(&mut tape, m)?;
        let frames = self.encoder_frames(&mut tape, b.encoder(), x)?;
        Ok(tape.value(frames).clone())
    }

    /// The linear head applied to an already pooled embedding.
    pub fn head(&self, pooled: &[f64]) -> Result<ReverbFeature> {
        let h = &self.encoder.head;
        if pooled.len() != h.weight.rows() {
            return Err(Error::DimensionMismatch {
                expected: h.weight.rows(),
                actual: pooled.len(),
            });
        }
        let out = (0..h.weight.cols())
            .map(|j| {
                h.bias.get(0, j)
                    + pooled
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * h.weight.get(i, j))
                        .sum::<f64>()
            })
            .collect();
        ReverbFeature::new(out)
    }

    pub fn decode(
        &self,
        clean: &LogMelSpectrogram,
        c: &ReverbFeature,
    ) -> Result<LogMelSpectrogram> {
        if c.dim() != self.config.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.feature_dim,
                actual: c.dim(),
            });
        }
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let s = self.mel_leaf(&mut tape, clean)?;
        let cv = tape.leaf(Tensor::row_vector(c.values().to_vec()));
        let out = self.decoder_forward(&mut tape, b.decoder(), s, cv);
        let values = tape.value(out);
        if !values.is_finite() {
            return Err(Error::NonFinite("decoder output"));
        }
        LogMelSpectrogram::from_frames(
            values.data().to_vec(),
            clean.n_mels(),
            clean.frame_hop(),
            clean.sample_rate(),
        )
    }

    /// Loss and gradients for one example on a fixed branch. The reverberant
    /// branch scores `decode(s, encode(x))` against `reverb`; the clean
    /// branch scores `decode(s, 0)` against `s` without running the encoder.
    pub fn branch_loss_and_grad(
        &self,
        s: &LogMelSpectrogram,
        reverb: &LogMelSpectrogram,
        x: &LogMelSpectrogram,
        reverb_active: bool,
    ) -> Result<(f64, Vec<Tensor>)> {
        if s.n_frames() != reverb.n_frames() {
            return Err(Error::DimensionMismatch {
                expected: s.n_frames(),
                actual: reverb.n_frames(),
            });
        }
        let mut tape = Tape::new();
        let b = self.bind(&mut tape);
        let sv = self.mel_leaf(&mut tape, s)?;
        let (c, target) = if reverb_active {
            let xv = self.mel_leaf(&mut tape, x)?;
            let frames = self.encoder_frames(&mut tape, b.encoder(), xv)?;
            (self.encoder_head(&mut tape, b.encoder(), frames), reverb)
        } else {
            (tape.leaf(Tensor::zeros(1, self.config.feature_dim)), s)
        };
        let pred = self.decoder_forward(&mut tape, b.decoder(), sv, c);
        let target = Tensor::new(target.n_frames(), target.n_mels(), target.data().to_vec())?;
        let loss = tape.spectral_loss(pred, &target)?;
        let grads = tape.backward(loss);
        let grads = b
            .vars
            .iter()
            .zip(self.params())
            .map(|(v, (_, t))| grads.get_or_zeros(*v, t.shape()))
            .collect();
        Ok((tape.value(loss).data()[0], grads))
    }

    /// One draw of the switching objective: the reverberant branch with
    /// probability `1 − q`, the clean branch otherwise.
    pub fn switching_loss_and_grad<R: Rng + ?Sized>(
        &self,
        s: &LogMelSpectrogram,
        reverb: &LogMelSpectrogram,
        x: &LogMelSpectrogram,
        q: f64,
        rng: &mut R,
    ) -> Result<(f64, bool, Vec<Tensor>)> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!(
                "switch probability {q} outside [0, 1]"
            )));
        }
        let branch = draw_reverb_branch(q, rng);
        let (loss, grads) = self.branch_loss_and_grad(s, reverb, x, branch)?;
        Ok((loss, branch, grads))
    }

    pub fn switching_loss<R: Rng + ?Sized>(
        &self,
        s: &LogMelSpectrogram,
        reverb: &LogMelSpectrogram,
        x: &LogMelSpectrogram,
        q: f64,
        rng: &mut R,
    ) -> Result<(f64, bool)> {
        let (loss, branch, _) = self.switching_loss_and_grad(s, reverb, x, q, rng)?;
        Ok((loss, branch))
    }
}

/// `‖h − ĥ‖₁ + ‖h − ĥ‖² + ‖h − ĥ‖² / ‖h‖²` over all entries.
pub fn spectral_recon_loss(target: &LogMelSpectrogram, pred: &LogMelSpectrogram) -> Result<f64> {
    if target.data().len() != pred.data().len() {
        return Err(Error::DimensionMismatch {
            expected: target.data().len(),
            actual: pred.data().len(),
        });
    }
    let norm: f64 = target.data().iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(Error::ZeroEnergy("spectral loss target"));
    }
    let (mut l1, mut l2) = (0.0, 0.0);
    for (h, p) in target.data().iter().zip(pred.data()) {
        l1 += (h - p).abs();
        l2 += (h - p).powi(2);
    }
    Ok(l1 + l2 + l2 / norm)
}

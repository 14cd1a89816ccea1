//! Acoustic building blocks for reverberation-preserving speech restoration.
// `!(x > 0.0)` is used on purpose so NaN is rejected too; numeric kernels
// index several arrays in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod autodiff;
pub mod baseline;
mod container;
pub mod corpus;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod latent;
pub mod metrics;
pub mod model;
pub mod rir;
pub mod rng;
pub mod signal;
pub mod synth;
pub mod wav;

pub use error::{Error, Result};
pub use rir::{Point3, Rir, RirMeta, RoomSpec};
pub use signal::{LogMelConfig, LogMelSpectrogram, StftParams, Waveform};

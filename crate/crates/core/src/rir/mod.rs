//! Room impulse responses: the image-source simulator and the
//! decay/direct-path analysis used to characterize them.

pub mod analysis;
pub mod sim;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;
use crate::wav::{read_wav, write_wav, WavEncoding};

pub use analysis::{direct_path_index, drr, energy_decay_curve, rt60, DRR_DIRECT_WINDOW_S};
pub use sim::{
    absorption_for_rt60, image_sources, random_placement, simulate_rir, ImageSource, RoomSpec,
    SabineAbsorption, MAX_ORDER_GUARD, SINC_HALF_WIDTH, SINC_TAPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        p.to_array()
    }
}

/// Provenance of a simulated RIR; also the JSON sidecar written next to
/// RIR WAV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirMeta {
    pub dims: [f64; 3],
    pub src: Point3,
    pub mic: Point3,
    pub alpha: f64,
    pub max_order: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub fs: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    taps: Waveform,
    meta: Option<RirMeta>,
}

impl Rir {
    pub fn new(taps: Waveform) -> Result<Self> {
        if taps.samples().iter().all(|x| *x == 0.0) {
            return Err(Error::ZeroEnergy("RIR"));
        }
        Ok(Self { taps, meta: None })
    }

    /// Single unit tap: convolution with it is the identity.
    pub fn identity(sample_rate: u32) -> Self {
        Self {
            taps: Waveform::from_parts(vec![1.0], sample_rate),
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: RirMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn taps(&self) -> &Waveform {
        &self.taps
    }

    pub fn samples(&self) -> &[f64] {
        self.taps.samples()
    }

    pub fn sample_rate(&self) -> u32 {
        self.taps.sample_rate()
    }

    pub fn meta(&self) -> Option<&RirMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Ok(Self {
            taps: Waveform::new(
                self.taps.samples().iter().map(|x| x * gain).collect(),
                self.sample_rate(),
            )?,
            meta: self.meta.clone(),
        })
    }

    /// Loads a RIR from WAV, picking up a `<path>.json` sidecar if present.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let rir = Rir::new(read_wav(path)?)?;
        let sidecar = sidecar_path(path);
        if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            Ok(rir.with_meta(serde_json::from_str(&text)?))
        } else {
            Ok(rir)
        }
    }

    /// Writes float32 taps and, when metadata is present, the JSON sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        write_wav(path, &self.taps, WavEncoding::Float32)?;
        if let Some(meta) = &self.meta {
            let sidecar = sidecar_path(path);
            std::fs::write(&sidecar, serde_json::to_string_pretty(meta)?)
                .map_err(|e| Error::io(&sidecar, e))?;
        }
        Ok(())
    }
}

pub fn sidecar_path(wav: &Path) -> std::path::PathBuf {
    let mut s = wav.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

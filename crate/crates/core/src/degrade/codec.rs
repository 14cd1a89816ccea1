//! Built-in artifact operators: G.711 companding, zero-phase Butterworth
//! low-pass, bit reduction, and an external-command hook for real codecs.

use std::f64::consts::PI;
use std::fmt;
use std::process::Command;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Waveform;
use crate::wav::{read_wav, write_wav, WavEncoding};

/// Biquad sections in the low-pass cascade (16th-order Butterworth).
pub const LOWPASS_SECTIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactKind {
    ALaw,
    MuLaw,
    LowPass {
        cutoff_hz: f64,
    },
    BitCrush {
        bits: u32,
    },
    /// Shell command with `{in}` and `{out}` WAV path placeholders. The tool
    /// must keep the sample rate.
    ExternalCodec {
        command: String,
    },
}

impl ArtifactKind {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        match self {
            ArtifactKind::LowPass { cutoff_hz } => {
                let nyquist = sample_rate as f64 / 2.0;
                if !(*cutoff_hz > 0.0 && *cutoff_hz < nyquist) {
                    return Err(Error::invalid(format!(
                        "low-pass cutoff {cutoff_hz} Hz must lie in (0, {nyquist})"
                    )));
                }
            }
            ArtifactKind::BitCrush { bits } if !(2..=16).contains(bits) => {
                return Err(Error::invalid(format!("bit depth {bits} outside 2..=16")));
            }
            ArtifactKind::ExternalCodec { command }
                if !(command.contains("{in}") && command.contains("{out}")) =>
            {
                return Err(Error::invalid(
                    "external codec command needs {in} and {out}",
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArtifactKind::ALaw => write!(f, "alaw"),
            ArtifactKind::MuLaw => write!(f, "mulaw"),
            ArtifactKind::LowPass { cutoff_hz } => write!(f, "lowpass:{cutoff_hz}"),
            ArtifactKind::BitCrush { bits } => write!(f, "bitcrush:{bits}"),
            ArtifactKind::ExternalCodec { command } => write!(f, "ext:{command}"),
        }
    }
}

impl FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let need = |what: &str| Error::invalid(format!("artifact `{name}` needs {what}"));
        match (name.to_ascii_lowercase().as_str(), arg) {
            ("alaw", None) => Ok(ArtifactKind::ALaw),
            ("mulaw", None) => Ok(ArtifactKind::MuLaw),
            ("lowpass", Some(a)) => Ok(ArtifactKind::LowPass {
                cutoff_hz: a.parse().map_err(|_| need("a cutoff in Hz"))?,
            }),
            ("bitcrush", Some(a)) => Ok(ArtifactKind::BitCrush {
                bits: a.parse().map_err(|_| need("a bit depth"))?,
            }),
            ("ext", Some(a)) => Ok(ArtifactKind::ExternalCodec {
                command: a.to_string(),
            }),
            _ => Err(Error::invalid(format!("unknown artifact `{s}`"))),
        }
    }
}

/// Parses a comma-separated chain such as `alaw,lowpass:4000,bitcrush:8`.
/// An `ext:` entry must come last since its command may contain commas.
pub fn parse_chain(spec: &str) -> Result<Vec<ArtifactKind>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut rest = spec;
    loop {
        if rest.trim_start().starts_with("ext:") {
            out.push(rest.parse()?);
            break;
        }
        match rest.split_once(',') {
            Some((head, tail)) => {
                out.push(head.parse()?);
                rest = tail;
            }
            None => {
                out.push(rest.parse()?);
                break;
            }
        }
    }
    Ok(out)
}

pub fn format_chain(chain: &[ArtifactKind]) -> String {
    chain
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn apply_artifact(w: &Waveform, kind: &ArtifactKind) -> Result<Waveform> {
    kind.validate(w.sample_rate())?;
    let fs = w.sample_rate();
    let x = w.samples();
    let out = match kind {
        ArtifactKind::ALaw => x
            .iter()
            .map(|&v| from_i16(alaw_decode(alaw_encode(to_i16(v)))))
            .collect(),
        ArtifactKind::MuLaw => x
            .iter()
            .map(|&v| from_i16(ulaw_decode(ulaw_encode(to_i16(v)))))
            .collect(),
        ArtifactKind::LowPass { cutoff_hz } => lowpass_zero_phase(x, *cutoff_hz, fs),
        ArtifactKind::BitCrush { bits } => bitcrush(x, *bits),
        ArtifactKind::ExternalCodec { command } => return external_codec(w, command),
    };
    Ok(Waveform::from_parts(out, fs))
}

fn to_i16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn from_i16(v: i16) -> f64 {
    v as f64 / 32768.0
}

const ALAW_SEG_END: [i32; 8] = [0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF];
const ULAW_SEG_END: [i32; 8] = [0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF, 0x1FFF];
const ULAW_BIAS: i32 = 0x84;
const ULAW_CLIP: i32 = 8159;

fn segment(value: i32, table: &[i32; 8]) -> usize {
    table.iter().position(|&end| value <= end).unwrap_or(8)
}

/// G.711 A-law encoding of a 16-bit sample (13-bit magnitude resolution).
pub fn alaw_encode(pcm: i16) -> u8 {
    let mut v = pcm as i32 >> 3;
    let mask = if v >= 0 {
        0xD5
    } else {
        v = -v - 1;
        0x55
    };
    let seg = segment(v, &ALAW_SEG_END);
    if seg >= 8 {
        return (0x7F ^ mask) as u8;
    }
    let mantissa = if seg < 2 {
        (v >> 1) & 0xF
    } else {
        (v >> seg) & 0xF
    };
    (((seg as i32) << 4 | mantissa) ^ mask) as u8
}

pub fn alaw_decode(code: u8) -> i16 {
    let a = (code ^ 0x55) as i32;
    let mut t = (a & 0x0F) << 4;
    let seg = (a & 0x70) >> 4;
    match seg {
        0 => t += 8,
        1 => t += 0x108,
        _ => {
            t += 0x108;
            t <<= seg - 1;
        }
    }
    (if a & 0x80 != 0 { t } else { -t }) as i16
}

/// G.711 μ-law encoding of a 16-bit sample (14-bit magnitude resolution).
pub fn ulaw_encode(pcm: i16) -> u8 {
    let mut v = pcm as i32 >> 2;
    let mask = if v < 0 {
        v = -v;
        0x7F
    } else {
        0xFF
    };
    v = v.min(ULAW_CLIP) + (ULAW_BIAS >> 2);
    let seg = segment(v, &ULAW_SEG_END);
    if seg >= 8 {
        return (0x7F ^ mask) as u8;
    }
    let code = (seg as i32) << 4 | ((v >> (seg + 1)) & 0xF);
    (code ^ mask) as u8
}

pub fn ulaw_decode(code: u8) -> i16 {
    let u = !code as i32;
    let mut t = ((u & 0x0F) << 3) + ULAW_BIAS;
    t <<= (u & 0x70) >> 4;
    (if u & 0x80 != 0 {
        ULAW_BIAS - t
    } else {
        t - ULAW_BIAS
    }) as i16
}

fn bitcrush(x: &[f64], bits: u32) -> Vec<f64> {
    let half = (1i64 << (bits - 1)) as f64;
    x.iter()
        .map(|v| (v * half).round().clamp(-half, half - 1.0) / half)
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn run(&self, x: &mut [f64]) {
        // Transposed direct form II.
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Butterworth low-pass as a cascade of bilinear-transformed second-order
/// sections.
fn butterworth_lowpass(cutoff_hz: f64, fs: u32, sections: usize) -> Vec<Biquad> {
    let order = 2 * sections;
    let w0 = 2.0 * PI * cutoff_hz / fs as f64;
    let (sin, cos) = w0.sin_cos();
    (0..sections)
        .map(|k| {
            let q = 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).cos());
            let alpha = sin / (2.0 * q);
            let a0 = 1.0 + alpha;
            let b0 = (1.0 - cos) / 2.0 / a0;
            Biquad {
                b: [b0, 2.0 * b0, b0],
                a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            }
        })
        .collect()
}

fn lowpass_zero_phase(x: &[f64], cutoff_hz: f64, fs: u32) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let filters = butterworth_lowpass(cutoff_hz, fs, LOWPASS_SECTIONS);
    // Odd extension at both ends tames the start-up transients.
    let pad = (3 * (2 * LOWPASS_SECTIONS + 1)).min(x.len() - 1);
    let (first, last) = (x[0], x[x.len() - 1]);
    let mut buf: Vec<f64> = (1..=pad).rev().map(|i| 2.0 * first - x[i]).collect();
    buf.extend_from_slice(x);
    buf.extend((1..=pad).map(|i| 2.0 * last - x[x.len() - 1 - i]));
    for f in &filters {
        f.run(&mut buf);
    }
    buf.reverse();
    for f in &filters {
        f.run(&mut buf);
    }
    buf.reverse();
    buf[pad..pad + x.len()].to_vec()
}

fn external_codec(w: &Waveform, command: &str) -> Result<Waveform> {
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let input = dir.path().join("in.wav");
    let output = dir.path().join("out.wav");
    write_wav(&input, w, WavEncoding::Pcm16)?;
    let cmd = command
        .replace("{in}", &input.to_string_lossy())
        .replace("{out}", &output.to_string_lossy());
    let result = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| Error::ExternalCodec(format!("cannot spawn `{cmd}`: {e}")))?;
    if !result.status.success() {
        return Err(Error::ExternalCodec(format!(
            "`{cmd}` exited with {}: {}",
            result.status,
            String::from_utf8_lossy(&result.stderr).trim()
        )));
    }
    let decoded = read_wav(&output)
        .map_err(|e| Error::ExternalCodec(format!("unreadable output from `{cmd}`: {e}")))?;
    if decoded.sample_rate() != w.sample_rate() {
        return Err(Error::ExternalCodec(format!(
            "`{cmd}` changed the sample rate from {} to {}",
            w.sample_rate(),
            decoded.sample_rate()
        )));
    }
    // Codec padding or priming delay can change the length; keep it aligned.
    Ok(decoded.resized(w.len()))
}

//! Objective scores: mel-cepstral distortion and gross pitch error.

mod mcd;
mod pitch;

pub use mcd::{dct_ii_ortho, mcd, mcd_from_cepstra, mfcc, DURATION_TOLERANCE, N_MFCC};
pub use pitch::{
    gpe, gpe_from_tracks, pitch_track, GpeReport, PitchFrame, F0_MAX_HZ, F0_MIN_HZ, GPE_THRESHOLD,
    PITCH_FRAME_S, PITCH_HOP_S, VOICING_CLARITY,
};

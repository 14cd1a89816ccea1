//! Fixtures shared by the benchmarks.

use reverbkit::model::{ModelConfig, ReverbModel};
use reverbkit::rir::absorption_for_rt60;
use reverbkit::rng::stream_rng;
use reverbkit::signal::log_mel;
use reverbkit::{synth, LogMelConfig, LogMelSpectrogram, Point3, RoomSpec, Waveform};

pub const FS: u32 = 16_000;

/// 5 × 4 × 3 m room tuned for the given RT60.
pub fn room(rt60: f64) -> (RoomSpec, Point3, Point3) {
    let dims = [5.0, 4.0, 3.0];
    let alpha = absorption_for_rt60(dims, rt60)
        .expect("feasible RT60")
        .alpha;
    let room = RoomSpec::new(dims, alpha, FS).expect("valid room");
    (room, Point3::new(1.0, 1.5, 1.2), Point3::new(3.5, 2.5, 1.7))
}

pub fn speech(secs: f64) -> Waveform {
    synth::speech(&mut stream_rng(1, 0), FS, secs).expect("synthetic speech")
}

pub fn mel_config() -> LogMelConfig {
    LogMelConfig {
        n_mels: 40,
        ..LogMelConfig::for_rate(FS)
    }
}

pub fn mel_of(w: &Waveform) -> LogMelSpectrogram {
    log_mel(w, &mel_config()).expect("log-mel")
}

pub fn model() -> ReverbModel {
    ReverbModel::init(ModelConfig::new(mel_config().n_mels), 0).expect("model init")
}

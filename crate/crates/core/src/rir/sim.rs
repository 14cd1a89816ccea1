//! Image-source simulation of shoebox rooms with uniform wall absorption.
//!
//! Every image is indexed per axis by a lattice index `n` and a parity
//! `u ∈ {0, 1}`: its coordinate is `(1 - 2u)·s + 2n·L` and it has undergone
//! `|2n - u|` reflections on that axis. An image of total order `k`
//! contributes `β^k / (4πd)` at delay `d / c`, with `β = sqrt(1 - α)`.
//! Arrivals land on the sample grid through an 81-tap Hann-windowed sinc.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Point3, Rir, RirMeta};
use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const SINC_TAPS: usize = 81;
pub const SINC_HALF_WIDTH: usize = SINC_TAPS / 2;
/// Upper bound on the reflection order, explicit or adaptive.
pub const MAX_ORDER_GUARD: u32 = 60;
/// Minimum source-microphone separation enforced by [`random_placement`].
pub const MIN_SRC_MIC_DISTANCE: f64 = 0.3;
const PLACEMENT_ATTEMPTS: usize = 1000;
const ALPHA_MIN: f64 = 0.01;
const ALPHA_MAX: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    /// Energy absorption coefficient shared by all six walls.
    pub absorption: f64,
    /// `None` selects the order adaptively (see [`RoomSpec::effective_max_order`]).
    pub max_order: Option<u32>,
    pub speed_of_sound: f64,
    pub sample_rate: u32,
}

impl RoomSpec {
    pub fn new(dims: [f64; 3], absorption: f64, sample_rate: u32) -> Result<Self> {
        let room = Self {
            dims,
            absorption,
            max_order: None,
            speed_of_sound: 343.0,
            sample_rate,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn with_max_order(mut self, order: u32) -> Self {
        self.max_order = Some(order);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!(
                "room dimensions must be positive: {:?}",
                self.dims
            )));
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return Err(Error::invalid(format!(
                "absorption {} outside (0, 1]",
                self.absorption
            )));
        }
        if !(self.speed_of_sound > 0.0) || self.sample_rate == 0 {
            return Err(Error::invalid(
                "speed of sound and sample rate must be positive",
            ));
        }
        if let Some(order) = self.max_order {
            if order > MAX_ORDER_GUARD {
                return Err(Error::invalid(format!(
                    "max order {order} exceeds guard {MAX_ORDER_GUARD}"
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + y * z + x * z)
    }

    pub fn reflection_coefficient(&self) -> f64 {
        (1.0 - self.absorption).sqrt()
    }

    /// The explicit order, or the smallest order whose images are at least
    /// 60 dB below the direct path once both wall losses and spherical
    /// spreading are counted (capped at [`MAX_ORDER_GUARD`]).
    pub fn effective_max_order(&self, direct_distance: f64) -> u32 {
        if let Some(order) = self.max_order {
            return order;
        }
        let beta = self.reflection_coefficient();
        let min_dim = self.dims.iter().copied().fold(f64::INFINITY, f64::min);
        for order in 1..=MAX_ORDER_GUARD {
            let spread = direct_distance / ((order - 1) as f64 * min_dim).max(direct_distance);
            if beta.powi(order as i32) * spread <= 1e-3 {
                return order;
            }
        }
        MAX_ORDER_GUARD
    }

    fn contains_strictly(&self, p: &Point3) -> bool {
        let [lx, ly, lz] = self.dims;
        p.x > 0.0 && p.x < lx && p.y > 0.0 && p.y < ly && p.z > 0.0 && p.z < lz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point3,
    pub order: u32,
    pub distance: f64,
    /// Arrival time in (fractional) samples.
    pub delay: f64,
    /// `β^order / (4π distance)`.
    pub amplitude: f64,
}

fn axis_images(src: f64, len: f64, max_order: u32) -> Vec<(f64, u32)> {
    let n_max = max_order as i64 / 2 + 1;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for u in 0..=1i64 {
            let order = (2 * n - u).unsigned_abs() as u32;
            if order <= max_order {
                out.push(((1 - 2 * u) as f64 * src + 2.0 * n as f64 * len, order));
            }
        }
    }
    out
}

fn validate_positions(room: &RoomSpec, src: &Point3, mic: &Point3) -> Result<()> {
    room.validate()?;
    if !room.contains_strictly(src) {
        return Err(Error::OutsideRoom("source"));
    }
    if !room.contains_strictly(mic) {
        return Err(Error::OutsideRoom("microphone"));
    }
    if src.distance(mic) == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    Ok(())
}

/// All image sources up to the room's effective reflection order.
pub fn image_sources(room: &RoomSpec, src: &Point3, mic: &Point3) -> Result<Vec<ImageSource>> {
    validate_positions(room, src, mic)?;
    let max_order = room.effective_max_order(src.distance(mic));
    let beta = room.reflection_coefficient();
    let fs_over_c = room.sample_rate as f64 / room.speed_of_sound;
    let xs = axis_images(src.x, room.dims[0], max_order);
    let ys = axis_images(src.y, room.dims[1], max_order);
    let zs = axis_images(src.z, room.dims[2], max_order);

    let mut images = Vec::new();
    for &(x, ox) in &xs {
        for &(y, oy) in &ys {
            if ox + oy > max_order {
                continue;
            }
            for &(z, oz) in &zs {
                let order = ox + oy + oz;
                if order > max_order {
                    continue;
                }
                let position = Point3::new(x, y, z);
                let distance = position.distance(mic);
                images.push(ImageSource {
                    position,
                    order,
                    distance,
                    delay: distance * fs_over_c,
                    amplitude: beta.powi(order as i32) / (4.0 * PI * distance),
                });
            }
        }
    }
    Ok(images)
}

/// Hann window of [`SINC_TAPS`] points (zero at both ends).
fn hann_table() -> [f64; SINC_TAPS] {
    let mut w = [0.0; SINC_TAPS];
    for (i, v) in w.iter_mut().enumerate() {
        *v = 0.5 - 0.5 * (2.0 * PI * i as f64 / (SINC_TAPS - 1) as f64).cos();
    }
    w
}

/// Adds `amplitude · hann(k) · sinc(k - frac)` around `round(delay)`.
fn add_fractional_impulse(out: &mut [f64], window: &[f64; SINC_TAPS], delay: f64, amplitude: f64) {
    let center = delay.round();
    let mut frac = delay - center;
    if frac.abs() < 1e-9 {
        frac = 0.0;
    }
    let base = center as i64 - SINC_HALF_WIDTH as i64;
    if frac == 0.0 {
        let idx = center as usize;
        if idx < out.len() {
            out[idx] += amplitude;
        }
        return;
    }
    // sin(π(k - f)) = -(-1)^k sin(πf)
    let s = (PI * frac).sin();
    for (i, w) in window.iter().enumerate() {
        let idx = base + i as i64;
        if idx < 0 || idx as usize >= out.len() || *w == 0.0 {
            continue;
        }
        let k = i as i64 - SINC_HALF_WIDTH as i64;
        let x = k as f64 - frac;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        out[idx as usize] += amplitude * w * sign * s / (PI * x);
    }
}

pub fn simulate_rir(room: &RoomSpec, src: &Point3, mic: &Point3) -> Result<Rir> {
    let images = image_sources(room, src, mic)?;
    let max_delay = images.iter().map(|i| i.delay).fold(0.0, f64::max);
    let len = max_delay.ceil() as usize + SINC_HALF_WIDTH + 1;
    let window = hann_table();
    let mut taps = vec![0.0; len];
    for image in &images {
        add_fractional_impulse(&mut taps, &window, image.delay, image.amplitude);
    }
    let meta = RirMeta {
        dims: room.dims,
        src: *src,
        mic: *mic,
        alpha: room.absorption,
        max_order: room.effective_max_order(src.distance(mic)),
        seed: None,
        fs: room.sample_rate,
    };
    Ok(Rir::new(Waveform::new(taps, room.sample_rate)?)?.with_meta(meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabineAbsorption {
    pub alpha: f64,
    /// The unclamped Sabine value fell outside `[0.01, 0.99]`.
    pub clamped: bool,
}

/// Inverts Sabine's formula `RT60 = 0.161 V / (S α)`.
pub fn absorption_for_rt60(dims: [f64; 3], rt60_target: f64) -> Result<SabineAbsorption> {
    if !(rt60_target > 0.0) {
        return Err(Error::invalid(format!(
            "RT60 target must be positive, got {rt60_target}"
        )));
    }
    if dims.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid(format!(
            "room dimensions must be positive: {dims:?}"
        )));
    }
    let [x, y, z] = dims;
    let volume = x * y * z;
    let surface = 2.0 * (x * y + y * z + x * z);
    let raw = 0.161 * volume / (surface * rt60_target);
    let alpha = raw.clamp(ALPHA_MIN, ALPHA_MAX);
    let clamped = alpha != raw;
    if raw > ALPHA_MAX {
        log::warn!("RT60 {rt60_target} s too short for room {dims:?}: absorption {raw:.3} clamped to {ALPHA_MAX}");
    }
    Ok(SabineAbsorption { alpha, clamped })
}

/// Uniform source and microphone positions at least `min_wall_dist` from
/// every wall and [`MIN_SRC_MIC_DISTANCE`] apart.
pub fn random_placement<R: Rng + ?Sized>(
    room: &RoomSpec,
    rng: &mut R,
    min_wall_dist: f64,
) -> Result<(Point3, Point3)> {
    let min_dim = room.dims.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_wall_dist >= 0.0) || min_wall_dist >= min_dim / 2.0 {
        return Err(Error::InfeasiblePlacement(format!(
            "wall distance {min_wall_dist} m leaves no room in {:?}",
            room.dims
        )));
    }
    let draw = |rng: &mut R| {
        let [lx, ly, lz] = room.dims;
        Point3::new(
            rng.random_range(min_wall_dist..lx - min_wall_dist),
            rng.random_range(min_wall_dist..ly - min_wall_dist),
            rng.random_range(min_wall_dist..lz - min_wall_dist),
        )
    };
    for _ in 0..PLACEMENT_ATTEMPTS {
        let src = draw(rng);
        let mic = draw(rng);
        if src.distance(&mic) >= MIN_SRC_MIC_DISTANCE {
            return Ok((src, mic));
        }
    }
    Err(Error::InfeasiblePlacement(format!(
        "no placement {MIN_SRC_MIC_DISTANCE} m apart after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rir::analysis::direct_path_index;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FS: u32 = 16_000;

    fn room(alpha: f64, order: u32) -> RoomSpec {
        RoomSpec::new([5.0, 4.0, 3.0], alpha, FS)
            .unwrap()
            .with_max_order(order)
    }

    #[test]
    fn direct_path_only() {
        // Distance chosen so the arrival lands exactly on a sample.
        let c = 343.0;
        let d = 343.0 * 50.0 / FS as f64;
        let src = Point3::new(1.0, 2.0, 1.5);
        let mic = Point3::new(1.0 + d, 2.0, 1.5);
        let r = simulate_rir(
            &RoomSpec {
                speed_of_sound: c,
                ..room(0.3, 0)
            },
            &src,
            &mic,
        )
        .unwrap();
        assert_eq!(direct_path_index(&r).unwrap(), 50);
        let expected = 1.0 / (4.0 * PI * d);
        assert!((r.samples()[50] - expected).abs() / expected < 1e-12);
        assert_eq!(r.samples().iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn inverse_distance_law() {
        let src = Point3::new(1.0, 2.0, 1.5);
        let d = 343.0 * 40.0 / FS as f64;
        let near = simulate_rir(&room(0.3, 0), &src, &Point3::new(1.0 + d, 2.0, 1.5)).unwrap();
        let far = simulate_rir(&room(0.3, 0), &src, &Point3::new(1.0 + 2.0 * d, 2.0, 1.5)).unwrap();
        assert!((near.taps().peak() / far.taps().peak() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn first_order_images_match_hand_enumeration() {
        let r = room(0.36, 1);
        let s = Point3::new(1.0, 1.5, 1.2);
        let m = Point3::new(3.5, 2.0, 1.0);
        let [lx, ly, lz] = r.dims;
        let beta: f64 = 0.8;
        let mut expected = [
            (s, 0),
            (Point3::new(-s.x, s.y, s.z), 1),
            (Point3::new(2.0 * lx - s.x, s.y, s.z), 1),
            (Point3::new(s.x, -s.y, s.z), 1),
            (Point3::new(s.x, 2.0 * ly - s.y, s.z), 1),
            (Point3::new(s.x, s.y, -s.z), 1),
            (Point3::new(s.x, s.y, 2.0 * lz - s.z), 1),
        ];
        let mut got = image_sources(&r, &s, &m).unwrap();
        assert_eq!(got.len(), 7);
        let key = |p: &Point3| {
            (p.x * 1e6).round() as i64 * 1_000_000_000
                + (p.y * 1e3).round() as i64 * 1000
                + (p.z * 1e3).round() as i64
        };
        expected.sort_by_key(|(p, _)| key(p));
        got.sort_by_key(|i| key(&i.position));
        for ((p, order), img) in expected.iter().zip(&got) {
            assert!(p.distance(&img.position) < 1e-12);
            assert_eq!(*order, img.order);
            let d = p.distance(&m);
            let amp = beta.powi(*order as i32) / (4.0 * PI * d);
            assert!((img.amplitude - amp).abs() < 1e-12);
            assert!((img.delay - d / 343.0 * FS as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn second_order_count() {
        // |a|+|b|+|c| ≤ 2 with two images per nonzero axis order:
        // 1 + 6 + (3 axes × 2 at order 2) + (3 pairs × 4) = 25.
        let r = room(0.2, 2);
        let imgs =
            image_sources(&r, &Point3::new(1.0, 1.0, 1.0), &Point3::new(2.0, 2.0, 2.0)).unwrap();
        assert_eq!(imgs.len(), 25);
    }

    #[test]
    fn time_support_starts_near_direct_path() {
        let r = room(0.2, 6);
        let src = Point3::new(1.3, 1.1, 1.7);
        let mic = Point3::new(3.9, 2.7, 1.2);
        let rir = simulate_rir(&r, &src, &mic).unwrap();
        let delay = src.distance(&mic) / 343.0 * FS as f64;
        let first = rir.samples().iter().position(|x| *x != 0.0).unwrap();
        assert!(first as f64 >= delay - SINC_HALF_WIDTH as f64);
    }

    #[test]
    fn energy_non_increasing_in_absorption() {
        let src = Point3::new(1.3, 1.1, 1.7);
        let mic = Point3::new(3.9, 2.7, 1.2);
        let energies: Vec<f64> = [0.05, 0.1, 0.2, 0.4, 0.8, 1.0]
            .iter()
            .map(|&a| {
                let spec = RoomSpec::new([5.0, 4.0, 3.0], a, FS).unwrap();
                simulate_rir(&spec, &src, &mic).unwrap().taps().energy()
            })
            .collect();
        assert!(energies.windows(2).all(|w| w[1] <= w[0]), "{energies:?}");
    }

    #[test]
    fn deterministic() {
        let r = RoomSpec::new([6.0, 5.0, 3.0], 0.3, FS).unwrap();
        let src = Point3::new(1.3, 1.1, 1.7);
        let mic = Point3::new(3.9, 2.7, 1.2);
        let a = simulate_rir(&r, &src, &mic).unwrap();
        let b = simulate_rir(&r, &src, &mic).unwrap();
        assert!(a
            .samples()
            .iter()
            .zip(b.samples())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_bad_geometry() {
        let r = room(0.3, 2);
        let inside = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(
            simulate_rir(&r, &Point3::new(6.0, 1.0, 1.0), &inside),
            Err(Error::OutsideRoom("source"))
        ));
        assert!(matches!(
            simulate_rir(&r, &inside, &Point3::new(1.0, 1.0, 3.0)),
            Err(Error::OutsideRoom("microphone"))
        ));
        assert!(matches!(
            simulate_rir(&r, &inside, &inside),
            Err(Error::CoincidentPositions)
        ));
        assert!(RoomSpec::new([1.0, 0.0, 1.0], 0.5, FS).is_err());
        assert!(RoomSpec::new([1.0, 1.0, 1.0], 0.0, FS).is_err());
        assert!(RoomSpec::new([1.0, 1.0, 1.0], 0.5, FS)
            .unwrap()
            .with_max_order(61)
            .validate()
            .is_err());
    }

    #[test]
    fn sabine_formula() {
        // 5 × 5 × 4 m: V = 100 m³, S = 130 m².
        let a = absorption_for_rt60([5.0, 5.0, 4.0], 0.5).unwrap();
        assert!((a.alpha - 0.161 * 100.0 / (130.0 * 0.5)).abs() < 1e-12);
        assert!((a.alpha - 0.2477).abs() < 1e-4);
        assert!(!a.clamped);

        let long = absorption_for_rt60([5.0, 5.0, 4.0], 1e9).unwrap();
        assert_eq!(long.alpha, 0.01);
        assert!(long.clamped);
        let short = absorption_for_rt60([5.0, 5.0, 4.0], 0.01).unwrap();
        assert_eq!(short.alpha, 0.99);
        assert!(short.clamped);
        assert!(absorption_for_rt60([5.0, 5.0, 4.0], 0.0).is_err());
    }

    #[test]
    fn placement_is_seeded_and_respects_constraints() {
        let r = RoomSpec::new([4.0, 3.0, 2.5], 0.3, FS).unwrap();
        let a = random_placement(&r, &mut ChaCha8Rng::seed_from_u64(11), 0.5).unwrap();
        let b = random_placement(&r, &mut ChaCha8Rng::seed_from_u64(11), 0.5).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let (s, m) = random_placement(&r, &mut rng, 0.5).unwrap();
            assert!(s.distance(&m) >= MIN_SRC_MIC_DISTANCE);
            for p in [s, m] {
                assert!(
                    p.x >= 0.5
                        && p.x <= 3.5
                        && p.y >= 0.5
                        && p.y <= 2.5
                        && p.z >= 0.5
                        && p.z <= 2.0
                );
            }
        }
    }

    #[test]
    fn placement_marginal_is_uniform() {
        let r = RoomSpec::new([6.0, 5.0, 3.0], 0.3, FS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = 0.4;
        let mut xs: Vec<f64> = (0..10_000)
            .map(|_| random_placement(&r, &mut rng, m).unwrap().0.x)
            .collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let cdf = (x - m) / (6.0 - 2.0 * m);
                ((i + 1) as f64 / n - cdf)
                    .abs()
                    .max((cdf - i as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn infeasible_placement() {
        let r = RoomSpec::new([1.0, 1.0, 1.0], 0.3, FS).unwrap();
        let err = random_placement(&r, &mut ChaCha8Rng::seed_from_u64(1), 0.5).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePlacement(_)));
        // Feasible box but too small for the separation constraint.
        let err = random_placement(&r, &mut ChaCha8Rng::seed_from_u64(1), 0.45).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePlacement(_)));
    }

    #[test]
    fn adaptive_order_is_bounded() {
        let lively = RoomSpec::new([8.0, 7.0, 3.0], 0.01, FS).unwrap();
        assert_eq!(lively.effective_max_order(2.0), MAX_ORDER_GUARD);
        let dead = RoomSpec::new([8.0, 7.0, 3.0], 0.99, FS).unwrap();
        assert!(dead.effective_max_order(2.0) <= 3);
    }
}

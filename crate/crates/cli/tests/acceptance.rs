//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use reverbkit::baseline::{
    rt60_drr_from_reference, select_candidate, simulate_candidates, Candidate, RoomSampler,
    UniformRoomPrior,
};
use reverbkit::corpus::CorpusConfig;
use reverbkit::degrade::draw_reverb_branch;
use reverbkit::eval::{cluster_report, mse, reverberance_proxy, spearman};
use reverbkit::latent::interpolate;
use reverbkit::metrics::{gpe, mcd, mcd_from_cepstra, GPE_THRESHOLD};
use reverbkit::model::{
    train, AdamConfig, ModelConfig, ReverbFeature, ReverbModel, TrainConfig, TrainItem,
};
use reverbkit::rir::{
    absorption_for_rt60, drr, image_sources, random_placement, rt60, simulate_rir,
    DRR_DIRECT_WINDOW_S,
};
use reverbkit::rng::stream_rng;
use reverbkit::synth;
use reverbkit::{LogMelConfig, LogMelSpectrogram, Point3, Rir, RoomSpec, Waveform};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// 1 ---------------------------------------------------------------------------

struct HandImage {
    pos: [f64; 3],
    order: u32,
}

/// Direct path plus one mirror image per wall.
fn hand_first_order(dims: [f64; 3], src: [f64; 3]) -> Vec<HandImage> {
    let mut out = vec![HandImage { pos: src, order: 0 }];
    for axis in 0..3 {
        for wall in [0.0, dims[axis]] {
            let mut p = src;
            p[axis] = 2.0 * wall - src[axis];
            out.push(HandImage { pos: p, order: 1 });
        }
    }
    out
}

fn rir_oracle() -> Outcome {
    let t0 = Instant::now();
    let fs = 16_000;
    let c = 343.0;
    let mut worst_amp: f64 = 0.0;
    let mut worst_delay: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    let mut worst_peak: i64 = 0;
    let cases = [
        ([5.0, 4.0, 3.0], [1.0, 1.5, 1.2], [3.5, 2.5, 1.7], 0.3),
        ([7.3, 3.1, 2.6], [2.2, 0.9, 1.1], [5.0, 2.0, 1.9], 0.6),
        ([4.0, 4.0, 4.0], [0.7, 3.1, 2.0], [3.3, 0.8, 2.5], 0.05),
    ];
    for (dims, s, m, alpha) in cases {
        let room = RoomSpec::new(dims, alpha, fs)
            .map_err(err)?
            .with_max_order(1);
        let (src, mic) = (Point3::new(s[0], s[1], s[2]), Point3::new(m[0], m[1], m[2]));
        let mut got = image_sources(&room, &src, &mic).map_err(err)?;
        let want = hand_first_order(dims, s);
        if got.len() != 7 {
            return Err(format!("{} images for max_order 1, want 7", got.len()));
        }
        let beta = (1.0 - alpha).sqrt();
        for h in &want {
            let d =
                ((h.pos[0] - m[0]).powi(2) + (h.pos[1] - m[1]).powi(2) + (h.pos[2] - m[2]).powi(2))
                    .sqrt();
            let amp = beta.powi(h.order as i32) / (4.0 * PI * d);
            let delay = d / c * fs as f64;
            let k = got
                .iter()
                .position(|g| {
                    (g.position.x - h.pos[0]).abs() < 1e-9
                        && (g.position.y - h.pos[1]).abs() < 1e-9
                        && (g.position.z - h.pos[2]).abs() < 1e-9
                })
                .ok_or_else(|| format!("image at {:?} missing", h.pos))?;
            let g = got.swap_remove(k);
            worst_amp = worst_amp.max((g.amplitude - amp).abs());
            worst_delay = worst_delay.max((g.delay - delay).abs());
        }

        // Rendered RIR: the direct path alone, and peaks of well-separated
        // first-order arrivals.
        let direct_room = RoomSpec::new(dims, alpha, fs)
            .map_err(err)?
            .with_max_order(0);
        let r = simulate_rir(&direct_room, &src, &mic).map_err(err)?;
        let d = src.distance(&mic);
        let area: f64 = r.samples().iter().sum();
        worst_direct = worst_direct.max((area * 4.0 * PI * d - 1.0).abs());

        let r1 = simulate_rir(&room, &src, &mic).map_err(err)?;
        let x = r1.samples();
        let delays: Vec<f64> = hand_first_order(dims, s)
            .iter()
            .map(|h| {
                ((h.pos[0] - m[0]).powi(2) + (h.pos[1] - m[1]).powi(2) + (h.pos[2] - m[2]).powi(2))
                    .sqrt()
                    / c
                    * fs as f64
            })
            .collect();
        for (i, &t) in delays.iter().enumerate() {
            if delays
                .iter()
                .enumerate()
                .any(|(j, &u)| j != i && (u - t).abs() < 6.0)
            {
                continue;
            }
            let lo = (t as usize).saturating_sub(3);
            let hi = (t as usize + 4).min(x.len());
            let peak = (lo..hi)
                .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
                .unwrap();
            worst_peak = worst_peak.max((peak as i64 - t.round() as i64).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        worst_amp < 1e-6 && worst_delay <= 1.0 && worst_direct < 0.01 && worst_peak <= 1 && secs < 1.0,
        format!(
            "max |amp err| {worst_amp:.2e}, max delay err {worst_delay:.2e} samples, direct 1/(4πd) err {:.3}%, rendered peak offset {worst_peak}, {secs:.3} s",
            worst_direct * 100.0
        ),
    )
}

// 2 ---------------------------------------------------------------------------

/// Gaussian noise whose energy falls 60 dB every `t60` seconds.
fn exponential_decay(t60: f64, fs: u32, seed: u64) -> Rir {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (2.0 * t60 * fs as f64) as usize;
    let taps = (0..n)
        .map(|i| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * 10f64.powf(-3.0 * i as f64 / fs as f64 / t60)
        })
        .collect();
    Rir::new(Waveform::new(taps, fs).unwrap()).unwrap()
}

fn rt60_recovery() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, t) in [0.2, 0.5, 1.0, 1.69].into_iter().enumerate() {
        let est = rt60(&exponential_decay(t, 16_000, 100 + i as u64)).map_err(err)?;
        let rel = (est - t).abs() / t;
        worst = worst.max(rel);
        parts.push(format!("{t}->{est:.4}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        worst <= 0.025 && secs < 1.0,
        format!(
            "{}; worst {:.2}%, {secs:.3} s",
            parts.join(" "),
            worst * 100.0
        ),
    )
}

// 3 ---------------------------------------------------------------------------

fn sabine_round_trip() -> Outcome {
    let t0 = Instant::now();
    let prior = UniformRoomPrior::default();
    let mut errs = Vec::new();
    for i in 0..50u64 {
        let mut rng = stream_rng(3, i);
        let dims = prior.sample_dims(&mut rng);
        let target = rng.random_range(0.2..1.0);
        let alpha = absorption_for_rt60(dims, target).map_err(err)?.alpha;
        let room = RoomSpec::new(dims, alpha, 16_000).map_err(err)?;
        let (src, mic) = random_placement(&room, &mut rng, 0.5).map_err(err)?;
        let est = rt60(&simulate_rir(&room, &src, &mic).map_err(err)?).map_err(err)?;
        errs.push((est - target).abs() / target);
    }
    errs.sort_by(f64::total_cmp);
    let median = 0.5 * (errs[24] + errs[25]);
    let secs = t0.elapsed().as_secs_f64();
    check(
        median < 0.25 && secs < 30.0,
        format!(
            "median relative error {:.1}% over 50 rooms (max {:.1}%), {secs:.1} s",
            median * 100.0,
            errs[49] * 100.0
        ),
    )
}

// 4 ---------------------------------------------------------------------------

/// A unit direct spike followed, after the direct window, by a decaying
/// tail scaled to give `drr_db`.
fn constructed_drr(drr_db: f64, fs: u32, seed: u64) -> Rir {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let onset = 200;
    let start = onset + (DRR_DIRECT_WINDOW_S * fs as f64).round() as usize + 1;
    let len = start + fs as usize / 2;
    let mut taps = vec![0.0; len];
    let tail: Vec<f64> = (0..len - start)
        .map(|i| {
            let g: f64 = StandardNormal.sample(&mut rng);
            0.1 * g * (-(i as f64) / (0.05 * fs as f64)).exp()
        })
        .collect();
    let e_tail: f64 = tail.iter().map(|v| v * v).sum();
    let gain = (10f64.powf(-drr_db / 10.0) / e_tail).sqrt();
    taps[onset] = 1.0;
    for (t, v) in taps[start..].iter_mut().zip(&tail) {
        *t = gain * v;
    }
    Rir::new(Waveform::new(taps, fs).unwrap()).unwrap()
}

fn drr_construction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut scale_ok = true;
    let mut parts = Vec::new();
    for (i, target) in [0.0, 10.0, 20.0].into_iter().enumerate() {
        let r = constructed_drr(target, 16_000, 40 + i as u64);
        let d = drr(&r, DRR_DIRECT_WINDOW_S).map_err(err)?;
        worst = worst.max((d - target).abs());
        parts.push(format!("{target}->{d:.4}"));
        for g in [0.5, 4.0, 0.125] {
            let ds = drr(&r.scaled(g).map_err(err)?, DRR_DIRECT_WINDOW_S).map_err(err)?;
            scale_ok &= ds == d;
        }
    }
    check(
        worst <= 0.2 && scale_ok,
        format!(
            "{} dB; worst {worst:.2e} dB; scale invariance exact: {scale_ok}",
            parts.join(" ")
        ),
    )
}

// 5 ---------------------------------------------------------------------------

fn baseline_selection() -> Outcome {
    let t0 = Instant::now();
    let fs = 16_000;
    let prior = UniformRoomPrior::default();
    let trials = 200u64;
    let mut injected_ok = 0;
    let mut err20 = Vec::new();
    let mut err1 = Vec::new();
    for t in 0..trials {
        let mut rng = stream_rng(5, t);
        let dims = prior.sample_dims(&mut rng);
        let t60 = rng.random_range(0.2..0.6);
        let alpha = absorption_for_rt60(dims, t60).map_err(err)?.alpha;
        let room = RoomSpec::new(dims, alpha, fs).map_err(err)?;
        let (src, mic) = random_placement(&room, &mut rng, 0.5).map_err(err)?;
        let reference = simulate_rir(&room, &src, &mic).map_err(err)?;
        let (rt60_gt, drr_gt) = rt60_drr_from_reference(&reference).map_err(err)?;

        let seed = 1000 + t;
        let mut cands = simulate_candidates(rt60_gt, 20, &prior, fs, seed).map_err(err)?;
        let single = simulate_candidates(rt60_gt, 1, &prior, fs, seed).map_err(err)?;
        let pick20 = select_candidate(&cands, drr_gt).unwrap();
        let pick1 = select_candidate(&single, drr_gt).unwrap();
        err20.push((cands[pick20].drr_db - drr_gt).abs());
        err1.push((single[pick1].drr_db - drr_gt).abs());

        let at = (t as usize) % (cands.len() + 1);
        cands.insert(
            at,
            Candidate {
                drr_db: drr(&reference, DRR_DIRECT_WINDOW_S).map_err(err)?,
                rir: reference,
            },
        );
        if select_candidate(&cands, drr_gt) == Some(at) {
            injected_ok += 1;
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    let (m20, m1) = (median(&mut err20), median(&mut err1));
    check(
        injected_ok == trials && m20 < m1,
        format!(
            "injected chosen {injected_ok}/{trials}; median |DRR err| 20 candidates {m20:.3} dB vs 1 candidate {m1:.3} dB, {:.1} s",
            t0.elapsed().as_secs_f64()
        ),
    )
}

// 6 ---------------------------------------------------------------------------

fn switching_statistics() -> Outcome {
    let q = 0.1;
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let clean = (0..n).filter(|_| !draw_reverb_branch(q, &mut rng)).count();
    let frac = clean as f64 / n as f64;
    let sigma = (q * (1.0 - q) / n as f64).sqrt();
    let z = (frac - q) / sigma;
    check(
        z.abs() <= 3.0,
        format!("clean fraction {frac:.5} ({clean}/{n}), {z:+.2} σ"),
    )
}

// 7 ---------------------------------------------------------------------------

fn mel(frames: usize, n_mels: usize, seed: u64) -> LogMelSpectrogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..frames * n_mels)
        .map(|_| rng.random_range(-12.0..-2.0))
        .collect();
    LogMelSpectrogram::from_frames(data, n_mels, 160, 16_000).unwrap()
}

fn autodiff_check() -> Outcome {
    let cfg = ModelConfig {
        hidden: 3,
        feature_dim: 3,
        ..ModelConfig::new(4)
    };
    let model = ReverbModel::init(cfg, 7).map_err(err)?;
    let s = mel(2, 4, 1);
    let reverb = mel(2, 4, 2);
    let x = mel(5, 4, 3);
    let q = 0.1;
    let h = 1e-4;

    // Seeds whose single switching draw lands on each branch.
    let mut seeds = Vec::new();
    for want in [true, false] {
        let seed = (0..1000u64)
            .find(|&sd| draw_reverb_branch(q, &mut ChaCha8Rng::seed_from_u64(sd)) == want)
            .ok_or("no seed for branch")?;
        seeds.push((want, seed));
    }

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for &(branch, seed) in &seeds {
        let (_, got_branch, grads) = model
            .switching_loss_and_grad(&s, &reverb, &x, q, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(err)?;
        if got_branch != branch {
            return Err("branch draw not reproducible".into());
        }
        let loss_at = |m: &ReverbModel| -> Result<f64, String> {
            let (l, b) = m
                .switching_loss(&s, &reverb, &x, q, &mut ChaCha8Rng::seed_from_u64(seed))
                .map_err(err)?;
            assert_eq!(b, branch);
            Ok(l)
        };
        let n_params = grads.len();
        for p in 0..n_params {
            for k in 0..grads[p].data().len() {
                let mut plus = model.clone();
                plus.params_mut()[p].data_mut()[k] += h;
                let mut minus = model.clone();
                minus.params_mut()[p].data_mut()[k] -= h;
                let fd = (loss_at(&plus)? - loss_at(&minus)?) / (2.0 * h);
                let an = grads[p].data()[k];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    check(
        worst < 1e-4,
        format!("{checked} gradient entries over both branches, max relative error {worst:.2e}"),
    )
}

// 8 and 9 ---------------------------------------------------------------------

struct Trained {
    model: ReverbModel,
    items: Vec<TrainItem>,
    utterance: Vec<usize>,
    rir: Vec<usize>,
    rt60: Vec<f64>,
    held_out: Vec<usize>,
    n_rirs: usize,
    secs: f64,
    first_loss: f64,
    last_loss: f64,
}

const TRAIN_UTTERANCES: usize = 40;
const HELD_OUT_UTTERANCES: usize = 8;

fn train_desk_model() -> Result<Trained, String> {
    let t0 = Instant::now();
    let corpus = CorpusConfig {
        n_utterances: TRAIN_UTTERANCES + HELD_OUT_UTTERANCES,
        ..CorpusConfig::train(7)
    };
    let items = corpus.items().map_err(err)?;
    let mel_cfg = LogMelConfig {
        n_mels: 40,
        ..LogMelConfig::for_rate(corpus.sample_rate)
    };
    let tis: Vec<TrainItem> = items
        .iter()
        .map(|i| i.train_item(&mel_cfg))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let train_set: Vec<TrainItem> = tis
        .iter()
        .zip(&items)
        .filter(|(_, it)| it.record.utterance < TRAIN_UTTERANCES)
        .map(|(t, _)| t.clone())
        .collect();
    let model = ReverbModel::init(ModelConfig::new(mel_cfg.n_mels), 1).map_err(err)?;
    let tc = TrainConfig {
        steps: 3000,
        batch: 8,
        seed: 3,
        adam: AdamConfig {
            lr: 1e-3,
            warmup: 200,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let (model, report) = train(&train_set, model, &tc, |_, _, _| Ok(())).map_err(err)?;
    let tail = &report.losses[report.losses.len() - 50..];
    Ok(Trained {
        model,
        utterance: items.iter().map(|i| i.record.utterance).collect(),
        rir: items.iter().map(|i| i.record.rir).collect(),
        rt60: items.iter().map(|i| i.record.rt60_target).collect(),
        held_out: (0..items.len())
            .filter(|&i| items[i].record.utterance >= TRAIN_UTTERANCES)
            .collect(),
        n_rirs: corpus.n_rirs,
        items: tis,
        secs: t0.elapsed().as_secs_f64(),
        first_loss: report.losses[0],
        last_loss: tail.iter().sum::<f64>() / tail.len() as f64,
    })
}

fn disentanglement(t: &Trained) -> Outcome {
    let feats: Vec<ReverbFeature> = t
        .items
        .iter()
        .map(|i| t.model.encode(&i.degraded))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let cl = cluster_report(&feats, &t.utterance, &t.rir).map_err(err)?;
    let zero = ReverbFeature::zeros(t.model.config.feature_dim);
    let (mut z_clean, mut z_rev, mut c_clean, mut c_rev) = (0.0, 0.0, 0.0, 0.0);
    let (mut z_wins, mut c_wins) = (0, 0);
    for &i in &t.held_out {
        let it = &t.items[i];
        let dz = t.model.decode(&it.clean, &zero).map_err(err)?;
        let dc = t.model.decode(&it.clean, &feats[i]).map_err(err)?;
        let (a, b) = (
            mse(&dz, &it.clean).map_err(err)?,
            mse(&dz, &it.reverberant).map_err(err)?,
        );
        let (c, d) = (
            mse(&dc, &it.clean).map_err(err)?,
            mse(&dc, &it.reverberant).map_err(err)?,
        );
        z_clean += a;
        z_rev += b;
        c_clean += c;
        c_rev += d;
        z_wins += usize::from(a < b);
        c_wins += usize::from(d < c);
    }
    let n = t.held_out.len() as f64;
    let (z_clean, z_rev, c_clean, c_rev) = (z_clean / n, z_rev / n, c_clean / n, c_rev / n);
    check(
        cl.same_rir < cl.different_rir && z_clean < z_rev && c_rev < c_clean && t.secs < 1200.0,
        format!(
            "(a) same-RIR {:.3} < different-RIR {:.3}; (b) c=0 MSE clean {z_clean:.3} vs reverb {z_rev:.3} ({z_wins}/{}), \
             c=enc MSE reverb {c_rev:.3} vs clean {c_clean:.3} ({c_wins}/{}); loss {:.0} -> {:.0}; train {:.0} s",
            cl.same_rir, cl.different_rir, t.held_out.len(), t.held_out.len(), t.first_loss, t.last_loss, t.secs
        ),
    )
}

fn interpolation(t: &Trained) -> Outcome {
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut monotone = 0;
    let mut total = 0;
    for u in TRAIN_UTTERANCES..TRAIN_UTTERANCES + HELD_OUT_UTTERANCES {
        let rows: Vec<usize> = (0..t.items.len())
            .filter(|&i| t.utterance[i] == u)
            .collect();
        debug_assert_eq!(rows.len(), t.n_rirs);
        let lo = *rows
            .iter()
            .min_by(|&&a, &&b| t.rt60[a].total_cmp(&t.rt60[b]))
            .unwrap();
        let hi = *rows
            .iter()
            .max_by(|&&a, &&b| t.rt60[a].total_cmp(&t.rt60[b]))
            .unwrap();
        let c1 = t.model.encode(&t.items[lo].degraded).map_err(err)?;
        let c2 = t.model.encode(&t.items[hi].degraded).map_err(err)?;
        let clean = &t.items[lo].clean;
        let proxy: Vec<f64> = alphas
            .iter()
            .map(|&a| {
                let c = interpolate(&c1, &c2, a).map_err(err)?;
                reverberance_proxy(&t.model.decode(clean, &c).map_err(err)?, clean).map_err(err)
            })
            .collect::<Result<_, _>>()?;
        if spearman(&alphas, &proxy).map_err(err)? == 1.0 {
            monotone += 1;
        }
        total += 1;
    }
    check(
        monotone as f64 >= 0.8 * total as f64,
        format!("Spearman ρ = 1 on {monotone}/{total} held-out utterances"),
    )
}

// 10 --------------------------------------------------------------------------

fn tone(f0: f64, fs: u32, secs: f64) -> Waveform {
    let n = (fs as f64 * secs) as usize;
    let v = (0..n)
        .map(|i| 0.5 * (2.0 * PI * f0 * i as f64 / fs as f64).sin())
        .collect();
    Waveform::new(v, fs).unwrap()
}

fn metric_identities() -> Outcome {
    let fs = 16_000;
    let a = synth::speech(&mut ChaCha8Rng::seed_from_u64(10), fs, 1.5).map_err(err)?;
    let cfg = LogMelConfig::for_rate(fs);
    let m_aa = mcd(&a, &a, &cfg).map_err(err)?;
    let g_aa = gpe(&a, &a, GPE_THRESHOLD).map_err(err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let frames = 30;
    let reference: Vec<Vec<f64>> = (0..frames)
        .map(|_| (0..13).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect();
    let offsets: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
    let hyp: Vec<Vec<f64>> = reference
        .iter()
        .map(|r| r.iter().zip(&offsets).map(|(x, d)| x + d).collect())
        .collect();
    let closed = 10.0 / 10f64.ln() * (2.0 * offsets[1..].iter().map(|d| d * d).sum::<f64>()).sqrt();
    let got = mcd_from_cepstra(&reference, &hyp);
    let closed_err = (got - closed).abs();

    let base = tone(200.0, fs, 1.0);
    let g30 = gpe(&base, &tone(260.0, fs, 1.0), GPE_THRESHOLD).map_err(err)?;
    let g10 = gpe(&base, &tone(220.0, fs, 1.0), GPE_THRESHOLD).map_err(err)?;
    check(
        m_aa == 0.0 && g_aa.gpe == 0.0 && closed_err < 1e-9 && g30.gpe == 1.0 && g10.gpe == 0.0 && g30.jointly_voiced > 0,
        format!(
            "mcd(a,a) = {m_aa}, gpe(a,a) = {}, closed-form MCD err {closed_err:.1e}, GPE 30% shift {} / 10% shift {} ({} voiced frames)",
            g_aa.gpe, g30.gpe, g10.gpe, g30.jointly_voiced
        ),
    )
}

// 11 --------------------------------------------------------------------------

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_reverbkit"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

/// Relative path -> bytes of every file under `root`, except run manifests
/// (which name their own output path).
fn tree(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(err)? {
            let p = e.map_err(err)?.path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with("run.json") {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).map_err(err)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn same_file(dir: &Path, a: &str, b: &str) -> Result<bool, String> {
    Ok(fs::read(dir.join(a)).map_err(err)? == fs::read(dir.join(b)).map_err(err)?)
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let d = tmp.path();
    cli(
        d,
        &[
            "synth-corpus",
            "--utterances",
            "4",
            "--rirs",
            "3",
            "--utterance-secs",
            "0.8,1.0",
            "--seed",
            "21",
            "-o",
            "c1",
        ],
    )?;
    cli(d, &["synth-corpus", "--config", "c1/run.json", "-o", "c2"])?;
    let corpus_same = tree(&d.join("c1"))? == tree(&d.join("c2"))?;
    cli(
        d,
        &[
            "synth-corpus",
            "--from-manifest",
            "c1/manifest.jsonl",
            "--item",
            "7",
            "-o",
            "one",
        ],
    )?;
    let mut item_same = true;
    for kind in ["clean", "reverberant", "degraded"] {
        item_same &= same_file(
            d,
            &format!("c1/{kind}/00007.wav"),
            &format!("one/{kind}/00007.wav"),
        )?;
    }

    let train = [
        "train",
        "--corpus",
        "c1",
        "--steps",
        "30",
        "--batch",
        "4",
        "--warmup",
        "10",
        "--n-mels",
        "24",
        "--seed",
        "5",
        "--loss-csv",
        "l1.csv",
        "-o",
        "m1.rvbm",
    ];
    cli(d, &train)?;
    cli(
        d,
        &[
            "--jobs",
            "1",
            "train",
            "--config",
            "m1.rvbm.run.json",
            "--loss-csv",
            "l2.csv",
            "-o",
            "m2.rvbm",
        ],
    )?;
    let model_same = same_file(d, "m1.rvbm", "m2.rvbm")? && same_file(d, "l1.csv", "l2.csv")?;

    cli(
        d,
        &[
            "degrade",
            "--speech-dir",
            "c1/clean",
            "--rir-dir",
            "c1/rirs",
            "--count",
            "5",
            "--seed",
            "2",
            "-o",
            "deg",
        ],
    )?;
    let eval = [
        "evaluate",
        "--ref-manifest",
        "deg/manifest.jsonl",
        "--hyp-manifest",
        "deg/manifest.jsonl",
        "--ref-field",
        "target",
        "--hyp-field",
        "input",
        "-o",
        "e1.csv",
    ];
    cli(d, &eval)?;
    cli(
        d,
        &["evaluate", "--config", "e1.csv.run.json", "-o", "e2.csv"],
    )?;
    let eval_same = same_file(d, "e1.csv", "e2.csv")?;
    check(
        corpus_same && item_same && model_same && eval_same,
        format!("synth-corpus rerun {corpus_same}, item 7 regeneration {item_same}, train rerun {model_same}, evaluate rerun {eval_same}"),
    )
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed.push(n);
                ("FAIL", d)
            }
        };
        println!("{tag} [{n:>2}] {name}: {detail}");
    };
    report(1, "RIR image-source oracle", rir_oracle());
    report(2, "RT60 recovery", rt60_recovery());
    report(3, "Sabine round trip", sabine_round_trip());
    report(4, "DRR construction", drr_construction());
    report(5, "baseline RIR selection", baseline_selection());
    report(6, "switching statistics", switching_statistics());
    report(7, "autodiff vs finite differences", autodiff_check());
    match train_desk_model() {
        Ok(t) => {
            report(8, "disentanglement", disentanglement(&t));
            report(9, "interpolation continuity", interpolation(&t));
        }
        Err(e) => {
            report(8, "disentanglement", Err(format!("training failed: {e}")));
            report(
                9,
                "interpolation continuity",
                Err(format!("training failed: {e}")),
            );
        }
    }
    report(10, "metric identities", metric_identities());
    report(11, "end-to-end reproducibility", reproducibility());
    if !failed.is_empty() {
        println!(
            "acceptance: {} of 11 criteria failed: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
    println!("acceptance: all 11 criteria passed");
}

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use reverbkit::rir::{rt60, simulate_rir};
use reverbkit::signal::{convolve, log_mel};
use reverbkit_bench::{mel_config, mel_of, model, room, speech};

fn rir(c: &mut Criterion) {
    let mut g = c.benchmark_group("rir");
    for t in [0.3, 0.8] {
        let (room, src, mic) = room(t);
        g.bench_function(format!("simulate_rt60_{t}"), |b| {
            b.iter(|| simulate_rir(black_box(&room), &src, &mic).unwrap())
        });
    }
    let (r, s, m) = room(0.5);
    let h = simulate_rir(&r, &s, &m).unwrap();
    g.bench_function("rt60_estimate", |b| b.iter(|| rt60(black_box(&h)).unwrap()));
    g.finish();
}

fn signal(c: &mut Criterion) {
    let w = speech(2.0);
    let (r, s, m) = room(0.5);
    let h = simulate_rir(&r, &s, &m).unwrap();
    let cfg = mel_config();
    c.bench_function("log_mel_2s", |b| {
        b.iter(|| log_mel(black_box(&w), &cfg).unwrap())
    });
    c.bench_function("convolve_2s", |b| {
        b.iter(|| convolve(black_box(&w), &h).unwrap())
    });
}

fn model_step(c: &mut Criterion) {
    let clean = speech(1.5);
    let (r, s, m) = room(0.5);
    let reverb = convolve(&clean, &simulate_rir(&r, &s, &m).unwrap()).unwrap();
    let s_mel = mel_of(&clean.resized(reverb.len()));
    let r_mel = mel_of(&reverb);
    let net = model();
    let c_feat = net.encode(&r_mel).unwrap();
    c.bench_function("encode", |b| {
        b.iter(|| net.encode(black_box(&r_mel)).unwrap())
    });
    c.bench_function("decode", |b| {
        b.iter(|| net.decode(black_box(&s_mel), &c_feat).unwrap())
    });
    c.bench_function("loss_and_grad", |b| {
        b.iter(|| {
            net.branch_loss_and_grad(&s_mel, &r_mel, black_box(&r_mel), true)
                .unwrap()
        })
    });
}

criterion_group!(benches, rir, signal, model_step);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use tmri_core::harp::{extract_harmonic_phase_complex, HarpFilter};
use tmri_core::imgcore::Image2D;
use tmri_core::losses::{LossConfig, LossKind};
use tmri_core::par;
use tmri_core::phantom::{simulate_movie, AnatomyParams, MotionParams, Movie};
use tmri_core::register::{register_pair, RegConfig};
use tmri_core::spamm::{SpammParams, TagDirection};

const SIZE: usize = 48;
const FRAMES: usize = 8;

fn movie(seed: u64) -> Movie {
    let ph = SpammParams::new(900.0, 20.0, 15.0, 8.0, TagDirection::Horizontal).unwrap();
    let pv = ph.with_direction(TagDirection::Vertical);
    let motion = MotionParams { num_frames: FRAMES, ..Default::default() };
    simulate_movie(&AnatomyParams::for_size(SIZE), &motion, &ph, &pv, 0.02, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn bench_registration(c: &mut Criterion) {
    let m = movie(1);
    let pairs: Vec<(Vec<Image2D>, Vec<Image2D>)> = (1..FRAMES)
        .map(|n| {
            (vec![m.frames_h[0].clone(), m.frames_v[0].clone()], vec![m.frames_h[n].clone(), m.frames_v[n].clone()])
        })
        .collect();
    let mut group = c.benchmark_group("register_batch");
    group.sample_size(10);
    for kind in [LossKind::Mse, LossKind::Ncc] {
        let cfg = RegConfig { loss: LossConfig::of(kind), iters_per_level: 30, ..Default::default() };
        let run = |(f, mv): &(Vec<Image2D>, Vec<Image2D>)| register_pair(f, mv, &cfg).unwrap().field;
        group.bench_with_input(BenchmarkId::new("parallel", kind), &pairs, |b, p| b.iter(|| black_box(par::map(p, run))));
        group.bench_with_input(BenchmarkId::new("sequential", kind), &pairs, |b, p| {
            b.iter(|| black_box(par::map_sequential(p, run)))
        });
    }
    group.finish();
}

fn bench_simulation(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..4).collect();
    let mut group = c.benchmark_group("simulate_batch");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| black_box(par::map(&seeds, |&s| movie(s)))));
    group.bench_function("sequential", |b| b.iter(|| black_box(par::map_sequential(&seeds, |&s| movie(s)))));
    group.finish();
}

fn bench_harp(c: &mut Criterion) {
    let m = movie(2);
    let filter = HarpFilter::for_period(8.0);
    let extract = |cx: &tmri_core::imgcore::ComplexImage2D| {
        extract_harmonic_phase_complex(cx, &filter, TagDirection::Vertical).unwrap()
    };
    let mut group = c.benchmark_group("harp_batch");
    group.bench_function("parallel", |b| b.iter(|| black_box(par::map(&m.complex_v, extract))));
    group.bench_function("sequential", |b| b.iter(|| black_box(par::map_sequential(&m.complex_v, extract))));
    group.finish();
}

criterion_group!(benches, bench_registration, bench_simulation, bench_harp);
criterion_main!(benches);

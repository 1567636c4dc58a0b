use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use listfb_cli::{presets, runner};
use listfb_core::channel::AdversarySpec;
use listfb_core::gf::{Field, RsCode};
use listfb_core::planner::GridPoint;
use listfb_core::rng;
use listfb_core::sw::{ChunkCodec, ChunkCodecParams, Route, Typicality};
use listfb_core::weldon::{index, Scheme, SchemeContext, SchemeParams};
use rand::Rng;
use std::hint::black_box;
use std::sync::Arc;

fn rs_decode(c: &mut Criterion) {
    let field = Arc::new(Field::new(2, 8).unwrap());
    let code = RsCode::new(field.clone(), 191, 255).unwrap();
    let mut r = rng::stream(1, 0, "bench-rs");
    let data: Vec<u32> = (0..191).map(|_| r.gen_range(0..256)).collect();
    let cw = code.encode(&data).unwrap();
    let mut rx: Vec<Option<u32>> = cw.iter().map(|&s| Some(s)).collect();
    for i in (0..255).step_by(17) {
        rx[i] = Some(field.add(cw[i], 1 + (i as u32 % 255)));
    }
    for e in rx.iter_mut().skip(3).step_by(29) {
        *e = None;
    }
    c.bench_function("rs_255_191_decode", |b| b.iter(|| code.decode(black_box(&rx)).unwrap()));
}

fn chunk_decode(c: &mut Criterion) {
    let prm = ChunkCodecParams {
        q: 2,
        chunk_len: 16,
        seed_len: ChunkCodecParams::default_seed_len(16),
        eps_h: 0.3,
        eps_d: 0.15,
        eps_e: 0.0,
        eps_t: 0.0,
        eps_n: 0.0,
        phi: 0.2,
        typicality: Typicality::Window,
    };
    let codec = ChunkCodec::new(prm.clone(), 7).unwrap();
    let mut r = rng::stream(1, 1, "bench-chunk");
    let p = 0.1;
    let x: Vec<u8> = (0..16).map(|_| r.gen_range(0..2u8)).collect();
    let y: Vec<u8> = x.iter().map(|&b| if r.gen_bool(p) { 1 - b } else { b }).collect();
    let seeds: Vec<u8> = (0..prm.seed_len).map(|_| r.gen_range(0..2u8)).collect();
    let route = Route { perm: None, seeds: &seeds, salt: 0 };
    let payload = codec.encode_at(&x, p, GridPoint::ceil_of(p, 10), &route).unwrap();
    c.bench_function("chunk16_decode", |b| {
        b.iter(|| codec.decode_chunk(black_box(&y), payload.digests(), p, 0, &route).unwrap())
    });
}

fn error_index(c: &mut Criterion) {
    let mut r = rng::stream(1, 2, "bench-index");
    let len = 1024;
    let p_hat = GridPoint::new(1, 16);
    let s: Vec<u8> = (0..len).map(|_| if r.gen_bool(0.05) { 1 } else { 0 }).collect();
    c.bench_function("error_index_encode_1024", |b| b.iter(|| index::error_index_encode(black_box(&s), p_hat, 2).unwrap()));
    let idx = index::error_index_encode(&s, p_hat, 2).unwrap();
    c.bench_function("error_index_decode_1024", |b| b.iter(|| index::error_index_decode(black_box(&idx), len, p_hat, 2).unwrap()));
}

fn full_trial(c: &mut Criterion) {
    let ctx = SchemeContext::new(SchemeParams { n: 1024, ..presets::full_params() }, Scheme::Full, 3).unwrap();
    let adv = AdversarySpec::StageGreedy { share: 0.5 };
    let mut trial = 0u64;
    c.bench_function("full_feedback_trial_n1024", |b| {
        b.iter_batched(
            || {
                trial += 1;
                trial
            },
            |t| runner::run_trial(&ctx, &adv, t).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, rs_decode, chunk_decode, error_index, full_trial);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use masgram_core::grammar::{default_grammar, enumerate, recognize, sample, SampleConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sampling(c: &mut Criterion) {
    let g = default_grammar();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("sample", |b| {
        b.iter(|| sample(&g, &mut rng, SampleConfig::default()).unwrap())
    });
}

fn recognition(c: &mut Criterion) {
    let g = default_grammar();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seqs: Vec<_> = (0..256)
        .map(|_| sample(&g, &mut rng, SampleConfig::default()).unwrap())
        .collect();
    c.bench_function("recognize/256", |b| {
        b.iter(|| seqs.iter().filter(|s| recognize(&g, s).is_accept()).count())
    });
}

fn enumeration(c: &mut Criterion) {
    let g = default_grammar();
    let mut group = c.benchmark_group("enumerate");
    for len in [2, 3, 4] {
        group.bench_function(format!("max_len={len}"), |b| b.iter(|| enumerate(&g, black_box(len)).len()));
    }
    group.finish();
}

criterion_group!(benches, sampling, recognition, enumeration);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wegnerflow::flow::{integrate_flow, wegner_generator};
use wegnerflow::geometry::fs_metric;
use wegnerflow::models::{build_gho, spin_family, squeeze_family, GhoSpec};
use wegnerflow::random::random_banded_hermitian;
use wegnerflow::{FlowConfig, GeneratorChoice, Sampling, C64};

fn generator(c: &mut Criterion) {
    let mut g = c.benchmark_group("wegner_generator");
    for d in [8usize, 32, 64] {
        let h = random_banded_hermitian(&mut ChaCha8Rng::seed_from_u64(1), d, 0.4, None);
        g.bench_with_input(BenchmarkId::from_parameter(d), &h, |b, h| {
            b.iter(|| wegner_generator(black_box(h)))
        });
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow");
    g.sample_size(10);
    let cfg = FlowConfig {
        l_max: 10.0,
        sampling: Sampling::Uniform { dl: 0.1 },
        ..Default::default()
    };
    for d in [8usize, 16] {
        let h = random_banded_hermitian(&mut ChaCha8Rng::seed_from_u64(2), d, 0.4, None);
        g.bench_with_input(BenchmarkId::new("random", d), &h, |b, h| {
            b.iter(|| integrate_flow(h, GeneratorChoice::Wegner, &cfg).unwrap())
        });
    }
    let squeeze = build_gho(&GhoSpec {
        omega: 1.0,
        lambda: C64::from_polar(0.1, 0.3),
        mu: C64::new(0.0, 0.0),
        nu: 0.0,
        n_max: 30,
    })
    .unwrap();
    let short = FlowConfig { l_max: 1.0, ..cfg };
    g.bench_function("squeeze_n30", |b| {
        b.iter(|| integrate_flow(&squeeze, GeneratorChoice::Wegner, &short).unwrap())
    });
    g.finish();
}

fn metric(c: &mut Criterion) {
    let mut g = c.benchmark_group("metric");
    let spin = spin_family(1.5, 0.5).unwrap();
    g.bench_function("spin_3_2", |b| {
        b.iter(|| fs_metric(&spin.family, black_box(&[0.7, 0.4])).unwrap())
    });
    let sq = squeeze_family(0, 40).unwrap();
    g.bench_function("squeeze_n40", |b| {
        b.iter(|| fs_metric(&sq.family, black_box(&[0.3, 0.2])).unwrap())
    });
    g.finish();
}

criterion_group!(benches, generator, flow, metric);
criterion_main!(benches);

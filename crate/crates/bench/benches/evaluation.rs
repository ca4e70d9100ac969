use criterion::{criterion_group, criterion_main, Criterion};
use horserace_core::eval::synthetic::{planted_r2_panel, PlantedDesign};
use horserace_core::eval::{dm_test, heterogeneity_regression, model_confidence_set, Bandwidth, McsOptions};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn losses(t: usize, m: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    DMatrix::from_fn(t, m, |_, _| {
        let e: f64 = StandardNormal.sample(&mut rng);
        e * e
    })
}

fn evaluation(c: &mut Criterion) {
    let l = losses(456, 8);
    let names: Vec<String> = (0..8).map(|i| format!("M{i}")).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = (l.column(0).iter().copied().collect(), l.column(1).iter().copied().collect());
    c.bench_function("dm_456", |bch| bch.iter(|| dm_test(&a, &b, 12).unwrap()));

    let mut g = c.benchmark_group("heavy");
    g.sample_size(10);
    g.bench_function("mcs_456x8_999", |bch| {
        bch.iter(|| model_confidence_set(&names, &l, &McsOptions::default()).unwrap())
    });
    let pp = planted_r2_panel(&PlantedDesign::default(), 3);
    g.bench_function("heterogeneity_planted", |bch| {
        bch.iter(|| heterogeneity_regression(&pp.panel, &pp.models, &pp.xi, Bandwidth::NeweyWest).unwrap())
    });
    g.finish();
}

criterion_group!(benches, evaluation);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use nullbench_bench::{features, synthetic};
use nullbench_core::injector::{inject, InjectionRule, MissingnessSpec};
use nullbench_core::metrics::kl_numerical;
use nullbench_core::models::{Criterion as Split, Forest, ForestParams, MaxFeatures, Target, Tree, TreeParams};
use nullbench_core::rng::seeded;
use nullbench_core::Predicate;

fn injection(c: &mut Criterion) {
    let mut group = c.benchmark_group("inject");
    for n in [10_000, 100_000] {
        let d = synthetic(n, 1);
        let mcar = MissingnessSpec::new(vec![InjectionRule::mcar(["a", "b", "k"], 0.3)], 0.3).unwrap();
        let mnar = MissingnessSpec::new(vec![InjectionRule::mnar("c", Predicate::Gt(50.0), 0.4, 0.2)], 0.3).unwrap();
        group.bench_with_input(BenchmarkId::new("mcar", n), &d, |b, d| b.iter(|| inject(black_box(d), &mcar, 7).unwrap()));
        group.bench_with_input(BenchmarkId::new("mnar", n), &d, |b, d| b.iter(|| inject(black_box(d), &mnar, 7).unwrap()));
    }
    group.finish();
}

fn trees(c: &mut Criterion) {
    let (x, y) = features(1000, 10, 2);
    let labels: Vec<u32> = y.iter().map(|&v| v as u32).collect();
    let target = Target::Classes { y: &labels, n_classes: 2 };
    let params = TreeParams {
        max_depth: Some(10),
        min_samples_split: 2,
        min_samples_leaf: 1,
        criterion: Split::Gini,
        max_features: MaxFeatures::All,
    };
    c.bench_function("tree/fit 1000x10", |b| {
        b.iter(|| Tree::fit(black_box(&x), target, None, &params, &mut seeded(3)).unwrap())
    });
    let forest = ForestParams::classifier(50);
    c.bench_function("forest/fit 50 trees 1000x10", |b| b.iter(|| Forest::fit(black_box(&x), target, &forest, 4).unwrap()));
}

fn kde(c: &mut Criterion) {
    let mut rng = seeded(5);
    let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 1.2).collect();
    c.bench_function("kde/kl 2000 samples", |bch| bch.iter(|| kl_numerical(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, injection, trees, kde);
criterion_main!(benches);

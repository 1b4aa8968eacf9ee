use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deotsu_bench::{bands, sparse_dist};
use deotsu_core::de::{segment_de_otsu, DeConfig};
use deotsu_core::meta::{Optimizer, OptimizerConfig};
use deotsu_core::metrics::{psnr, ssim};
use deotsu_core::objectives::ObjectiveKind;
use deotsu_core::rng::stream;
use std::hint::black_box;

fn segmentation(c: &mut Criterion) {
    let mut group = c.benchmark_group("de_otsu");
    group.sample_size(10);
    for side in [64usize, 128, 250] {
        let img = bands(side);
        group.bench_with_input(BenchmarkId::from_parameter(side), &img, |b, img| {
            b.iter(|| segment_de_otsu(black_box(img), 2, &DeConfig::default()).unwrap())
        });
    }
    group.finish();

    let p = sparse_dist(128, 2);
    let mut group = c.benchmark_group("baselines_k3");
    for opt in Optimizer::ALL {
        let cfg = OptimizerConfig::default_for(opt);
        group.bench_function(opt.name(), |b| {
            b.iter(|| cfg.run(black_box(&p), 3, ObjectiveKind::BetweenClassVariance, &mut stream(1, 0, 0)).unwrap())
        });
    }
    group.finish();

    let a = bands(250);
    let b2 = bands(250).pixels().iter().map(|v| v / 2).collect::<Vec<_>>();
    let b2 = deotsu_core::imaging::GrayImage::new(250, 250, b2).unwrap();
    c.bench_function("psnr_250", |b| b.iter(|| psnr(black_box(&a), black_box(&b2)).unwrap()));
    c.bench_function("ssim_250", |b| b.iter(|| ssim(black_box(&a), black_box(&b2)).unwrap()));
}

criterion_group!(benches, segmentation);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spingate_bench::{sample_counts, sample_saturation};
use spingate_core::calibration::{fit_saturation, SaturationGauge};
use spingate_core::metrics::{bootstrap_concurrence, concurrence, density_from_counts};

fn analysis(c: &mut Criterion) {
    let counts = sample_counts();
    let rho = density_from_counts(&counts, -0.52, 0.48).unwrap();
    c.bench_function("concurrence", |b| b.iter(|| concurrence(black_box(&rho)).unwrap()));
    c.bench_function("bootstrap_concurrence/1000", |b| {
        b.iter(|| bootstrap_concurrence(black_box(&counts), None, 1000, 7).unwrap())
    });
    let data = sample_saturation();
    c.bench_function("fit_saturation", |b| {
        b.iter(|| fit_saturation(black_box(&data), SaturationGauge::FromInitialGuess).unwrap())
    });
}

criterion_group!(benches, analysis);
criterion_main!(benches);

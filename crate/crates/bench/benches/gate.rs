use criterion::{black_box, criterion_group, criterion_main, Criterion};
use spingate_core::protocol::{AmplitudeSource, ChannelConfig};
use spingate_core::scattering::{overlap_integrals, OverlapMethod};
use spingate_core::{fidelity_budget, run_gate, EmitterParams, PulseParams};

fn gate(c: &mut Criterion) {
    let e = EmitterParams::reference();
    let pulse = PulseParams::reference();
    let spectral = ChannelConfig::reference();
    let mut fixed = spectral;
    fixed.amplitudes = AmplitudeSource::ideal();

    c.bench_function("overlap_integrals/quadrature", |b| {
        b.iter(|| overlap_integrals(black_box(&e), &pulse, OverlapMethod::Quadrature).unwrap())
    });
    c.bench_function("run_gate/spectral", |b| {
        b.iter(|| run_gate(black_box(&e), &pulse, &spectral, 0.0).unwrap())
    });
    c.bench_function("run_gate/fixed_amplitudes", |b| {
        b.iter(|| run_gate(black_box(&e), &pulse, &fixed, 0.0).unwrap())
    });
    c.bench_function("fidelity_budget/reference", |b| {
        b.iter(|| fidelity_budget(black_box(&e), &pulse, &spectral, 0.0).unwrap())
    });
}

criterion_group!(benches, gate);
criterion_main!(benches);

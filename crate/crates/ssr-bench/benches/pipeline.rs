use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use ssr_bench::{square_attack, two_area, two_area_system};
use ssr_core::freq::{transfer_magnitudes, FrequencyGrid};
use ssr_core::network::{build_susceptance, kron_reduce};
use ssr_core::sim::integrate;
use ssr_core::statespace::assemble;

fn bench_assemble(c: &mut Criterion) {
    let model = two_area();
    c.bench_function("kron_reduce_and_assemble", |b| {
        b.iter(|| {
            let bm = build_susceptance(&model.network);
            let rc = kron_reduce(&bm, &model).unwrap();
            black_box(assemble(&model, &rc).unwrap())
        })
    });
}

fn bench_scan(c: &mut Criterion) {
    let sys = two_area_system();
    let input = sys.input_index("3").unwrap();
    let grid = FrequencyGrid::new(0.0, 60.0, 0.1).unwrap();
    c.bench_function("transfer_magnitudes_601_points", |b| {
        b.iter(|| black_box(transfer_magnitudes(&sys, input, &grid).unwrap()))
    });
}

fn bench_eig(c: &mut Criterion) {
    let sys = two_area_system();
    c.bench_function("eig_modes_40_states", |b| {
        b.iter(|| black_box(sys.eig_modes().unwrap()))
    });
}

fn bench_integrate(c: &mut Criterion) {
    let sys = two_area_system();
    let spec = square_attack(28.91);
    c.bench_function("integrate_1s_at_1khz", |b| {
        b.iter(|| black_box(integrate(&sys, &spec, 1.0, 1e-3).unwrap()))
    });
}

criterion_group!(benches, bench_assemble, bench_scan, bench_eig, bench_integrate);
criterion_main!(benches);

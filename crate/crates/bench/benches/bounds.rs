use causal_transfer::causal::bound_all;
use causal_transfer::value_bounds::{q_bounds, robust_value_bounds, Direction};
use causal_transfer::VBoundTable;
use causal_transfer_bench::{reward_grid, VI_TOL};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bounds(c: &mut Criterion) {
    let f = reward_grid();
    c.bench_function("causal bounds, all pairs", |b| b.iter(|| bound_all(black_box(&f.obs), &f.config).unwrap()));
    c.bench_function("robust value iteration", |b| {
        b.iter(|| robust_value_bounds(black_box(&f.model), Direction::Optimistic, VI_TOL).unwrap())
    });
    let v = VBoundTable::robust(&f.model, VI_TOL).unwrap();
    c.bench_function("q bounds", |b| b.iter(|| q_bounds(black_box(&f.model), &v).unwrap()));
}

criterion_group!(benches, bounds);
criterion_main!(benches);

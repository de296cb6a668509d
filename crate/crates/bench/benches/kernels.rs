use std::hint::black_box;

use causality_lab_bench::{cylinder, event, flat, punctured};
use causality_lab_core::{
    connect_null, counterexample_run, integrate_null, null_directions_at, relation, ChronoGraph, GraphBox, Settings,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn integration(c: &mut Criterion) {
    let s = Settings::default();
    let m = flat(2);
    let o = event(&[0.0, 0.0, 0.0]);
    let v = null_directions_at(&m, &o, 8).unwrap().swap_remove(3);
    c.bench_function("integrate_null flat 2+1 span 5", |b| {
        b.iter(|| integrate_null(&m, &o, black_box(&v), 5.0, s.step).unwrap())
    });
    let cyl = cylinder(2);
    let x = event(&[1.0, 0.5, 0.0]);
    let v = null_directions_at(&cyl, &x, 8).unwrap().swap_remove(1);
    c.bench_function("integrate_null cylinder(2) span 2", |b| {
        b.iter(|| integrate_null(&cyl, &x, black_box(&v), 2.0, s.step).unwrap())
    });
}

fn shooting(c: &mut Criterion) {
    let s = Settings::default();
    let m = flat(2);
    let (p, q) = (event(&[0.0, 0.0, 0.0]), event(&[1.0, 1.0, 2f64.sqrt()]));
    c.bench_function("connect_null flat 2+1", |b| {
        b.iter(|| connect_null(&m, &p, black_box(&q), 64, s.tol_hit, &s).unwrap())
    });
    let pm = punctured();
    let (p, q) = (event(&[0.0, 0.0]), event(&[2.0, 2.0]));
    c.bench_function("relation punctured blocked", |b| b.iter(|| relation(&pm, &p, black_box(&q), &s).unwrap()));
}

fn graph(c: &mut Criterion) {
    let m = flat(1);
    let bbox = GraphBox::unit(2);
    c.bench_function("chrono graph 2d 20k nodes", |b| {
        b.iter(|| {
            let g = ChronoGraph::grid(&m, &bbox, 20_000, 0.5).unwrap();
            g.longest_path(&event(&[0.5, 0.0]), &event(&[0.5, 1.0]))
        })
    });
}

fn scans(c: &mut Criterion) {
    let s = Settings::default();
    let mut group = c.benchmark_group("scan");
    group.sample_size(10);
    group.bench_function("counterexample", |b| b.iter(|| counterexample_run(black_box(&s)).unwrap()));
    group.finish();
}

criterion_group!(benches, integration, shooting, graph, scans);
criterion_main!(benches);

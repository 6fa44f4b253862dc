use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use roughbill::billiard::{collide, simulate, step, stream_rng};
use roughbill::contact::random_body;
use roughbill::{AlgebraVector, Ball, BilliardState, BoundaryCondition, ContactConfiguration, ContactGeometry, SkewMatrix, Table};

fn bench_collide(c: &mut Criterion) {
    let mut group = c.benchmark_group("collide");
    for n in 2..=4 {
        let ball = Ball::uniform(0.5, n);
        let xi = AlgebraVector::new(SkewMatrix::generator(n, 0, 1).scale(0.7), DVector::from_element(n, 0.3)).unwrap();
        let mut b = DVector::zeros(n);
        b[n - 1] = -0.5;
        let t = -DMatrix::identity(n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| collide(black_box(&xi), black_box(&b), &t, &ball).unwrap())
        });
    }
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let table = Table::Circle { radius: 2.0 };
    let ball = Ball::uniform(0.5, 2);
    let bc = BoundaryCondition::rough();
    let s = BilliardState::from_center(
        DVector::from_vec(vec![0.3, 0.1]),
        DVector::from_vec(vec![0.6, 0.8]),
        SkewMatrix::generator(2, 0, 1).scale(0.5),
    )
    .unwrap();
    let mut rng = stream_rng(0, 0);
    c.bench_function("step/circle", |bench| bench.iter(|| step(black_box(&s), &table, &ball, &bc, &mut rng).unwrap()));
    c.bench_function("simulate/circle_1000", |bench| {
        bench.iter(|| simulate(black_box(&s), &table, &ball, &bc, 1000, &mut rng).unwrap())
    });
}

fn bench_build_collision_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_collision_map");
    for n in 2..=4 {
        let mut rng = stream_rng(1, n as u64);
        let b1 = random_body(n, &mut rng);
        let b2 = random_body(n, &mut rng);
        let q = ContactConfiguration::random(n, &mut rng).unwrap();
        let geom = ContactGeometry::new(q.clone(), [&b1, &b2]).unwrap();
        let rough = geom.completely_rough_map().roughness_basis();
        group.bench_with_input(BenchmarkId::new("geometry", n), &n, |bench, _| {
            bench.iter(|| ContactGeometry::new(black_box(q.clone()), [&b1, &b2]).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("map", n), &n, |bench, _| {
            bench.iter(|| geom.build_collision_map(black_box(&rough)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_collide, bench_step, bench_build_collision_map);
criterion_main!(benches);

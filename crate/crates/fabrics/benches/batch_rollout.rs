//! Compares parallel and sequential execution of a batch of independent
//! particle rollouts, the harness's fan-out workload.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

use fabrics::geometry::{
    attractor_term, obstacle_term, AttractorMetric, AttractorParams, FabricStyle, ObstacleMetric,
    TaskMap,
};
use fabrics::runtime::{
    rollout, run_batch, run_batch_sequential, FabricSystem, IntegratorConfig, Method,
    SpeedController,
};
use fabrics::speed_control::SpeedControlParams;
use fabrics::tree::TransformTree;

fn particle_system() -> FabricSystem {
    let target = DVector::from_row_slice(&[-2.5, 0.0]);
    let mut tree = TransformTree::new(2);
    tree.attach_term(
        TransformTree::ROOT,
        attractor_term(
            target.clone(),
            &AttractorParams {
                k: 10.0,
                alpha_psi: 10.0,
                m_upper: 2.0,
                m_lower: 0.2,
                alpha_m: 0.75,
                metric: AttractorMetric::Rbf,
            },
            FabricStyle::Lagrangian,
        )
        .unwrap(),
    )
    .unwrap();
    tree.attach_term(
        TransformTree::ROOT,
        obstacle_term(
            DVector::zeros(2),
            1.0,
            20.0,
            1.0,
            ObstacleMetric::VelocityGated,
            FabricStyle::Geometric,
        )
        .unwrap(),
    )
    .unwrap();
    tree.attach_term(
        TransformTree::ROOT,
        fabrics::geometry::FabricTerm::execution_energy(
            "exec",
            TaskMap::Identity { dim: 2 },
            fabrics::finsler::FinslerEnergy::Euclidean { dim: 2 },
        )
        .unwrap(),
    )
    .unwrap();
    FabricSystem::new(
        tree,
        SpeedController::Regulated(SpeedControlParams {
            exec_energy_target: 2.0,
            ..Default::default()
        }),
    )
    .with_goal(TaskMap::Offset { target })
}

fn initial_states(count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|i| DVector::from_row_slice(&[2.5, -1.3 + 0.2 * i as f64]))
        .collect()
}

fn bench_batches(c: &mut Criterion) {
    let system = particle_system();
    let cfg = IntegratorConfig::new(Method::Rk4, 0.01, 5.0).unwrap();
    let mut group = c.benchmark_group("particle_batch");
    group.sample_size(10);

    for count in [14usize, 56] {
        let states = initial_states(count);
        group.bench_with_input(BenchmarkId::new("sequential", count), &states, |b, s| {
            b.iter(|| {
                run_batch_sequential(black_box(s), |q0| {
                    rollout(&system, q0, &DVector::zeros(2), &cfg).len()
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("parallel", count), &states, |b, s| {
            b.iter(|| {
                run_batch(black_box(s), |q0| {
                    rollout(&system, q0, &DVector::zeros(2), &cfg).len()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batches);
criterion_main!(benches);

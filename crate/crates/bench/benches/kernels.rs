use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use codesign_core::optimizer::{rollout_batch, RolloutOptions};
use codesign_core::{ExperimentConfig, ModelKind, PolicyParams, Scale, Session};

fn desk(kind: ModelKind) -> ExperimentConfig {
    ExperimentConfig::preset(kind, Scale::Desk)
}

fn steppers(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    for kind in ModelKind::ALL {
        let cfg = desk(kind);
        let grid = cfg.grid().unwrap();
        let model = cfg.build_model().unwrap();
        let solver = model.build_solver(&grid, cfg.dt, cfg.time_scheme()).unwrap();
        let state = model.initial_state(&grid);
        let phi = vec![0.1; grid.len()];
        let dw = vec![0.01; grid.len()];
        g.bench_function(kind.name(), |b| {
            b.iter(|| model.step(&grid, &solver, &state, &phi, &dw).unwrap())
        });
    }
    g.finish();
}

fn policy(c: &mut Criterion) {
    let dims = desk(ModelKind::Heat).policy_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = PolicyParams::xavier_init(dims, &mut rng).unwrap();
    let x: Vec<f64> = (0..dims[0]).map(|i| (i as f64 * 0.3).sin()).collect();
    let upstream = vec![1.0; dims[3]];
    c.bench_function("policy/forward", |b| b.iter(|| params.evaluate(&x).unwrap()));
    c.bench_function("policy/forward_backward", |b| {
        b.iter(|| {
            let (_, tape) = params.forward(&x).unwrap();
            tape.backward(&upstream).unwrap()
        })
    });
}

fn training(c: &mut Criterion) {
    let cfg = desk(ModelKind::Heat);
    let session = Session::new(&cfg).unwrap();
    let p = &session.problem;
    let m = session.actuators.influence(&p.grid);
    let steps = p.cost.steps().unwrap();
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("rollout_batch/heat_desk", |b| {
        b.iter(|| {
            rollout_batch(
                &p.model,
                &p.grid,
                &p.solver,
                &session.params,
                &m,
                steps,
                p.rollouts,
                RolloutOptions::training(0, 0),
            )
            .unwrap()
        })
    });
    g.bench_function("iteration/heat_desk", |b| {
        b.iter_batched(
            || Session::new(&cfg).unwrap(),
            |mut s| s.step().unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, steppers, policy, training);
criterion_main!(benches);

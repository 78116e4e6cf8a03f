use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rbc_core::economy::{ConsumerAction, FirmAction, GovernmentAction};
use rbc_core::trainer::{net_spec, stream_rng, Stream};
use rbc_core::{AgentType, Economy, EconomyConfig, GovernmentControl, PolicyNet, RunConfig, Trainer};

fn economy_step(c: &mut Criterion) {
    let cfg = EconomyConfig::default();
    let econ = Economy::new(cfg.clone()).unwrap();
    let state = econ.reset();
    let consumers: Vec<ConsumerAction> = (0..cfg.num_consumers)
        .map(|j| ConsumerAction {
            consumption: vec![2.0; cfg.num_firms],
            work_firm: Some(j % cfg.num_firms),
            hours: 520.0,
        })
        .collect();
    let firms = vec![FirmAction { price: 1000.0, wage: 22.0 }; cfg.num_firms];
    let gov = GovernmentAction {
        tax_income: 0.2,
        tax_corporate: 0.2,
    };
    c.bench_function("step 100x10", |b| {
        b.iter(|| econ.step(black_box(&state), &consumers, &firms, &gov, 0.01).unwrap())
    });
}

fn forward_backward(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let spec = net_spec(&cfg, AgentType::Consumer);
    let net = PolicyNet::<f32>::new(spec.clone(), &mut stream_rng(0, Stream::Init, 0, 0));
    let rows = 256;
    let obs: Vec<f32> = (0..rows * spec.input_dim).map(|k| (k % 7) as f32 * 0.1).collect();
    let total = spec.total_logits();
    let d_logits = vec![1e-3f32; rows * total];
    let d_value = vec![1e-3f32; rows];
    let mut group = c.benchmark_group("consumer net, 256 rows");
    group.bench_function("forward", |b| b.iter(|| net.forward_batch(black_box(&obs), rows).unwrap()));
    group.bench_function("forward+backward", |b| {
        let mut grads = net.zeros_like();
        b.iter(|| {
            let fwd = net.forward_batch(black_box(&obs), rows).unwrap();
            net.backward(&obs, &fwd, &d_logits, &d_value, &mut grads);
        })
    });
    group.finish();
}

fn rollout(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let cfg = RunConfig::load(&path).unwrap();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut group = c.benchmark_group("smoke rollout, 16 replicas");
    group.sample_size(10);
    let mut counts = vec![1, 4];
    if cores > 4 {
        counts.push(cores);
    }
    for workers in counts {
        let mut tr = Trainer::new(cfg.clone(), 0).unwrap();
        tr.set_workers(workers).unwrap();
        let sched = tr.curriculum().terminal();
        group.bench_with_input(BenchmarkId::new("workers", workers), &workers, |b, _| {
            b.iter(|| {
                tr.collect(&sched, GovernmentControl::Policy, (0, Stream::Train, 0), 16)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, economy_step, forward_backward, rollout);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use idrl_core::autodiff::{Tape, Tensor2};
use idrl_core::datagen::{generate, SyntheticSpec};
use idrl_core::engine::{make_batch, train_step, Checkpoint, TrainConfig};
use idrl_core::iaf::IafParams;
use idrl_core::losses::{cmd_loss, CmdConfig};

fn randn(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    Tensor2::new(rows, cols, data)
}

fn bench_cmd(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let x = randn(16, 32, &mut rng);
    let y = randn(16, 32, &mut rng);
    c.bench_function("cmd_loss_forward_backward_16x32_k5", |b| {
        b.iter(|| {
            let mut t = Tape::new();
            let xv = t.leaf(x.clone(), true);
            let yv = t.leaf(y.clone(), true);
            let loss = cmd_loss(&mut t, black_box(xv), black_box(yv), &CmdConfig::default())
                .unwrap();
            let grads = t.backward(loss);
            black_box(grads.grad(xv).sum())
        })
    });
}

fn bench_fuse(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let iaf = IafParams::init(8, &mut rng);
    let mats: Vec<Tensor2> = (0..4).map(|_| randn(16, 8, &mut rng)).collect();
    c.bench_function("fuse_batch16_d8", |b| {
        b.iter(|| {
            let mut t = Tape::new();
            let v: Vec<_> = mats.iter().map(|m| t.constant(m.clone())).collect();
            let bv = idrl_core::drd::BundleVars { f_c: v[0], f_s: v[1], n_c: v[0], n_s: v[1] };
            let ba = idrl_core::drd::BundleVars { f_c: v[2], f_s: v[3], n_c: v[2], n_s: v[3] };
            let iv = iaf.register(&mut t, false);
            let fusion = idrl_core::iaf::fuse(&mut t, &bv, &ba, &iv).unwrap();
            black_box(t.value(fusion.f_s).sum())
        })
    });
}

fn bench_train_step(c: &mut Criterion) {
    let spec = SyntheticSpec {
        n_samples: 64,
        ..SyntheticSpec::recovery_default()
    };
    let data = generate(&spec).unwrap();
    let cfg = TrainConfig::default();
    let ckpt = Checkpoint::init(&cfg, data.d_v, data.d_a).unwrap();
    let (pv, pa) = data.pooled();
    let idx: Vec<usize> = (0..16).collect();
    let batch = make_batch(&pv, &pa, &data, &idx);
    c.bench_function("train_step_batch16_d32", |b| {
        b.iter(|| {
            let mut local = ckpt.clone();
            black_box(train_step(&mut local, &batch).unwrap())
        })
    });
}

criterion_group!(benches, bench_cmd, bench_fuse, bench_train_step);
criterion_main!(benches);

//! Sequential vs data-parallel kernels, and the GEMM conv vs direct loops.
//! Build with `--no-default-features` to compile the parallel path out.

use std::hint::black_box;

use aegg::glyph::{split_corpus, synth_corpus, Batch, Split, StyleTransform};
use aegg::parallel::set_threads;
use aegg::tensor::kernels::{conv2d_forward, reference};
use aegg::training::{TrainConfig, Trainer};
use aegg::{Rng, Tensor};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn random(shape: [usize; 4], rng: &mut Rng) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| rng.normal(0.0, 1.0) as f32)
}

fn thread_counts() -> Vec<usize> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    if n > 1 {
        vec![1, n]
    } else {
        vec![1, 2]
    }
}

fn conv(c: &mut Criterion) {
    let mut rng = Rng::new(0);
    let x = random([16, 32, 16, 16], &mut rng);
    let w = random([64, 32, 4, 4], &mut rng);
    let b = vec![0.0f32; 64];

    let mut g = c.benchmark_group("conv2d_16x32x16x16_to_64");
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::new("gemm_threads", t), &t, |bch, &t| {
            set_threads(t);
            bch.iter(|| conv2d_forward(black_box(&x), &w, &b, 2, 1).unwrap());
        });
    }
    set_threads(1);
    g.bench_function("direct_loops", |bch| {
        bch.iter(|| reference::conv2d(black_box(&x), &w, &b, 2, 1).unwrap());
    });
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let corpus = synth_corpus(32, 32, &StyleTransform::Thicken { radius: 1 }, 1).unwrap();
    let corpus = split_corpus(&corpus, 0.25, 1).unwrap();
    let batch = Batch::from_pairs(corpus.pairs_in(Split::Train).take(16)).unwrap();

    let mut g = c.benchmark_group("aegg_train_step_32px_batch16");
    g.sample_size(10);
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::new("threads", t), &t, |bch, &t| {
            set_threads(t);
            let mut trainer = Trainer::new(TrainConfig::default()).unwrap();
            bch.iter(|| trainer.train_step(black_box(&batch)).unwrap());
        });
    }
    set_threads(1);
    g.finish();
}

criterion_group!(benches, conv, train_step);
criterion_main!(benches);

//! Kernel parallelism partitions outputs only, so every thread count must
//! give the same bits. This target is its own process because the thread
//! count is global.

use aegg::glyph::{split_corpus, synth_corpus, StyleTransform};
use aegg::models::NetConfig;
use aegg::parallel::set_threads;
use aegg::training::{TrainConfig, Trainer};

fn run(threads: usize) -> (Vec<String>, Vec<u8>) {
    set_threads(threads);
    let c = synth_corpus(24, 16, &StyleTransform::Thicken { radius: 1 }, 2).unwrap();
    let c = split_corpus(&c, 0.25, 2).unwrap();
    let cfg = TrainConfig {
        batch: 6,
        epochs: 2,
        seed: 4,
        net: NetConfig {
            base_width: 8,
            width_cap: 32,
            ..NetConfig::for_size(16)
        },
        ..TrainConfig::default()
    };
    let mut t = Trainer::new(cfg).unwrap();
    let log = t.fit(&c, None).unwrap();
    let lines = log.steps.iter().map(|s| s.csv_line()).collect();
    (lines, t.to_checkpoint().unwrap().encode())
}

#[test]
fn thread_count_does_not_change_results() {
    let one = run(1);
    for n in [2, 3, 4] {
        let many = run(n);
        assert_eq!(one.0, many.0, "metrics differ with {n} threads");
        assert!(one.1 == many.1, "checkpoint differs with {n} threads");
    }
    set_threads(1);
}

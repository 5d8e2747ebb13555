use aegg::error::CheckpointError;
use aegg::glyph::{split_corpus, synth_corpus, Batch, Corpus, Split, StyleTransform};
use aegg::models::NetConfig;
use aegg::training::{load_transfer, Checkpoint, TrainConfig, Trainer};
use aegg::Error;

fn corpus(n: usize) -> Corpus {
    let c = synth_corpus(n, 16, &StyleTransform::Thicken { radius: 1 }, 3).unwrap();
    split_corpus(&c, 0.25, 3).unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        batch: 4,
        epochs: 1,
        seed: 5,
        net: NetConfig {
            base_width: 4,
            width_cap: 16,
            ..NetConfig::for_size(16)
        },
        ..TrainConfig::default()
    }
}

fn batch(c: &Corpus) -> Batch {
    Batch::from_pairs(c.pairs_in(Split::Train).take(4)).unwrap()
}

fn grads(t: &Trainer, ids: &[aegg::ParamId]) -> Vec<Vec<f32>> {
    ids.iter().map(|id| t.store.grad(*id).map(<[f32]>::to_vec).unwrap_or_default()).collect()
}

#[test]
fn reconstruction_term_never_reaches_the_supervise_net() {
    let c = corpus(16);
    let b = batch(&c);
    let mut off = Trainer::new(TrainConfig { lambda_r: 0.0, ..config() }).unwrap();
    let mut on = Trainer::new(TrainConfig { lambda_r: 100.0, ..config() }).unwrap();
    off.g_backward(&b).unwrap();
    on.g_backward(&b).unwrap();

    let a_ids = on.supervise.as_ref().unwrap().param_ids();
    assert_eq!(grads(&off, &a_ids), grads(&on, &a_ids));

    let g_ids = on.transfer.param_ids();
    assert_ne!(grads(&off, &g_ids), grads(&on, &g_ids));
}

#[test]
fn supervise_net_does_not_see_the_source_images() {
    let c = corpus(16);
    let b = batch(&c);
    let mut shuffled = b.clone();
    shuffled.x = Batch::from_pairs(c.pairs_in(Split::Train).skip(4).take(4)).unwrap().x;
    let mut t1 = Trainer::new(config()).unwrap();
    let mut t2 = Trainer::new(config()).unwrap();
    let r1 = t1.g_backward(&b).unwrap();
    let r2 = t2.g_backward(&shuffled).unwrap();
    assert_eq!(r1.parts.sup, r2.parts.sup);
    let a_ids = t1.supervise.as_ref().unwrap().param_ids();
    // A's gradient comes from L_sup alone, which depends on targets only.
    assert_eq!(grads(&t1, &a_ids), grads(&t2, &a_ids));
}

#[test]
fn training_reduces_the_joint_objective() {
    let c = corpus(24);
    let mut t = Trainer::new(TrainConfig { epochs: 8, ..config() }).unwrap();
    let log = t.fit(&c, None).unwrap();
    let first = log.steps[..3].iter().map(|s| s.total_g).sum::<f32>();
    let last = log.steps[log.steps.len() - 3..].iter().map(|s| s.total_g).sum::<f32>();
    assert!(last < 0.7 * first, "{first} -> {last}");
    assert!(log.steps.iter().all(|s| s.is_finite()));
    assert_eq!(log.epochs.len(), 8);
}

#[test]
fn checkpoint_corruption_is_reported() {
    let c = corpus(12);
    let mut t = Trainer::new(config()).unwrap();
    t.fit(&c, None).unwrap();
    let bytes = t.to_checkpoint().unwrap().encode();

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(Checkpoint::decode(&bad), Err(CheckpointError::BadMagic)));
    assert!(Checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(Checkpoint::decode(&long).is_err());

    let ok = Checkpoint::decode(&bytes).unwrap();
    let (cfg, net, _) = load_transfer(&ok).unwrap();
    assert_eq!(cfg, t.config);
    assert_eq!(net.param_ids().len(), t.transfer.param_ids().len());
}

#[test]
fn mismatched_corpus_size_is_rejected() {
    let c = split_corpus(&synth_corpus(8, 32, &StyleTransform::Identity, 0).unwrap(), 0.25, 0).unwrap();
    let mut t = Trainer::new(config()).unwrap();
    assert!(matches!(t.fit(&c, None), Err(Error::Corpus(_))));
}

#[test]
fn config_errors_name_the_field() {
    for (json, field) in [
        (r#"{"lr": -1}"#, "lr"),
        (r#"{"batch": 0}"#, "batch"),
        (r#"{"net": {"image_size": 12}}"#, "net.image_size"),
        (r#"{"lambda_j": [1, 1]}"#, "lambda_j"),
    ] {
        let err = TrainConfig::from_json(json).unwrap_err().to_string();
        assert!(err.contains(field), "{json}: {err}");
    }
    let cfg = config();
    assert_eq!(TrainConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

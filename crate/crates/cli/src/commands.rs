use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use aegg::checks::gradcheck_suite;
use aegg::glyph::{binarize, from_tensor, load_pgm, median_filter, resize, save_pgm, split_corpus, synth_corpus, to_tensor, Corpus, GlyphImage, Split, StyleTransform};
use aegg::parallel::map_range;
use aegg::training::{evaluate_transfer, generate, load_transfer, Checkpoint, TrainConfig, Trainer, LAST_CKPT, METRICS_CSV};
use anyhow::{anyhow, Context};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{EvalArgs, GenDataArgs, GradcheckArgs, InferArgs, TrainArgs};

/// Binarization threshold applied to inference inputs.
const INK_THRESHOLD: u8 = 128;

pub struct CmdError {
    pub code: u8,
    pub source: anyhow::Error,
}

fn usage(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { code: 1, source: e.into() }
}

fn runtime(e: impl Into<anyhow::Error>) -> CmdError {
    CmdError { code: 2, source: e.into() }
}

/// Config problems are usage errors; everything else is a runtime failure.
impl From<aegg::Error> for CmdError {
    fn from(e: aegg::Error) -> Self {
        match e {
            aegg::Error::Config(_) => usage(e),
            e => runtime(e),
        }
    }
}

type CmdResult = Result<(), CmdError>;

fn args() -> Vec<String> {
    std::env::args().skip(1).collect()
}

pub fn gen_data(a: &GenDataArgs) -> CmdResult {
    let style: StyleTransform = a.style.parse().map_err(|e: String| usage(anyhow!("--style: {e}")))?;
    if !(a.val_fraction > 0.0 && a.val_fraction < 1.0) {
        return Err(usage(anyhow!("--val-fraction must lie in (0, 1), got {}", a.val_fraction)));
    }
    let corpus = synth_corpus(a.chars, a.size, &style, a.seed).map_err(usage)?;
    let corpus = split_corpus(&corpus, a.val_fraction, a.seed).map_err(usage)?;
    corpus.save(&a.out).with_context(|| format!("writing corpus to {}", a.out.display())).map_err(runtime)?;
    let mut m = RunManifest::new("gen-data", &a.out);
    m.seed = Some(a.seed);
    m.args = args();
    m.write().map_err(runtime)?;
    println!(
        "wrote {} pairs ({} train, {} val) to {}",
        corpus.pairs.len(),
        corpus.indices(Split::Train).len(),
        corpus.indices(Split::Val).len(),
        a.out.display()
    );
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Corpus, CmdError> {
    Corpus::load(dir).map_err(|e| runtime(anyhow!(e).context(format!("loading corpus {}", dir.display()))))
}

/// Every field except `epochs` must agree for a resumed run.
fn same_run(a: &TrainConfig, b: &TrainConfig) -> bool {
    let mut b = b.clone();
    b.epochs = a.epochs;
    a.to_json() == b.to_json()
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let file_config = match &a.config {
        Some(p) => Some(TrainConfig::load(p).map_err(|e| usage(anyhow!(e).context(format!("config {}", p.display()))))?),
        None => None,
    };
    let corpus = load_corpus(&a.corpus)?;
    let last = a.out.join(LAST_CKPT);
    let mut trainer = if a.resume {
        let mut t = Trainer::load(&last).map_err(|e| runtime(anyhow!(e).context(format!("resuming from {}", last.display()))))?;
        if let Some(cfg) = file_config {
            if !same_run(&t.config, &cfg) {
                return Err(usage(anyhow!(
                    "--config differs from the checkpoint's config in fields other than epochs"
                )));
            }
            t.config.epochs = cfg.epochs;
        }
        t
    } else {
        if a.out.join(METRICS_CSV).exists() {
            return Err(usage(anyhow!(
                "{} already holds a run; pass --resume or choose another --out",
                a.out.display()
            )));
        }
        Trainer::new(file_config.unwrap_or_default())?
    };
    let mut m = RunManifest::new("train", &a.out);
    m.config = a.config.clone();
    m.corpus = Some(a.corpus.clone());
    m.seed = Some(trainer.config.seed);
    m.args = args();
    m.write().map_err(runtime)?;
    fs::write(a.out.join("config.json"), trainer.config.to_json() + "\n").map_err(runtime)?;

    let target = trainer.config.epochs as u64;
    while trainer.epoch < target {
        let log = trainer.fit_until(&corpus, Some(&a.out), trainer.epoch + 1)?;
        let last_step = log.steps.last();
        let e = &log.epochs[0];
        println!(
            "epoch {}/{} step {} total_g={} l_adv_d={} val_l1={:.4} val_iou={:.4}",
            e.epoch,
            target,
            trainer.step,
            last_step.map_or(f32::NAN, |s| s.total_g),
            last_step.map_or(f32::NAN, |s| s.l_adv_d),
            e.val_l1,
            e.val_iou
        );
    }
    Ok(())
}

fn infer_one(net: &aegg::models::Generator<f32>, store: &aegg::ParamStore<f32>, size: usize, median: usize, path: &Path) -> anyhow::Result<GlyphImage> {
    let img = load_pgm(path).with_context(|| format!("reading {}", path.display()))?;
    let img = binarize(&resize(&img, size)?, INK_THRESHOLD);
    let out = generate(net, store, &to_tensor::<f32>(&img))?;
    Ok(median_filter(&from_tensor(&out)?, median)?)
}

pub fn infer(a: &InferArgs) -> CmdResult {
    if a.median == 0 || a.median % 2 == 0 {
        return Err(usage(anyhow!("--median must be odd and positive, got {}", a.median)));
    }
    let mut names = BTreeSet::new();
    for p in &a.input {
        let stem = p.file_stem().ok_or_else(|| usage(anyhow!("input {} has no file name", p.display())))?;
        if !names.insert(stem.to_os_string()) {
            return Err(usage(anyhow!("two inputs share the output name {}.pgm", stem.to_string_lossy())));
        }
    }
    let ckpt = Checkpoint::load(&a.ckpt).map_err(|e| runtime(anyhow!(e).context(format!("loading {}", a.ckpt.display()))))?;
    let (config, net, store) = load_transfer(&ckpt)?;
    let size = config.net.image_size;

    let results = map_range(a.input.len(), |i| infer_one(&net, &store, size, a.median, &a.input[i]));
    fs::create_dir_all(&a.out).map_err(runtime)?;
    for (path, res) in a.input.iter().zip(results) {
        let img = res.map_err(runtime)?;
        let dst = a.out.join(path.file_stem().expect("checked above")).with_extension("pgm");
        save_pgm(&img, &dst).map_err(runtime)?;
        println!("{} -> {}", path.display(), dst.display());
    }
    let mut m = RunManifest::new("infer", &a.out);
    m.seed = Some(config.seed);
    m.args = args();
    m.write().map_err(runtime)?;
    Ok(())
}

#[derive(Serialize)]
struct EvalJson {
    split: String,
    samples: usize,
    l1: f64,
    iou: f64,
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    let split: Split = a.split.parse().map_err(|e| usage(anyhow!("--split: {e}")))?;
    let ckpt = Checkpoint::load(&a.ckpt).map_err(|e| runtime(anyhow!(e).context(format!("loading {}", a.ckpt.display()))))?;
    let (config, net, store) = load_transfer(&ckpt)?;
    let corpus = load_corpus(&a.corpus)?;
    if corpus.image_size() != Some(config.net.image_size) {
        return Err(usage(anyhow!(
            "corpus image size {:?} does not match the checkpoint's {}",
            corpus.image_size(),
            config.net.image_size
        )));
    }
    let r = evaluate_transfer(&net, &store, &corpus, split)?;
    println!("l1={} iou={}", r.l1, r.iou);
    if let Some(out) = &a.out {
        let mut m = RunManifest::new("eval", out);
        m.corpus = Some(a.corpus.clone());
        m.seed = Some(config.seed);
        m.args = args();
        m.write().map_err(runtime)?;
        let j = EvalJson {
            split: split.to_string(),
            samples: r.samples,
            l1: r.l1,
            iou: r.iou,
        };
        let text = serde_json::to_string_pretty(&j).expect("report serializes") + "\n";
        fs::write(out.join("eval.json"), text).map_err(runtime)?;
    }
    Ok(())
}

pub fn gradcheck(a: &GradcheckArgs) -> CmdResult {
    if a.size < 8 || !a.size.is_power_of_two() {
        return Err(usage(anyhow!("--size must be a power of two >= 8, got {}", a.size)));
    }
    let cases = gradcheck_suite(a.size, a.tol)?;
    let mut failed = 0;
    for c in &cases {
        let r = &c.report;
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!r.passed());
        println!(
            "{:<20} worst_rel_err={:.3e} analytic={:.4e} numeric={:.4e} checked={} skipped={} {verdict}",
            c.name, r.worst_rel_err, r.worst_analytic, r.worst_numeric, r.checked, r.skipped
        );
    }
    println!("{} of {} checks passed at tol {:e}", cases.len() - failed, cases.len(), a.tol);
    if failed > 0 {
        return Err(runtime(anyhow!("{failed} gradient checks exceeded the tolerance")));
    }
    Ok(())
}

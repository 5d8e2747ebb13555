use crate::error::{Error, Result};
use crate::glyph::{Batch, Corpus, Split};
use crate::models::{Generator, Mode, Pass};
use crate::tensor::{ParamStore, Tape, Tensor};

/// Samples per forward pass during evaluation.
pub const EVAL_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    /// Mean `|G(x) − y|` over all pixels of the raw `[-1, 1]` output.
    pub l1: f64,
    /// Ink-class IoU pooled over the split; outputs are ink where `> 0`.
    pub iou: f64,
    pub samples: usize,
}

/// Score an arbitrary generator on a split. `gen` maps an `(n, 1, s, s)`
/// source batch to an output batch of the same shape.
pub fn evaluate<F>(corpus: &Corpus, split: Split, mut gen: F) -> Result<EvalReport>
where
    F: FnMut(&Batch) -> Result<Tensor<f32>>,
{
    let idx = corpus.indices(split);
    if idx.is_empty() {
        return Err(Error::Corpus(format!("split {split} is empty")));
    }
    let (mut abs_sum, mut pixels) = (0.0f64, 0usize);
    let (mut inter, mut union) = (0usize, 0usize);
    for chunk in idx.chunks(EVAL_BATCH) {
        let batch = Batch::from_pairs(chunk.iter().map(|i| &corpus.pairs[*i]))?;
        let out = gen(&batch)?;
        if out.shape() != batch.y.shape() {
            return Err(Error::Corpus(format!(
                "generator produced {:?} for targets {:?}",
                out.shape(),
                batch.y.shape()
            )));
        }
        for (o, y) in out.data().iter().zip(batch.y.data()) {
            abs_sum += f64::from((o - y).abs());
            let (po, py) = (*o > 0.0, *y > 0.0);
            inter += usize::from(po && py);
            union += usize::from(po || py);
        }
        pixels += out.len();
    }
    Ok(EvalReport {
        l1: abs_sum / pixels as f64,
        iou: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
        samples: idx.len(),
    })
}

/// Eval-mode forward of a generator on one batch of sources.
pub fn generate(net: &Generator<f32>, store: &ParamStore<f32>, x: &Tensor<f32>) -> Result<Tensor<f32>> {
    let mut tape = Tape::new();
    let mut pass = Pass::new(&mut tape, store, Mode::Eval).frozen();
    let xv = pass.tape.constant(x.clone());
    let out = net.forward(&mut pass, xv)?;
    Ok(tape.value(out.image).clone())
}

/// Score the transfer net (sources → targets) in eval mode.
pub fn evaluate_transfer(net: &Generator<f32>, store: &ParamStore<f32>, corpus: &Corpus, split: Split) -> Result<EvalReport> {
    evaluate(corpus, split, |b| generate(net, store, &b.x))
}

/// Score the supervise net (targets → targets) in eval mode.
pub fn evaluate_supervise(net: &Generator<f32>, store: &ParamStore<f32>, corpus: &Corpus, split: Split) -> Result<EvalReport> {
    evaluate(corpus, split, |b| generate(net, store, &b.y))
}

/// The copy-input baseline `G(x) = x`.
pub fn evaluate_identity(corpus: &Corpus, split: Split) -> Result<EvalReport> {
    evaluate(corpus, split, |b| Ok(b.x.clone()))
}

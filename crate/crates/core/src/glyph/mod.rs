//! Binary glyph images, synthetic paired corpora and batching.

pub mod corpus;
pub mod image;
pub mod synth;

pub use corpus::{batch_iter, pair_flip, split_corpus, synth_corpus, Batch, BatchIter, Corpus, GlyphPair, Split};
pub use image::{binarize, from_tensor, load_pgm, median_filter, resize, save_pgm, to_tensor, GlyphImage};
pub use synth::{stroke_glyph, StyleTransform};

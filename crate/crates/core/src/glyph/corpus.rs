use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::image::{load_pgm, save_pgm, to_tensor, GlyphImage};
use super::synth::{stroke_glyph, StyleTransform};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Probability of a horizontal flip when augmentation is on.
pub const FLIP_PROB: f64 = 0.5;

pub const MANIFEST_FILE: &str = "manifest.tsv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(format!("unknown split {other:?} (expected train or val)")),
        }
    }
}

/// Standard-font glyph `x` and its styled target `y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlyphPair {
    pub char_id: String,
    pub x: GlyphImage,
    pub y: GlyphImage,
}

/// Mirror both images with probability `p`, using one shared draw.
pub fn pair_flip(pair: &GlyphPair, rng: &mut Rng, p: f64) -> GlyphPair {
    if rng.bernoulli(p) {
        GlyphPair {
            char_id: pair.char_id.clone(),
            x: pair.x.flip_horizontal(),
            y: pair.y.flip_horizontal(),
        }
    } else {
        pair.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    /// Style label; also the directory name on disk.
    pub style: String,
    pub pairs: Vec<GlyphPair>,
    /// Split of each pair, parallel to `pairs`.
    pub splits: Vec<Split>,
}

impl Corpus {
    pub fn new(style: impl Into<String>, pairs: Vec<GlyphPair>) -> Self {
        let splits = vec![Split::Train; pairs.len()];
        Corpus {
            style: style.into(),
            pairs,
            splits,
        }
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.pairs.len()).filter(|i| self.splits[*i] == split).collect()
    }

    pub fn pairs_in(&self, split: Split) -> impl Iterator<Item = &GlyphPair> {
        self.pairs.iter().zip(&self.splits).filter(move |(_, s)| **s == split).map(|(p, _)| p)
    }

    pub fn char_ids(&self, split: Split) -> BTreeSet<&str> {
        self.pairs_in(split).map(|p| p.char_id.as_str()).collect()
    }

    /// Side length shared by every image, if uniform and square.
    pub fn image_size(&self) -> Option<usize> {
        let first = self.pairs.first()?;
        let s = first.x.width();
        self.pairs
            .iter()
            .all(|p| [p.x.width(), p.x.height(), p.y.width(), p.y.height()].iter().all(|v| *v == s))
            .then_some(s)
    }

    fn rel_path(&self, pair: &GlyphPair, split: Split, which: char) -> PathBuf {
        Path::new(&self.style)
            .join(split.as_str())
            .join(format!("{}_{which}.pgm", pair.char_id))
    }

    /// Write `{style}/{split}/{char_id}_{x|y}.pgm` plus `manifest.tsv` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut manifest = String::new();
        for (pair, split) in self.pairs.iter().zip(&self.splits) {
            let (xp, yp) = (self.rel_path(pair, *split, 'x'), self.rel_path(pair, *split, 'y'));
            fs::create_dir_all(dir.join(xp.parent().expect("relative path has a parent")))?;
            save_pgm(&pair.x, dir.join(&xp))?;
            save_pgm(&pair.y, dir.join(&yp))?;
            manifest.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                pair.char_id,
                xp.display(),
                yp.display(),
                split
            ));
        }
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_FILE), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))
            .map_err(|e| Error::Corpus(format!("cannot read {}: {e}", dir.join(MANIFEST_FILE).display())))?;
        let mut pairs = Vec::new();
        let mut splits = Vec::new();
        let mut style = None;
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [id, xp, yp, split] = cols[..] else {
                return Err(Error::Corpus(format!("manifest line {}: expected 4 tab-separated fields", n + 1)));
            };
            let split: Split = split
                .parse()
                .map_err(|e| Error::Corpus(format!("manifest line {}: {e}", n + 1)))?;
            if style.is_none() {
                style = Path::new(xp)
                    .components()
                    .next()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned());
            }
            pairs.push(GlyphPair {
                char_id: id.to_string(),
                x: load_pgm(dir.join(xp))?,
                y: load_pgm(dir.join(yp))?,
            });
            splits.push(split);
        }
        Ok(Corpus {
            style: style.unwrap_or_default(),
            pairs,
            splits,
        })
    }
}

/// `n_chars` synthetic pairs, all assigned to the train split. A pure
/// function of its arguments.
pub fn synth_corpus(n_chars: usize, size: usize, style: &StyleTransform, seed: u64) -> Result<Corpus> {
    if size < 16 || !size.is_power_of_two() {
        return Err(Error::Corpus(format!("image size must be a power of two >= 16, got {size}")));
    }
    let pairs = (0..n_chars)
        .map(|i| {
            let x = stroke_glyph(seed, i as u64, size);
            let y = style.apply(&x);
            GlyphPair {
                char_id: format!("{i:05}"),
                x,
                y,
            }
        })
        .collect();
    Ok(Corpus::new(style.to_string(), pairs))
}

/// Character-level train/val split: every pair of a character lands in the
/// same split, and `round(val_fraction · chars)` characters (at least one,
/// at most all but one) go to validation.
pub fn split_corpus(c: &Corpus, val_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Corpus(format!("val_fraction must lie in (0, 1), got {val_fraction}")));
    }
    let mut ids: Vec<&str> = c.pairs.iter().map(|p| p.char_id.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    if ids.len() < 2 {
        return Err(Error::Corpus(format!("need at least 2 characters to split, got {}", ids.len())));
    }
    Rng::new(seed).shuffle(&mut ids);
    let n_val = ((val_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let val: BTreeSet<&str> = ids[..n_val].iter().copied().collect();
    let splits = c
        .pairs
        .iter()
        .map(|p| if val.contains(p.char_id.as_str()) { Split::Val } else { Split::Train })
        .collect();
    Ok(Corpus {
        style: c.style.clone(),
        pairs: c.pairs.clone(),
        splits,
    })
}

/// A minibatch of `[n, 1, s, s]` tensors in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Tensor<f32>,
    pub y: Tensor<f32>,
    pub char_ids: Vec<String>,
}

impl Batch {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a GlyphPair>) -> Result<Self> {
        let (mut xs, mut ys, mut ids) = (Vec::new(), Vec::new(), Vec::new());
        for p in pairs {
            xs.push(to_tensor::<f32>(&p.x));
            ys.push(to_tensor::<f32>(&p.y));
            ids.push(p.char_id.clone());
        }
        Ok(Batch {
            x: Tensor::stack(&xs)?,
            y: Tensor::stack(&ys)?,
            char_ids: ids,
        })
    }

    pub fn len(&self) -> usize {
        self.char_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.char_ids.is_empty()
    }
}

/// One epoch over a split in shuffled order.
pub struct BatchIter<'a> {
    corpus: &'a Corpus,
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: &'a mut Rng,
    augment: bool,
}

/// Shuffles the split with `rng`, then yields batches of `batch` pairs; the
/// last batch may be short. With `augment`, each pair is flipped with
/// probability [`FLIP_PROB`].
pub fn batch_iter<'a>(
    c: &'a Corpus,
    split: Split,
    batch: usize,
    rng: &'a mut Rng,
    augment: bool,
) -> Result<BatchIter<'a>> {
    if batch == 0 {
        return Err(Error::Corpus("batch size must be at least 1".into()));
    }
    let mut order = c.indices(split);
    if order.is_empty() {
        return Err(Error::Corpus(format!("split {split} is empty")));
    }
    rng.shuffle(&mut order);
    Ok(BatchIter {
        corpus: c,
        order,
        pos: 0,
        batch,
        rng,
        augment,
    })
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let mut pairs = Vec::with_capacity(end - self.pos);
        for &i in &self.order[self.pos..end] {
            let p = &self.corpus.pairs[i];
            pairs.push(if self.augment {
                pair_flip(p, self.rng, FLIP_PROB)
            } else {
                p.clone()
            });
        }
        self.pos = end;
        Some(Batch::from_pairs(&pairs).expect("corpus images share one size"))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;

    use super::*;
    use crate::rng::Rng;

    fn tiny(n: usize) -> Corpus {
        synth_corpus(n, 16, &StyleTransform::Identity, 3).unwrap()
    }

    #[test]
    fn synth_is_deterministic() {
        let s = StyleTransform::Thicken { radius: 1 };
        assert_eq!(synth_corpus(12, 32, &s, 9).unwrap(), synth_corpus(12, 32, &s, 9).unwrap());
        assert_ne!(synth_corpus(12, 32, &s, 9).unwrap(), synth_corpus(12, 32, &s, 10).unwrap());
        assert!(synth_corpus(2, 24, &s, 9).is_err());
        assert!(synth_corpus(2, 8, &s, 9).is_err());
    }

    #[test]
    fn identity_style_pairs_are_equal() {
        assert!(tiny(20).pairs.iter().all(|p| p.x == p.y));
    }

    #[test]
    fn thicken_never_removes_ink() {
        let c = synth_corpus(50, 32, &StyleTransform::Thicken { radius: 1 }, 4).unwrap();
        for p in &c.pairs {
            assert!(p.y.ink_count() >= p.x.ink_count());
            // Dilation is extensive: every x ink pixel is y ink.
            assert!(p.x.pixels().iter().zip(p.y.pixels()).all(|(a, b)| *a == 0 || *b == 255));
        }
    }

    #[test]
    fn split_sizes_and_reproducibility() {
        let c = tiny(10);
        let s = split_corpus(&c, 0.2, 1).unwrap();
        assert_eq!(s.char_ids(Split::Val).len(), 2);
        assert_eq!(s.char_ids(Split::Train).len(), 8);
        assert_eq!(s, split_corpus(&c, 0.2, 1).unwrap());
        assert!(split_corpus(&tiny(1), 0.5, 1).is_err());
        assert!(split_corpus(&c, 0.0, 1).is_err());
        assert!(split_corpus(&c, 1.0, 1).is_err());
    }

    #[test]
    fn split_keeps_characters_together() {
        let mut c = tiny(6);
        let dup = c.pairs[2].clone();
        c.pairs.push(dup);
        c.splits.push(Split::Train);
        let s = split_corpus(&c, 0.5, 8).unwrap();
        let mut seen: HashMap<&str, Split> = HashMap::new();
        for (p, sp) in s.pairs.iter().zip(&s.splits) {
            assert_eq!(*seen.entry(&p.char_id).or_insert(*sp), *sp);
        }
    }

    #[test]
    fn batch_sizes_and_coverage() {
        let c = tiny(10);
        let mut rng = Rng::new(0);
        let batches: Vec<Batch> = batch_iter(&c, Split::Train, 4, &mut rng, false).unwrap().collect();
        assert_eq!(batches.iter().map(Batch::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(batches[0].x.shape(), [4, 1, 16, 16]);
        let mut ids: Vec<&str> = batches.iter().flat_map(|b| b.char_ids.iter().map(String::as_str)).collect();
        ids.sort_unstable();
        let mut want: Vec<&str> = c.pairs.iter().map(|p| p.char_id.as_str()).collect();
        want.sort_unstable();
        assert_eq!(ids, want);
    }

    #[test]
    fn batch_order_is_seeded() {
        let c = tiny(10);
        let order = |seed| -> Vec<String> {
            let mut rng = Rng::new(seed);
            batch_iter(&c, Split::Train, 3, &mut rng, false)
                .unwrap()
                .flat_map(|b| b.char_ids)
                .collect()
        };
        assert_eq!(order(5), order(5));
        assert_ne!(order(5), order(6));
        let mut rng = Rng::new(0);
        assert!(batch_iter(&c, Split::Val, 3, &mut rng, false).is_err());
        assert!(batch_iter(&c, Split::Train, 0, &mut rng, false).is_err());
    }

    #[test]
    fn flip_probabilities() {
        let c = synth_corpus(1, 16, &StyleTransform::Shear { factor: 0.3 }, 1).unwrap();
        let p = &c.pairs[0];
        let mut rng = Rng::new(1);
        assert_eq!(&pair_flip(p, &mut rng, 0.0), p);
        let once = pair_flip(p, &mut rng, 1.0);
        assert_eq!(once.x, p.x.flip_horizontal());
        assert_eq!(once.y, p.y.flip_horizontal());
        assert_eq!(&pair_flip(&once, &mut rng, 1.0), p);

        let mut rng = Rng::new(2024);
        let flips = (0..10_000).filter(|_| pair_flip(p, &mut rng, 0.5).x != p.x).count();
        let freq = flips as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&freq), "flip frequency {freq}");
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = split_corpus(&synth_corpus(7, 16, &StyleTransform::Thicken { radius: 1 }, 2).unwrap(), 0.3, 0).unwrap();
        c.save(dir.path()).unwrap();
        let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest.lines().count(), 7);
        assert!(manifest.lines().next().unwrap().starts_with("00000\tthicken:1/"));
        assert_eq!(Corpus::load(dir.path()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn split_never_overlaps(seed in any::<u64>(), frac in 0.05f64..0.95, n in 2usize..40) {
            let c = tiny(n);
            let s = split_corpus(&c, frac, seed).unwrap();
            let (tr, va) = (s.char_ids(Split::Train), s.char_ids(Split::Val));
            prop_assert!(tr.is_disjoint(&va));
            prop_assert_eq!(tr.len() + va.len(), n);
            prop_assert!((va.len() as f64 - frac * n as f64).abs() <= 1.0);
        }
    }
}

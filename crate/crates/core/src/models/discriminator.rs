use super::config::{shape_plan, NetConfig};
use super::generator::commit;
use super::layers::{next, BatchNorm, BnSpec, Conv, Pass, StatsTrace};
use crate::error::{Result, TensorError};
use crate::rng::Rng;
use crate::tensor::{ParamId, ParamStore, Real, Var};

pub struct DiscOutput<T> {
    /// `(n, 1, 1, 1)` probability that the candidate is a real target glyph.
    pub prob: Var,
    pub stats: StatsTrace<T>,
}

#[derive(Clone, Debug)]
struct DiscBlock<T> {
    conv: Conv,
    bn: Option<BatchNorm<T>>,
}

/// Conditional discriminator on `(source, candidate)` pairs.
#[derive(Clone, Debug)]
pub struct Discriminator<T> {
    image_size: usize,
    blocks: Vec<DiscBlock<T>>,
    output: Conv,
}

pub fn build_discriminator<T: Real>(
    cfg: &NetConfig,
    store: &mut ParamStore<T>,
    rng: &mut Rng,
) -> Result<Discriminator<T>> {
    shape_plan(cfg)?;
    let spec = BnSpec {
        eps: cfg.bn_eps,
        momentum: cfg.bn_momentum,
        init_std: cfg.init_std,
    };
    let std = cfg.init_std;
    // Stride-2 blocks from s down to 2×2, then a 2×2 valid conv.
    let n_blocks = cfg.image_size.trailing_zeros() as usize - 1;
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut slots = 0;
    let mut in_c = 2;
    for i in 0..n_blocks {
        let out_c = (cfg.base_width << i).min(cfg.width_cap);
        let name = format!("D.blk{i}");
        let conv = Conv::new(store, rng, &format!("{name}.conv"), in_c, out_c, 4, 2, 1, false, std);
        let bn = (i > 0).then(|| BatchNorm::new(store, rng, &format!("{name}.bn"), next(&mut slots), out_c, spec));
        blocks.push(DiscBlock { conv, bn });
        in_c = out_c;
    }
    let output = Conv::new(store, rng, "D.out.conv", in_c, 1, 2, 1, 0, false, std);
    Ok(Discriminator {
        image_size: cfg.image_size,
        blocks,
        output,
    })
}

impl<T: Real> Discriminator<T> {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn forward(&self, pass: &mut Pass<'_, T>, x: Var, candidate: Var) -> Result<DiscOutput<T>, TensorError> {
        let s = self.image_size;
        for v in [x, candidate] {
            let shape = pass.tape.shape(v);
            if shape[1] != 1 || shape[2] != s || shape[3] != s {
                return Err(TensorError::Shape {
                    op: "discriminator",
                    detail: format!("expected (n, 1, {s}, {s}), got {shape:?}"),
                });
            }
        }
        let mut trace = Vec::new();
        let mut h = pass.tape.concat_channels(x, candidate)?;
        for block in &self.blocks {
            h = block.conv.forward(pass, h)?;
            if let Some(bn) = &block.bn {
                h = bn.forward(pass, h, &mut trace)?;
            }
            h = pass.tape.relu(h);
        }
        let logit = self.output.forward(pass, h)?;
        let prob = pass.tape.sigmoid(logit);
        Ok(DiscOutput { prob, stats: trace })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for b in &self.blocks {
            ids.extend(b.conv.params());
            if let Some(bn) = &b.bn {
                ids.extend(bn.params());
            }
        }
        ids.extend(self.output.params());
        ids
    }

    pub fn batch_norms(&self) -> Vec<&BatchNorm<T>> {
        self.blocks.iter().filter_map(|b| b.bn.as_ref()).collect()
    }

    pub fn batch_norms_mut(&mut self) -> Vec<&mut BatchNorm<T>> {
        self.blocks.iter_mut().filter_map(|b| b.bn.as_mut()).collect()
    }

    pub fn commit_stats(&mut self, stats: &StatsTrace<T>) {
        commit(self.batch_norms_mut(), stats);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::layers::Mode;
    use crate::tensor::{Tape, Tensor};

    #[test]
    fn block_count_follows_image_size() {
        for (s, n) in [(8, 2), (32, 4), (256, 7)] {
            let mut store = ParamStore::<f32>::new();
            let cfg = NetConfig {
                base_width: 2,
                width_cap: 4,
                ..NetConfig::for_size(s)
            };
            let d = build_discriminator(&cfg, &mut store, &mut Rng::new(0)).unwrap();
            assert_eq!(d.num_blocks(), n);
        }
    }

    #[test]
    fn output_is_a_probability_per_sample() {
        let cfg = NetConfig::for_size(32);
        let mut store = ParamStore::<f32>::new();
        let d = build_discriminator(&cfg, &mut store, &mut Rng::new(0)).unwrap();
        let mut tape = Tape::new();
        let mut pass = Pass::new(&mut tape, &store, Mode::Train);
        let x = pass.tape.constant(Tensor::from_fn([3, 1, 32, 32], |i| ((i % 5) as f32 - 2.0) / 2.0));
        let y = pass.tape.constant(Tensor::from_fn([3, 1, 32, 32], |i| (i % 3) as f32 - 1.0));
        let out = d.forward(&mut pass, x, y).unwrap();
        let p = tape.value(out.prob);
        assert_eq!(p.shape(), [3, 1, 1, 1]);
        assert!(p.data().iter().all(|v| *v > 0.0 && *v < 1.0));
        assert_eq!(out.stats.len(), 3);
    }
}

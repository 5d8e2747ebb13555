use super::config::{shape_plan, NetConfig, ShapePlan, SkipKind, SkipMode};
use super::layers::{next, BatchNorm, BnSpec, Conv, Mode, Pass, ResidualBlock, StatsTrace};
use crate::error::{Result, TensorError};
use crate::rng::Rng;
use crate::tensor::{ParamId, ParamStore, Real, Var};

/// Which generator a network is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Auto-encoder on the target style: concat skips everywhere.
    Supervise,
    /// Source-to-target transfer: skips follow the configured [`SkipMode`].
    Transfer,
}

impl Role {
    pub fn prefix(self) -> &'static str {
        match self {
            Role::Supervise => "A",
            Role::Transfer => "G",
        }
    }
}

/// Decoder activations at the tapped layers, ordered by increasing side.
#[derive(Clone, Debug)]
pub struct FeatureTaps {
    pub source: Role,
    pub vars: Vec<Var>,
}

impl FeatureTaps {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

pub struct GenOutput<T> {
    pub image: Var,
    pub taps: FeatureTaps,
    pub stats: StatsTrace<T>,
}

#[derive(Clone, Debug)]
struct EncBlock<T> {
    conv: Conv,
    bn: Option<BatchNorm<T>>,
}

#[derive(Clone, Debug)]
struct DecBlock<T> {
    deconv: Conv,
    bn: BatchNorm<T>,
}

/// U-shaped encoder-decoder generator.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    role: Role,
    cfg: NetConfig,
    plan: ShapePlan,
    skips: Vec<SkipKind>,
    encoder: Vec<EncBlock<T>>,
    decoder: Vec<DecBlock<T>>,
    residual: Vec<Option<ResidualBlock<T>>>,
    output: Conv,
}

pub fn build_supervise<T: Real>(cfg: &NetConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Generator<T>> {
    Generator::build(Role::Supervise, cfg, store, rng)
}

pub fn build_transfer<T: Real>(cfg: &NetConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Generator<T>> {
    Generator::build(Role::Transfer, cfg, store, rng)
}

impl<T: Real> Generator<T> {
    pub fn build(role: Role, cfg: &NetConfig, store: &mut ParamStore<T>, rng: &mut Rng) -> Result<Self> {
        let plan = shape_plan(cfg)?;
        let mode = match (role, cfg.skip_mode) {
            (Role::Supervise, SkipMode::None) => SkipMode::None,
            (Role::Supervise, _) => SkipMode::UnetConcat,
            (Role::Transfer, m) => m,
        };
        let skips = plan.skip_kinds(mode);
        let ins = plan.decoder_in_channels(mode);
        let spec = BnSpec {
            eps: cfg.bn_eps,
            momentum: cfg.bn_momentum,
            init_std: cfg.init_std,
        };
        let p = role.prefix();
        let std = cfg.init_std;
        let mut slots = 0;
        let m = plan.encoder_sides.len();

        let mut encoder = Vec::with_capacity(m);
        let mut in_c = 1;
        for (i, &out_c) in plan.encoder_channels.iter().enumerate() {
            let name = format!("{p}.enc{i}");
            let conv = Conv::new(store, rng, &format!("{name}.conv"), in_c, out_c, 4, 2, 1, false, std);
            // No BN on the first block or on the 1×1 bottleneck, which would
            // normalize a single value per channel at batch size 1.
            let bn = (i > 0 && i + 1 < m)
                .then(|| BatchNorm::new(store, rng, &format!("{name}.bn"), next(&mut slots), out_c, spec));
            encoder.push(EncBlock { conv, bn });
            in_c = out_c;
        }

        let mut decoder = Vec::with_capacity(m - 1);
        let mut residual = Vec::with_capacity(m - 1);
        for (j, &out_c) in plan.decoder_channels.iter().enumerate() {
            let name = format!("{p}.dec{j}");
            let deconv = Conv::new(store, rng, &format!("{name}.deconv"), ins[j], out_c, 4, 2, 1, true, std);
            let bn = BatchNorm::new(store, rng, &format!("{name}.bn"), next(&mut slots), out_c, spec);
            decoder.push(DecBlock { deconv, bn });
            residual.push((skips[j] == SkipKind::Residual).then(|| {
                let ch = plan.encoder_channels[plan.mirror(j)];
                ResidualBlock::new(store, rng, &format!("{p}.res{j}"), &mut slots, ch, spec)
            }));
        }
        let output = Conv::new(store, rng, &format!("{p}.out.deconv"), ins[m - 1], 1, 4, 2, 1, true, std);

        Ok(Generator {
            role,
            cfg: cfg.clone(),
            plan,
            skips,
            encoder,
            decoder,
            residual,
            output,
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn skip_kinds(&self) -> &[SkipKind] {
        &self.skips
    }

    /// Map `(n, 1, s, s)` to `(n, 1, s, s)` in `[-1, 1]`.
    pub fn forward(&self, pass: &mut Pass<'_, T>, x: Var) -> Result<GenOutput<T>, TensorError> {
        let s = self.plan.image_size;
        let shape = pass.tape.shape(x);
        if shape[1] != 1 || shape[2] != s || shape[3] != s {
            return Err(TensorError::Shape {
                op: "generator",
                detail: format!("expected (n, 1, {s}, {s}), got {shape:?}"),
            });
        }
        let slope = self.cfg.leaky_slope;
        let mut trace = Vec::new();
        let mut feats = Vec::with_capacity(self.encoder.len());
        let mut h = x;
        for block in &self.encoder {
            h = block.conv.forward(pass, h)?;
            if let Some(bn) = &block.bn {
                h = bn.forward(pass, h, &mut trace)?;
            }
            h = pass.tape.leaky_relu(h, slope);
            feats.push(h);
        }

        let mut taps = Vec::with_capacity(self.plan.num_taps());
        for (j, block) in self.decoder.iter().enumerate() {
            h = block.deconv.forward(pass, h)?;
            h = block.bn.forward(pass, h, &mut trace)?;
            h = pass.tape.relu(h);
            if self.plan.tap_layers.contains(&j) {
                taps.push(h);
            }
            let enc = feats[self.plan.mirror(j)];
            h = match self.skips[j] {
                SkipKind::None => h,
                SkipKind::Concat => pass.tape.concat_channels(h, enc)?,
                SkipKind::Residual => {
                    let block = self.residual[j].as_ref().expect("residual block built for residual skip");
                    let r = block.forward(pass, enc, &mut trace)?;
                    pass.tape.add(h, r)?
                }
            };
        }
        let out = self.output.forward(pass, h)?;
        let image = pass.tape.tanh(out);
        Ok(GenOutput {
            image,
            taps: FeatureTaps {
                source: self.role,
                vars: taps,
            },
            stats: trace,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = Vec::new();
        for b in &self.encoder {
            ids.extend(b.conv.params());
            if let Some(bn) = &b.bn {
                ids.extend(bn.params());
            }
        }
        for (b, r) in self.decoder.iter().zip(&self.residual) {
            ids.extend(b.deconv.params());
            ids.extend(b.bn.params());
            if let Some(r) = r {
                ids.extend(r.params());
            }
        }
        ids.extend(self.output.params());
        ids
    }

    /// Batchnorm layers ordered by slot.
    pub fn batch_norms(&self) -> Vec<&BatchNorm<T>> {
        let mut v: Vec<&BatchNorm<T>> = self.encoder.iter().filter_map(|b| b.bn.as_ref()).collect();
        for (b, r) in self.decoder.iter().zip(&self.residual) {
            v.push(&b.bn);
            if let Some(r) = r {
                v.push(&r.bn1);
                v.push(&r.bn2);
            }
        }
        v.sort_by_key(|bn| bn.slot);
        v
    }

    pub fn batch_norms_mut(&mut self) -> Vec<&mut BatchNorm<T>> {
        let mut v: Vec<&mut BatchNorm<T>> = self.encoder.iter_mut().filter_map(|b| b.bn.as_mut()).collect();
        for (b, r) in self.decoder.iter_mut().zip(self.residual.iter_mut()) {
            v.push(&mut b.bn);
            if let Some(r) = r {
                v.push(&mut r.bn1);
                v.push(&mut r.bn2);
            }
        }
        v.sort_by_key(|bn| bn.slot);
        v
    }

    /// Fold a train-mode pass's batch statistics into the running estimates.
    pub fn commit_stats(&mut self, stats: &StatsTrace<T>) {
        commit(self.batch_norms_mut(), stats);
    }
}

pub(crate) fn commit<T: Real>(mut bns: Vec<&mut BatchNorm<T>>, stats: &StatsTrace<T>) {
    for (slot, s) in stats {
        bns[*slot].update(s);
    }
}

/// Run the supervise net on target-style images; running stats are updated
/// in train mode.
pub fn forward_supervise<T: Real>(
    net: &mut Generator<T>,
    pass: &mut Pass<'_, T>,
    y: Var,
) -> Result<(Var, FeatureTaps), TensorError> {
    forward_role(net, pass, y, Role::Supervise)
}

/// Run the transfer net on source-style images; running stats are updated
/// in train mode.
pub fn forward_transfer<T: Real>(
    net: &mut Generator<T>,
    pass: &mut Pass<'_, T>,
    x: Var,
) -> Result<(Var, FeatureTaps), TensorError> {
    forward_role(net, pass, x, Role::Transfer)
}

fn forward_role<T: Real>(
    net: &mut Generator<T>,
    pass: &mut Pass<'_, T>,
    x: Var,
    role: Role,
) -> Result<(Var, FeatureTaps), TensorError> {
    if net.role != role {
        return Err(TensorError::Shape {
            op: "generator",
            detail: format!("expected the {role:?} network, got {:?}", net.role),
        });
    }
    let out = net.forward(pass, x)?;
    if pass.mode == Mode::Train {
        net.commit_stats(&out.stats);
    }
    Ok((out.image, out.taps))
}

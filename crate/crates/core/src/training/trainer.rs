use std::path::Path;

use super::checkpoint::{text_to_values, u64_to_words, values_to_text, words_to_u64, Checkpoint};
use super::config::{LossParts, TrainConfig};
use super::eval::{evaluate_supervise, evaluate_transfer, EvalReport};
use super::losses::{loss_adversarial_d, loss_adversarial_g, loss_reconstruct, loss_supervise};
use super::metrics::{append_csv, EpochRecord, MetricsLog, StepRecord, EPOCH_HEADER, STEP_HEADER};
use crate::error::{CheckpointError, Error, Result, TensorError};
use crate::glyph::{batch_iter, Batch, Corpus, Split};
use crate::models::{
    build_discriminator, build_supervise, build_transfer, BatchNorm, Discriminator, Generator, Mode, Pass, StatsTrace,
};
use crate::rng::Rng;
use crate::tensor::{AdamState, ParamId, ParamStore, Tape, Tensor, Var};

pub const LAST_CKPT: &str = "last.ckpt";
pub const BEST_CKPT: &str = "best.ckpt";
pub const METRICS_CSV: &str = "metrics.csv";
pub const VALIDATION_CSV: &str = "validation.csv";

/// Result of a G/A forward and backward pass, before the optimizer update.
pub struct GBackward {
    pub parts: LossParts,
    pub total: f32,
    pub stats_a: StatsTrace<f32>,
    pub stats_g: StatsTrace<f32>,
}

/// Joint trainer for the supervise net `A`, the transfer net `G` and the
/// discriminator `D`. Everything that influences future steps lives here and
/// round-trips through [`Trainer::to_checkpoint`].
pub struct Trainer {
    pub config: TrainConfig,
    pub store: ParamStore<f32>,
    pub supervise: Option<Generator<f32>>,
    pub transfer: Generator<f32>,
    pub discriminator: Option<Discriminator<f32>>,
    pub adam_a: Option<AdamState<f32>>,
    pub adam_g: AdamState<f32>,
    pub adam_d: Option<AdamState<f32>>,
    pub rng: Rng,
    pub step: u64,
    pub epoch: u64,
    pub best_val_l1: f32,
    tap_weights: Vec<f64>,
    tape: Tape<f32>,
}

fn weighted_sum(tape: &mut Tape<f32>, terms: &[(Var, f64)]) -> Result<Var, TensorError> {
    let mut total: Option<Var> = None;
    for (v, w) in terms {
        let t = tape.scale(*v, *w);
        total = Some(match total {
            None => t,
            Some(acc) => tape.add(acc, t)?,
        });
    }
    Ok(total.unwrap_or_else(|| tape.constant(Tensor::scalar(0.0))))
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let tap_weights = config.tap_weights()?;
        let mut rng = Rng::new(config.seed);
        let mut store = ParamStore::new();
        let supervise = if config.use_supervise {
            Some(build_supervise(&config.net, &mut store, &mut rng)?)
        } else {
            None
        };
        let transfer = build_transfer(&config.net, &mut store, &mut rng)?;
        let discriminator = if config.use_adversarial {
            Some(build_discriminator(&config.net, &mut store, &mut rng)?)
        } else {
            None
        };
        let adam = config.adam();
        let adam_a = supervise.as_ref().map(|a| AdamState::new(adam, a.param_ids(), &store));
        let adam_g = AdamState::new(adam, transfer.param_ids(), &store);
        let adam_d = discriminator.as_ref().map(|d| AdamState::new(adam, d.param_ids(), &store));
        Ok(Trainer {
            config,
            store,
            supervise,
            transfer,
            discriminator,
            adam_a,
            adam_g,
            adam_d,
            rng,
            step: 0,
            epoch: 0,
            best_val_l1: f32::INFINITY,
            tap_weights,
            tape: Tape::new(),
        })
    }

    /// Discriminator loss on a fresh `G(x)`; gradients are left in the store.
    pub fn d_backward(&mut self, batch: &Batch) -> Result<(f32, StatsTrace<f32>)> {
        let d = self
            .discriminator
            .as_ref()
            .ok_or_else(|| Error::Corpus("adversarial training is disabled".into()))?;
        self.tape.clear();
        let (loss, stats) = {
            let mut pass = Pass::new(&mut self.tape, &self.store, Mode::Train);
            let x = pass.tape.constant(batch.x.clone());
            let y = pass.tape.constant(batch.y.clone());
            pass.frozen = true;
            let fake = self.transfer.forward(&mut pass, x)?.image;
            pass.frozen = false;
            let (loss, _, stats) = loss_adversarial_d(d, &mut pass, x, y, fake)?;
            (loss, stats)
        };
        let value = self.tape.value(loss).item()?;
        self.tape.backward(loss, &mut self.store)?;
        Ok((value, stats))
    }

    /// One discriminator update against a fresh `G(x)`.
    pub fn d_step(&mut self, batch: &Batch) -> Result<f32> {
        let (loss, stats) = self.d_backward(batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                step: self.step + 1,
                record: format!("l_adv_d={loss}"),
            });
        }
        let d = self.discriminator.as_mut().expect("d_backward checked D exists");
        let adam = self.adam_d.as_mut().expect("adam state exists with D");
        self.store.fill_missing_grads(adam.params());
        adam.step(&mut self.store)?;
        d.commit_stats(&stats);
        Ok(loss)
    }

    /// Discriminator probabilities on `(x, y)` and on `(x, G(x))`, with `G(x)`
    /// produced as in a discriminator step and `D` run in `d_mode`.
    pub fn d_probs(&self, batch: &Batch, d_mode: Mode) -> Result<(Vec<f32>, Vec<f32>)> {
        let d = self
            .discriminator
            .as_ref()
            .ok_or_else(|| Error::Corpus("adversarial training is disabled".into()))?;
        let mut tape = Tape::new();
        let mut pass = Pass::new(&mut tape, &self.store, Mode::Train).frozen();
        let x = pass.tape.constant(batch.x.clone());
        let y = pass.tape.constant(batch.y.clone());
        let fake = self.transfer.forward(&mut pass, x)?.image;
        pass.mode = d_mode;
        let real = d.forward(&mut pass, x, y)?.prob;
        let fake = d.forward(&mut pass, x, fake)?.prob;
        Ok((tape.value(real).data().to_vec(), tape.value(fake).data().to_vec()))
    }

    /// Joint G/A loss; gradients are left in the store.
    pub fn g_backward(&mut self, batch: &Batch) -> Result<GBackward> {
        let w = self.config.g_loss_weights();
        let saturating = self.config.saturating_g_loss;
        self.tape.clear();
        let mut parts = LossParts::default();
        let (total, stats_a, stats_g) = {
            let mut pass = Pass::new(&mut self.tape, &self.store, Mode::Train);
            let x = pass.tape.constant(batch.x.clone());
            let y = pass.tape.constant(batch.y.clone());
            let g_out = self.transfer.forward(&mut pass, x)?;
            let mut terms = Vec::new();
            let mut stats_a = Vec::new();
            if let Some(a) = &self.supervise {
                let a_out = a.forward(&mut pass, y)?;
                let l_sup = loss_supervise(pass.tape, a_out.image, y)?;
                let l_rec = loss_reconstruct(pass.tape, &g_out.taps, &a_out.taps, &self.tap_weights)?;
                parts.sup = pass.tape.value(l_sup).item()?.into();
                parts.rec = pass.tape.value(l_rec).item()?.into();
                terms.push((l_sup, w.sup));
                terms.push((l_rec, w.rec));
                stats_a = a_out.stats;
            }
            if w.pixel > 0.0 {
                let l_pix = pass.tape.l1_loss(g_out.image, y)?;
                parts.pixel = pass.tape.value(l_pix).item()?.into();
                terms.push((l_pix, w.pixel));
            }
            if let Some(d) = &self.discriminator {
                // D takes part in the graph but is frozen; its batch stats are discarded.
                pass.frozen = true;
                let l_adv = loss_adversarial_g(d, &mut pass, x, g_out.image, saturating)?;
                pass.frozen = false;
                parts.adv_g = pass.tape.value(l_adv).item()?.into();
                terms.push((l_adv, w.adv));
            }
            (weighted_sum(pass.tape, &terms)?, stats_a, g_out.stats)
        };
        let value = self.tape.value(total).item()?;
        self.tape.backward(total, &mut self.store)?;
        Ok(GBackward {
            parts,
            total: value,
            stats_a,
            stats_g,
        })
    }

    /// One optimizer step: `d_steps_per_g` discriminator updates, then one
    /// joint G/A update.
    pub fn train_step(&mut self, batch: &Batch) -> Result<StepRecord> {
        let step = self.step + 1;
        let mut record = StepRecord {
            step,
            l_sup: 0.0,
            l_rec: 0.0,
            l_adv_d: 0.0,
            l_adv_g: 0.0,
            total_g: 0.0,
        };
        if self.discriminator.is_some() {
            for _ in 0..self.config.d_steps_per_g {
                record.l_adv_d = self.d_step(batch).map_err(|e| match e {
                    Error::NonFinite { .. } => Error::NonFinite {
                        step,
                        record: record.csv_line(),
                    },
                    e => e,
                })?;
            }
        }

        let g = self.g_backward(batch)?;
        record.l_sup = g.parts.sup as f32;
        record.l_rec = g.parts.rec as f32;
        record.l_adv_g = g.parts.adv_g as f32;
        record.total_g = g.total;
        if !record.is_finite() || !(g.parts.pixel.is_finite()) {
            return Err(Error::NonFinite {
                step,
                record: record.csv_line(),
            });
        }
        if let (Some(a), Some(adam)) = (self.supervise.as_mut(), self.adam_a.as_mut()) {
            self.store.fill_missing_grads(adam.params());
            adam.step(&mut self.store)?;
            a.commit_stats(&g.stats_a);
        }
        self.store.fill_missing_grads(self.adam_g.params());
        self.adam_g.step(&mut self.store)?;
        self.transfer.commit_stats(&g.stats_g);
        self.step = step;
        Ok(record)
    }

    /// The next epoch's batches, drawn from the trainer's RNG.
    pub fn epoch_batches(&mut self, corpus: &Corpus) -> Result<Vec<Batch>> {
        let (batch, augment) = (self.config.batch, self.config.augment);
        Ok(batch_iter(corpus, Split::Train, batch, &mut self.rng, augment)?.collect())
    }

    pub fn run_epoch(&mut self, corpus: &Corpus) -> Result<Vec<StepRecord>> {
        let batches = self.epoch_batches(corpus)?;
        batches.iter().map(|b| self.train_step(b)).collect()
    }

    pub fn validate(&self, corpus: &Corpus) -> Result<EvalReport> {
        evaluate_transfer(&self.transfer, &self.store, corpus, Split::Val)
    }

    pub fn validate_supervise(&self, corpus: &Corpus) -> Result<EvalReport> {
        let a = self
            .supervise
            .as_ref()
            .ok_or_else(|| Error::Corpus("the supervise net is disabled".into()))?;
        evaluate_supervise(a, &self.store, corpus, Split::Val)
    }

    /// Train until `config.epochs` epochs are done.
    pub fn fit(&mut self, corpus: &Corpus, out: Option<&Path>) -> Result<MetricsLog> {
        self.fit_until(corpus, out, self.config.epochs as u64)
    }

    /// Train until `last_epoch` epochs are done. After every epoch the
    /// validation split is scored in eval mode; with `out`, metrics are
    /// appended and `last.ckpt` (plus `best.ckpt` on a new best validation
    /// L1) is written.
    pub fn fit_until(&mut self, corpus: &Corpus, out: Option<&Path>, last_epoch: u64) -> Result<MetricsLog> {
        let size = corpus.image_size();
        if size != Some(self.config.net.image_size) {
            return Err(Error::Corpus(format!(
                "corpus image size {size:?} does not match net.image_size {}",
                self.config.net.image_size
            )));
        }
        if corpus.indices(Split::Val).is_empty() {
            return Err(Error::Corpus("the validation split is empty".into()));
        }
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
        }
        let mut log = MetricsLog::new();
        while self.epoch < last_epoch {
            let steps = self.run_epoch(corpus)?;
            self.epoch += 1;
            let report = self.validate(corpus)?;
            let val_l1 = report.l1 as f32;
            let improved = val_l1 < self.best_val_l1;
            if improved {
                self.best_val_l1 = val_l1;
            }
            let rec = EpochRecord {
                epoch: self.epoch,
                val_l1,
                val_iou: report.iou as f32,
            };
            if let Some(dir) = out {
                let lines: Vec<String> = steps.iter().map(StepRecord::csv_line).collect();
                append_csv(&dir.join(METRICS_CSV), STEP_HEADER, &lines)?;
                append_csv(&dir.join(VALIDATION_CSV), EPOCH_HEADER, &[rec.csv_line()])?;
                let ckpt = self.to_checkpoint()?;
                ckpt.save(&dir.join(LAST_CKPT))?;
                if improved {
                    ckpt.save(&dir.join(BEST_CKPT))?;
                }
            }
            log.steps.extend(steps);
            log.epochs.push(rec);
        }
        Ok(log)
    }

    fn networks(&self) -> Vec<(&'static str, Vec<&BatchNorm<f32>>, Option<&AdamState<f32>>)> {
        let mut v = Vec::new();
        if let Some(a) = &self.supervise {
            v.push(("A", a.batch_norms(), self.adam_a.as_ref()));
        }
        v.push(("G", self.transfer.batch_norms(), Some(&self.adam_g)));
        if let Some(d) = &self.discriminator {
            v.push(("D", d.batch_norms(), self.adam_d.as_ref()));
        }
        v
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new();
        c.insert("config.json", vec![self.config.to_json().len()], text_to_values(&self.config.to_json()))?;
        for id in self.store.ids() {
            let t = self.store.value(id);
            c.insert(self.store.name(id), t.shape().to_vec(), t.data().to_vec())?;
        }
        for (label, bns, adam) in self.networks() {
            for bn in bns {
                c.insert(format!("{}.running_mean", bn.name), vec![bn.running_mean.len()], bn.running_mean.clone())?;
                c.insert(format!("{}.running_var", bn.name), vec![bn.running_var.len()], bn.running_var.clone())?;
            }
            let adam = adam.expect("every network has an optimizer");
            c.insert(format!("adam.{label}.t"), vec![4], u64_to_words(adam.step))?;
            for (i, id) in adam.params().iter().enumerate() {
                let (m, v) = adam.moments(i);
                let name = self.store.name(*id);
                c.insert(format!("adam.m.{name}"), vec![m.len()], m.to_vec())?;
                c.insert(format!("adam.v.{name}"), vec![v.len()], v.to_vec())?;
            }
        }
        c.insert("state.step", vec![4], u64_to_words(self.step))?;
        c.insert("state.epoch", vec![4], u64_to_words(self.epoch))?;
        c.insert("state.best_val_l1", vec![1], vec![self.best_val_l1])?;
        let words: Vec<f32> = self.rng.state_words().into_iter().map(f32::from).collect();
        c.insert("state.rng", vec![words.len()], words)?;
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        let config = checkpoint_config(c)?;
        let mut t = Trainer::new(config)?;
        let ids: Vec<ParamId> = t.store.ids().collect();
        restore_params(c, &mut t.store, &ids)?;
        if let Some(a) = t.supervise.as_mut() {
            restore_bns(c, a.batch_norms_mut())?;
        }
        restore_bns(c, t.transfer.batch_norms_mut())?;
        if let Some(d) = t.discriminator.as_mut() {
            restore_bns(c, d.batch_norms_mut())?;
        }
        let store = &t.store;
        let adams = [("A", t.adam_a.as_mut()), ("G", Some(&mut t.adam_g)), ("D", t.adam_d.as_mut())];
        for (label, adam) in adams {
            let Some(adam) = adam else { continue };
            adam.step = read_u64(c, &format!("adam.{label}.t"))?;
            for i in 0..adam.params().len() {
                let id = adam.params()[i];
                let (name, len) = (store.name(id), store.value(id).len());
                let m = c.data(&format!("adam.m.{name}"), len)?.to_vec();
                let v = c.data(&format!("adam.v.{name}"), len)?.to_vec();
                adam.set_moments(i, m, v);
            }
        }
        t.step = read_u64(c, "state.step")?;
        t.epoch = read_u64(c, "state.epoch")?;
        t.best_val_l1 = c.data("state.best_val_l1", 1)?[0];
        let words = &c.get("state.rng")?.data;
        let words: Option<Vec<u16>> = words
            .iter()
            .map(|w| (w.fract() == 0.0 && (0.0..65536.0).contains(w)).then_some(*w as u16))
            .collect();
        t.rng = words
            .as_deref()
            .and_then(Rng::from_state_words)
            .ok_or_else(|| CheckpointError::Malformed("invalid RNG state".into()))?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.to_checkpoint()?.save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

pub fn checkpoint_config(c: &Checkpoint) -> Result<TrainConfig> {
    let text = values_to_text(&c.get("config.json")?.data)
        .ok_or_else(|| CheckpointError::Malformed("config.json is not UTF-8 text".into()))?;
    Ok(TrainConfig::from_json(&text)?)
}

fn read_u64(c: &Checkpoint, name: &str) -> Result<u64> {
    Ok(words_to_u64(c.data(name, 4)?).ok_or_else(|| CheckpointError::Mismatch {
        name: name.to_string(),
        detail: "not a 64-bit counter".into(),
    })?)
}

fn restore_params(c: &Checkpoint, store: &mut ParamStore<f32>, ids: &[ParamId]) -> Result<()> {
    for id in ids {
        let name = store.name(*id).to_string();
        let t = c.get(&name)?;
        let shape = store.value(*id).shape();
        if t.dims != shape {
            return Err(CheckpointError::Mismatch {
                name,
                detail: format!("shape {:?} in file, {:?} expected", t.dims, shape),
            }
            .into());
        }
        store.value_mut(*id).data_mut().copy_from_slice(&t.data);
    }
    Ok(())
}

fn restore_bns(c: &Checkpoint, bns: Vec<&mut BatchNorm<f32>>) -> Result<()> {
    for bn in bns {
        let n = bn.running_mean.len();
        bn.running_mean = c.data(&format!("{}.running_mean", bn.name), n)?.to_vec();
        bn.running_var = c.data(&format!("{}.running_var", bn.name), n)?.to_vec();
    }
    Ok(())
}

/// Rebuild only the transfer net from a checkpoint; supervise-net and
/// discriminator tensors are never read.
pub fn load_transfer(c: &Checkpoint) -> Result<(TrainConfig, Generator<f32>, ParamStore<f32>)> {
    let config = checkpoint_config(c)?;
    let mut store = ParamStore::new();
    let mut net = build_transfer(&config.net, &mut store, &mut Rng::new(0))?;
    let ids = net.param_ids();
    restore_params(c, &mut store, &ids)?;
    restore_bns(c, net.batch_norms_mut())?;
    Ok((config, net, store))
}

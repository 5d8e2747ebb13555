//! Dynamic tape for reverse-mode differentiation.
//!
//! Every operation appends a node holding its output value and whatever it
//! needs for the backward pass. Node order is creation order, which is a
//! topological order, so [`Tape::backward`] is a single reverse sweep.

use super::kernels::{self, BatchNormSaved};
use super::params::{ParamId, ParamStore};
use super::{numel, Real, Shape, Tensor};
use crate::error::TensorError;

/// Probability clamp used by [`Tape::bce`].
pub const BCE_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
    },
    BatchNormTrain {
        x: Var,
        gamma: Var,
        beta: Var,
        saved: BatchNormSaved<T>,
    },
    BatchNormEval {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv_std: Vec<T>,
    },
    LeakyRelu {
        x: Var,
        slope: T,
    },
    Relu {
        x: Var,
    },
    Tanh {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: T,
    },
    Sum {
        x: Var,
    },
    L1 {
        pred: Var,
        target: Var,
    },
    Bce {
        prob: Var,
        labels: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Per-channel batch statistics of a train-mode batchnorm call, used to
/// update running estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Unbiased variance.
    pub var: Vec<T>,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn shape_err(op: &'static str, detail: String) -> TensorError {
    TensorError::Shape { op, detail }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A value no gradient flows into.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A trainable parameter; backward accumulates into the store's gradient.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    /// A parameter read as a constant (frozen for this pass).
    pub fn frozen_param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.constant(store.value(id).clone())
    }

    /// Copy of `v` cut off from the graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var, TensorError> {
        let value = kernels::conv2d_forward(self.value(x), self.value(w), self.value(b).data(), stride, pad)?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(value, Op::Conv2d { x, w, b, stride, pad }, rg))
    }

    /// Transposed convolution; `w` is laid out `(in_channels, out_channels, kh, kw)`.
    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var, TensorError> {
        let value =
            kernels::conv_transpose2d_forward(self.value(x), self.value(w), self.value(b).data(), stride, pad)?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(value, Op::ConvTranspose2d { x, w, b, stride, pad }, rg))
    }

    fn check_affine(&self, x: Var, gamma: Var, beta: Var) -> Result<usize, TensorError> {
        let c = self.shape(x)[1];
        if self.value(gamma).len() != c || self.value(beta).len() != c {
            return Err(shape_err(
                "batchnorm2d",
                format!(
                    "{c} channels but gamma/beta have {}/{} entries",
                    self.value(gamma).len(),
                    self.value(beta).len()
                ),
            ));
        }
        Ok(c)
    }

    /// Batch-statistics normalization. Returns the output and the batch
    /// statistics for the caller's running-average update.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats<T>), TensorError> {
        self.check_affine(x, gamma, beta)?;
        let shape = self.shape(x);
        let (y, saved) = kernels::batchnorm_train_forward(
            self.value(x).data(),
            shape,
            self.value(gamma).data(),
            self.value(beta).data(),
            T::from_f64(eps),
        )?;
        let count = shape[0] * shape[2] * shape[3];
        let unbias = T::from_f64(count as f64 / (count as f64 - 1.0));
        let stats = BatchStats {
            mean: saved.mean.clone(),
            var: saved.var.iter().map(|v| *v * unbias).collect(),
        };
        let rg = self.rg(&[x, gamma, beta]);
        let value = Tensor::new(shape, y)?;
        Ok((
            self.push(
                value,
                Op::BatchNormTrain {
                    x,
                    gamma,
                    beta,
                    saved,
                },
                rg,
            ),
            stats,
        ))
    }

    /// Normalization with fixed (running) statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        eps: f64,
    ) -> Result<Var, TensorError> {
        let c = self.check_affine(x, gamma, beta)?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(shape_err("batchnorm2d", "running statistics length mismatch".into()));
        }
        let shape = self.shape(x);
        let plane = shape[2] * shape[3];
        let eps = T::from_f64(eps);
        let inv_std: Vec<T> = running_var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();
        let xd = self.value(x).data();
        let xhat: Vec<T> = xd
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let ci = (i / plane) % c;
                (*v - running_mean[ci]) * inv_std[ci]
            })
            .collect();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let y: Vec<T> = xhat
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let ci = (i / plane) % c;
                g[ci] * *v + b[ci]
            })
            .collect();
        let rg = self.rg(&[x, gamma, beta]);
        let value = Tensor::new(shape, y)?;
        Ok(self.push(
            value,
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    fn map(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let src = self.value(x);
        let value = Tensor::new(src.shape(), src.data().iter().map(|v| f(*v)).collect())
            .expect("elementwise map keeps shape");
        let rg = self.rg(&[x]);
        self.push(value, op, rg)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::from_f64(slope);
        self.map(x, Op::LeakyRelu { x, slope: s }, |v| if v > T::zero() { v } else { v * s })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu { x }, |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh { x }, |v| v.tanh())
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid { x }, |v| {
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        })
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let f = T::from_f64(factor);
        self.map(x, Op::Scale { x, factor: f }, |v| v * f)
    }

    /// Channel concatenation `[a, b]`.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let [n, ca, h, w] = self.shape(a);
        let [nb, cb, hb, wb] = self.shape(b);
        if (n, h, w) != (nb, hb, wb) {
            return Err(shape_err(
                "concat_channels",
                format!("{:?} and {:?} differ outside the channel axis", self.shape(a), self.shape(b)),
            ));
        }
        let plane = h * w;
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(n * (ca + cb) * plane);
        for s in 0..n {
            data.extend_from_slice(&ad[s * ca * plane..(s + 1) * ca * plane]);
            data.extend_from_slice(&bd[s * cb * plane..(s + 1) * cb * plane]);
        }
        let value = Tensor::new([n, ca + cb, h, w], data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Concat { a, b }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    fn zip(&mut self, op_name: &'static str, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var, TensorError> {
        let shape = self.same_shape(op_name, a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor::new(shape, data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip("add", a, b, Op::Add { a, b }, |x, y| x + y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.zip("mul", a, b, Op::Mul { a, b }, |x, y| x * y)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |a, v| a + *v);
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// Mean absolute difference. No gradient flows into `target`.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var, TensorError> {
        self.same_shape("l1_loss", pred, target)?;
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let total = p.iter().zip(t).fold(T::zero(), |a, (x, y)| a + (*x - *y).abs());
        let mean = total / T::from_f64(p.len().max(1) as f64);
        let rg = self.rg(&[pred]);
        Ok(self.push(Tensor::scalar(mean), Op::L1 { pred, target }, rg))
    }

    /// Mean binary cross-entropy of probabilities against 0/1 labels, with
    /// probabilities clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]`.
    pub fn bce(&mut self, prob: Var, labels: &[T]) -> Result<Var, TensorError> {
        let p = self.value(prob).data();
        if p.len() != labels.len() {
            return Err(shape_err(
                "bce_loss",
                format!("{} probabilities for {} labels", p.len(), labels.len()),
            ));
        }
        let lo = T::from_f64(BCE_CLAMP);
        let hi = T::one() - lo;
        let total = p.iter().zip(labels).fold(T::zero(), |a, (pv, y)| {
            let pc = pv.max(lo).min(hi);
            a - (*y * pc.ln() + (T::one() - *y) * (T::one() - pc).ln())
        });
        let mean = total / T::from_f64(p.len().max(1) as f64);
        let rg = self.rg(&[prob]);
        Ok(self.push(
            Tensor::scalar(mean),
            Op::Bce {
                prob,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Fingerprint of every non-smooth branch taken by the recorded graph
    /// (activation signs, absolute-value signs, clamp hits). Two evaluations
    /// with equal fingerprints lie on the same smooth piece.
    pub fn kink_signature(&self) -> u64 {
        const PRIME: u64 = 0x100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |b: u8| {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        };
        for node in &self.nodes {
            match &node.op {
                Op::Relu { x } | Op::LeakyRelu { x, .. } => {
                    for v in self.value(*x).data() {
                        mix(u8::from(*v > T::zero()));
                    }
                }
                Op::L1 { pred, target } => {
                    for (p, t) in self.value(*pred).data().iter().zip(self.value(*target).data()) {
                        mix(match p.partial_cmp(t) {
                            Some(std::cmp::Ordering::Greater) => 2,
                            Some(std::cmp::Ordering::Less) => 0,
                            _ => 1,
                        });
                    }
                }
                Op::Bce { prob, .. } => {
                    let lo = T::from_f64(BCE_CLAMP);
                    for p in self.value(*prob).data() {
                        mix(u8::from(*p < lo) + 2 * u8::from(*p > T::one() - lo));
                    }
                }
                _ => {}
            }
            mix(0xff);
        }
        h
    }

    /// Reverse sweep from the scalar `loss`, accumulating parameter gradients
    /// into `store`. The tape is cleared afterwards.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<(), TensorError> {
        let shape = self.shape(loss);
        if numel(&shape) != 1 {
            return Err(TensorError::NotScalar { shape });
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backprop_node(i, g, &mut grads, store)?;
        }
        self.nodes.clear();
        Ok(())
    }

    fn send(&self, grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&g) {
                    *a = *a + *b;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    fn backprop_node(
        &self,
        i: usize,
        g: Vec<T>,
        grads: &mut [Option<Vec<T>>],
        store: &mut ParamStore<T>,
    ) -> Result<(), TensorError> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => store.accumulate_grad(*id, &g),
            Op::Conv2d { x, w, b, stride, pad } => {
                let need_x = self.requires_grad(*x);
                let (dx, dw, db) =
                    kernels::conv2d_backward(self.value(*x), self.value(*w), &g, *stride, *pad, need_x)?;
                if let Some(dx) = dx {
                    self.send(grads, *x, dx);
                }
                self.send(grads, *w, dw);
                self.send(grads, *b, db);
            }
            Op::ConvTranspose2d { x, w, b, stride, pad } => {
                let need_x = self.requires_grad(*x);
                let (dx, dw, db) =
                    kernels::conv_transpose2d_backward(self.value(*x), self.value(*w), &g, *stride, *pad, need_x)?;
                if let Some(dx) = dx {
                    self.send(grads, *x, dx);
                }
                self.send(grads, *w, dw);
                self.send(grads, *b, db);
            }
            Op::BatchNormTrain { x, gamma, beta, saved } => {
                let (dx, dg, db) =
                    kernels::batchnorm_train_backward(&g, self.shape(*x), self.value(*gamma).data(), saved);
                self.send(grads, *x, dx);
                self.send(grads, *gamma, dg);
                self.send(grads, *beta, db);
            }
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let [n, c, h, w] = self.shape(*x);
                let plane = h * w;
                let gm = self.value(*gamma).data();
                let mut dg = vec![T::zero(); c];
                let mut db = vec![T::zero(); c];
                let mut dx = vec![T::zero(); g.len()];
                for s in 0..n {
                    for ci in 0..c {
                        let off = (s * c + ci) * plane;
                        for j in off..off + plane {
                            dg[ci] = dg[ci] + g[j] * xhat[j];
                            db[ci] = db[ci] + g[j];
                            dx[j] = g[j] * gm[ci] * inv_std[ci];
                        }
                    }
                }
                self.send(grads, *x, dx);
                self.send(grads, *gamma, dg);
                self.send(grads, *beta, db);
            }
            Op::LeakyRelu { x, slope } => {
                let dx = g
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(g, v)| if *v > T::zero() { *g } else { *g * *slope })
                    .collect();
                self.send(grads, *x, dx);
            }
            Op::Relu { x } => {
                let dx = g
                    .iter()
                    .zip(self.value(*x).data())
                    .map(|(g, v)| if *v > T::zero() { *g } else { T::zero() })
                    .collect();
                self.send(grads, *x, dx);
            }
            Op::Tanh { x } => {
                let dx = g
                    .iter()
                    .zip(node.value.data())
                    .map(|(g, y)| *g * (T::one() - *y * *y))
                    .collect();
                self.send(grads, *x, dx);
            }
            Op::Sigmoid { x } => {
                let dx = g
                    .iter()
                    .zip(node.value.data())
                    .map(|(g, y)| *g * *y * (T::one() - *y))
                    .collect();
                self.send(grads, *x, dx);
            }
            Op::Concat { a, b } => {
                let [n, ca, h, w] = self.shape(*a);
                let cb = self.shape(*b)[1];
                let plane = h * w;
                let mut ga = Vec::with_capacity(n * ca * plane);
                let mut gb = Vec::with_capacity(n * cb * plane);
                for s in 0..n {
                    let base = s * (ca + cb) * plane;
                    ga.extend_from_slice(&g[base..base + ca * plane]);
                    gb.extend_from_slice(&g[base + ca * plane..base + (ca + cb) * plane]);
                }
                self.send(grads, *a, ga);
                self.send(grads, *b, gb);
            }
            Op::Add { a, b } => {
                self.send(grads, *a, g.clone());
                self.send(grads, *b, g);
            }
            Op::Mul { a, b } => {
                let da = g.iter().zip(self.value(*b).data()).map(|(g, v)| *g * *v).collect();
                let db = g.iter().zip(self.value(*a).data()).map(|(g, v)| *g * *v).collect();
                self.send(grads, *a, da);
                self.send(grads, *b, db);
            }
            Op::Scale { x, factor } => {
                self.send(grads, *x, g.iter().map(|v| *v * *factor).collect());
            }
            Op::Sum { x } => {
                self.send(grads, *x, vec![g[0]; self.value(*x).len()]);
            }
            Op::L1 { pred, target } => {
                let p = self.value(*pred).data();
                let t = self.value(*target).data();
                let k = g[0] / T::from_f64(p.len().max(1) as f64);
                let dp = p
                    .iter()
                    .zip(t)
                    .map(|(x, y)| {
                        if x > y {
                            k
                        } else if x < y {
                            -k
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                self.send(grads, *pred, dp);
            }
            Op::Bce { prob, labels } => {
                let p = self.value(*prob).data();
                let lo = T::from_f64(BCE_CLAMP);
                let hi = T::one() - lo;
                let k = g[0] / T::from_f64(p.len().max(1) as f64);
                let dp = p
                    .iter()
                    .zip(labels)
                    .map(|(pv, y)| {
                        if *pv < lo || *pv > hi {
                            T::zero()
                        } else {
                            -k * (*y / *pv - (T::one() - *y) / (T::one() - *pv))
                        }
                    })
                    .collect();
                self.send(grads, *prob, dp);
            }
        }
        Ok(())
    }
}

use crate::error::TensorError;
use crate::rng::Rng;
use crate::tensor::tape::BatchStats;
use crate::tensor::{ParamId, ParamStore, Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in every batchnorm.
    Train,
    /// Running statistics.
    Eval,
}

/// One forward evaluation: where to record ops and how to treat parameters.
pub struct Pass<'a, T: Real> {
    pub tape: &'a mut Tape<T>,
    pub store: &'a ParamStore<T>,
    pub mode: Mode,
    /// Parameters enter as constants, so no gradient reaches them.
    pub frozen: bool,
}

impl<'a, T: Real> Pass<'a, T> {
    pub fn new(tape: &'a mut Tape<T>, store: &'a ParamStore<T>, mode: Mode) -> Self {
        Pass {
            tape,
            store,
            mode,
            frozen: false,
        }
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if self.frozen {
            self.tape.frozen_param(self.store, id)
        } else {
            self.tape.param(self.store, id)
        }
    }
}

/// Batch statistics observed during a train-mode pass, keyed by batchnorm slot.
pub type StatsTrace<T> = Vec<(usize, BatchStats<T>)>;

fn normal_tensor<T: Real>(shape: [usize; 4], mean: f64, std: f64, rng: &mut Rng) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::from_f64(rng.normal(mean, std)))
}

#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub pad: usize,
    pub transposed: bool,
}

impl Conv {
    /// Weights `N(0, std)`, zero bias. Transposed weights are `(in, out, k, k)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        rng: &mut Rng,
        name: &str,
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        transposed: bool,
        std: f64,
    ) -> Self {
        let wshape = if transposed {
            [in_c, out_c, kernel, kernel]
        } else {
            [out_c, in_c, kernel, kernel]
        };
        let weight = store.add(format!("{name}.weight"), normal_tensor(wshape, 0.0, std, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros([1, out_c, 1, 1]));
        Conv {
            weight,
            bias,
            stride,
            pad,
            transposed,
        }
    }

    pub fn forward<T: Real>(&self, pass: &mut Pass<'_, T>, x: Var) -> Result<Var, TensorError> {
        let w = pass.param(self.weight);
        let b = pass.param(self.bias);
        if self.transposed {
            pass.tape.conv_transpose2d(x, w, b, self.stride, self.pad)
        } else {
            pass.tape.conv2d(x, w, b, self.stride, self.pad)
        }
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm<T> {
    pub name: String,
    pub slot: usize,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: f64,
    pub momentum: f64,
}

impl<T: Real> BatchNorm<T> {
    /// `gamma ~ N(1, std)`, zero beta, running stats at (0, 1).
    pub fn new(store: &mut ParamStore<T>, rng: &mut Rng, name: &str, slot: usize, channels: usize, spec: BnSpec) -> Self {
        let gamma = store.add(
            format!("{name}.gamma"),
            normal_tensor([1, channels, 1, 1], 1.0, spec.init_std, rng),
        );
        let beta = store.add(format!("{name}.beta"), Tensor::zeros([1, channels, 1, 1]));
        BatchNorm {
            name: name.to_string(),
            slot,
            gamma,
            beta,
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: spec.eps,
            momentum: spec.momentum,
        }
    }

    pub fn forward(&self, pass: &mut Pass<'_, T>, x: Var, trace: &mut StatsTrace<T>) -> Result<Var, TensorError> {
        let g = pass.param(self.gamma);
        let b = pass.param(self.beta);
        match pass.mode {
            Mode::Train => {
                let (y, stats) = pass.tape.batchnorm_train(x, g, b, self.eps)?;
                trace.push((self.slot, stats));
                Ok(y)
            }
            Mode::Eval => pass
                .tape
                .batchnorm_eval(x, g, b, &self.running_mean, &self.running_var, self.eps),
        }
    }

    /// `running ← (1 − momentum)·running + momentum·batch`.
    pub fn update(&mut self, stats: &BatchStats<T>) {
        let m = T::from_f64(self.momentum);
        let keep = T::one() - m;
        for (r, s) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = keep * *r + m * *s;
        }
        for (r, s) in self.running_var.iter_mut().zip(&stats.var) {
            *r = keep * *r + m * *s;
        }
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.gamma, self.beta]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BnSpec {
    pub eps: f64,
    pub momentum: f64,
    pub init_std: f64,
}

/// `out = x + BN(conv3x3(ReLU(BN(conv3x3(x)))))`, channel-preserving.
#[derive(Clone, Debug)]
pub struct ResidualBlock<T> {
    pub conv1: Conv,
    pub bn1: BatchNorm<T>,
    pub conv2: Conv,
    pub bn2: BatchNorm<T>,
}

impl<T: Real> ResidualBlock<T> {
    pub fn new(store: &mut ParamStore<T>, rng: &mut Rng, name: &str, slots: &mut usize, channels: usize, spec: BnSpec) -> Self {
        let conv1 = Conv::new(store, rng, &format!("{name}.conv1"), channels, channels, 3, 1, 1, false, spec.init_std);
        let bn1 = BatchNorm::new(store, rng, &format!("{name}.bn1"), next(slots), channels, spec);
        let conv2 = Conv::new(store, rng, &format!("{name}.conv2"), channels, channels, 3, 1, 1, false, spec.init_std);
        let bn2 = BatchNorm::new(store, rng, &format!("{name}.bn2"), next(slots), channels, spec);
        ResidualBlock { conv1, bn1, conv2, bn2 }
    }

    pub fn forward(&self, pass: &mut Pass<'_, T>, x: Var, trace: &mut StatsTrace<T>) -> Result<Var, TensorError> {
        let h = self.conv1.forward(pass, x)?;
        let h = self.bn1.forward(pass, h, trace)?;
        let h = pass.tape.relu(h);
        let h = self.conv2.forward(pass, h)?;
        let h = self.bn2.forward(pass, h, trace)?;
        pass.tape.add(x, h)
    }

    pub fn params(&self) -> Vec<ParamId> {
        [self.conv1.params(), self.bn1.params(), self.conv2.params(), self.bn2.params()].concat()
    }
}

pub(crate) fn next(slots: &mut usize) -> usize {
    *slots += 1;
    *slots - 1
}

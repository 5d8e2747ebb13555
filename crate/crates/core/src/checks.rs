//! Finite-difference checks of every differentiable op and of tiny
//! instances of the networks, in 64-bit.

use crate::error::{Result, TensorError};
use crate::models::{build_discriminator, build_supervise, build_transfer, layers, Mode, NetConfig, Pass};
use crate::rng::Rng;
use crate::tensor::{gradcheck::FD_STEP, grad_check_with_step, GradCheckReport, ParamId, ParamStore, Tape, Tensor, Var};
use crate::training::{loss_adversarial_g, loss_reconstruct, loss_supervise};

#[derive(Clone, Debug)]
pub struct CheckCase {
    pub name: String,
    pub report: GradCheckReport,
}

/// Values in `±[lo, hi]`, kept away from zero so activation kinks are rare.
fn away_from_zero(shape: [usize; 4], lo: f64, hi: f64, rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = lo + (hi - lo) * rng.uniform();
        if rng.bernoulli(0.5) {
            m
        } else {
            -m
        }
    })
}

fn normal(shape: [usize; 4], std: f64, rng: &mut Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.normal(0.0, std))
}

/// `Σ r ⊙ v` for a fixed random `r`, so every output element matters.
fn project(tape: &mut Tape<f64>, v: Var, seed: u64) -> Result<Var, TensorError> {
    let mut rng = Rng::with_stream(seed, 99);
    let r = tape.constant(normal(tape.shape(v), 1.0, &mut rng));
    let m = tape.mul(v, r)?;
    Ok(tape.sum(m))
}

struct Case {
    store: ParamStore<f64>,
    params: Vec<ParamId>,
    step: f64,
}

impl Case {
    fn new(step: f64) -> Self {
        Case {
            store: ParamStore::new(),
            params: Vec::new(),
            step,
        }
    }

    fn add(&mut self, name: &str, t: Tensor<f64>) -> ParamId {
        let id = self.store.add(name, t);
        self.params.push(id);
        id
    }

    fn run<F>(mut self, name: &str, tol: f64, build: F) -> Result<CheckCase>
    where
        F: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var, TensorError>,
    {
        let report = grad_check_with_step(&mut self.store, &self.params, build, tol, self.step)?;
        Ok(CheckCase {
            name: name.to_string(),
            report,
        })
    }
}

fn unary(name: &str, tol: f64, step: f64, seed: u64, f: fn(&mut Tape<f64>, Var) -> Var) -> Result<CheckCase> {
    let mut rng = Rng::new(seed);
    let mut c = Case::new(step);
    let x = c.add("x", away_from_zero([2, 2, 3, 3], 0.05, 1.5, &mut rng));
    c.run(name, tol, move |t, s| {
        let xv = t.param(s, x);
        let y = f(t, xv);
        project(t, y, seed)
    })
}

fn tiny_net(size: usize) -> NetConfig {
    NetConfig {
        base_width: 2,
        width_cap: 4,
        init_std: 0.5,
        ..NetConfig::for_size(size)
    }
}

/// Run every check. `size` is the image side of the composite networks.
pub fn gradcheck_suite(size: usize, tol: f64) -> Result<Vec<CheckCase>> {
    gradcheck_suite_with_step(size, tol, FD_STEP)
}

/// [`gradcheck_suite`] with an explicit finite-difference step.
pub fn gradcheck_suite_with_step(size: usize, tol: f64, step: f64) -> Result<Vec<CheckCase>> {
    let mut out = Vec::new();

    let mut rng = Rng::new(1);
    let mut c = Case::new(step);
    let x = c.add("x", normal([2, 2, 5, 5], 1.0, &mut rng));
    let w = c.add("w", normal([3, 2, 3, 3], 0.5, &mut rng));
    let b = c.add("b", normal([1, 3, 1, 1], 0.5, &mut rng));
    out.push(c.run("conv2d", tol, |t, s| {
        let (xv, wv, bv) = (t.param(s, x), t.param(s, w), t.param(s, b));
        let y = t.conv2d(xv, wv, bv, 2, 1)?;
        project(t, y, 1)
    })?);

    let mut c = Case::new(step);
    let x = c.add("x", normal([2, 3, 3, 3], 1.0, &mut rng));
    let w = c.add("w", normal([3, 2, 4, 4], 0.5, &mut rng));
    let b = c.add("b", normal([1, 2, 1, 1], 0.5, &mut rng));
    out.push(c.run("conv_transpose2d", tol, |t, s| {
        let (xv, wv, bv) = (t.param(s, x), t.param(s, w), t.param(s, b));
        let y = t.conv_transpose2d(xv, wv, bv, 2, 1)?;
        project(t, y, 2)
    })?);

    let mut c = Case::new(step);
    let x = c.add("x", normal([3, 2, 3, 3], 1.0, &mut rng));
    let g = c.add("gamma", away_from_zero([1, 2, 1, 1], 0.5, 1.5, &mut rng));
    let be = c.add("beta", normal([1, 2, 1, 1], 0.5, &mut rng));
    out.push(c.run("batchnorm_train", tol, |t, s| {
        let (xv, gv, bv) = (t.param(s, x), t.param(s, g), t.param(s, be));
        let (y, _) = t.batchnorm_train(xv, gv, bv, 1e-5)?;
        project(t, y, 3)
    })?);

    let mut c = Case::new(step);
    let x = c.add("x", normal([2, 2, 3, 3], 1.0, &mut rng));
    let g = c.add("gamma", away_from_zero([1, 2, 1, 1], 0.5, 1.5, &mut rng));
    let be = c.add("beta", normal([1, 2, 1, 1], 0.5, &mut rng));
    out.push(c.run("batchnorm_eval", tol, |t, s| {
        let (xv, gv, bv) = (t.param(s, x), t.param(s, g), t.param(s, be));
        let y = t.batchnorm_eval(xv, gv, bv, &[0.3, -0.2], &[1.5, 0.7], 1e-5)?;
        project(t, y, 4)
    })?);

    out.push(unary("leaky_relu", tol, step, 5, |t, x| t.leaky_relu(x, 0.2))?);
    out.push(unary("relu", tol, step, 6, |t, x| t.relu(x))?);
    out.push(unary("tanh", tol, step, 7, |t, x| t.tanh(x))?);
    out.push(unary("sigmoid", tol, step, 8, |t, x| t.sigmoid(x))?);
    out.push(unary("scale", tol, step, 9, |t, x| t.scale(x, -1.7))?);

    let mut c = Case::new(step);
    let a = c.add("a", normal([2, 1, 3, 3], 1.0, &mut rng));
    let b = c.add("b", normal([2, 2, 3, 3], 1.0, &mut rng));
    out.push(c.run("concat_channels", tol, |t, s| {
        let (av, bv) = (t.param(s, a), t.param(s, b));
        let y = t.concat_channels(av, bv)?;
        project(t, y, 10)
    })?);

    let mut c = Case::new(step);
    let a = c.add("a", normal([2, 2, 3, 3], 1.0, &mut rng));
    let b = c.add("b", normal([2, 2, 3, 3], 1.0, &mut rng));
    out.push(c.run("add", tol, |t, s| {
        let (av, bv) = (t.param(s, a), t.param(s, b));
        let y = t.add(av, bv)?;
        project(t, y, 11)
    })?);

    let mut c = Case::new(step);
    let a = c.add("a", normal([2, 2, 3, 3], 1.0, &mut rng));
    let b = c.add("b", normal([2, 2, 3, 3], 1.0, &mut rng));
    out.push(c.run("mul", tol, |t, s| {
        let (av, bv) = (t.param(s, a), t.param(s, b));
        let y = t.mul(av, bv)?;
        let sq = t.mul(y, y)?;
        Ok(t.sum(sq))
    })?);

    let mut c = Case::new(step);
    let a = c.add("a", normal([2, 2, 3, 3], 1.0, &mut rng));
    out.push(c.run("sum", tol, |t, s| {
        let av = t.param(s, a);
        let sq = t.mul(av, av)?;
        Ok(t.sum(sq))
    })?);

    let mut c = Case::new(step);
    let p = c.add("pred", away_from_zero([2, 1, 4, 4], 0.1, 1.0, &mut rng));
    out.push(c.run("l1_loss", tol, |t, s| {
        let pv = t.param(s, p);
        let target = t.constant(Tensor::zeros([2, 1, 4, 4]));
        t.l1_loss(pv, target)
    })?);

    let mut c = Case::new(step);
    let p = c.add("prob", Tensor::from_fn([4, 1, 1, 1], |i| 0.15 + 0.2 * i as f64));
    out.push(c.run("bce_loss", tol, |t, s| {
        let pv = t.param(s, p);
        t.bce(pv, &[1.0, 0.0, 1.0, 0.0])
    })?);

    let spec = layers::BnSpec {
        eps: 1e-5,
        momentum: 0.1,
        init_std: 0.5,
    };
    let mut store = ParamStore::new();
    let block = layers::ResidualBlock::new(&mut store, &mut Rng::new(12), "res", &mut 0, 2, spec);
    let c = Case {
        params: block.params(),
        store,
        step,
    };
    let xin = normal([2, 2, 3, 3], 1.0, &mut rng);
    out.push(c.run("residual_block", tol, |t, s| {
        let mut pass = Pass::new(t, s, Mode::Train);
        let xv = pass.tape.constant(xin.clone());
        let y = block.forward(&mut pass, xv, &mut Vec::new())?;
        project(pass.tape, y, 12)
    })?);

    let cfg = tiny_net(size);
    let x_img = away_from_zero([2, 1, size, size], 0.2, 1.0, &mut rng);
    let y_img = away_from_zero([2, 1, size, size], 0.2, 1.0, &mut rng);

    for (name, supervise) in [("transfer_net", false), ("supervise_net", true)] {
        let mut store = ParamStore::new();
        let mut r = Rng::new(13);
        let net = if supervise {
            build_supervise(&cfg, &mut store, &mut r)?
        } else {
            build_transfer(&cfg, &mut store, &mut r)?
        };
        let c = Case {
            params: net.param_ids(),
            store,
            step,
        };
        out.push(c.run(name, tol, |t, s| {
            let mut pass = Pass::new(t, s, Mode::Train);
            let xv = pass.tape.constant(x_img.clone());
            let o = net.forward(&mut pass, xv)?;
            let mut total = project(pass.tape, o.image, 14)?;
            for (k, tap) in o.taps.vars.iter().enumerate() {
                let p = project(pass.tape, *tap, 15 + k as u64)?;
                total = pass.tape.add(total, p)?;
            }
            Ok(total)
        })?);
    }

    let mut store = ParamStore::new();
    let d = build_discriminator(&cfg, &mut store, &mut Rng::new(20))?;
    let c = Case {
        params: d.param_ids(),
        store,
        step,
    };
    out.push(c.run("discriminator", tol, |t, s| {
        let mut pass = Pass::new(t, s, Mode::Train);
        let xv = pass.tape.constant(x_img.clone());
        let yv = pass.tape.constant(y_img.clone());
        let o = d.forward(&mut pass, xv, yv)?;
        pass.tape.bce(o.prob, &[1.0, 0.0])
    })?);

    // Joint generator objective over G's parameters. A's taps are detached
    // inside the objective, so A is checked through its own loss above.
    let mut store = ParamStore::new();
    let mut r = Rng::new(21);
    let a = build_supervise(&cfg, &mut store, &mut r)?;
    let g = build_transfer(&cfg, &mut store, &mut r)?;
    let d = build_discriminator(&cfg, &mut store, &mut r)?;
    let k = g.plan().num_taps();
    let c = Case {
        params: g.param_ids(),
        store,
        step,
    };
    out.push(c.run("generator_objective", tol, |t, s| {
        let mut pass = Pass::new(t, s, Mode::Train);
        let xv = pass.tape.constant(x_img.clone());
        let yv = pass.tape.constant(y_img.clone());
        let ao = a.forward(&mut pass, yv)?;
        let go = g.forward(&mut pass, xv)?;
        let l_sup = loss_supervise(pass.tape, ao.image, yv)?;
        let l_rec = loss_reconstruct(pass.tape, &go.taps, &ao.taps, &vec![1.0; k])?;
        pass.frozen = true;
        let l_adv = loss_adversarial_g(&d, &mut pass, xv, go.image, false)?;
        let total = pass.tape.add(l_sup, l_rec)?;
        pass.tape.add(total, l_adv)
    })?);

    Ok(out)
}

//! Loss terms built on the tape. All reductions are means.

use crate::error::TensorError;
use crate::models::{Discriminator, FeatureTaps, Pass, StatsTrace};
use crate::tensor::{Real, Tape, Var};

/// `mean |recon − y|`.
pub fn loss_supervise<T: Real>(tape: &mut Tape<T>, recon: Var, y: Var) -> Result<Var, TensorError> {
    tape.l1_loss(recon, y)
}

/// `Σ_j λ_j · mean |t_j − s_j|`, with the supervise taps detached.
pub fn loss_reconstruct<T: Real>(
    tape: &mut Tape<T>,
    transfer: &FeatureTaps,
    supervise: &FeatureTaps,
    lambda_j: &[f64],
) -> Result<Var, TensorError> {
    let k = transfer.len();
    if supervise.len() != k || lambda_j.len() != k || k == 0 {
        return Err(TensorError::Shape {
            op: "loss_reconstruct",
            detail: format!(
                "{} transfer taps, {} supervise taps, {} weights",
                k,
                supervise.len(),
                lambda_j.len()
            ),
        });
    }
    let mut total = None;
    for ((t, s), w) in transfer.vars.iter().zip(&supervise.vars).zip(lambda_j) {
        let s = tape.detach(*s);
        let l = tape.l1_loss(*t, s)?;
        let l = tape.scale(l, *w);
        total = Some(match total {
            None => l,
            Some(acc) => tape.add(acc, l)?,
        });
    }
    Ok(total.expect("k > 0"))
}

/// `bce(D(x, y_real), 1) + bce(D(x, y_fake), 0)`. `y_fake` is detached here,
/// so only discriminator parameters receive gradient. Returns the loss, the
/// two probability tensors and the batch statistics of both passes.
pub fn loss_adversarial_d<T: Real>(
    d: &Discriminator<T>,
    pass: &mut Pass<'_, T>,
    x: Var,
    y_real: Var,
    y_fake: Var,
) -> Result<(Var, [Var; 2], StatsTrace<T>), TensorError> {
    let n = pass.tape.shape(x)[0];
    let fake = pass.tape.detach(y_fake);
    let real_out = d.forward(pass, x, y_real)?;
    let fake_out = d.forward(pass, x, fake)?;
    let l_real = pass.tape.bce(real_out.prob, &vec![T::one(); n])?;
    let l_fake = pass.tape.bce(fake_out.prob, &vec![T::zero(); n])?;
    let loss = pass.tape.add(l_real, l_fake)?;
    let mut stats = real_out.stats;
    stats.extend(fake_out.stats);
    Ok((loss, [real_out.prob, fake_out.prob], stats))
}

/// Generator adversarial term. Non-saturating `bce(D(x, y_fake), 1)` by
/// default; `saturating` gives the literal `log(1 − D(x, y_fake))`. The pass
/// should be frozen so the discriminator receives no gradient.
pub fn loss_adversarial_g<T: Real>(
    d: &Discriminator<T>,
    pass: &mut Pass<'_, T>,
    x: Var,
    y_fake: Var,
    saturating: bool,
) -> Result<Var, TensorError> {
    let n = pass.tape.shape(x)[0];
    let out = d.forward(pass, x, y_fake)?;
    if saturating {
        let l = pass.tape.bce(out.prob, &vec![T::zero(); n])?;
        Ok(pass.tape.scale(l, -1.0))
    } else {
        pass.tape.bce(out.prob, &vec![T::one(); n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Role;
    use crate::tensor::Tensor;

    fn taps(tape: &mut Tape<f64>, values: &[f64], source: Role) -> FeatureTaps {
        FeatureTaps {
            source,
            vars: values.iter().map(|v| tape.constant(Tensor::full([1, 2, 2, 2], *v))).collect(),
        }
    }

    #[test]
    fn reconstruct_is_linear_in_the_weights() {
        let mut tape = Tape::<f64>::new();
        let t = taps(&mut tape, &[0.5, 0.25], Role::Transfer);
        let s = taps(&mut tape, &[0.0, 0.0], Role::Supervise);
        let l = loss_reconstruct(&mut tape, &t, &s, &[1.0, 1.0]).unwrap();
        assert!((tape.value(l).item().unwrap() - 0.75).abs() < 1e-12);
        let l2 = loss_reconstruct(&mut tape, &t, &s, &[2.0, 2.0]).unwrap();
        assert!((tape.value(l2).item().unwrap() - 1.5).abs() < 1e-12);
        let same = loss_reconstruct(&mut tape, &t, &t, &[1.0, 1.0]).unwrap();
        assert_eq!(tape.value(same).item().unwrap(), 0.0);
        assert!(loss_reconstruct(&mut tape, &t, &s, &[1.0]).is_err());
    }

    #[test]
    fn supervise_of_negation_is_two() {
        let mut tape = Tape::<f64>::new();
        let y = tape.constant(Tensor::from_fn([2, 1, 4, 4], |i| if i % 3 == 0 { 1.0 } else { -1.0 }));
        let neg = tape.scale(y, -1.0);
        let l = loss_supervise(&mut tape, neg, y).unwrap();
        assert!((tape.value(l).item().unwrap() - 2.0).abs() < 1e-12);
    }
}

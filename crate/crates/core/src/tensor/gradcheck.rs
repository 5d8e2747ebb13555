//! Central finite-difference verification of tape gradients (64-bit).

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::TensorError;

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-3;

/// Gradients smaller than this are compared absolutely rather than relatively,
/// so analytically-zero entries are not judged on rounding noise.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tol: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates whose ±step stencil crosses a non-differentiable point
    /// (activation or absolute-value sign change, clamp boundary).
    pub skipped: usize,
    pub worst_rel_err: f64,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.worst_rel_err <= self.tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare the tape gradient of `build`'s scalar output against central
/// differences for every coordinate of `params`.
pub fn grad_check<F>(
    store: &mut ParamStore<f64>,
    params: &[ParamId],
    build: F,
    tol: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var, TensorError>,
{
    grad_check_with_step(store, params, build, tol, FD_STEP)
}

/// [`grad_check`] with an explicit perturbation `step`.
pub fn grad_check_with_step<F>(
    store: &mut ParamStore<f64>,
    params: &[ParamId],
    mut build: F,
    tol: f64,
    step: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var, TensorError>,
{
    store.zero_all_grads();
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    let base_sig = tape.kink_signature();
    tape.backward(loss, store)?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|id| {
            store
                .grad(*id)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; store.value(*id).len()])
        })
        .collect();
    store.zero_all_grads();

    let mut eval = |store: &ParamStore<f64>| -> Result<(f64, u64), TensorError> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, store)?;
        Ok((tape.value(loss).item()?, tape.kink_signature()))
    };

    let mut report = GradCheckReport {
        tol,
        checked: 0,
        skipped: 0,
        worst_rel_err: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for (pi, id) in params.iter().enumerate() {
        for j in 0..store.value(*id).len() {
            let orig = store.value(*id).data()[j];
            store.value_mut(*id).data_mut()[j] = orig + step;
            let (up, sig_up) = eval(store)?;
            store.value_mut(*id).data_mut()[j] = orig - step;
            let (down, sig_down) = eval(store)?;
            store.value_mut(*id).data_mut()[j] = orig;
            if sig_up != base_sig || sig_down != base_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[pi][j];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.worst_rel_err || report.worst.is_none() {
                report.worst_rel_err = err;
                report.worst = Some((store.name(*id).to_string(), j));
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

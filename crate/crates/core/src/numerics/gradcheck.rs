//! Central finite-difference verification of tape gradients.

use super::params::{Bound, ParameterSet};
use super::tape::{Tape, Var};
use crate::error::Result;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Denominator floor of the relative error, so that entries whose true
    /// gradient is tiny are compared on an absolute scale.
    pub floor: f64,
    /// Check at most this many evenly strided entries per parameter.
    pub max_entries: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: FD_STEP,
            floor: 1e-3,
            max_entries: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub set: usize,
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.max_rel_err))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() <= self.tolerance
    }

    /// Parameters whose error exceeds the tolerance.
    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.params
            .iter()
            .filter(|p| p.max_rel_err > self.tolerance)
            .collect()
    }
}

fn evaluate<F>(sets: &[ParameterSet], f: &F) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a>, &[Bound]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound: Vec<Bound> = sets.iter().map(|s| s.bind(&mut tape)).collect();
    let out = f(&mut tape, &bound)?;
    Ok(tape.scalar(out))
}

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences for every parameter of every set in `sets`.
///
/// `f` must be deterministic; parameter values are restored afterwards.
pub fn grad_check<F>(
    sets: &mut [ParameterSet],
    f: F,
    tolerance: f64,
    opts: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Tape<'a>, &[Bound]) -> Result<Var>,
{
    let analytic: Vec<Vec<_>> = {
        let mut tape = Tape::new();
        let bound: Vec<Bound> = sets.iter().map(|s| s.bind(&mut tape)).collect();
        let out = f(&mut tape, &bound)?;
        let grads = tape.backward(out);
        sets.iter()
            .zip(&bound)
            .map(|(s, b)| {
                s.ids()
                    .map(|id| grads.get_or_zeros(b.var(id), s.value(id).shape()))
                    .collect()
            })
            .collect()
    };

    let mut params = Vec::new();
    for si in 0..sets.len() {
        let ids: Vec<_> = sets[si].ids().collect();
        for (pi, id) in ids.into_iter().enumerate() {
            let len = sets[si].value(id).len();
            let stride = opts
                .max_entries
                .map_or(1, |m| len.div_ceil(m.max(1)).max(1));
            let mut check = ParamCheck {
                set: si,
                name: sets[si].name(id).to_string(),
                checked: 0,
                max_rel_err: 0.0,
                max_abs_err: 0.0,
            };
            for e in (0..len).step_by(stride) {
                let orig = sets[si].value(id).data()[e];
                sets[si].value_mut(id).data_mut()[e] = orig + opts.step;
                let plus = evaluate(sets, &f)?;
                sets[si].value_mut(id).data_mut()[e] = orig - opts.step;
                let minus = evaluate(sets, &f)?;
                sets[si].value_mut(id).data_mut()[e] = orig;

                let numeric = (plus - minus) / (2.0 * opts.step);
                let a = analytic[si][pi].data()[e];
                let abs = (a - numeric).abs();
                let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
                check.checked += 1;
                check.max_abs_err = check.max_abs_err.max(abs);
                check.max_rel_err = check.max_rel_err.max(rel);
            }
            params.push(check);
        }
    }
    Ok(GradCheckReport { tolerance, params })
}

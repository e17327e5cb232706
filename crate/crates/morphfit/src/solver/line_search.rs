//! Backtracking line search with the five step-acceptance rules.
//!
//! The step length α is halved from 1 until the trial point satisfies all
//! of
//!
//!   (a) F(𝐱_{k+1}) < 1.2·F(𝐱_k),
//!   (b) ‖𝒥(𝐱_{k+1})‖ < 1.2·‖𝒥(𝐱_k)‖,
//!   (c) det A > 0 at every quadrature point,
//!   (d) |σ|_{𝒮,∞} at the trial point < 1.2 times its current value,
//!   (e) min det A stays above 0.001 of the run's initial minimum.
//!
//! Rules (a) and (b) keep the objective and gradient from blowing up, (c)
//! forbids inversion outright, (d) prevents sudden jumps of the fitting
//! error and (e) keeps Jacobians from collapsing toward zero even while
//! staying positive.

use crate::error::{Error, Result};

/// Quantities of a trial point the acceptance rules look at.
#[derive(Debug, Clone, Copy)]
pub struct StepEval {
    pub f: f64,
    pub grad_norm: f64,
    /// |σ|_{𝒮,∞}; ignored when the criteria carry no finite reference.
    pub fit_error: f64,
    pub min_det: f64,
}

/// Reference values at the current iterate, plus the run-wide determinant
/// floor. `fit_error` set to infinity disables rule (d) for quality-only
/// runs.
#[derive(Debug, Clone, Copy)]
pub struct StepCriteria {
    pub f: f64,
    pub grad_norm: f64,
    pub fit_error: f64,
    /// 0.001·min det A(𝐱₀) of the whole run.
    pub floor_det: f64,
}

impl StepCriteria {
    /// Whether a trial point passes all five rules.
    pub fn accepts(&self, t: &StepEval) -> bool {
        t.f < 1.2 * self.f
            && t.grad_norm < 1.2 * self.grad_norm
            && t.min_det > 0.0
            && t.min_det > self.floor_det
            && (!self.fit_error.is_finite() || t.fit_error < 1.2 * self.fit_error)
    }
}

/// Halves α from 1 until `trial` yields a point the criteria accept.
/// `trial` returns None for states it cannot evaluate (tangled elements,
/// σ out of domain); those count as rejected steps. Exhausting the budget
/// is a [`Error::LineSearchFailure`].
pub fn backtrack(
    mut trial: impl FnMut(f64) -> Result<Option<StepEval>>,
    criteria: &StepCriteria,
    max_halvings: usize,
) -> Result<(f64, StepEval)> {
    let mut alpha = 1.0;
    for _ in 0..=max_halvings {
        if let Some(ev) = trial(alpha)? {
            if criteria.accepts(&ev) {
                return Ok((alpha, ev));
            }
        }
        alpha *= 0.5;
    }
    Err(Error::LineSearchFailure {
        halvings: max_halvings,
        msg: format!(
            "no step satisfied the acceptance rules (reference F = {:.6e}, ‖𝒥‖ = {:.6e})",
            criteria.f, criteria.grad_norm
        ),
    })
}

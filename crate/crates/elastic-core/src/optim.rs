//! Adam-style optimizer with an optional diminishing step-size schedule.
//!
//! The diminishing schedule `rate_k = base / (1 + k / k_decay)` satisfies the
//! Robbins-Monro conditions (sum of rates diverges, sum of squares does not),
//! which is what the convergence argument for the adaptive reward loop leans
//! on. `Constant` keeps the base rate forever.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant,
    /// `rate_k = base / (1 + k / k_decay)`, `k` counting completed steps.
    Diminishing { k_decay: f64 },
}

/// Per-parameter-vector Adam state.
///
/// beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8, with the usual bias-corrected
/// first and second moments. A zero gradient leaves parameters bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub base_rate: f64,
    pub schedule: Schedule,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// A non-finite gradient component; training cannot meaningfully continue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceError {
    pub index: usize,
    pub value: f64,
}

impl fmt::Display for DivergenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite gradient component {} at index {}", self.value, self.index)
    }
}

impl core::error::Error for DivergenceError {}

impl OptimState {
    pub fn new(param_count: usize, base_rate: f64, schedule: Schedule) -> Self {
        OptimState {
            base_rate,
            schedule,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// Step size the next `opt_step` call will use.
    pub fn rate(&self) -> f64 {
        match self.schedule {
            Schedule::Constant => self.base_rate,
            Schedule::Diminishing { k_decay } => {
                self.base_rate / (1.0 + self.step as f64 / k_decay)
            }
        }
    }
}

/// One Adam update of `params` along `-grads`.
///
/// Rejects non-finite gradient components before touching any state, so a
/// diverged loss cannot corrupt weights or moments.
pub fn opt_step(
    state: &mut OptimState,
    params: &mut [f64],
    grads: &[f64],
) -> Result<(), DivergenceError> {
    assert_eq!(params.len(), grads.len(), "opt_step length mismatch");
    assert_eq!(params.len(), state.m.len(), "opt_step state mismatch");
    for (i, &g) in grads.iter().enumerate() {
        if !g.is_finite() {
            return Err(DivergenceError { index: i, value: g });
        }
    }
    let rate = state.rate();
    state.step += 1;
    let t = state.step;
    let bc1 = 1.0 - crate::math::powi(BETA1, t as i32);
    let bc2 = 1.0 - crate::math::powi(BETA2, t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= rate * m_hat / (crate::math::sqrt(v_hat) + EPS);
    }
    Ok(())
}

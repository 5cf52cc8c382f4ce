//! Twin action-value networks with polyak-averaged target copies.
//!
//! Critics score `(obs, controls, dnorm)` where `dnorm` is the executed
//! duration rescaled to `[0, 1]`. Using the min of the two online (or
//! target) heads curbs value overestimation.

use alloc::vec::Vec;

use crate::net::{soft_update, DenseNet};

#[derive(Clone, Debug, PartialEq)]
pub struct CriticPair {
    pub q1: DenseNet,
    pub q2: DenseNet,
    pub t1: DenseNet,
    pub t2: DenseNet,
}

impl CriticPair {
    /// Targets start as exact copies of the online nets.
    pub fn new(q1: DenseNet, q2: DenseNet) -> Self {
        assert_eq!(q1.output_dim(), 1, "critics are scalar-valued");
        assert_eq!(q2.output_dim(), 1);
        assert_eq!(q1.input_dim(), q2.input_dim());
        let t1 = q1.clone();
        let t2 = q2.clone();
        CriticPair { q1, q2, t1, t2 }
    }

    pub fn input_dim(&self) -> usize {
        self.q1.input_dim()
    }

    pub fn soft_update_targets(&mut self, tau: f64) {
        soft_update(&mut self.t1, &self.q1, tau);
        soft_update(&mut self.t2, &self.q2, tau);
    }

    /// Min over the online heads; ties resolve to `q1`.
    pub fn min_q(&self, input: &[f64]) -> f64 {
        let a = self.q1.forward(input)[0];
        let b = self.q2.forward(input)[0];
        if b < a { b } else { a }
    }

    /// Min over the target heads.
    pub fn min_target_q(&self, input: &[f64]) -> f64 {
        let a = self.t1.forward(input)[0];
        let b = self.t2.forward(input)[0];
        if b < a { b } else { a }
    }
}

/// Critic input layout: observation, then the three controls, then the
/// duration feature.
pub fn critic_input(obs: &[f64], controls: &[f64; 3], dnorm: f64) -> Vec<f64> {
    let mut z = Vec::with_capacity(obs.len() + 4);
    z.extend_from_slice(obs);
    z.extend_from_slice(controls);
    z.push(dnorm);
    z
}

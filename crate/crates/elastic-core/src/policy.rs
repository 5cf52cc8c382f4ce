//! Squashed-Gaussian policy head.
//!
//! The network maps an observation to 8 values: 4 means and 4 raw log
//! standard deviations for (gas, brake, steer, duration). Controls are
//! squashed with tanh; the duration coordinate is squashed and then mapped
//! affinely onto `[d_min, d_max]`. Log probabilities carry the
//! change-of-variables correction for every squashed coordinate, including
//! the constant `ln((d_max - d_min)/2)` from the duration rescale.
//!
//! The plain path ([`PolicyHead::sample_action`]) and the tape path
//! ([`PolicyHead::sample_on_tape`]) perform the same arithmetic in the same
//! order, so given identical noise they agree bitwise. Tests rely on that.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::net::DenseNet;
use crate::tape::{GradTape, NodeId, ParamsId};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// A concrete sampled (or mean) action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledAction {
    pub controls: [f64; 3],
    pub duration: f64,
    /// `(duration - d_min) / (d_max - d_min)`, the critic's duration feature.
    pub dnorm: f64,
    pub log_prob: f64,
}

/// Tape nodes produced by the sampling subgraph.
pub struct PolicySample {
    /// `r x 3` squashed controls.
    pub controls: NodeId,
    /// `r x 1` duration feature in `[0, 1]`.
    pub dnorm: NodeId,
    /// `r x 1` log probability of the sampled action.
    pub log_prob: NodeId,
}

#[derive(Clone, Debug)]
pub struct PolicyHead {
    pub net: DenseNet,
    pub d_min: f64,
    pub d_max: f64,
}

impl PolicyHead {
    pub fn new(net: DenseNet, d_min: f64, d_max: f64) -> Self {
        assert_eq!(net.output_dim(), 8, "policy head needs 4 means + 4 log-stds");
        assert!(d_min > 0.0 && d_max > d_min, "duration range");
        PolicyHead { net, d_min, d_max }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn dnorm_of(&self, duration: f64) -> f64 {
        (duration - self.d_min) / (self.d_max - self.d_min)
    }

    /// Means and clamped log-stds for one observation.
    pub fn head_out(&self, obs: &[f64]) -> ([f64; 4], [f64; 4]) {
        let out = self.net.forward(obs);
        let mut mu = [0.0; 4];
        let mut ls = [0.0; 4];
        for i in 0..4 {
            mu[i] = out[i];
            ls[i] = out[4 + i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        (mu, ls)
    }

    /// Shared tail: squash, rescale the duration, accumulate the log prob.
    /// `fixed` switches to the 3-coordinate variant with a hard-wired
    /// duration (no duration noise, no duration jacobian).
    fn finish(&self, mu: &[f64; 4], ls: &[f64; 4], xi: &[f64; 4], fixed: Option<f64>) -> SampledAction {
        let n = if fixed.is_some() { 3 } else { 4 };
        let half_ln_tau = 0.5 * math::ln(core::f64::consts::TAU);
        let mut u = [0.0; 4];
        for i in 0..n {
            u[i] = mu[i] + math::exp(ls[i]) * xi[i];
        }
        let controls = [math::tanh(u[0]), math::tanh(u[1]), math::tanh(u[2])];
        let (duration, dnorm) = match fixed {
            Some(d) => (d, self.dnorm_of(d)),
            None => {
                let dnorm = 0.5 * (math::tanh(u[3]) + 1.0);
                (self.d_min + (self.d_max - self.d_min) * dnorm, dnorm)
            }
        };
        // Same association order as the tape path: per-coordinate terms are
        // (ls + 0.5*(xi*xi)) + C, summed left to right from 0.0.
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 0..n {
            s1 += (ls[i] + 0.5 * (xi[i] * xi[i])) + half_ln_tau;
            s2 += math::ln_one_minus_tanh_sq(u[i]);
        }
        let mut log_prob = -s1 - s2;
        if fixed.is_none() {
            log_prob += -math::ln(0.5 * (self.d_max - self.d_min));
        }
        SampledAction { controls, duration, dnorm, log_prob }
    }

    pub fn sample_action<R: Rng>(&self, obs: &[f64], rng: &mut R) -> SampledAction {
        let (mu, ls) = self.head_out(obs);
        let mut xi = [0.0; 4];
        for x in xi.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        self.finish(&mu, &ls, &xi, None)
    }

    /// Noise-free action: the squashed mean. With zero pre-activations this
    /// lands on the duration midpoint `(d_min + d_max) / 2`.
    pub fn mean_action(&self, obs: &[f64]) -> SampledAction {
        let (mu, ls) = self.head_out(obs);
        self.finish(&mu, &ls, &[0.0; 4], None)
    }

    /// Fixed-rate variant: only the three controls are sampled; the
    /// duration is supplied by the caller and carries no density term.
    pub fn sample_action_fixed<R: Rng>(&self, obs: &[f64], rng: &mut R, duration: f64) -> SampledAction {
        let (mu, ls) = self.head_out(obs);
        let mut xi = [0.0; 4];
        for x in xi.iter_mut().take(3) {
            *x = rng.sample(StandardNormal);
        }
        self.finish(&mu, &ls, &xi, Some(duration))
    }

    pub fn mean_action_fixed(&self, obs: &[f64], duration: f64) -> SampledAction {
        let (mu, ls) = self.head_out(obs);
        self.finish(&mu, &ls, &[0.0; 4], Some(duration))
    }

    /// Build the reparameterized sampling subgraph on `tape`. `x` is the
    /// `r x obs` observation batch, `xi` the `r x 4` standard-normal noise
    /// (row-major, coordinate order gas, brake, steer, duration). `pid` must
    /// be this head's registered parameters.
    pub fn sample_on_tape(&self, tape: &mut GradTape, pid: ParamsId, x: NodeId, xi: NodeId) -> PolicySample {
        let (u, ls) = self.pre_squash_on_tape(tape, pid, x, xi, 4);
        let t = tape.tanh(u);
        let controls = tape.col_slice(t, 0, 3);
        let td = tape.col_slice(t, 3, 4);
        let shifted = tape.add_const(td, 1.0);
        let dnorm = tape.scale(shifted, 0.5);
        let base = self.gauss_base_on_tape(tape, ls, xi);
        let dens = tape.ln_one_minus_tanh_sq(u);
        let jac = tape.sum_cols(dens);
        let diff = tape.sub(base, jac);
        let log_prob = tape.add_const(diff, -math::ln(0.5 * (self.d_max - self.d_min)));
        PolicySample { controls, dnorm, log_prob }
    }

    /// Fixed-rate tape variant. `xi` is `r x 3`; `dnorm` is a caller-built
    /// constant column for the hard-wired duration.
    pub fn sample_on_tape_fixed(
        &self,
        tape: &mut GradTape,
        pid: ParamsId,
        x: NodeId,
        xi: NodeId,
        dnorm: NodeId,
    ) -> PolicySample {
        let (u, ls) = self.pre_squash_on_tape(tape, pid, x, xi, 3);
        let controls = tape.tanh(u);
        let base = self.gauss_base_on_tape(tape, ls, xi);
        let dens = tape.ln_one_minus_tanh_sq(u);
        let jac = tape.sum_cols(dens);
        let log_prob = tape.sub(base, jac);
        PolicySample { controls, dnorm, log_prob }
    }

    /// `u = mu + exp(ls) * xi` over the first `n` coordinates; returns
    /// `(u, ls)` nodes, both `r x n`.
    fn pre_squash_on_tape(
        &self,
        tape: &mut GradTape,
        pid: ParamsId,
        x: NodeId,
        xi: NodeId,
        n: usize,
    ) -> (NodeId, NodeId) {
        let h = tape.forward_net(pid, x);
        let mu = tape.col_slice(h, 0, n);
        let ls_raw = tape.col_slice(h, 4, 4 + n);
        let ls = tape.clamp(ls_raw, LOG_STD_MIN, LOG_STD_MAX);
        let sig = tape.exp(ls);
        let noise = tape.mul(sig, xi);
        (tape.add(mu, noise), ls)
    }

    /// `-sum_i (ls_i + 0.5*xi_i^2 + 0.5*ln(2*pi))` as an `r x 1` node.
    fn gauss_base_on_tape(&self, tape: &mut GradTape, ls: NodeId, xi: NodeId) -> NodeId {
        let half_ln_tau = 0.5 * math::ln(core::f64::consts::TAU);
        let xi2 = tape.square(xi);
        let half_xi2 = tape.scale(xi2, 0.5);
        let per = tape.add(ls, half_xi2);
        let per_c = tape.add_const(per, half_ln_tau);
        let summed = tape.sum_cols(per_c);
        tape.neg(summed)
    }
}

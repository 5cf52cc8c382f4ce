//! Convergence diagnostic: a Lyapunov-style scalar tracked over training.
//!
//! `V = alpha_m^2 / 2 + sum_probe (Q - Q*)^2` combines the shaping
//! magnitude (which only ratchets toward its cap) with the critics'
//! distance from a Monte-Carlo estimate of the true value at a frozen set
//! of probe points. Probes are (environment snapshot, action) pairs
//! gathered once after warmup; `Q*` re-rolls the current deterministic
//! policy from each snapshot, so with a deterministic policy and
//! deterministic physics the estimate is exact up to truncation by the
//! episode step limit.
//!
//! `Q` reads the min of the two online critics, matching how values enter
//! both the actor loss and the bootstrap target.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::agent::{env_action, Agent};
use crate::critic::critic_input;
use crate::env::{Done, ElasticAction, EnvSnapshot, Environment};

#[derive(Clone, Debug)]
pub struct ProbePoint {
    pub snapshot: EnvSnapshot,
    /// Observation at the snapshot; critic input for the Q side.
    pub obs: Vec<f64>,
    pub controls: [f64; 3],
    /// Executed (snapped) duration of the probe action.
    pub duration: f64,
}

#[derive(Clone, Debug)]
pub struct LyapunovProbe {
    pub points: Vec<ProbePoint>,
    pub qstar: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovValue {
    pub total: f64,
    pub alpha_term: f64,
    pub qerr_term: f64,
}

impl LyapunovProbe {
    /// Gather `m` probe points by rolling the stochastic policy. States are
    /// taken from consecutive decision steps, spilling into fresh episodes
    /// as needed; episode seeds count up from `seed_base`.
    pub fn collect<R: Rng>(
        env: &mut Environment,
        agent: &Agent,
        m: usize,
        seed_base: u64,
        rng: &mut R,
    ) -> Self {
        assert!(m > 0, "probe needs at least one point");
        let mut points = Vec::with_capacity(m);
        let mut episode = 0u64;
        while points.len() < m {
            let mut obs = env.reset(seed_base.wrapping_add(episode)).observation;
            episode += 1;
            loop {
                let sa = agent.act(&obs, rng);
                let snapshot = env.snapshot();
                let sr = env.step(env_action(&sa));
                points.push(ProbePoint {
                    snapshot,
                    obs,
                    controls: sa.controls,
                    duration: sr.elapsed,
                });
                obs = sr.observation;
                if points.len() >= m || sr.done != Done::Running {
                    break;
                }
            }
        }
        let qstar = vec![0.0; points.len()];
        LyapunovProbe { points, qstar }
    }

    /// Re-estimate `Q*` at every probe: execute the stored action, then
    /// follow the current deterministic policy to episode end, discounting
    /// shaped rewards per decision step. Rewards are shaped with the
    /// agent's current parameters so `Q*` and `Q` share a scale.
    pub fn refresh_qstar(&mut self, env: &mut Environment, agent: &Agent) {
        for (i, p) in self.points.iter().enumerate() {
            env.restore(&p.snapshot);
            let first = env.step(ElasticAction {
                gas: p.controls[0],
                brake: p.controls[1],
                steer: p.controls[2],
                duration: p.duration,
            });
            let mut acc = agent.shaped_reward_now(first.r_t, first.elapsed);
            let mut disc = 1.0;
            let mut obs = first.observation;
            let mut done = first.done;
            while done == Done::Running {
                disc *= agent.gamma;
                let sa = agent.act_deterministic(&obs);
                let sr = env.step(env_action(&sa));
                acc += disc * agent.shaped_reward_now(sr.r_t, sr.elapsed);
                obs = sr.observation;
                done = sr.done;
            }
            self.qstar[i] = acc;
        }
    }

    /// Current Lyapunov scalar and its two terms.
    pub fn lyapunov_value(&self, agent: &Agent) -> LyapunovValue {
        let alpha_term = 0.5 * agent.reward.alpha_m * agent.reward.alpha_m;
        let mut qerr_term = 0.0;
        for (p, qs) in self.points.iter().zip(self.qstar.iter()) {
            let z = critic_input(&p.obs, &p.controls, agent.head.dnorm_of(p.duration));
            let q = agent.critics.min_q(&z);
            qerr_term += (q - qs) * (q - qs);
        }
        LyapunovValue { total: alpha_term + qerr_term, alpha_term, qerr_term }
    }
}

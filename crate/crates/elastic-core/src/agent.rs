//! The learning agent: policy head, twin critics, entropy temperature, and
//! reward shaping, with the gradient steps that tie them together.
//!
//! Three variants share the same networks and update rules and differ only
//! in reward shaping and duration handling:
//! adaptive multiplicative shaping with a learned duration (the main
//! algorithm), a linear-penalty baseline with a learned duration, and a
//! fixed-rate baseline that hard-wires the duration and trains on the raw
//! task reward.
//!
//! Update order within one gradient step: critics, then actor against the
//! freshly updated critics, then temperature against the actor's fresh log
//! probabilities. Target networks are polyak-updated by the trainer once
//! per update block, not here.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::critic::{critic_input, CriticPair};
use crate::env::ElasticAction;
use crate::math;
use crate::net::{mlp_specs, Activation, CheckpointError, DenseNet};
use crate::optim::{opt_step, DivergenceError, OptimState, Schedule};
use crate::policy::{PolicyHead, SampledAction};
use crate::replay::Transition;
use crate::reward::{seac_shape_reward, shape_reward, RewardParams};
use crate::tape::GradTape;
use crate::temp::{temperature_loss, EntropyTemp};

/// Decision rate of the fixed-rate baseline: 20 Hz.
pub const FIXED_RATE_DURATION: f64 = 1.0 / 20.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algo {
    /// Adaptive multiplicative shaping, elastic duration.
    Moseac,
    /// Linear penalty baseline `R_t - eps_pen - tau_pen * D`, elastic duration.
    SeacLinear { eps_pen: f64, tau_pen: f64 },
    /// Fixed control rate, raw task reward.
    SacFixed { duration: f64 },
}

/// Everything needed to build a fresh [`Agent`].
#[derive(Clone, Debug)]
pub struct AgentSpec {
    pub algo: Algo,
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub d_min: f64,
    pub d_max: f64,
    pub gamma: f64,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub temp_rate: f64,
    pub schedule: Schedule,
    pub init_temp: f64,
    pub target_entropy: f64,
    pub reward: RewardParams,
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec {
            algo: Algo::Moseac,
            obs_dim: crate::env::OBS_DIM,
            hidden: vec![256, 256],
            d_min: crate::env::D_MIN_DEFAULT,
            d_max: crate::env::D_MAX_DEFAULT,
            gamma: 0.99,
            actor_rate: 3e-4,
            critic_rate: 3e-4,
            temp_rate: 3e-4,
            schedule: Schedule::Diminishing { k_decay: 1e5 },
            init_temp: 0.2,
            target_entropy: -4.0,
            reward: RewardParams::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Agent {
    pub algo: Algo,
    pub head: PolicyHead,
    pub critics: CriticPair,
    pub temp: EntropyTemp,
    pub reward: RewardParams,
    pub gamma: f64,
    pub opt_actor: OptimState,
    pub opt_q1: OptimState,
    pub opt_q2: OptimState,
}

/// A materialized training batch, row-major. Rewards are already shaped.
pub struct Batch {
    pub rows: usize,
    pub obs: Vec<f64>,
    pub controls: Vec<f64>,
    pub dnorm: Vec<f64>,
    pub reward: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub done: Vec<f64>,
}

pub struct CriticLossOut {
    pub loss: f64,
    pub grad_q1: Vec<f64>,
    pub grad_q2: Vec<f64>,
}

pub struct ActorLossOut {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Per-row log probabilities of the fresh samples; the temperature
    /// update consumes these.
    pub log_probs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temp_loss: f64,
    pub temperature: f64,
    pub mean_log_prob: f64,
    pub actor_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum UpdateError {
    NonFiniteLoss { which: &'static str, value: f64 },
    Divergence { which: &'static str, inner: DivergenceError },
}

impl core::fmt::Display for UpdateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            UpdateError::NonFiniteLoss { which, value } => {
                write!(f, "{which} loss became non-finite ({value})")
            }
            UpdateError::Divergence { which, inner } => {
                write!(f, "{which} optimizer step rejected: {inner}")
            }
        }
    }
}

impl core::error::Error for UpdateError {}

/// Convert a sampled action into the environment's action type.
pub fn env_action(sa: &SampledAction) -> ElasticAction {
    ElasticAction {
        gas: sa.controls[0],
        brake: sa.controls[1],
        steer: sa.controls[2],
        duration: sa.duration,
    }
}

impl Agent {
    pub fn new<R: Rng>(spec: &AgentSpec, rng: &mut R) -> Self {
        if let Algo::SacFixed { duration } = spec.algo {
            assert!(
                duration >= spec.d_min && duration <= spec.d_max,
                "fixed duration outside the environment's range"
            );
        }
        let actor_specs = mlp_specs(spec.obs_dim, &spec.hidden, 8, Activation::Tanh, Activation::Identity);
        // Small final layer keeps early actions near the squash center.
        let actor = DenseNet::init(actor_specs, rng, Some(1e-3)).unwrap();
        let critic_specs =
            mlp_specs(spec.obs_dim + 4, &spec.hidden, 1, Activation::Tanh, Activation::Identity);
        let q1 = DenseNet::init(critic_specs.clone(), rng, None).unwrap();
        let q2 = DenseNet::init(critic_specs, rng, None).unwrap();
        let actor_params = actor.param_count();
        let critic_params = q1.param_count();
        Agent {
            algo: spec.algo,
            head: PolicyHead::new(actor, spec.d_min, spec.d_max),
            critics: CriticPair::new(q1, q2),
            temp: EntropyTemp::new(spec.init_temp, spec.target_entropy, spec.temp_rate, spec.schedule),
            reward: spec.reward,
            gamma: spec.gamma,
            opt_actor: OptimState::new(actor_params, spec.actor_rate, spec.schedule),
            opt_q1: OptimState::new(critic_params, spec.critic_rate, spec.schedule),
            opt_q2: OptimState::new(critic_params, spec.critic_rate, spec.schedule),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.head.obs_dim()
    }

    /// Stochastic action for collection.
    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> SampledAction {
        match self.algo {
            Algo::SacFixed { duration } => self.head.sample_action_fixed(obs, rng, duration),
            _ => self.head.sample_action(obs, rng),
        }
    }

    /// Mean action for evaluation.
    pub fn act_deterministic(&self, obs: &[f64]) -> SampledAction {
        match self.algo {
            Algo::SacFixed { duration } => self.head.mean_action_fixed(obs, duration),
            _ => self.head.mean_action(obs),
        }
    }

    /// Shaped reward under the current parameters.
    pub fn shaped_reward_now(&self, r_t: f64, duration: f64) -> f64 {
        match self.algo {
            Algo::Moseac => shape_reward(r_t, duration, self.head.d_min, &self.reward),
            Algo::SeacLinear { eps_pen, tau_pen } => seac_shape_reward(r_t, duration, eps_pen, tau_pen),
            Algo::SacFixed { .. } => r_t,
        }
    }

    /// Gather sampled transitions into row-major arrays, shaping rewards
    /// with the current parameters unless a literal value was stored.
    pub fn assemble_batch(&self, transitions: &[&Transition]) -> Batch {
        let rows = transitions.len();
        let obs_dim = self.obs_dim();
        let mut b = Batch {
            rows,
            obs: Vec::with_capacity(rows * obs_dim),
            controls: Vec::with_capacity(rows * 3),
            dnorm: Vec::with_capacity(rows),
            reward: Vec::with_capacity(rows),
            next_obs: Vec::with_capacity(rows * obs_dim),
            done: Vec::with_capacity(rows),
        };
        for t in transitions {
            assert_eq!(t.obs.len(), obs_dim, "transition obs width");
            assert_eq!(t.next_obs.len(), obs_dim);
            b.obs.extend_from_slice(&t.obs);
            b.controls.extend_from_slice(&t.controls);
            b.dnorm.push(self.head.dnorm_of(t.duration));
            b.reward.push(match t.shaped {
                Some(s) => s,
                None => self.shaped_reward_now(t.r_t, t.duration),
            });
            b.next_obs.extend_from_slice(&t.next_obs);
            b.done.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }

    /// Bootstrap targets `y = r + gamma * (1 - done) * (min Q' - temp * log pi')`
    /// with next actions freshly sampled from the current policy and values
    /// from the target critics. No gradient flows here.
    fn compute_targets<R: Rng>(&self, batch: &Batch, rng: &mut R) -> Vec<f64> {
        let obs_dim = self.obs_dim();
        let alpha = self.temp.temperature();
        let mut y = Vec::with_capacity(batch.rows);
        for r in 0..batch.rows {
            let next = &batch.next_obs[r * obs_dim..(r + 1) * obs_dim];
            let sa = match self.algo {
                Algo::SacFixed { duration } => self.head.sample_action_fixed(next, rng, duration),
                _ => self.head.sample_action(next, rng),
            };
            let z = critic_input(next, &sa.controls, sa.dnorm);
            let q = self.critics.min_target_q(&z);
            y.push(batch.reward[r] + self.gamma * (1.0 - batch.done[r]) * (q - alpha * sa.log_prob));
        }
        y
    }

    /// Twin-critic regression loss `mse(q1, y) + mse(q2, y)` and its
    /// gradients. `rng` drives the fresh next-action samples.
    pub fn critic_loss<R: Rng>(&self, batch: &Batch, rng: &mut R) -> CriticLossOut {
        let y = self.compute_targets(batch, rng);
        self.critic_loss_with_targets(batch, &y)
    }

    fn critic_loss_with_targets(&self, batch: &Batch, y: &[f64]) -> CriticLossOut {
        let obs_dim = self.obs_dim();
        let zdim = obs_dim + 4;
        let mut zdata = Vec::with_capacity(batch.rows * zdim);
        for r in 0..batch.rows {
            zdata.extend_from_slice(&batch.obs[r * obs_dim..(r + 1) * obs_dim]);
            zdata.extend_from_slice(&batch.controls[r * 3..(r + 1) * 3]);
            zdata.push(batch.dnorm[r]);
        }
        let mut tape = GradTape::new();
        let p1 = tape.register_params(&self.critics.q1, true);
        let p2 = tape.register_params(&self.critics.q2, true);
        let z = tape.input(batch.rows, zdim, zdata);
        let yv = tape.input(batch.rows, 1, y.to_vec());
        let q1 = tape.forward_net(p1, z);
        let e1 = tape.sub(q1, yv);
        let s1 = tape.square(e1);
        let m1 = tape.mean_all(s1);
        let q2 = tape.forward_net(p2, z);
        let e2 = tape.sub(q2, yv);
        let s2 = tape.square(e2);
        let m2 = tape.mean_all(s2);
        let loss = tape.add(m1, m2);
        let grads = tape.backward(loss);
        CriticLossOut {
            loss: tape.scalar(loss),
            grad_q1: grads.params(p1).to_vec(),
            grad_q2: grads.params(p2).to_vec(),
        }
    }

    /// Reparameterized policy loss `mean(temp * log pi - min Q)`; gradient
    /// reaches only the actor (critics are registered frozen).
    pub fn actor_loss<R: Rng>(&self, batch: &Batch, rng: &mut R) -> ActorLossOut {
        let dims = match self.algo {
            Algo::SacFixed { .. } => 3,
            _ => 4,
        };
        let mut noise = Vec::with_capacity(batch.rows * dims);
        for _ in 0..batch.rows * dims {
            let z: f64 = rng.sample(StandardNormal);
            noise.push(z);
        }
        self.actor_loss_with_noise(batch, &noise)
    }

    fn actor_loss_with_noise(&self, batch: &Batch, noise: &[f64]) -> ActorLossOut {
        let obs_dim = self.obs_dim();
        let mut tape = GradTape::new();
        let pa = tape.register_params(&self.head.net, true);
        let p1 = tape.register_params(&self.critics.q1, false);
        let p2 = tape.register_params(&self.critics.q2, false);
        let x = tape.input(batch.rows, obs_dim, batch.obs.clone());
        let sample = match self.algo {
            Algo::SacFixed { duration } => {
                let xi = tape.input(batch.rows, 3, noise.to_vec());
                let dn = tape.input(batch.rows, 1, vec![self.head.dnorm_of(duration); batch.rows]);
                self.head.sample_on_tape_fixed(&mut tape, pa, x, xi, dn)
            }
            _ => {
                let xi = tape.input(batch.rows, 4, noise.to_vec());
                self.head.sample_on_tape(&mut tape, pa, x, xi)
            }
        };
        let z = tape.col_concat(&[x, sample.controls, sample.dnorm]);
        let q1 = tape.forward_net(p1, z);
        let q2 = tape.forward_net(p2, z);
        let qmin = tape.min(q1, q2);
        let scaled = tape.scale(sample.log_prob, self.temp.temperature());
        let obj = tape.sub(scaled, qmin);
        let loss = tape.mean_all(obj);
        let grads = tape.backward(loss);
        ActorLossOut {
            loss: tape.scalar(loss),
            grad: grads.params(pa).to_vec(),
            log_probs: tape.value(sample.log_prob).data.clone(),
        }
    }

    /// One full gradient step: critics, actor, temperature. Non-finite
    /// losses or gradients abort before any further state is touched.
    pub fn update<R: Rng>(
        &mut self,
        transitions: &[&Transition],
        rng: &mut R,
    ) -> Result<UpdateStats, UpdateError> {
        let batch = self.assemble_batch(transitions);

        let c = self.critic_loss(&batch, rng);
        if !c.loss.is_finite() {
            return Err(UpdateError::NonFiniteLoss { which: "critic", value: c.loss });
        }
        opt_step(&mut self.opt_q1, self.critics.q1.weights_mut(), &c.grad_q1)
            .map_err(|inner| UpdateError::Divergence { which: "q1", inner })?;
        opt_step(&mut self.opt_q2, self.critics.q2.weights_mut(), &c.grad_q2)
            .map_err(|inner| UpdateError::Divergence { which: "q2", inner })?;

        let a = self.actor_loss(&batch, rng);
        if !a.loss.is_finite() {
            return Err(UpdateError::NonFiniteLoss { which: "actor", value: a.loss });
        }
        opt_step(&mut self.opt_actor, self.head.net.weights_mut(), &a.grad)
            .map_err(|inner| UpdateError::Divergence { which: "actor", inner })?;

        let (temp_loss, temp_grad) = temperature_loss(&self.temp, &a.log_probs);
        self.temp
            .apply_grad(temp_grad)
            .map_err(|inner| UpdateError::Divergence { which: "temperature", inner })?;

        let mut sq = 0.0;
        for g in &a.grad {
            sq += g * g;
        }
        let mut lp_acc = 0.0;
        for lp in &a.log_probs {
            lp_acc += lp;
        }
        Ok(UpdateStats {
            critic_loss: c.loss,
            actor_loss: a.loss,
            temp_loss,
            temperature: self.temp.temperature(),
            mean_log_prob: lp_acc / a.log_probs.len() as f64,
            actor_grad_norm: math::sqrt(sq),
        })
    }
}

pub const AGENT_MAGIC: &str = "ELASTIC-AGENT-1";

/// Decoded agent bundle: the five networks plus the scalar state needed to
/// act and to continue shaping.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentCheckpoint {
    pub algo: Algo,
    pub gamma: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub reward: RewardParams,
    pub log_temp: f64,
    pub target_entropy: f64,
    pub config_hash: u64,
    pub actor: DenseNet,
    pub q1: DenseNet,
    pub q2: DenseNet,
    pub t1: DenseNet,
    pub t2: DenseNet,
}

impl Agent {
    /// Serialize the agent: a line-oriented text header followed by the five
    /// network checkpoints as length-prefixed blobs.
    pub fn encode_bundle(&self, config_hash: u64) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(AGENT_MAGIC.as_bytes());
        out.push(b'\n');
        let algo_line = match self.algo {
            Algo::Moseac => "algo moseac".to_string(),
            Algo::SeacLinear { eps_pen, tau_pen } => format!("algo seac {eps_pen} {tau_pen}"),
            Algo::SacFixed { duration } => format!("algo sac_fixed {duration}"),
        };
        let push_line = |s: String, out: &mut Vec<u8>| {
            out.extend_from_slice(s.as_bytes());
            out.push(b'\n');
        };
        push_line(algo_line, &mut out);
        push_line(format!("gamma {}", self.gamma), &mut out);
        push_line(format!("d_min {}", self.head.d_min), &mut out);
        push_line(format!("d_max {}", self.head.d_max), &mut out);
        push_line(format!("alpha_m {}", self.reward.alpha_m), &mut out);
        push_line(format!("alpha_max {}", self.reward.alpha_max), &mut out);
        push_line(format!("psi {}", self.reward.psi), &mut out);
        push_line(format!("alpha_eps {}", self.reward.alpha_eps), &mut out);
        let prev = match self.reward.prev_avg_reward {
            Some(v) => format!("prev_avg {v}"),
            None => "prev_avg none".to_string(),
        };
        push_line(prev, &mut out);
        push_line(format!("log_temp {}", self.temp.log_temp), &mut out);
        push_line(format!("target_entropy {}", self.temp.target_entropy), &mut out);
        push_line(format!("config_hash {config_hash:016x}"), &mut out);
        for (name, net) in [
            ("actor", &self.head.net),
            ("q1", &self.critics.q1),
            ("q2", &self.critics.q2),
            ("t1", &self.critics.t1),
            ("t2", &self.critics.t2),
        ] {
            let blob = net.encode();
            push_line(format!("net {name} {}", blob.len()), &mut out);
            out.extend_from_slice(&blob);
            out.push(b'\n');
        }
        out
    }

    pub fn decode_bundle(bytes: &[u8]) -> Result<AgentCheckpoint, CheckpointError> {
        let mut pos = 0;
        if read_line(bytes, &mut pos)? != AGENT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let algo_line = read_line(bytes, &mut pos)?;
        let algo = parse_algo(&algo_line)?;
        let gamma = parse_kv_f64(&read_line(bytes, &mut pos)?, "gamma")?;
        let d_min = parse_kv_f64(&read_line(bytes, &mut pos)?, "d_min")?;
        let d_max = parse_kv_f64(&read_line(bytes, &mut pos)?, "d_max")?;
        let alpha_m = parse_kv_f64(&read_line(bytes, &mut pos)?, "alpha_m")?;
        let alpha_max = parse_kv_f64(&read_line(bytes, &mut pos)?, "alpha_max")?;
        let psi = parse_kv_f64(&read_line(bytes, &mut pos)?, "psi")?;
        let alpha_eps = parse_kv_f64(&read_line(bytes, &mut pos)?, "alpha_eps")?;
        let prev_line = read_line(bytes, &mut pos)?;
        let prev_val = prev_line
            .strip_prefix("prev_avg ")
            .ok_or_else(|| CheckpointError::Malformed("missing prev_avg".to_string()))?;
        let prev_avg_reward = if prev_val == "none" {
            None
        } else {
            Some(parse_f64(prev_val)?)
        };
        let log_temp = parse_kv_f64(&read_line(bytes, &mut pos)?, "log_temp")?;
        let target_entropy = parse_kv_f64(&read_line(bytes, &mut pos)?, "target_entropy")?;
        let hash_line = read_line(bytes, &mut pos)?;
        let hash_val = hash_line
            .strip_prefix("config_hash ")
            .ok_or_else(|| CheckpointError::Malformed("missing config_hash".to_string()))?;
        let config_hash = u64::from_str_radix(hash_val, 16)
            .map_err(|_| CheckpointError::Malformed("config_hash hex".to_string()))?;

        let mut nets = Vec::with_capacity(5);
        for expect in ["actor", "q1", "q2", "t1", "t2"] {
            let header = read_line(bytes, &mut pos)?;
            let rest = header
                .strip_prefix("net ")
                .ok_or_else(|| CheckpointError::Malformed(format!("missing net header for {expect}")))?;
            let mut it = rest.split_whitespace();
            let name = it.next().unwrap_or("");
            if name != expect {
                return Err(CheckpointError::Malformed(format!("net {name} where {expect} expected")));
            }
            let len: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CheckpointError::Malformed("net blob length".to_string()))?;
            let end = pos.checked_add(len).ok_or(CheckpointError::Truncated)?;
            let blob = bytes.get(pos..end).ok_or(CheckpointError::Truncated)?;
            pos = end;
            if bytes.get(pos) != Some(&b'\n') {
                return Err(CheckpointError::Malformed("net blob terminator".to_string()));
            }
            pos += 1;
            nets.push(DenseNet::decode(blob)?);
        }
        if pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes".to_string()));
        }
        let t2 = nets.pop().unwrap();
        let t1 = nets.pop().unwrap();
        let q2 = nets.pop().unwrap();
        let q1 = nets.pop().unwrap();
        let actor = nets.pop().unwrap();
        if actor.output_dim() != 8 || q1.output_dim() != 1 {
            return Err(CheckpointError::Malformed("net shapes".to_string()));
        }
        if q1.input_dim() != actor.input_dim() + 4
            || q2.specs() != q1.specs()
            || t1.specs() != q1.specs()
            || t2.specs() != q1.specs()
        {
            return Err(CheckpointError::Malformed("net shape mismatch".to_string()));
        }
        Ok(AgentCheckpoint {
            algo,
            gamma,
            d_min,
            d_max,
            reward: RewardParams { alpha_m, alpha_max, psi, alpha_eps, prev_avg_reward },
            log_temp,
            target_entropy,
            config_hash,
            actor,
            q1,
            q2,
            t1,
            t2,
        })
    }

    /// Rebuild an agent from a decoded bundle. Optimizer state is not part
    /// of the bundle; fresh optimizers are created with the given rates.
    pub fn from_checkpoint(
        ck: AgentCheckpoint,
        actor_rate: f64,
        critic_rate: f64,
        temp_rate: f64,
        schedule: Schedule,
    ) -> Agent {
        let actor_params = ck.actor.param_count();
        let critic_params = ck.q1.param_count();
        let mut temp = EntropyTemp::new(1.0, ck.target_entropy, temp_rate, schedule);
        temp.log_temp = ck.log_temp;
        Agent {
            algo: ck.algo,
            head: PolicyHead::new(ck.actor, ck.d_min, ck.d_max),
            critics: CriticPair { q1: ck.q1, q2: ck.q2, t1: ck.t1, t2: ck.t2 },
            temp,
            reward: ck.reward,
            gamma: ck.gamma,
            opt_actor: OptimState::new(actor_params, actor_rate, schedule),
            opt_q1: OptimState::new(critic_params, critic_rate, schedule),
            opt_q2: OptimState::new(critic_params, critic_rate, schedule),
        }
    }
}

fn read_line(bytes: &[u8], pos: &mut usize) -> Result<String, CheckpointError> {
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos] != b'\n' {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(CheckpointError::Truncated);
    }
    let line = core::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| CheckpointError::Malformed("non-utf8 header line".to_string()))?;
    *pos += 1;
    Ok(line.to_string())
}

fn parse_f64(s: &str) -> Result<f64, CheckpointError> {
    s.parse()
        .map_err(|_| CheckpointError::Malformed(format!("bad float {s:?}")))
}

fn parse_kv_f64(line: &str, key: &str) -> Result<f64, CheckpointError> {
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| CheckpointError::Malformed(format!("expected key {key}")))?;
    parse_f64(rest)
}

fn parse_algo(line: &str) -> Result<Algo, CheckpointError> {
    let rest = line
        .strip_prefix("algo ")
        .ok_or_else(|| CheckpointError::Malformed("missing algo line".to_string()))?;
    let mut it = rest.split_whitespace();
    match it.next() {
        Some("moseac") => Ok(Algo::Moseac),
        Some("seac") => {
            let eps_pen = parse_f64(it.next().ok_or(CheckpointError::Truncated)?)?;
            let tau_pen = parse_f64(it.next().ok_or(CheckpointError::Truncated)?)?;
            Ok(Algo::SeacLinear { eps_pen, tau_pen })
        }
        Some("sac_fixed") => {
            let duration = parse_f64(it.next().ok_or(CheckpointError::Truncated)?)?;
            Ok(Algo::SacFixed { duration })
        }
        other => Err(CheckpointError::Malformed(format!("unknown algo {other:?}"))),
    }
}

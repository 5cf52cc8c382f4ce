//! The training loop.
//!
//! Per episode: roll the stochastic policy, push transitions, accumulate
//! the reward window. From episode `k_init` on, every `k_update`-th episode
//! runs a block of `updates_per_block` gradient steps (waiting instead if
//! the buffer cannot fill a batch yet), then feeds the window average to
//! the shaping adaptation, resets the window, and polyak-updates the
//! target critics once.
//!
//! Everything is seeded through named substreams of the master seed, so a
//! run is a pure function of its config. Snapshots capture the complete
//! mutable state (networks, optimizers, buffer, window, probe, RNG
//! positions); a resumed run continues bit-identically.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use crate::agent::{env_action, Agent, AgentCheckpoint, AgentSpec, Algo, UpdateError};
use crate::env::{Done, EnvConfig, EnvSnapshot, Environment, OBS_DIM};
use crate::eval::{evaluate, EvalRecord};
use crate::net::CheckpointError;
use crate::optim::{OptimState, Schedule};
use crate::probe::{LyapunovProbe, ProbePoint};
use crate::replay::{take_f64, take_u64, take_u8, ReplayBuffer, Transition};
use crate::reward::{adapt_alpha, RewardParams};
use crate::rng::{self, RngSnapshot};
use crate::track::TrackSpec;

/// Substream purposes under the master seed.
const P_INIT: u64 = 0x696e_6974;
const P_ROLLOUT: u64 = 0x726f_6c6c;
const P_UPDATE: u64 = 0x7570_6464;
const P_PROBE: u64 = 0x7072_6f62;
const P_EVAL: u64 = 0x6576_616c;
const P_RESET: u64 = 0x7273_7464;

pub const SNAPSHOT_MAGIC: &str = "ELASTIC-SNAP-1";

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub algo: Algo,
    pub seed: u64,
    pub episodes: usize,
    /// First episode allowed to run updates.
    pub k_init: usize,
    /// Update-block cadence in episodes.
    pub k_update: usize,
    pub updates_per_block: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Target polyak factor, applied once per update block.
    pub tau_soft: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub temp_rate: f64,
    pub schedule: Schedule,
    pub init_temp: f64,
    pub target_entropy: f64,
    pub reward: RewardParams,
    /// Store shaped rewards at collection instead of reshaping on sampling.
    pub literal_reward_storage: bool,
    pub checkpoint_every: usize,
    /// Resume-snapshot cadence; 0 disables.
    pub snapshot_every: usize,
    pub probe_points: usize,
    pub qstar_refresh_every: usize,
    /// Periodic evaluation cadence; 0 disables.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Stop once an evaluation reaches this success rate; 0 never stops.
    pub stop_on_success_rate: f64,
    pub env: EnvConfig,
    /// Hash of the resolved external config; stamps checkpoints and guards
    /// snapshot resumption. In-process callers may leave it 0.
    pub config_hash: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algo: Algo::Moseac,
            seed: 0,
            episodes: 2000,
            k_init: 10,
            k_update: 1,
            updates_per_block: 64,
            batch_size: 256,
            buffer_capacity: 200_000,
            tau_soft: 0.005,
            gamma: 0.99,
            hidden: alloc::vec![256, 256],
            actor_rate: 3e-4,
            critic_rate: 3e-4,
            temp_rate: 3e-4,
            schedule: Schedule::Diminishing { k_decay: 1e5 },
            init_temp: 0.2,
            target_entropy: -4.0,
            reward: RewardParams::default(),
            literal_reward_storage: false,
            checkpoint_every: 100,
            snapshot_every: 0,
            probe_points: 32,
            qstar_refresh_every: 50,
            eval_every: 0,
            eval_episodes: 20,
            stop_on_success_rate: 0.0,
            env: EnvConfig::default(),
            config_hash: 0,
        }
    }
}

/// Shaped-reward accumulator between adaptation points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWindow {
    pub sum: f64,
    pub count: u64,
}

impl RewardWindow {
    pub fn new() -> Self {
        RewardWindow { sum: 0.0, count: 0 }
    }

    pub fn push(&mut self, shaped: f64) {
        self.sum += shaped;
        self.count += 1;
    }

    pub fn average(&self) -> f64 {
        assert!(self.count > 0, "empty reward window");
        self.sum / self.count as f64
    }

    pub fn reset(&mut self) {
        *self = RewardWindow::new();
    }
}

impl Default for RewardWindow {
    fn default() -> Self {
        RewardWindow::new()
    }
}

pub const METRICS_CSV_HEADER: &str = "episode,steps,sim_time,return_shaped,return_task,\
alpha_m,alpha_eps,temperature,critic_loss,actor_loss,grad_norm,V_lyap,V_alpha_term,V_qerr_term";

/// One per-episode metrics record. Loss fields are block averages and NaN
/// on episodes without an update block; the Lyapunov fields are NaN until
/// the probe exists.
#[derive(Clone, Copy, Debug)]
pub struct MetricsRow {
    pub episode: usize,
    pub steps: usize,
    pub sim_time: f64,
    pub return_shaped: f64,
    pub return_task: f64,
    pub alpha_m: f64,
    pub alpha_eps: f64,
    pub temperature: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub grad_norm: f64,
    pub v_lyap: f64,
    pub v_alpha_term: f64,
    pub v_qerr_term: f64,
}

/// Bit-pattern equality, so NaN placeholders compare equal and resumed
/// runs can be checked row for row.
impl PartialEq for MetricsRow {
    fn eq(&self, other: &Self) -> bool {
        let fa = [
            self.sim_time,
            self.return_shaped,
            self.return_task,
            self.alpha_m,
            self.alpha_eps,
            self.temperature,
            self.critic_loss,
            self.actor_loss,
            self.grad_norm,
            self.v_lyap,
            self.v_alpha_term,
            self.v_qerr_term,
        ];
        let fb = [
            other.sim_time,
            other.return_shaped,
            other.return_task,
            other.alpha_m,
            other.alpha_eps,
            other.temperature,
            other.critic_loss,
            other.actor_loss,
            other.grad_norm,
            other.v_lyap,
            other.v_alpha_term,
            other.v_qerr_term,
        ];
        self.episode == other.episode
            && self.steps == other.steps
            && fa.iter().zip(&fb).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for MetricsRow {}

impl MetricsRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode,
            self.steps,
            self.sim_time,
            self.return_shaped,
            self.return_task,
            self.alpha_m,
            self.alpha_eps,
            self.temperature,
            self.critic_loss,
            self.actor_loss,
            self.grad_norm,
            self.v_lyap,
            self.v_alpha_term,
            self.v_qerr_term
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    Config(String),
    Diverged { episode: usize, update: usize, source: UpdateError, diagnostics: String },
    Sink(String),
    Snapshot(CheckpointError),
    SnapshotMismatch { expected: u64, found: u64 },
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::Config(msg) => write!(f, "bad config: {msg}"),
            TrainError::Diverged { episode, update, source, diagnostics } => write!(
                f,
                "training diverged at episode {episode}, update {update}: {source} [{diagnostics}]"
            ),
            TrainError::Sink(msg) => write!(f, "sink failure: {msg}"),
            TrainError::Snapshot(e) => write!(f, "snapshot: {e}"),
            TrainError::SnapshotMismatch { expected, found } => write!(
                f,
                "snapshot was made under a different config (hash {found:016x}, expected {expected:016x})"
            ),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<CheckpointError> for TrainError {
    fn from(e: CheckpointError) -> Self {
        TrainError::Snapshot(e)
    }
}

/// Receives training artifacts as they are produced. All methods default
/// to no-ops; implementors that touch IO surface failures as
/// `TrainError::Sink`.
pub trait TrainSink {
    fn on_metrics(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        let _ = row;
        Ok(())
    }
    fn on_eval(&mut self, episode: usize, records: &[EvalRecord]) -> Result<(), TrainError> {
        let _ = (episode, records);
        Ok(())
    }
    fn on_checkpoint(&mut self, episode: usize, bundle: &[u8]) -> Result<(), TrainError> {
        let _ = (episode, bundle);
        Ok(())
    }
    fn on_snapshot(&mut self, episode: usize, snapshot: &[u8]) -> Result<(), TrainError> {
        let _ = (episode, snapshot);
        Ok(())
    }
}

pub struct NullSink;

impl TrainSink for NullSink {}

/// Collects everything in memory; tests and in-process callers use this.
#[derive(Default)]
pub struct MemorySink {
    pub rows: Vec<MetricsRow>,
    pub evals: Vec<(usize, Vec<EvalRecord>)>,
    pub checkpoints: Vec<(usize, Vec<u8>)>,
    pub snapshots: Vec<(usize, Vec<u8>)>,
}

impl TrainSink for MemorySink {
    fn on_metrics(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        self.rows.push(*row);
        Ok(())
    }
    fn on_eval(&mut self, episode: usize, records: &[EvalRecord]) -> Result<(), TrainError> {
        self.evals.push((episode, records.to_vec()));
        Ok(())
    }
    fn on_checkpoint(&mut self, episode: usize, bundle: &[u8]) -> Result<(), TrainError> {
        self.checkpoints.push((episode, bundle.to_vec()));
        Ok(())
    }
    fn on_snapshot(&mut self, episode: usize, snapshot: &[u8]) -> Result<(), TrainError> {
        self.snapshots.push((episode, snapshot.to_vec()));
        Ok(())
    }
}

pub struct ProbeState {
    pub probe: LyapunovProbe,
    /// Episode the probe was collected on; refresh cadence counts from here.
    pub birth: usize,
}

/// Mid-run state reconstructed from a snapshot.
pub struct ResumePoint {
    pub episode_next: usize,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub window: RewardWindow,
    pub probe: Option<ProbeState>,
    pub rollout_rng: ChaCha8Rng,
    pub update_rng: ChaCha8Rng,
    pub probe_rng: ChaCha8Rng,
}

pub struct TrainOutcome {
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub episodes_run: usize,
    pub early_stopped: bool,
    pub last_eval_rate: Option<f64>,
}

fn validate(cfg: &TrainConfig) -> Result<(), TrainError> {
    let bad = |msg: String| Err(TrainError::Config(msg));
    if cfg.episodes < 1 {
        return bad("episodes must be at least 1".to_string());
    }
    if cfg.k_init < 1 || cfg.k_update < 1 {
        return bad("k_init and k_update must be at least 1".to_string());
    }
    if cfg.updates_per_block < 1 || cfg.batch_size < 1 {
        return bad("updates_per_block and batch_size must be at least 1".to_string());
    }
    if cfg.buffer_capacity < cfg.batch_size {
        return bad(format!(
            "buffer_capacity {} below batch_size {}",
            cfg.buffer_capacity, cfg.batch_size
        ));
    }
    if !(cfg.tau_soft > 0.0 && cfg.tau_soft <= 1.0) {
        return bad(format!("tau_soft {} outside (0, 1]", cfg.tau_soft));
    }
    if !(0.0..1.0).contains(&cfg.gamma) {
        return bad(format!("gamma {} outside [0, 1)", cfg.gamma));
    }
    for (name, r) in [
        ("actor_rate", cfg.actor_rate),
        ("critic_rate", cfg.critic_rate),
        ("temp_rate", cfg.temp_rate),
    ] {
        if !(r.is_finite() && r > 0.0) {
            return bad(format!("{name} {r} must be positive"));
        }
    }
    if !(cfg.init_temp > 0.0) {
        return bad("init_temp must be positive".to_string());
    }
    if !(cfg.reward.psi > 0.0 && cfg.reward.alpha_m <= cfg.reward.alpha_max) {
        return bad("reward parameters out of range".to_string());
    }
    if cfg.probe_points < 1 || cfg.qstar_refresh_every < 1 {
        return bad("probe_points and qstar_refresh_every must be at least 1".to_string());
    }
    if !(0.0..=1.0).contains(&cfg.stop_on_success_rate) {
        return bad("stop_on_success_rate outside [0, 1]".to_string());
    }
    if cfg.stop_on_success_rate > 0.0 && cfg.eval_every == 0 {
        return bad("stop_on_success_rate needs eval_every > 0".to_string());
    }
    if cfg.eval_every > 0 && cfg.eval_episodes < 1 {
        return bad("eval_episodes must be at least 1".to_string());
    }
    if !(cfg.env.d_min > 0.0 && cfg.env.d_max > cfg.env.d_min) {
        return bad("environment duration range invalid".to_string());
    }
    if cfg.env.k_length < 1 {
        return bad("k_length must be at least 1".to_string());
    }
    if cfg.env.start_jitter < 0.0 {
        return bad("start_jitter must be non-negative".to_string());
    }
    if !(0.0..=1.0).contains(&cfg.env.start_spread) {
        return bad("start_spread outside [0, 1]".to_string());
    }
    if cfg.env.start_speed < 0.0 || cfg.env.start_speed > cfg.env.car.v_max {
        return bad("start_speed outside [0, v_max]".to_string());
    }
    if let Algo::SacFixed { duration } = cfg.algo {
        if !(duration >= cfg.env.d_min && duration <= cfg.env.d_max) {
            return bad(format!("fixed duration {duration} outside the duration range"));
        }
    }
    Ok(())
}

fn agent_spec(cfg: &TrainConfig) -> AgentSpec {
    AgentSpec {
        algo: cfg.algo,
        obs_dim: OBS_DIM,
        hidden: cfg.hidden.clone(),
        d_min: cfg.env.d_min,
        d_max: cfg.env.d_max,
        gamma: cfg.gamma,
        actor_rate: cfg.actor_rate,
        critic_rate: cfg.critic_rate,
        temp_rate: cfg.temp_rate,
        schedule: cfg.schedule,
        init_temp: cfg.init_temp,
        target_entropy: cfg.target_entropy,
        reward: cfg.reward,
    }
}

/// Run (or continue) training. The sink receives metrics rows, periodic
/// evaluations, agent checkpoints, and resume snapshots as configured.
pub fn run_training(
    cfg: &TrainConfig,
    track: TrackSpec,
    sink: &mut dyn TrainSink,
    resume: Option<ResumePoint>,
) -> Result<TrainOutcome, TrainError> {
    validate(cfg)?;
    // Evaluation drops the scattered-start training aids: success must mean
    // a full run from the line. Start jitter stays so eval episodes differ.
    let eval_env_config =
        EnvConfig { start_spread: 0.0, start_speed: 0.0, ..cfg.env };
    let mut eval_env = Environment::new(track.clone(), eval_env_config);
    let mut env = Environment::new(track, cfg.env);
    let eval_seed_base = rng::stream(cfg.seed, P_EVAL).next_u64();
    let reset_seed_base = rng::stream(cfg.seed, P_RESET).next_u64();
    let probe_seed_base = rng::stream(cfg.seed, P_PROBE).next_u64() ^ 0x5050_5050;

    let (mut agent, mut buffer, mut window, mut probe, mut rollout_rng, mut update_rng, mut probe_rng, start_episode) =
        match resume {
            Some(r) => (
                r.agent,
                r.buffer,
                r.window,
                r.probe,
                r.rollout_rng,
                r.update_rng,
                r.probe_rng,
                r.episode_next,
            ),
            None => (
                Agent::new(&agent_spec(cfg), &mut rng::stream(cfg.seed, P_INIT)),
                ReplayBuffer::new(cfg.buffer_capacity),
                RewardWindow::new(),
                None,
                rng::stream(cfg.seed, P_ROLLOUT),
                rng::stream(cfg.seed, P_UPDATE),
                rng::stream(cfg.seed, P_PROBE),
                1,
            ),
        };

    let mut early_stopped = false;
    let mut last_eval_rate = None;
    let mut episodes_run = start_episode.saturating_sub(1);

    for episode in start_episode..=cfg.episodes {
        episodes_run = episode;

        // Rollout.
        let mut obs = env.reset(reset_seed_base.wrapping_add(episode as u64)).observation;
        let mut steps = 0usize;
        let mut sim_time = 0.0;
        let mut return_shaped = 0.0;
        let mut return_task = 0.0;
        loop {
            let sa = agent.act(&obs, &mut rollout_rng);
            let sr = env.step(env_action(&sa));
            let shaped = agent.shaped_reward_now(sr.r_t, sr.elapsed);
            window.push(shaped);
            steps += 1;
            sim_time += sr.elapsed;
            return_shaped += shaped;
            return_task += sr.r_t;
            buffer.push(Transition {
                obs,
                controls: sa.controls,
                duration: sr.elapsed,
                r_t: sr.r_t,
                shaped: cfg.literal_reward_storage.then_some(shaped),
                next_obs: sr.observation.clone(),
                // Timeouts truncate rather than terminate: the value of the
                // cut-off state still backs up.
                done: matches!(sr.done, Done::Success | Done::OffTrack),
            });
            obs = sr.observation;
            if sr.done != Done::Running {
                break;
            }
        }

        // Update block.
        let due = episode >= cfg.k_init && (episode - cfg.k_init) % cfg.k_update == 0;
        let do_update = due && buffer.len() >= cfg.batch_size;
        let mut block_critic = f64::NAN;
        let mut block_actor = f64::NAN;
        let mut block_grad = f64::NAN;
        if do_update {
            let mut cs = 0.0;
            let mut asum = 0.0;
            let mut gsum = 0.0;
            for update in 0..cfg.updates_per_block {
                let sample = buffer.sample(cfg.batch_size, &mut update_rng);
                match agent.update(&sample, &mut update_rng) {
                    Ok(s) => {
                        cs += s.critic_loss;
                        asum += s.actor_loss;
                        gsum += s.actor_grad_norm;
                    }
                    Err(source) => {
                        let diagnostics = format!(
                            "alpha_m {} alpha_eps {} temperature {} buffer {} window_avg {}",
                            agent.reward.alpha_m,
                            agent.reward.alpha_eps,
                            agent.temp.temperature(),
                            buffer.len(),
                            window.average()
                        );
                        return Err(TrainError::Diverged { episode, update, source, diagnostics });
                    }
                }
            }
            let n = cfg.updates_per_block as f64;
            block_critic = cs / n;
            block_actor = asum / n;
            block_grad = gsum / n;

            adapt_alpha(&mut agent.reward, window.average());
            window.reset();
            agent.critics.soft_update_targets(cfg.tau_soft);
        }

        // Probe lifecycle: collect at the first update block, refresh on
        // cadence from birth.
        if probe.is_none() && do_update {
            let mut p = LyapunovProbe::collect(
                &mut env,
                &agent,
                cfg.probe_points,
                probe_seed_base,
                &mut probe_rng,
            );
            p.refresh_qstar(&mut env, &agent);
            probe = Some(ProbeState { probe: p, birth: episode });
        } else if let Some(ps) = &mut probe {
            if (episode - ps.birth) % cfg.qstar_refresh_every == 0 {
                ps.probe.refresh_qstar(&mut env, &agent);
            }
        }

        // Periodic evaluation and early stop.
        if cfg.eval_every > 0 && episode % cfg.eval_every == 0 {
            let records = evaluate(&mut eval_env, &agent, cfg.eval_episodes, eval_seed_base);
            let rate = records.iter().filter(|r| r.success).count() as f64 / records.len() as f64;
            sink.on_eval(episode, &records)?;
            last_eval_rate = Some(rate);
            if cfg.stop_on_success_rate > 0.0 && rate >= cfg.stop_on_success_rate {
                early_stopped = true;
            }
        }

        // Metrics.
        let (v_lyap, v_alpha, v_qerr) = match &probe {
            Some(ps) => {
                let v = ps.probe.lyapunov_value(&agent);
                (v.total, v.alpha_term, v.qerr_term)
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        sink.on_metrics(&MetricsRow {
            episode,
            steps,
            sim_time,
            return_shaped,
            return_task,
            alpha_m: agent.reward.alpha_m,
            alpha_eps: agent.reward.alpha_eps,
            temperature: agent.temp.temperature(),
            critic_loss: block_critic,
            actor_loss: block_actor,
            grad_norm: block_grad,
            v_lyap,
            v_alpha_term: v_alpha,
            v_qerr_term: v_qerr,
        })?;

        if cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0 {
            sink.on_checkpoint(episode, &agent.encode_bundle(cfg.config_hash))?;
        }
        if cfg.snapshot_every > 0 && episode % cfg.snapshot_every == 0 {
            let snap = encode_snapshot(
                cfg, episode + 1, &agent, &buffer, &window, &probe, &rollout_rng, &update_rng,
                &probe_rng,
            );
            sink.on_snapshot(episode, &snap)?;
        }
        if early_stopped {
            break;
        }
    }

    Ok(TrainOutcome { agent, buffer, episodes_run, early_stopped, last_eval_rate })
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn encode_optim(out: &mut Vec<u8>, o: &OptimState) {
    put_u64(out, o.step);
    put_u64(out, o.m.len() as u64);
    for v in &o.m {
        put_f64(out, *v);
    }
    for v in &o.v {
        put_f64(out, *v);
    }
}

fn decode_optim(
    bytes: &[u8],
    pos: &mut usize,
    expect: usize,
    base_rate: f64,
    schedule: Schedule,
) -> Result<OptimState, CheckpointError> {
    let step = take_u64(bytes, pos)?;
    let n = take_u64(bytes, pos)? as usize;
    if n != expect {
        return Err(CheckpointError::Malformed(format!(
            "optimizer state for {n} params where {expect} expected"
        )));
    }
    let mut o = OptimState::new(n, base_rate, schedule);
    o.step = step;
    for slot in o.m.iter_mut() {
        *slot = take_f64(bytes, pos)?;
    }
    for slot in o.v.iter_mut() {
        *slot = take_f64(bytes, pos)?;
    }
    Ok(o)
}

fn encode_rng(out: &mut Vec<u8>, s: &RngSnapshot) {
    out.extend_from_slice(&s.seed);
    put_u64(out, s.stream);
    out.extend_from_slice(&s.word_pos.to_le_bytes());
}

fn decode_rng(bytes: &[u8], pos: &mut usize) -> Result<ChaCha8Rng, CheckpointError> {
    let end = pos.checked_add(32).ok_or(CheckpointError::Truncated)?;
    let seed_slice = bytes.get(*pos..end).ok_or(CheckpointError::Truncated)?;
    let mut seed = [0u8; 32];
    seed.copy_from_slice(seed_slice);
    *pos = end;
    let stream = take_u64(bytes, pos)?;
    let end = pos.checked_add(16).ok_or(CheckpointError::Truncated)?;
    let wp_slice = bytes.get(*pos..end).ok_or(CheckpointError::Truncated)?;
    let word_pos = u128::from_le_bytes(wp_slice.try_into().unwrap());
    *pos = end;
    Ok(rng::restore(&RngSnapshot { seed, stream, word_pos }))
}

fn done_to_u8(d: Done) -> u8 {
    match d {
        Done::Running => 0,
        Done::Success => 1,
        Done::OffTrack => 2,
        Done::Timeout => 3,
    }
}

fn done_from_u8(b: u8) -> Result<Done, CheckpointError> {
    Ok(match b {
        0 => Done::Running,
        1 => Done::Success,
        2 => Done::OffTrack,
        3 => Done::Timeout,
        _ => return Err(CheckpointError::Malformed(format!("done byte {b}"))),
    })
}

fn encode_env_snap(out: &mut Vec<u8>, s: &EnvSnapshot) {
    put_f64(out, s.car.x);
    put_f64(out, s.car.y);
    put_f64(out, s.car.heading);
    put_f64(out, s.car.speed);
    put_u64(out, s.car.last_passed_index as u64);
    put_u64(out, s.car.step_count as u64);
    for row in &s.history {
        for v in row {
            put_f64(out, *v);
        }
    }
    put_f64(out, s.progress);
    put_f64(out, s.high_water);
    put_f64(out, s.lateral);
    out.push(done_to_u8(s.done));
}

fn decode_env_snap(bytes: &[u8], pos: &mut usize) -> Result<EnvSnapshot, CheckpointError> {
    let x = take_f64(bytes, pos)?;
    let y = take_f64(bytes, pos)?;
    let heading = take_f64(bytes, pos)?;
    let speed = take_f64(bytes, pos)?;
    let last_passed_index = take_u64(bytes, pos)? as usize;
    let step_count = take_u64(bytes, pos)? as usize;
    let mut history = [[0.0; 4]; 2];
    for row in history.iter_mut() {
        for v in row.iter_mut() {
            *v = take_f64(bytes, pos)?;
        }
    }
    let progress = take_f64(bytes, pos)?;
    let high_water = take_f64(bytes, pos)?;
    let lateral = take_f64(bytes, pos)?;
    let done = done_from_u8(take_u8(bytes, pos)?)?;
    Ok(EnvSnapshot {
        car: crate::car::CarState { x, y, heading, speed, last_passed_index, step_count },
        history,
        progress,
        high_water,
        lateral,
        done,
    })
}

#[allow(clippy::too_many_arguments)]
fn encode_snapshot(
    cfg: &TrainConfig,
    episode_next: usize,
    agent: &Agent,
    buffer: &ReplayBuffer,
    window: &RewardWindow,
    probe: &Option<ProbeState>,
    rollout_rng: &ChaCha8Rng,
    update_rng: &ChaCha8Rng,
    probe_rng: &ChaCha8Rng,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC.as_bytes());
    out.push(b'\n');
    put_u64(&mut out, cfg.config_hash);
    put_u64(&mut out, episode_next as u64);
    let bundle = agent.encode_bundle(cfg.config_hash);
    put_u64(&mut out, bundle.len() as u64);
    out.extend_from_slice(&bundle);
    encode_optim(&mut out, &agent.opt_actor);
    encode_optim(&mut out, &agent.opt_q1);
    encode_optim(&mut out, &agent.opt_q2);
    encode_optim(&mut out, &agent.temp.opt);
    put_f64(&mut out, window.sum);
    put_u64(&mut out, window.count);
    encode_rng(&mut out, &rng::snapshot(rollout_rng));
    encode_rng(&mut out, &rng::snapshot(update_rng));
    encode_rng(&mut out, &rng::snapshot(probe_rng));
    buffer.encode_state(&mut out);
    match probe {
        None => out.push(0),
        Some(ps) => {
            out.push(1);
            put_u64(&mut out, ps.birth as u64);
            put_u64(&mut out, ps.probe.points.len() as u64);
            for p in &ps.probe.points {
                encode_env_snap(&mut out, &p.snapshot);
                put_u64(&mut out, p.obs.len() as u64);
                for v in &p.obs {
                    put_f64(&mut out, *v);
                }
                for v in &p.controls {
                    put_f64(&mut out, *v);
                }
                put_f64(&mut out, p.duration);
            }
            for q in &ps.probe.qstar {
                put_f64(&mut out, *q);
            }
        }
    }
    out
}

/// Reconstruct a [`ResumePoint`] from snapshot bytes. The config must be
/// the one the snapshot was taken under; the embedded hash guards this.
pub fn load_snapshot(bytes: &[u8], cfg: &TrainConfig) -> Result<ResumePoint, TrainError> {
    let magic_end = SNAPSHOT_MAGIC.len() + 1;
    let head = bytes.get(..magic_end).ok_or(CheckpointError::Truncated)?;
    if &head[..SNAPSHOT_MAGIC.len()] != SNAPSHOT_MAGIC.as_bytes() || head[magic_end - 1] != b'\n' {
        return Err(TrainError::Snapshot(CheckpointError::BadMagic));
    }
    let mut pos = magic_end;
    let found = take_u64(bytes, &mut pos)?;
    if found != cfg.config_hash {
        return Err(TrainError::SnapshotMismatch { expected: cfg.config_hash, found });
    }
    let episode_next = take_u64(bytes, &mut pos)? as usize;
    let bundle_len = take_u64(bytes, &mut pos)? as usize;
    let end = pos.checked_add(bundle_len).ok_or(CheckpointError::Truncated)?;
    let bundle = bytes.get(pos..end).ok_or(CheckpointError::Truncated)?;
    pos = end;
    let ck: AgentCheckpoint = Agent::decode_bundle(bundle)?;
    let mut agent =
        Agent::from_checkpoint(ck, cfg.actor_rate, cfg.critic_rate, cfg.temp_rate, cfg.schedule);
    let actor_n = agent.head.net.param_count();
    let critic_n = agent.critics.q1.param_count();
    agent.opt_actor = decode_optim(bytes, &mut pos, actor_n, cfg.actor_rate, cfg.schedule)?;
    agent.opt_q1 = decode_optim(bytes, &mut pos, critic_n, cfg.critic_rate, cfg.schedule)?;
    agent.opt_q2 = decode_optim(bytes, &mut pos, critic_n, cfg.critic_rate, cfg.schedule)?;
    agent.temp.opt = decode_optim(bytes, &mut pos, 1, cfg.temp_rate, cfg.schedule)?;
    let window = RewardWindow { sum: take_f64(bytes, &mut pos)?, count: take_u64(bytes, &mut pos)? };
    let rollout_rng = decode_rng(bytes, &mut pos)?;
    let update_rng = decode_rng(bytes, &mut pos)?;
    let probe_rng = decode_rng(bytes, &mut pos)?;
    let buffer = ReplayBuffer::decode_state(bytes, &mut pos)?;
    let probe = match take_u8(bytes, &mut pos)? {
        0 => None,
        1 => {
            let birth = take_u64(bytes, &mut pos)? as usize;
            let n = take_u64(bytes, &mut pos)? as usize;
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let snapshot = decode_env_snap(bytes, &mut pos)?;
                let obs_len = take_u64(bytes, &mut pos)? as usize;
                let mut obs = Vec::with_capacity(obs_len);
                for _ in 0..obs_len {
                    obs.push(take_f64(bytes, &mut pos)?);
                }
                let controls =
                    [take_f64(bytes, &mut pos)?, take_f64(bytes, &mut pos)?, take_f64(bytes, &mut pos)?];
                let duration = take_f64(bytes, &mut pos)?;
                points.push(ProbePoint { snapshot, obs, controls, duration });
            }
            let mut qstar = Vec::with_capacity(n);
            for _ in 0..n {
                qstar.push(take_f64(bytes, &mut pos)?);
            }
            Some(ProbeState { probe: LyapunovProbe { points, qstar }, birth })
        }
        b => {
            return Err(TrainError::Snapshot(CheckpointError::Malformed(format!(
                "probe flag byte {b}"
            ))))
        }
    };
    if pos != bytes.len() {
        return Err(TrainError::Snapshot(CheckpointError::Malformed(
            "trailing bytes".to_string(),
        )));
    }
    Ok(ResumePoint {
        episode_next,
        agent,
        buffer,
        window,
        probe,
        rollout_rng,
        update_rng,
        probe_rng,
    })
}

//! Flat `key = value` run configuration.
//!
//! One line per setting, `#` starts a comment, no sections or nesting.
//! Every key has a default; unknown and duplicate keys are rejected so a
//! typo cannot silently fall back. The fully resolved config (defaults,
//! file, then flag overrides) is echoed to `<outdir>/resolved_config`, and
//! its FNV-1a hash stamps checkpoints and snapshots.

use std::fmt::Write as _;

use elastic_core::agent::Algo;
use elastic_core::env::{EnvConfig, D_MAX_DEFAULT, D_MIN_DEFAULT};
use elastic_core::optim::Schedule;
use elastic_core::reward::RewardParams;
use elastic_core::trainer::{fnv1a64, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    /// Line did not parse as `key = value`.
    BadLine { line: usize },
    UnknownKey { line: usize, key: String },
    DuplicateKey { line: usize, key: String },
    BadValue { key: String, value: String, expected: &'static str },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::BadLine { line } => {
                write!(f, "config line {line}: expected \"key = value\"")
            }
            ConfigError::UnknownKey { line, key } => {
                write!(f, "config line {line}: unknown key \"{key}\"")
            }
            ConfigError::DuplicateKey { line, key } => {
                write!(f, "config line {line}: duplicate key \"{key}\"")
            }
            ConfigError::BadValue { key, value, expected } => {
                write!(f, "config key \"{key}\": bad value \"{value}\", expected {expected}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Algorithm selector as it appears in config files and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AlgoName {
    Moseac,
    Seac,
    SacFixed,
}

impl AlgoName {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgoName::Moseac => "moseac",
            AlgoName::Seac => "seac",
            AlgoName::SacFixed => "sac_fixed",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "moseac" => Some(AlgoName::Moseac),
            "seac" => Some(AlgoName::Seac),
            "sac_fixed" => Some(AlgoName::SacFixed),
            _ => None,
        }
    }
}

/// Everything a run needs: the training configuration plus the track
/// source and the algorithm dials that only some algorithms read.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algo: AlgoName,
    pub seed: u64,
    pub episodes: usize,
    pub k_init: usize,
    pub k_update: usize,
    pub updates_per_block: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub tau_soft: f64,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub temp_rate: f64,
    pub schedule_diminishing: bool,
    pub k_decay: f64,
    pub init_temp: f64,
    pub target_entropy: f64,
    pub alpha_m: f64,
    pub alpha_max: f64,
    pub psi: f64,
    pub eps_pen: f64,
    pub tau_pen: f64,
    pub fixed_duration: f64,
    pub literal_reward_storage: bool,
    pub checkpoint_every: usize,
    pub snapshot_every: usize,
    pub probe_points: usize,
    pub qstar_refresh_every: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub stop_on_success_rate: f64,
    pub track: String,
    pub d_min: f64,
    pub d_max: f64,
    pub k_length: usize,
    pub start_jitter: f64,
    pub start_spread: f64,
    pub start_speed: f64,
    pub car_a_max: f64,
    pub car_b_max: f64,
    pub car_c_drag: f64,
    pub car_v_max: f64,
    pub car_wheelbase: f64,
    pub car_s_max: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let car = t.env.car;
        RunConfig {
            algo: AlgoName::Moseac,
            seed: t.seed,
            episodes: t.episodes,
            k_init: t.k_init,
            k_update: t.k_update,
            updates_per_block: t.updates_per_block,
            batch_size: t.batch_size,
            buffer_capacity: t.buffer_capacity,
            tau_soft: t.tau_soft,
            gamma: t.gamma,
            hidden: t.hidden.clone(),
            actor_rate: t.actor_rate,
            critic_rate: t.critic_rate,
            temp_rate: t.temp_rate,
            schedule_diminishing: true,
            k_decay: 1e5,
            init_temp: t.init_temp,
            target_entropy: t.target_entropy,
            alpha_m: t.reward.alpha_m,
            alpha_max: t.reward.alpha_max,
            psi: t.reward.psi,
            eps_pen: 0.1,
            tau_pen: 0.5,
            fixed_duration: 0.05,
            literal_reward_storage: t.literal_reward_storage,
            checkpoint_every: t.checkpoint_every,
            snapshot_every: t.snapshot_every,
            probe_points: t.probe_points,
            qstar_refresh_every: t.qstar_refresh_every,
            eval_every: t.eval_every,
            eval_episodes: t.eval_episodes,
            stop_on_success_rate: t.stop_on_success_rate,
            track: "builtin:stadium".to_string(),
            d_min: D_MIN_DEFAULT,
            d_max: D_MAX_DEFAULT,
            k_length: t.env.k_length,
            start_jitter: t.env.start_jitter,
            start_spread: t.env.start_spread,
            start_speed: t.env.start_speed,
            car_a_max: car.a_max,
            car_b_max: car.b_max,
            car_c_drag: car.c_drag,
            car_v_max: car.v_max,
            car_wheelbase: car.wheelbase,
            car_s_max: car.s_max,
        }
    }
}

impl RunConfig {
    /// Apply `key = value` lines from a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = match body.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => return Err(ConfigError::BadLine { line }),
            };
            if key.is_empty() {
                return Err(ConfigError::BadLine { line });
            }
            if seen.iter().any(|s| s == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
            seen.push(key.to_string());
            self.set(key, value).map_err(|mut e| {
                if let ConfigError::UnknownKey { line: l, .. } = &mut e {
                    *l = line;
                }
                e
            })?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn bad(key: &str, value: &str, expected: &'static str) -> ConfigError {
            ConfigError::BadValue { key: key.to_string(), value: value.to_string(), expected }
        }
        macro_rules! num {
            ($ty:ty, $expected:literal) => {
                value.parse::<$ty>().map_err(|_| bad(key, value, $expected))?
            };
        }
        match key {
            "algo" => {
                self.algo =
                    AlgoName::parse(value).ok_or(bad(key, value, "moseac | seac | sac_fixed"))?
            }
            "seed" => self.seed = num!(u64, "unsigned integer"),
            "episodes" => self.episodes = num!(usize, "unsigned integer"),
            "k_init" => self.k_init = num!(usize, "unsigned integer"),
            "k_update" => self.k_update = num!(usize, "unsigned integer"),
            "updates_per_block" => self.updates_per_block = num!(usize, "unsigned integer"),
            "batch_size" => self.batch_size = num!(usize, "unsigned integer"),
            "buffer_capacity" => self.buffer_capacity = num!(usize, "unsigned integer"),
            "tau_soft" => self.tau_soft = num!(f64, "number"),
            "gamma" => self.gamma = num!(f64, "number"),
            "hidden" => {
                let mut sizes = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    sizes.push(
                        part.parse::<usize>()
                            .map_err(|_| bad(key, value, "comma-separated layer sizes"))?,
                    );
                }
                self.hidden = sizes;
            }
            "actor_rate" => self.actor_rate = num!(f64, "number"),
            "critic_rate" => self.critic_rate = num!(f64, "number"),
            "temp_rate" => self.temp_rate = num!(f64, "number"),
            "schedule" => {
                self.schedule_diminishing = match value {
                    "constant" => false,
                    "diminishing" => true,
                    _ => return Err(bad(key, value, "constant | diminishing")),
                }
            }
            "k_decay" => self.k_decay = num!(f64, "number"),
            "init_temp" => self.init_temp = num!(f64, "number"),
            "target_entropy" => self.target_entropy = num!(f64, "number"),
            "alpha_m" => self.alpha_m = num!(f64, "number"),
            "alpha_max" => self.alpha_max = num!(f64, "number"),
            "psi" => self.psi = num!(f64, "number"),
            "eps_pen" => self.eps_pen = num!(f64, "number"),
            "tau_pen" => self.tau_pen = num!(f64, "number"),
            "fixed_duration" => self.fixed_duration = num!(f64, "number"),
            "literal_reward_storage" => {
                self.literal_reward_storage = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(key, value, "true | false")),
                }
            }
            "checkpoint_every" => self.checkpoint_every = num!(usize, "unsigned integer"),
            "snapshot_every" => self.snapshot_every = num!(usize, "unsigned integer"),
            "probe_points" => self.probe_points = num!(usize, "unsigned integer"),
            "qstar_refresh_every" => self.qstar_refresh_every = num!(usize, "unsigned integer"),
            "eval_every" => self.eval_every = num!(usize, "unsigned integer"),
            "eval_episodes" => self.eval_episodes = num!(usize, "unsigned integer"),
            "stop_on_success_rate" => self.stop_on_success_rate = num!(f64, "number"),
            "track" => self.track = value.to_string(),
            "d_min" => self.d_min = num!(f64, "number"),
            "d_max" => self.d_max = num!(f64, "number"),
            "k_length" => self.k_length = num!(usize, "unsigned integer"),
            "start_jitter" => self.start_jitter = num!(f64, "number"),
            "start_spread" => self.start_spread = num!(f64, "number"),
            "start_speed" => self.start_speed = num!(f64, "number"),
            "car_a_max" => self.car_a_max = num!(f64, "number"),
            "car_b_max" => self.car_b_max = num!(f64, "number"),
            "car_c_drag" => self.car_c_drag = num!(f64, "number"),
            "car_v_max" => self.car_v_max = num!(f64, "number"),
            "car_wheelbase" => self.car_wheelbase = num!(f64, "number"),
            "car_s_max" => self.car_s_max = num!(f64, "number"),
            other => {
                return Err(ConfigError::UnknownKey { line: 0, key: other.to_string() });
            }
        }
        Ok(())
    }

    /// Canonical text form: every key, declaration order, one per line.
    /// This is what gets echoed to `resolved_config` and hashed.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        let hidden = self
            .hidden
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(s, "algo = {}", self.algo.as_str());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "episodes = {}", self.episodes);
        let _ = writeln!(s, "k_init = {}", self.k_init);
        let _ = writeln!(s, "k_update = {}", self.k_update);
        let _ = writeln!(s, "updates_per_block = {}", self.updates_per_block);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "buffer_capacity = {}", self.buffer_capacity);
        let _ = writeln!(s, "tau_soft = {}", self.tau_soft);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "hidden = {hidden}");
        let _ = writeln!(s, "actor_rate = {}", self.actor_rate);
        let _ = writeln!(s, "critic_rate = {}", self.critic_rate);
        let _ = writeln!(s, "temp_rate = {}", self.temp_rate);
        let _ = writeln!(
            s,
            "schedule = {}",
            if self.schedule_diminishing { "diminishing" } else { "constant" }
        );
        let _ = writeln!(s, "k_decay = {}", self.k_decay);
        let _ = writeln!(s, "init_temp = {}", self.init_temp);
        let _ = writeln!(s, "target_entropy = {}", self.target_entropy);
        let _ = writeln!(s, "alpha_m = {}", self.alpha_m);
        let _ = writeln!(s, "alpha_max = {}", self.alpha_max);
        let _ = writeln!(s, "psi = {}", self.psi);
        let _ = writeln!(s, "eps_pen = {}", self.eps_pen);
        let _ = writeln!(s, "tau_pen = {}", self.tau_pen);
        let _ = writeln!(s, "fixed_duration = {}", self.fixed_duration);
        let _ = writeln!(s, "literal_reward_storage = {}", self.literal_reward_storage);
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "probe_points = {}", self.probe_points);
        let _ = writeln!(s, "qstar_refresh_every = {}", self.qstar_refresh_every);
        let _ = writeln!(s, "eval_every = {}", self.eval_every);
        let _ = writeln!(s, "eval_episodes = {}", self.eval_episodes);
        let _ = writeln!(s, "stop_on_success_rate = {}", self.stop_on_success_rate);
        let _ = writeln!(s, "track = {}", self.track);
        let _ = writeln!(s, "d_min = {}", self.d_min);
        let _ = writeln!(s, "d_max = {}", self.d_max);
        let _ = writeln!(s, "k_length = {}", self.k_length);
        let _ = writeln!(s, "start_jitter = {}", self.start_jitter);
        let _ = writeln!(s, "start_spread = {}", self.start_spread);
        let _ = writeln!(s, "start_speed = {}", self.start_speed);
        let _ = writeln!(s, "car_a_max = {}", self.car_a_max);
        let _ = writeln!(s, "car_b_max = {}", self.car_b_max);
        let _ = writeln!(s, "car_c_drag = {}", self.car_c_drag);
        let _ = writeln!(s, "car_v_max = {}", self.car_v_max);
        let _ = writeln!(s, "car_wheelbase = {}", self.car_wheelbase);
        let _ = writeln!(s, "car_s_max = {}", self.car_s_max);
        s
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a64(self.resolved_text().as_bytes())
    }

    pub fn algo_value(&self) -> Algo {
        match self.algo {
            AlgoName::Moseac => Algo::Moseac,
            AlgoName::Seac => Algo::SeacLinear { eps_pen: self.eps_pen, tau_pen: self.tau_pen },
            AlgoName::SacFixed => Algo::SacFixed { duration: self.fixed_duration },
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        let mut env = EnvConfig::default();
        env.car.a_max = self.car_a_max;
        env.car.b_max = self.car_b_max;
        env.car.c_drag = self.car_c_drag;
        env.car.v_max = self.car_v_max;
        env.car.wheelbase = self.car_wheelbase;
        env.car.s_max = self.car_s_max;
        env.d_min = self.d_min;
        env.d_max = self.d_max;
        env.k_length = self.k_length;
        env.start_jitter = self.start_jitter;
        env.start_spread = self.start_spread;
        env.start_speed = self.start_speed;
        env
    }

    /// Lower to the training-loop configuration. Fails (as a bad value) if
    /// the reward constants violate their own constraints, since
    /// `RewardParams` construction is assertion-based.
    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        if !(self.alpha_m > 0.0 && self.alpha_max >= self.alpha_m && self.psi > 0.0) {
            return Err(ConfigError::BadValue {
                key: "alpha_m/alpha_max/psi".to_string(),
                value: format!("{} / {} / {}", self.alpha_m, self.alpha_max, self.psi),
                expected: "0 < alpha_m <= alpha_max, psi > 0",
            });
        }
        Ok(TrainConfig {
            algo: self.algo_value(),
            seed: self.seed,
            episodes: self.episodes,
            k_init: self.k_init,
            k_update: self.k_update,
            updates_per_block: self.updates_per_block,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            tau_soft: self.tau_soft,
            gamma: self.gamma,
            hidden: self.hidden.clone(),
            actor_rate: self.actor_rate,
            critic_rate: self.critic_rate,
            temp_rate: self.temp_rate,
            schedule: if self.schedule_diminishing {
                Schedule::Diminishing { k_decay: self.k_decay }
            } else {
                Schedule::Constant
            },
            init_temp: self.init_temp,
            target_entropy: self.target_entropy,
            reward: RewardParams::new(self.alpha_m, self.alpha_max, self.psi),
            literal_reward_storage: self.literal_reward_storage,
            checkpoint_every: self.checkpoint_every,
            snapshot_every: self.snapshot_every,
            probe_points: self.probe_points,
            qstar_refresh_every: self.qstar_refresh_every,
            eval_every: self.eval_every,
            eval_episodes: self.eval_episodes,
            stop_on_success_rate: self.stop_on_success_rate,
            env: self.env_config(),
            config_hash: self.config_hash(),
        })
    }
}

//! The variable time-step racing environment.
//!
//! Each decision step carries a control triple plus the duration to hold it;
//! physics advance in fixed `inner_dt` substeps with the duration snapped to
//! the nearest multiple (at least one substep), which makes trajectories both
//! reproducible and exactly composable: one step of duration `D` equals two
//! steps of `D/2` bit for bit.

use alloc::vec::Vec;

use rand::Rng;

use crate::car::{substep, CarParams, CarState};
use crate::track::TrackSpec;

/// Default action-duration bounds: control rates between 5 and 30 Hz.
pub const D_MIN_DEFAULT: f64 = 1.0 / 30.0;
pub const D_MAX_DEFAULT: f64 = 1.0 / 5.0;

/// Observation vector length produced by [`Environment::observe`].
pub const OBS_DIM: usize = 23;

/// Controls in `(-1, 1)` plus the held duration in `[d_min, d_max]` seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticAction {
    pub gas: f64,
    pub brake: f64,
    pub steer: f64,
    pub duration: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Done {
    Running,
    Success,
    OffTrack,
    Timeout,
}

impl Done {
    pub fn is_terminal(self) -> bool {
        self != Done::Running
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    /// Task reward: waypoints newly passed this step, divided by 100.
    pub r_t: f64,
    /// Simulated seconds this step consumed; an exact multiple of `inner_dt`.
    pub elapsed: f64,
    pub done: Done,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvConfig {
    pub car: CarParams,
    pub d_min: f64,
    pub d_max: f64,
    /// Decision steps before an episode times out.
    pub k_length: usize,
    /// Start-state variety: lateral offset drawn from `U(-j, j)` meters and
    /// heading from `U(-0.05, 0.05)` radians when `j > 0`. Zero keeps the
    /// exact start pose. Evaluation uses this so per-episode records carry
    /// variance; without it the deterministic policy/physics pair would make
    /// every episode identical.
    pub start_jitter: f64,
    /// Fraction of the course the spawn point scatters over: the start arc
    /// is drawn from `U(0, spread * course length)`. Zero always starts at
    /// the line. Scattered starts put every stretch of the course within a
    /// short horizon of some episode, which is what makes the sparse
    /// waypoint reward learnable from scratch; waypoints already behind the
    /// spawn point pay nothing. A training aid: periodic evaluation inside
    /// the trainer zeroes it so success always means a full run from the
    /// line.
    pub start_spread: f64,
    /// Upper bound of the uniform initial-speed draw in m/s (zero starts at
    /// rest). A rolling start covers ground before the policy knows how to
    /// build speed. Training aid, zeroed in the trainer's evaluation.
    pub start_speed: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            car: CarParams::default(),
            d_min: D_MIN_DEFAULT,
            d_max: D_MAX_DEFAULT,
            k_length: 1000,
            start_jitter: 0.0,
            start_spread: 0.0,
            start_speed: 0.0,
        }
    }
}

/// Everything the environment carries between steps; save/restore gives
/// bit-exact continuation (used by the stability probes and by resumable
/// training).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSnapshot {
    pub car: CarState,
    pub history: [[f64; 4]; 2],
    pub progress: f64,
    pub high_water: f64,
    pub lateral: f64,
    pub done: Done,
}

pub struct Environment {
    track: TrackSpec,
    config: EnvConfig,
    car: CarState,
    /// Feature slots of the last two actions, newest first; zeroed at reset.
    history: [[f64; 4]; 2],
    /// Arc-length of the current projection.
    progress: f64,
    /// Highest projected arc-length seen this episode; waypoint passage and
    /// the "next waypoint" choice use this so progress never runs backwards.
    high_water: f64,
    /// Signed lateral offset of the current projection (left positive).
    lateral: f64,
    done: Done,
}

const JITTER_STREAM: u64 = 0x656e_762d_6a69_7474;

impl Environment {
    pub fn new(track: TrackSpec, config: EnvConfig) -> Self {
        let car = CarState {
            x: track.start_pose.0,
            y: track.start_pose.1,
            heading: track.start_pose.2,
            speed: 0.0,
            last_passed_index: 0,
            step_count: 0,
        };
        Environment {
            track,
            config,
            car,
            history: [[0.0; 4]; 2],
            progress: 0.0,
            high_water: 0.0,
            lateral: 0.0,
            done: Done::Running,
        }
    }

    pub fn track(&self) -> &TrackSpec {
        &self.track
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn car(&self) -> &CarState {
        &self.car
    }

    pub fn done(&self) -> Done {
        self.done
    }

    /// Starts a fresh episode. The seed only matters when some start
    /// randomization is non-zero; the returned result carries the initial
    /// observation with `r_t = 0`, `elapsed = 0`, `done = running`.
    pub fn reset(&mut self, seed: u64) -> StepResult {
        let mut rng = crate::rng::stream(seed, JITTER_STREAM);
        let spawn_arc = if self.config.start_spread > 0.0 {
            rng.random_range(0.0..self.config.start_spread * self.track.total_length())
        } else {
            0.0
        };
        let (sx, sy, sh) = if spawn_arc > 0.0 {
            self.track.pose_at(spawn_arc)
        } else {
            self.track.start_pose
        };
        self.car = CarState {
            x: sx,
            y: sy,
            heading: sh,
            speed: 0.0,
            last_passed_index: 0,
            step_count: 0,
        };
        if self.config.start_jitter > 0.0 {
            let j = self.config.start_jitter;
            let lateral: f64 = rng.random_range(-j..j);
            let dh: f64 = rng.random_range(-0.05..0.05);
            // Perpendicular-left of the spawn heading.
            self.car.x += lateral * -crate::math::sin(sh);
            self.car.y += lateral * crate::math::cos(sh);
            self.car.heading += dh;
        }
        if self.config.start_speed > 0.0 {
            self.car.speed = rng.random_range(0.0..self.config.start_speed);
        }
        self.history = [[0.0; 4]; 2];
        let proj = self.track.project(self.car.x, self.car.y, spawn_arc);
        self.progress = proj.arc;
        self.high_water = proj.arc;
        self.lateral = proj.lateral;
        // Waypoints behind the spawn point count as already passed so a
        // scattered start earns nothing for free. The final waypoint never
        // pre-passes; reset always leaves the episode running.
        while self.car.last_passed_index + 1 < self.track.waypoint_count()
            && self.high_water > self.track.waypoint_arc(self.car.last_passed_index)
        {
            self.car.last_passed_index += 1;
        }
        self.done = Done::Running;
        StepResult { observation: self.observe(), r_t: 0.0, elapsed: 0.0, done: Done::Running }
    }

    /// Snaps a duration to the substep grid: nearest integer multiple of
    /// `inner_dt`, at least one substep.
    pub fn snap_duration(&self, duration: f64) -> (usize, f64) {
        let n = crate::math::round(duration / self.track.inner_dt) as usize;
        let n = n.max(1);
        (n, n as f64 * self.track.inner_dt)
    }

    /// Advances one decision step. Panics if the episode is already done
    /// (driving a finished episode is a caller bug). Durations outside the
    /// configured bounds are clamped with a warning; squashed policies never
    /// trigger this.
    pub fn step(&mut self, action: ElasticAction) -> StepResult {
        assert!(!self.done.is_terminal(), "step called after episode end");
        let mut duration = action.duration;
        if duration < self.config.d_min || duration > self.config.d_max {
            log::warn!(
                "action duration {duration} outside [{}, {}], clamping",
                self.config.d_min,
                self.config.d_max
            );
            duration = duration.clamp(self.config.d_min, self.config.d_max);
        }
        let gas = action.gas.clamp(-1.0, 1.0);
        let brake = action.brake.clamp(-1.0, 1.0);
        let steer = action.steer.clamp(-1.0, 1.0);

        let (n_sub, elapsed) = self.snap_duration(duration);
        let passed_before = self.car.last_passed_index;
        for _ in 0..n_sub {
            substep(&mut self.car, &self.config.car, gas, brake, steer, self.track.inner_dt);
            let proj = self.track.project(self.car.x, self.car.y, self.progress);
            self.progress = proj.arc;
            self.lateral = proj.lateral;
            if proj.arc > self.high_water {
                self.high_water = proj.arc;
            }
            while self.car.last_passed_index < self.track.waypoint_count() {
                let idx = self.car.last_passed_index;
                let arc = self.track.waypoint_arc(idx);
                // The final waypoint sits at the polyline's end, where the
                // projected arc saturates; it counts at equality.
                let passed = if idx + 1 == self.track.waypoint_count() {
                    self.high_water >= arc
                } else {
                    self.high_water > arc
                };
                if !passed {
                    break;
                }
                self.car.last_passed_index += 1;
            }
            if self.car.last_passed_index == self.track.waypoint_count() {
                self.done = Done::Success;
                break;
            }
            if proj.distance > self.track.corridor_half_width {
                self.done = Done::OffTrack;
                break;
            }
        }
        self.car.step_count += 1;
        if self.done == Done::Running && self.car.step_count >= self.config.k_length {
            self.done = Done::Timeout;
        }

        // History stores the executed action's feature slots.
        self.history[1] = self.history[0];
        self.history[0] = [
            gas,
            brake,
            steer,
            (elapsed - self.config.d_min) / (self.config.d_max - self.config.d_min),
        ];

        let r_t = (self.car.last_passed_index - passed_before) as f64 / 100.0;
        StepResult { observation: self.observe(), r_t, elapsed, done: self.done }
    }

    /// The 23-dimensional observation: `[speed/v_max, sin/cos of heading
    /// error to the next waypoint, next 5 waypoints in the car frame over
    /// 50 m, lateral offset over half-width, step fraction, previous action
    /// features, the action before that]`, all clamped into `[-1, 1]`.
    pub fn observe(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(OBS_DIM);
        obs.push(self.car.speed / self.config.car.v_max);

        let target = self.track.target_index(self.high_water);
        let (tx, ty) = self.track.waypoints[target];
        let bearing = crate::math::atan2(ty - self.car.y, tx - self.car.x);
        let err = wrap_angle(bearing - self.car.heading);
        obs.push(crate::math::sin(err));
        obs.push(crate::math::cos(err));

        let (ch, sh) = (crate::math::cos(self.car.heading), crate::math::sin(self.car.heading));
        for k in 0..5 {
            let idx = (target + k).min(self.track.waypoint_count() - 1);
            let (wx, wy) = self.track.waypoints[idx];
            let (dx, dy) = (wx - self.car.x, wy - self.car.y);
            obs.push((ch * dx + sh * dy) / 50.0);
            obs.push((-sh * dx + ch * dy) / 50.0);
        }

        obs.push(self.lateral / self.track.corridor_half_width);
        obs.push(self.car.step_count as f64 / self.config.k_length as f64);
        for slot in &self.history {
            obs.extend_from_slice(slot);
        }
        debug_assert_eq!(obs.len(), OBS_DIM);
        for v in obs.iter_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
        obs
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            car: self.car,
            history: self.history,
            progress: self.progress,
            high_water: self.high_water,
            lateral: self.lateral,
            done: self.done,
        }
    }

    pub fn restore(&mut self, snap: &EnvSnapshot) {
        self.car = snap.car;
        self.history = snap.history;
        self.progress = snap.progress;
        self.high_water = snap.high_water;
        self.lateral = snap.lateral;
        self.done = snap.done;
    }
}

/// Wraps an angle into `[-pi, pi]`. Odd in its argument (bit-exact), which
/// the mirror-symmetry property of the simulator relies on.
fn wrap_angle(a: f64) -> f64 {
    a - core::f64::consts::TAU * crate::math::round(a / core::f64::consts::TAU)
}

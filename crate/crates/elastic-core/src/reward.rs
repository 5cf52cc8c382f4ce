//! Adaptive multiplicative reward shaping, plus the linear baseline.
//!
//! The shaped reward is `alpha_m * R_t * R_tau(D) - alpha_eps`: a task term
//! scaled up by the adaptive magnitude `alpha_m` and weighted by how fast the
//! action was, minus a per-step penalty that discourages spending decision
//! steps. `alpha_eps` is tied to `alpha_m` through a decreasing sigmoid, so
//! as the magnitude ratchets up the step penalty fades.
//!
//! `alpha_m` only ever moves up, by exactly `psi` per trigger, and only when
//! the average shaped reward declined between update windows; it saturates
//! at `alpha_max`.

/// Decline threshold of the trend predicate: the average must drop by more
/// than this between windows to count as declining.
pub const DELTA_TREND: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardParams {
    pub alpha_m: f64,
    pub alpha_max: f64,
    pub psi: f64,
    /// Always `alpha_eps_of(alpha_m)`; kept stored so logs can assert the
    /// consistency invariant.
    pub alpha_eps: f64,
    /// Window average of the previous update block; unset before the first.
    pub prev_avg_reward: Option<f64>,
}

impl RewardParams {
    pub fn new(alpha_m: f64, alpha_max: f64, psi: f64) -> Self {
        assert!(alpha_m >= 0.0 && alpha_max > 0.0 && psi > 0.0, "reward parameter ranges");
        assert!(alpha_m <= alpha_max, "alpha_m starts above its cap");
        RewardParams {
            alpha_m,
            alpha_max,
            psi,
            alpha_eps: alpha_eps_of(alpha_m),
            prev_avg_reward: None,
        }
    }
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams::new(1.0, 5.0, 0.02)
    }
}

/// `0.2 * (1 - 1/(1 + e^(-alpha_m + 1)))`: the per-step penalty as a
/// function of the reward magnitude. Exactly 0.1 at `alpha_m = 1`, strictly
/// decreasing, range `(0, 0.2)`.
pub fn alpha_eps_of(alpha_m: f64) -> f64 {
    0.2 * (1.0 - 1.0 / (1.0 + crate::math::exp(-alpha_m + 1.0)))
}

/// Duration weight `R_tau(D) = d_min / D`: 1 at the fastest allowed action,
/// `d_min/d_max` at the slowest.
pub fn r_tau(duration: f64, d_min: f64) -> f64 {
    d_min / duration
}

/// `alpha_m * R_t * R_tau(duration) - alpha_eps`. For `R_t >= 0` the result
/// lies in `[-alpha_eps, alpha_m * R_t]`.
pub fn shape_reward(r_t: f64, duration: f64, d_min: f64, params: &RewardParams) -> f64 {
    params.alpha_m * r_t * r_tau(duration, d_min) - params.alpha_eps
}

/// Trend step: if the window average declined by more than [`DELTA_TREND`]
/// against the previous window, bump `alpha_m` by `psi` (capped at
/// `alpha_max`) and recompute `alpha_eps`. The previous average is replaced
/// unconditionally.
pub fn adapt_alpha(params: &mut RewardParams, current_avg_reward: f64) {
    assert!(current_avg_reward.is_finite(), "window average must be finite");
    if let Some(prev) = params.prev_avg_reward {
        if current_avg_reward < prev - DELTA_TREND && params.alpha_m < params.alpha_max {
            params.alpha_m = (params.alpha_m + params.psi).min(params.alpha_max);
            params.alpha_eps = alpha_eps_of(params.alpha_m);
        }
    }
    params.prev_avg_reward = Some(current_avg_reward);
}

/// The linear-combination baseline: `R_t - eps_pen - tau_pen * duration`.
pub fn seac_shape_reward(r_t: f64, duration: f64, eps_pen: f64, tau_pen: f64) -> f64 {
    r_t - eps_pen - tau_pen * duration
}

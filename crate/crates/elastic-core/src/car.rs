//! Kinematic car model integrated with explicit Euler on a fixed grid.

/// Physical constants of the car. Positive steer turns left
/// (counterclockwise, increasing heading).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarParams {
    /// Peak forward acceleration at full gas, m/s^2.
    pub a_max: f64,
    /// Peak deceleration at full brake, m/s^2.
    pub b_max: f64,
    /// Linear drag coefficient, 1/s.
    pub c_drag: f64,
    /// Speed clamp, m/s.
    pub v_max: f64,
    /// Wheelbase, m.
    pub wheelbase: f64,
    /// Full-lock steering angle, radians; the steer control scales into
    /// `[-s_max, s_max]`.
    pub s_max: f64,
}

impl Default for CarParams {
    fn default() -> Self {
        CarParams {
            a_max: 8.0,
            b_max: 12.0,
            c_drag: 0.12,
            v_max: 40.0,
            wheelbase: 2.5,
            s_max: 0.5,
        }
    }
}

/// Pose and progress bookkeeping for one car.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    /// Number of waypoints passed so far (0 = none yet).
    pub last_passed_index: usize,
    /// Decision steps taken this episode.
    pub step_count: usize,
}

/// One explicit-Euler substep of length `dt`.
///
/// All derivatives are evaluated at the incoming state, then the speed is
/// clamped to `[0, v_max]`: negative gas and negative brake contribute
/// nothing (no reverse), and braking saturates at standstill.
pub fn substep(state: &mut CarState, params: &CarParams, gas: f64, brake: f64, steer: f64, dt: f64) {
    let v = state.speed;
    let accel = params.a_max * gas.max(0.0) - params.b_max * brake.max(0.0) - params.c_drag * v;
    let turn_rate = (v / params.wheelbase) * crate::math::tan(steer * params.s_max);
    state.x += dt * v * crate::math::cos(state.heading);
    state.y += dt * v * crate::math::sin(state.heading);
    state.heading += dt * turn_rate;
    state.speed = (v + dt * accel).clamp(0.0, params.v_max);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resting() -> CarState {
        CarState { x: 0.0, y: 0.0, heading: 0.0, speed: 0.0, last_passed_index: 0, step_count: 0 }
    }

    #[test]
    fn zero_controls_from_standstill_do_nothing() {
        let mut s = resting();
        let p = CarParams::default();
        for _ in 0..100 {
            substep(&mut s, &p, 0.0, 0.0, 0.0, 1.0 / 120.0);
        }
        assert_eq!((s.x, s.y, s.speed), (0.0, 0.0, 0.0));
    }

    #[test]
    fn full_gas_without_drag_is_constant_acceleration() {
        // v_n = n * a * dt and x_n = a * dt^2 * n(n-1)/2, the discrete
        // constant-acceleration sums.
        let mut s = resting();
        let p = CarParams { c_drag: 0.0, ..CarParams::default() };
        let dt = 1.0 / 120.0;
        let n = 60;
        for _ in 0..n {
            substep(&mut s, &p, 1.0, 0.0, 0.0, dt);
        }
        let v_expect = n as f64 * p.a_max * dt;
        let x_expect = p.a_max * dt * dt * (n * (n - 1)) as f64 / 2.0;
        assert!((s.speed - v_expect).abs() < 1e-12);
        assert!((s.x - x_expect).abs() < 1e-12);
        assert_eq!(s.y, 0.0);
    }

    #[test]
    fn braking_saturates_at_standstill() {
        let mut s = resting();
        s.speed = 1.0;
        let p = CarParams::default();
        for _ in 0..240 {
            substep(&mut s, &p, 0.0, 1.0, 0.0, 1.0 / 120.0);
        }
        assert_eq!(s.speed, 0.0);
    }

    #[test]
    fn speed_clamps_at_v_max() {
        let mut s = resting();
        let p = CarParams::default();
        for _ in 0..24_000 {
            substep(&mut s, &p, 1.0, 0.0, 0.0, 1.0 / 120.0);
        }
        assert!(s.speed <= p.v_max);
        // Drag alone cannot hold the default car below its speed clamp.
        assert_eq!(s.speed, p.v_max);
    }

    #[test]
    fn negative_gas_and_brake_are_dead() {
        let mut a = resting();
        let mut b = resting();
        a.speed = 10.0;
        b.speed = 10.0;
        let p = CarParams::default();
        substep(&mut a, &p, -0.7, -0.9, 0.0, 1.0 / 120.0);
        substep(&mut b, &p, 0.0, 0.0, 0.0, 1.0 / 120.0);
        assert_eq!(a, b);
    }

    #[test]
    fn steering_turns_left_for_positive_steer() {
        let mut s = resting();
        s.speed = 10.0;
        let p = CarParams::default();
        substep(&mut s, &p, 0.0, 0.0, 0.5, 1.0 / 120.0);
        assert!(s.heading > 0.0);
    }

    #[test]
    fn mirrored_substep_is_exact() {
        let p = CarParams::default();
        let mut s = CarState { x: 3.0, y: 1.5, heading: 0.7, speed: 12.0, ..resting() };
        let mut m = CarState { x: 3.0, y: -1.5, heading: -0.7, speed: 12.0, ..resting() };
        for i in 0..500 {
            let steer = if i % 3 == 0 { 0.4 } else { -0.2 };
            substep(&mut s, &p, 0.6, 0.1, steer, 1.0 / 120.0);
            substep(&mut m, &p, 0.6, 0.1, -steer, 1.0 / 120.0);
            assert_eq!(s.x.to_bits(), m.x.to_bits());
            assert_eq!(s.y.to_bits(), (-m.y).to_bits());
            assert_eq!(s.heading.to_bits(), (-m.heading).to_bits());
            assert_eq!(s.speed.to_bits(), m.speed.to_bits());
        }
    }
}

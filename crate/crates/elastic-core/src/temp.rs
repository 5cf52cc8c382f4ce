//! Learned entropy temperature.
//!
//! The temperature is optimized in log space against a fixed entropy
//! target. The loss `mean(-exp(log_temp) * (log_prob + target_entropy))`
//! has the analytic derivative `d/d log_temp = loss` itself (the factor
//! `exp(log_temp)` is its own derivative), so no tape is involved; the
//! scalar gradient feeds the shared Adam rule.
//!
//! Sign behavior: a policy that is too deterministic (mean log prob above
//! `-target_entropy`) produces a negative gradient, so descent raises the
//! temperature and pushes the policy back toward exploration.

use crate::math;
use crate::optim::{opt_step, DivergenceError, OptimState, Schedule};

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyTemp {
    pub log_temp: f64,
    pub target_entropy: f64,
    pub opt: OptimState,
}

impl EntropyTemp {
    pub fn new(init_temp: f64, target_entropy: f64, rate: f64, schedule: Schedule) -> Self {
        assert!(init_temp > 0.0, "temperature is positive");
        EntropyTemp {
            log_temp: math::ln(init_temp),
            target_entropy,
            opt: OptimState::new(1, rate, schedule),
        }
    }

    pub fn temperature(&self) -> f64 {
        math::exp(self.log_temp)
    }

    /// One Adam step on `log_temp` with the supplied scalar gradient.
    pub fn apply_grad(&mut self, grad: f64) -> Result<(), DivergenceError> {
        let mut p = [self.log_temp];
        opt_step(&mut self.opt, &mut p, &[grad])?;
        self.log_temp = p[0];
        Ok(())
    }
}

/// Returns `(loss, d loss / d log_temp)` for a batch of fresh-policy log
/// probabilities. Both values are `-temperature * mean(log_prob + target)`.
pub fn temperature_loss(temp: &EntropyTemp, log_probs: &[f64]) -> (f64, f64) {
    assert!(!log_probs.is_empty(), "temperature loss needs a batch");
    let mut acc = 0.0;
    for lp in log_probs {
        acc += lp + temp.target_entropy;
    }
    let mean = acc / log_probs.len() as f64;
    let loss = -temp.temperature() * mean;
    (loss, loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp() -> EntropyTemp {
        EntropyTemp::new(0.2, -4.0, 0.05, Schedule::Constant)
    }

    #[test]
    fn loss_is_zero_at_the_entropy_target() {
        let t = temp();
        let (loss, grad) = temperature_loss(&t, &[4.0, 4.0, 4.0]);
        assert_eq!(loss, 0.0);
        assert_eq!(grad, 0.0);
        let mut t = t;
        let before = t.log_temp;
        t.apply_grad(grad).unwrap();
        assert_eq!(t.log_temp, before, "zero gradient leaves the temperature alone");
    }

    #[test]
    fn too_deterministic_policy_raises_temperature() {
        let mut t = temp();
        // Mean log prob 6 > -target_entropy = 4: policy too concentrated.
        let (_, grad) = temperature_loss(&t, &[5.0, 7.0]);
        assert!(grad < 0.0);
        let before = t.log_temp;
        t.apply_grad(grad).unwrap();
        assert!(t.log_temp > before);
    }

    #[test]
    fn too_random_policy_lowers_temperature() {
        let mut t = temp();
        let (_, grad) = temperature_loss(&t, &[0.0, 1.0]);
        assert!(grad > 0.0);
        let before = t.log_temp;
        t.apply_grad(grad).unwrap();
        assert!(t.log_temp < before);
    }

    #[test]
    fn gradient_scales_with_temperature() {
        let mut cold = temp();
        cold.log_temp = -2.0;
        let mut hot = temp();
        hot.log_temp = 1.0;
        let (_, gc) = temperature_loss(&cold, &[6.0]);
        let (_, gh) = temperature_loss(&hot, &[6.0]);
        assert!((gc / gh - math::exp(-3.0)).abs() < 1e-12, "gradient proportional to exp(log_temp)");
    }

    /// Closed-loop fixed point: a synthetic policy whose mean log prob
    /// responds to temperature as `5 - alpha` settles where
    /// `log_prob + target = 0`, i.e. at `alpha = 1`.
    #[test]
    fn closed_loop_converges_to_the_analytic_fixed_point() {
        let mut t = temp();
        for _ in 0..4000 {
            let lp = 5.0 - t.temperature();
            let (_, grad) = temperature_loss(&t, &[lp]);
            t.apply_grad(grad).unwrap();
        }
        assert!(
            (t.temperature() - 1.0).abs() < 1e-3,
            "temperature {} should settle at 1",
            t.temperature()
        );
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut t = temp();
        assert!(t.apply_grad(f64::NAN).is_err());
    }
}

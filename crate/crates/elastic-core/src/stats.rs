//! Descriptive statistics and the paired t-test.
//!
//! The two-tailed p-value comes from the regularized incomplete beta
//! function `I_x(df/2, 1/2)` at `x = df/(df + t^2)`, evaluated with a
//! Lentz-style continued fraction. No statistics crate is involved; the
//! continued fraction and the Lanczos log-gamma below are the whole
//! dependency surface, which keeps p-values bit-stable across platforms.

use core::fmt;

use crate::math;

/// Continued fraction convergence threshold.
const BETACF_TOL: f64 = 1e-10;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (N-1 denominator).
    pub sd: f64,
    /// Standard error `sd / sqrt(n)`.
    pub se: f64,
    /// Coefficient of variation `sd / mean`.
    pub cov: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    /// Two-tailed p-value.
    pub p: f64,
    pub mean_diff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StatError {
    /// All paired differences are identical; |t| is unbounded (or 0/0 when
    /// the common difference is zero) and the test is meaningless.
    ZeroVariance { mean_diff: f64 },
    /// Fewer than two pairs.
    TooFewSamples { n: usize },
    /// Paired inputs of different lengths.
    LengthMismatch { a: usize, b: usize },
}

impl fmt::Display for StatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatError::ZeroVariance { mean_diff } => write!(
                f,
                "zero variance in paired differences (mean diff {mean_diff}); |t| is unbounded"
            ),
            StatError::TooFewSamples { n } => write!(f, "need at least 2 samples, got {n}"),
            StatError::LengthMismatch { a, b } => {
                write!(f, "paired samples differ in length: {a} vs {b}")
            }
        }
    }
}

impl core::error::Error for StatError {}

/// Mean, sample SD, standard error, and coefficient of variation.
pub fn descriptives(xs: &[f64]) -> Summary {
    assert!(xs.len() >= 2, "descriptives need at least 2 samples");
    let n = xs.len();
    let mut acc = 0.0;
    for x in xs {
        acc += x;
    }
    let mean = acc / n as f64;
    let mut ss = 0.0;
    for x in xs {
        let d = x - mean;
        ss += d * d;
    }
    let sd = math::sqrt(ss / (n - 1) as f64);
    Summary { n, mean, sd, se: sd / math::sqrt(n as f64), cov: sd / mean }
}

/// Paired two-tailed t-test of `a` against `b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatError> {
    if a.len() != b.len() {
        return Err(StatError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatError::TooFewSamples { n });
    }
    let mut acc = 0.0;
    for i in 0..n {
        acc += a[i] - b[i];
    }
    let mean_diff = acc / n as f64;
    let mut ss = 0.0;
    for i in 0..n {
        let d = (a[i] - b[i]) - mean_diff;
        ss += d * d;
    }
    let sd = math::sqrt(ss / (n - 1) as f64);
    if sd == 0.0 {
        return Err(StatError::ZeroVariance { mean_diff });
    }
    let df = n - 1;
    let t = mean_diff / (sd / math::sqrt(n as f64));
    let x = df as f64 / (df as f64 + t * t);
    let p = betai(df as f64 / 2.0, 0.5, x);
    Ok(TTest { t, df, p, mean_diff })
}

/// Lanczos approximation of `ln Gamma(x)` for `x > 0`.
fn gammln(x: f64) -> f64 {
    const COF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * math::ln(tmp);
    let mut ser = 1.000_000_000_190_015;
    for c in COF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + math::ln(2.506_628_274_631_000_5 * ser / x)
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if math::abs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if math::abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if math::abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if math::abs(del - 1.0) < BETACF_TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
fn betai(a: f64, b: f64, x: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "betai domain");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let bt = math::exp(
        gammln(a + b) - gammln(a) - gammln(b) + a * math::ln(x) + b * math::ln(1.0 - x),
    );
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptives_fixture() {
        let s = descriptives(&[1.0, 2.0, 3.0]);
        assert_eq!(s.n, 3);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert!((s.se - 0.57735).abs() < 1e-5);
        assert_eq!(s.cov, 0.5);
    }

    #[test]
    fn standard_error_formula_fixture() {
        // sd 3.652 over 30 samples.
        let se = 3.652 / math::sqrt(30.0);
        assert!((se - 0.667).abs() < 1e-3);
        // And the field is wired to the same formula.
        let s = descriptives(&[4.0, 8.0, 6.0, 2.0, 10.0]);
        assert_eq!(s.se, s.sd / math::sqrt(5.0));
    }

    #[test]
    fn paired_t_fixture() {
        let t = paired_t_test(&[2.0, 3.0, 4.0, 6.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.t, 5.0);
        assert_eq!(t.df, 3);
        assert_eq!(t.mean_diff, 1.25);
        assert!((t.p - 0.0154).abs() < 1e-3, "p = {}", t.p);
    }

    #[test]
    fn t_test_is_symmetric_in_sign() {
        let a = [2.0, 3.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert!((ab.p - ba.p).abs() < 1e-12);
    }

    #[test]
    fn p_values_match_reference_points() {
        // Student t table classics plus the exact Cauchy case.
        let cases: [(f64, usize, f64, f64); 4] = [
            (1.0, 1, 0.5, 1e-6),
            (12.706, 1, 0.05, 1e-4),
            (2.0, 10, 0.07339, 1e-4),
            (2.045, 29, 0.05, 1e-3),
        ];
        for (t, df, want, tol) in cases {
            // Build a synthetic pair realizing this t and df, then check p.
            let x = df as f64 / (df as f64 + t * t);
            let p = betai(df as f64 / 2.0, 0.5, x);
            assert!((p - want).abs() < tol, "t={t} df={df}: p={p}, want {want}");
        }
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1/2, 1/2) = (2/pi) asin(sqrt(x)).
        for i in 1..20 {
            let x = i as f64 / 20.0;
            let want = 2.0 / core::f64::consts::PI * x.sqrt().asin();
            let got = betai(0.5, 0.5, x);
            assert!((got - want).abs() < 1e-9, "x={x}: {got} vs {want}");
        }
        // I_x(1, b) = 1 - (1-x)^b.
        for i in 1..20 {
            let x = i as f64 / 20.0;
            for b in [0.5, 1.0, 2.5, 7.0] {
                let want = 1.0 - (1.0 - x).powf(b);
                let got = betai(1.0, b, x);
                assert!((got - want).abs() < 1e-9, "x={x} b={b}");
            }
        }
        assert_eq!(betai(2.0, 3.0, 0.0), 0.0);
        assert_eq!(betai(2.0, 3.0, 1.0), 1.0);
    }

    #[test]
    fn gammln_matches_factorials() {
        // ln Gamma(n) = ln (n-1)!
        let mut fact = 1.0_f64;
        for n in 1..15u32 {
            if n > 1 {
                fact *= (n - 1) as f64;
            }
            assert!((gammln(n as f64) - fact.ln()).abs() < 1e-9, "n={n}");
        }
        // Gamma(1/2) = sqrt(pi).
        assert!((gammln(0.5) - 0.5 * core::f64::consts::PI.ln()).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs_are_reported() {
        let a = [3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0];
        assert_eq!(
            paired_t_test(&a, &b),
            Err(StatError::ZeroVariance { mean_diff: 2.0 })
        );
        let msg = alloc::format!("{}", StatError::ZeroVariance { mean_diff: 2.0 });
        assert!(msg.contains("unbounded"));
        assert_eq!(
            paired_t_test(&[1.0], &[2.0]),
            Err(StatError::TooFewSamples { n: 1 })
        );
        assert_eq!(
            paired_t_test(&[1.0, 2.0], &[2.0]),
            Err(StatError::LengthMismatch { a: 2, b: 1 })
        );
    }

    #[test]
    fn bigger_effects_give_smaller_p() {
        let b = [0.0, 0.1, -0.1, 0.05, -0.05, 0.2];
        let mut prev = 1.0;
        for shift in [0.1, 0.3, 0.6, 1.0] {
            let a: Vec<f64> = b.iter().map(|v| v + shift + 0.01 * f64::sin(*v)).collect();
            let t = paired_t_test(&a, &b).unwrap();
            assert!(t.p < prev, "shift {shift}: p {} vs prev {prev}", t.p);
            prev = t.p;
        }
    }
}

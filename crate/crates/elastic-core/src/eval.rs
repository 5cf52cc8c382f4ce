//! Deterministic policy evaluation and method comparison.
//!
//! One evaluation episode rolls the mean policy from a seeded reset and
//! reports: success, decision-step count (the energy proxy: every decision
//! costs one inference), simulated seconds, and the realized mean decision
//! rate. Comparisons summarize both methods per metric and run paired
//! t-tests across episode-index-matched records, so both sides must be
//! evaluated on the same seed sequence.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::agent::{env_action, Agent};
use crate::env::{Done, Environment};
use crate::stats::{descriptives, paired_t_test, StatError, Summary, TTest};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRecord {
    pub episode: usize,
    pub success: bool,
    /// Decision steps taken; the energy proxy.
    pub energy_steps: usize,
    /// Simulated time to episode end.
    pub time_seconds: f64,
    /// `energy_steps / time_seconds`.
    pub mean_rate_hz: f64,
}

pub const EVAL_CSV_HEADER: &str = "episode,success,energy_steps,time_seconds,mean_rate_hz";

/// Metrics carried through comparison reports, in emission order.
pub const COMPARE_METRICS: [&str; 3] = ["energy_steps", "time_seconds", "mean_rate_hz"];

#[derive(Clone, Debug, PartialEq)]
pub enum CsvError {
    BadHeader { found: String },
    BadRow { line: usize, message: String },
}

impl core::fmt::Display for CsvError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CsvError::BadHeader { found } => write!(f, "unexpected csv header {found:?}"),
            CsvError::BadRow { line, message } => write!(f, "csv line {line}: {message}"),
        }
    }
}

impl core::error::Error for CsvError {}

/// Run one evaluation episode with the mean policy.
pub fn eval_episode(env: &mut Environment, agent: &Agent, episode: usize, seed: u64) -> EvalRecord {
    let mut obs = env.reset(seed).observation;
    let mut steps = 0usize;
    let mut time = 0.0;
    loop {
        let sa = agent.act_deterministic(&obs);
        let sr = env.step(env_action(&sa));
        steps += 1;
        time += sr.elapsed;
        obs = sr.observation;
        if sr.done != Done::Running {
            return EvalRecord {
                episode,
                success: sr.done == Done::Success,
                energy_steps: steps,
                time_seconds: time,
                mean_rate_hz: steps as f64 / time,
            };
        }
    }
}

/// Evaluate `episodes` episodes; episode `i` resets with `seed_base + i`.
/// Comparable runs of different agents must share `seed_base`.
pub fn evaluate(env: &mut Environment, agent: &Agent, episodes: usize, seed_base: u64) -> Vec<EvalRecord> {
    (0..episodes)
        .map(|i| eval_episode(env, agent, i, seed_base.wrapping_add(i as u64)))
        .collect()
}

pub fn records_to_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.episode,
            r.success as u8,
            r.energy_steps,
            r.time_seconds,
            r.mean_rate_hz
        ));
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<EvalRecord>, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == EVAL_CSV_HEADER => {}
        other => {
            return Err(CsvError::BadHeader {
                found: other.map(|(_, h)| h.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let row = |message: String| CsvError::BadRow { line: i + 1, message };
        if fields.len() != 5 {
            return Err(row(format!("expected 5 fields, got {}", fields.len())));
        }
        let episode = fields[0].parse().map_err(|_| row(format!("episode {:?}", fields[0])))?;
        let success = match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(row(format!("success flag {other:?}"))),
        };
        let energy_steps =
            fields[2].parse().map_err(|_| row(format!("energy_steps {:?}", fields[2])))?;
        let time_seconds =
            fields[3].parse().map_err(|_| row(format!("time_seconds {:?}", fields[3])))?;
        let mean_rate_hz =
            fields[4].parse().map_err(|_| row(format!("mean_rate_hz {:?}", fields[4])))?;
        out.push(EvalRecord { episode, success, energy_steps, time_seconds, mean_rate_hz });
    }
    Ok(out)
}

/// Per-method descriptive rows plus paired tests, metric by metric.
#[derive(Clone, Debug)]
pub struct CompareReport {
    pub a_name: String,
    pub b_name: String,
    /// `(method, metric, summary)` in metric-major order a-then-b.
    pub summaries: Vec<(String, String, Summary)>,
    /// `(metric, test result)`; errors mark degenerate comparisons.
    pub tests: Vec<(String, Result<TTest, StatError>)>,
}

fn metric_values(records: &[EvalRecord], metric: &str) -> Vec<f64> {
    records
        .iter()
        .map(|r| match metric {
            "energy_steps" => r.energy_steps as f64,
            "time_seconds" => r.time_seconds,
            "mean_rate_hz" => r.mean_rate_hz,
            _ => unreachable!("unknown metric"),
        })
        .collect()
}

/// Compare paired evaluation runs. Records must be index-aligned (same
/// seed sequence, same count).
pub fn compare_report(
    a_name: &str,
    a: &[EvalRecord],
    b_name: &str,
    b: &[EvalRecord],
) -> CompareReport {
    assert_eq!(a.len(), b.len(), "paired comparison needs equal episode counts");
    assert!(a.len() >= 2, "paired comparison needs at least 2 episodes");
    let mut summaries = Vec::new();
    let mut tests = Vec::new();
    for metric in COMPARE_METRICS {
        let va = metric_values(a, metric);
        let vb = metric_values(b, metric);
        summaries.push((a_name.to_string(), metric.to_string(), descriptives(&va)));
        summaries.push((b_name.to_string(), metric.to_string(), descriptives(&vb)));
        tests.push((metric.to_string(), paired_t_test(&va, &vb)));
    }
    CompareReport {
        a_name: a_name.to_string(),
        b_name: b_name.to_string(),
        summaries,
        tests,
    }
}

impl CompareReport {
    /// Two csv sections: descriptives, then the paired tests. Degenerate
    /// tests emit an unbounded t with a note instead of failing the report.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,N,mean,sd,se,cov\n");
        for (method, metric, s) in &self.summaries {
            out.push_str(&format!(
                "{method},{metric},{},{},{},{},{}\n",
                s.n, s.mean, s.sd, s.se, s.cov
            ));
        }
        out.push('\n');
        out.push_str("metric,t,df,p,note\n");
        for (metric, res) in &self.tests {
            match res {
                Ok(t) => out.push_str(&format!("{metric},{},{},{},\n", t.t, t.df, t.p)),
                Err(StatError::ZeroVariance { mean_diff }) => {
                    let t = if *mean_diff > 0.0 {
                        "inf"
                    } else if *mean_diff < 0.0 {
                        "-inf"
                    } else {
                        "NaN"
                    };
                    out.push_str(&format!("{metric},{t},,,zero-variance\n"));
                }
                Err(e) => out.push_str(&format!("{metric},,,,{e}\n")),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentSpec;
    use crate::env::EnvConfig;
    use crate::optim::Schedule;
    use crate::track::TrackSpec;

    fn test_env(jitter: f64) -> Environment {
        let track =
            TrackSpec::new(vec![(0.0, 0.0), (30.0, 0.0), (60.0, 0.0)], 5.0, 1.0 / 120.0).unwrap();
        let config = EnvConfig { k_length: 60, start_jitter: jitter, ..EnvConfig::default() };
        Environment::new(track, config)
    }

    fn test_agent(seed: u64) -> Agent {
        let spec = AgentSpec {
            hidden: vec![8],
            schedule: Schedule::Constant,
            ..AgentSpec::default()
        };
        Agent::new(&spec, &mut crate::rng::stream(seed, 0x6576))
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut env = test_env(0.0);
        let ag = test_agent(1);
        let a = evaluate(&mut env, &ag, 3, 500);
        let b = evaluate(&mut env, &ag, 3, 500);
        assert_eq!(a, b);
        for (i, r) in a.iter().enumerate() {
            assert_eq!(r.episode, i);
            assert!(r.energy_steps > 0);
            assert!(r.time_seconds > 0.0);
            assert_eq!(r.mean_rate_hz, r.energy_steps as f64 / r.time_seconds);
        }
        // Without start jitter every episode is identical.
        assert_eq!(a[0].energy_steps, a[1].energy_steps);
        assert_eq!(a[0].time_seconds, a[1].time_seconds);
    }

    #[test]
    fn start_jitter_varies_episodes() {
        let mut env = test_env(1.0);
        let mut ag = test_agent(2);
        // A freshly initialized head is nearly constant, so its snapped
        // durations cannot differ between starts; crank the weights until
        // the policy actually reacts to the observation.
        for w in ag.head.net.weights_mut() {
            *w *= 4000.0;
        }
        let rs = evaluate(&mut env, &ag, 6, 700);
        let first = rs[0];
        assert!(
            rs.iter().any(|r| r.time_seconds != first.time_seconds
                || r.energy_steps != first.energy_steps),
            "jittered starts should not all coincide"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let records = vec![
            EvalRecord {
                episode: 0,
                success: true,
                energy_steps: 412,
                time_seconds: 12.256789012345,
                mean_rate_hz: 33.61234567890123,
            },
            EvalRecord {
                episode: 1,
                success: false,
                energy_steps: 7,
                time_seconds: 0.2333333333333333,
                mean_rate_hz: 30.000000000000004,
            },
        ];
        let csv = records_to_csv(&records);
        assert!(csv.starts_with(EVAL_CSV_HEADER));
        let back = records_from_csv(&csv).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn csv_rejects_damage() {
        assert!(matches!(records_from_csv(""), Err(CsvError::BadHeader { .. })));
        assert!(matches!(
            records_from_csv("nope,header\n1,2,3,4,5\n"),
            Err(CsvError::BadHeader { .. })
        ));
        let good = format!("{EVAL_CSV_HEADER}\n0,1,10,1.5,6.666\n");
        assert!(records_from_csv(&good).is_ok());
        let bad_flag = format!("{EVAL_CSV_HEADER}\n0,yes,10,1.5,6.666\n");
        assert!(matches!(records_from_csv(&bad_flag), Err(CsvError::BadRow { line: 2, .. })));
        let short = format!("{EVAL_CSV_HEADER}\n0,1,10,1.5\n");
        assert!(records_from_csv(&short).is_err());
    }

    fn rec(episode: usize, energy: usize, time: f64) -> EvalRecord {
        EvalRecord {
            episode,
            success: true,
            energy_steps: energy,
            time_seconds: time,
            mean_rate_hz: energy as f64 / time,
        }
    }

    #[test]
    fn compare_report_reuses_the_paired_t_machinery() {
        // Energies 2,3,4,6 vs 1,2,3,4: the t = 5, df = 3 fixture.
        let a: Vec<EvalRecord> =
            [2, 3, 4, 6].iter().enumerate().map(|(i, &e)| rec(i, e, 1.0)).collect();
        let b: Vec<EvalRecord> =
            [1, 2, 3, 4].iter().enumerate().map(|(i, &e)| rec(i, e, 1.0)).collect();
        let report = compare_report("adaptive", &a, "baseline", &b);
        let (metric, res) = &report.tests[0];
        assert_eq!(metric, "energy_steps");
        let t = res.as_ref().unwrap();
        assert_eq!(t.t, 5.0);
        assert_eq!(t.df, 3);
        assert!((t.p - 0.0154).abs() < 1e-3);

        let (_, _, s) = &report.summaries[0];
        assert_eq!(s.mean, 3.75);
        assert_eq!(s.n, 4);

        // Identical time columns: degenerate, reported not panicked.
        let (m2, res2) = &report.tests[1];
        assert_eq!(m2, "time_seconds");
        assert_eq!(res2, &Err(StatError::ZeroVariance { mean_diff: 0.0 }));

        let csv = report.to_csv();
        assert!(csv.contains("adaptive,energy_steps,4,3.75,"));
        assert!(csv.contains("energy_steps,5,3,0.015"));
        assert!(csv.contains("time_seconds,NaN,,,zero-variance"));
    }
}

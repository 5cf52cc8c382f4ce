//! Subcommand bodies. Each returns `Ok(())` or a [`Failure`] whose exit code
//! the dispatcher passes to the OS:
//!
//! * 0  success
//! * 1  broken data: unreadable checkpoints, malformed CSV or track files,
//!      write failures
//! * 2  usage: bad flags, bad config keys, missing input files, mismatched
//!      comparison inputs
//! * 3  training aborted on non-finite numbers

use std::fs;
use std::path::{Path, PathBuf};

use elastic_core::agent::{Agent, AgentSpec, AGENT_MAGIC};
use elastic_core::env::{Done, ElasticAction, EnvConfig, Environment, OBS_DIM};
use elastic_core::eval::{
    compare_report, eval_episode, records_from_csv, records_to_csv, EvalRecord,
};
use elastic_core::net::{mlp_specs, Activation, DenseNet};
use elastic_core::reward::{adapt_alpha, alpha_eps_of, seac_shape_reward, shape_reward, RewardParams};
use elastic_core::rng::stream;
use elastic_core::tape::grad_check;
use elastic_core::track::TrackSpec;
use elastic_core::trainer::{run_training, TrainError};
use rand::Rng;

use crate::config::{AlgoName, RunConfig};
use crate::sink::FileSink;

pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: String) -> Failure {
        Failure { code: 2, message }
    }
    fn data(message: String) -> Failure {
        Failure { code: 1, message }
    }
}

/// Defaults, then the config file, then command-line overrides; later layers
/// win. A missing config file is a usage error naming the path.
fn build_config(
    path: Option<&Path>,
    algo: Option<AlgoName>,
    seed: Option<u64>,
    episodes: Option<usize>,
    literal_reward_storage: bool,
) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        let text = fs::read_to_string(p)
            .map_err(|e| Failure::usage(format!("config file {}: {e}", p.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| Failure::usage(format!("config file {}: {e}", p.display())))?;
    }
    if let Some(a) = algo {
        cfg.algo = a;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = episodes {
        cfg.episodes = n;
    }
    if literal_reward_storage {
        cfg.literal_reward_storage = true;
    }
    Ok(cfg)
}

fn load_track(cfg: &RunConfig) -> Result<TrackSpec, Failure> {
    if cfg.track == "builtin:stadium" {
        return Ok(TrackSpec::stadium());
    }
    let path = Path::new(&cfg.track);
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("track file {}: {e}", path.display())))?;
    TrackSpec::parse(&text)
        .map_err(|e| Failure::data(format!("track file {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Failure::data(format!("creating {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Failure::data(format!("writing {}: {e}", path.display())))
}

pub fn cmd_train(
    config: Option<PathBuf>,
    algo: Option<AlgoName>,
    seed: Option<u64>,
    out: PathBuf,
    episodes: Option<usize>,
    literal_reward_storage: bool,
) -> Result<(), Failure> {
    let cfg = build_config(config.as_deref(), algo, seed, episodes, literal_reward_storage)?;
    let track = load_track(&cfg)?;
    let tc = cfg.train_config().map_err(|e| Failure::usage(format!("config: {e}")))?;

    fs::create_dir_all(&out)
        .map_err(|e| Failure::data(format!("creating {}: {e}", out.display())))?;
    write_file(&out.join("resolved_config"), cfg.resolved_text().as_bytes())?;

    let mut sink = FileSink::create(&out)
        .map_err(|e| Failure::data(format!("output dir {}: {e}", out.display())))?;
    let outcome = run_training(&tc, track, &mut sink, None).map_err(|e| match e {
        TrainError::Config(msg) => Failure::usage(format!("config: {msg}")),
        TrainError::Diverged { episode, update, source, diagnostics } => Failure {
            code: 3,
            message: format!(
                "training aborted: non-finite numbers at episode {episode}, update {update}: \
                 {source}; {diagnostics}"
            ),
        },
        other => Failure::data(format!("training: {other}")),
    })?;

    write_file(&out.join("ckpt_final.bin"), &outcome.agent.encode_bundle(tc.config_hash))?;

    println!(
        "trained {} episodes (algo {}, seed {}); artifacts in {}",
        outcome.episodes_run,
        cfg.algo.as_str(),
        cfg.seed,
        out.display()
    );
    if outcome.early_stopped {
        println!(
            "stopped early: evaluation success rate {:.3} reached the target",
            outcome.last_eval_rate.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

pub fn cmd_eval(
    ckpt: PathBuf,
    config: Option<PathBuf>,
    out: PathBuf,
    episodes: usize,
    seed: u64,
    workers: usize,
) -> Result<(), Failure> {
    if workers == 0 {
        return Err(Failure::usage("--workers must be at least 1".into()));
    }
    if episodes == 0 {
        return Err(Failure::usage("--episodes must be at least 1".into()));
    }
    let cfg = build_config(config.as_deref(), None, None, None, false)?;
    let track = load_track(&cfg)?;

    let bytes = fs::read(&ckpt)
        .map_err(|e| Failure::usage(format!("checkpoint {}: {e}", ckpt.display())))?;
    let ck = Agent::decode_bundle(&bytes).map_err(|e| {
        Failure::data(format!(
            "checkpoint {}: {e}; expected an agent bundle starting with {AGENT_MAGIC:?}",
            ckpt.display()
        ))
    })?;
    if ck.actor.input_dim() != OBS_DIM {
        return Err(Failure::data(format!(
            "checkpoint {}: actor expects {}-wide observations, this build produces {}",
            ckpt.display(),
            ck.actor.input_dim(),
            OBS_DIM
        )));
    }
    let tc = cfg.train_config().map_err(|e| Failure::usage(format!("config: {e}")))?;
    let agent = Agent::from_checkpoint(ck, tc.actor_rate, tc.critic_rate, tc.temp_rate, tc.schedule);

    // Episode i always resets with seed + i, so any chunking of the index
    // range merges back into the sequential result byte for byte.
    let env_cfg = cfg.env_config();
    let records: Vec<EvalRecord> = if workers == 1 {
        let mut env = Environment::new(track, env_cfg);
        (0..episodes).map(|i| eval_episode(&mut env, &agent, i, seed.wrapping_add(i as u64))).collect()
    } else {
        let chunk = episodes.div_ceil(workers);
        let mut slots: Vec<Option<EvalRecord>> = vec![None; episodes];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let lo = (w * chunk).min(episodes);
                let hi = ((w + 1) * chunk).min(episodes);
                if lo == hi {
                    continue;
                }
                let track = track.clone();
                let agent = &agent;
                handles.push(scope.spawn(move || {
                    let mut env = Environment::new(track, env_cfg);
                    (lo..hi)
                        .map(|i| (i, eval_episode(&mut env, agent, i, seed.wrapping_add(i as u64))))
                        .collect::<Vec<_>>()
                }));
            }
            for h in handles {
                for (i, r) in h.join().expect("eval worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("episode index gap")).collect()
    };

    write_file(&out, records_to_csv(&records).as_bytes())?;

    let successes = records.iter().filter(|r| r.success).count();
    let mean_steps =
        records.iter().map(|r| r.energy_steps as f64).sum::<f64>() / records.len() as f64;
    let mean_time = records.iter().map(|r| r.time_seconds).sum::<f64>() / records.len() as f64;
    println!(
        "evaluated {} episodes: {}/{} success, mean energy {:.1} steps, mean time {:.3} s -> {}",
        records.len(),
        successes,
        records.len(),
        mean_steps,
        mean_time,
        out.display()
    );
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<EvalRecord>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("evaluation csv {}: {e}", path.display())))?;
    records_from_csv(&text)
        .map_err(|e| Failure::data(format!("evaluation csv {}: {e}", path.display())))
}

fn method_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "method".into())
}

pub fn cmd_compare(a: PathBuf, b: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let ra = read_records(&a)?;
    let rb = read_records(&b)?;
    if ra.len() != rb.len() {
        return Err(Failure::usage(format!(
            "pairing error: {} has {} episodes, {} has {}; paired comparison needs equal counts",
            a.display(),
            ra.len(),
            b.display(),
            rb.len()
        )));
    }
    if ra.len() < 2 {
        return Err(Failure::usage(format!(
            "pairing error: need at least 2 episodes per side, got {}",
            ra.len()
        )));
    }

    let (an, bn) = (method_name(&a), method_name(&b));
    let report = compare_report(&an, &ra, &bn, &rb);

    let rate = |rs: &[EvalRecord]| {
        rs.iter().filter(|r| r.success).count() as f64 / rs.len() as f64
    };
    println!("paired comparison over {} episodes: {} vs {}", ra.len(), an, bn);
    println!("  success rate: {:.3} vs {:.3}", rate(&ra), rate(&rb));
    for (metric, res) in &report.tests {
        let (sa, sb) = {
            let mut pair = report.summaries.iter().filter(|(_, m, _)| m == metric);
            let a = &pair.next().expect("metric summary").2;
            let b = &pair.next().expect("metric summary").2;
            (a, b)
        };
        match res {
            Ok(t) => println!(
                "  {metric}: mean {:.4} vs {:.4} (t = {:.3}, df = {}, p = {:.4})",
                sa.mean, sb.mean, t.t, t.df, t.p
            ),
            Err(e) => println!("  {metric}: mean {:.4} vs {:.4} ({e})", sa.mean, sb.mean),
        }
    }

    let csv = report.to_csv();
    match out {
        Some(path) => {
            write_file(&path, csv.as_bytes())?;
            println!("report -> {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

// Selfcheck suites. Each returns a one-line detail on pass, the first failing
// assertion on failure.

fn check(cond: bool, what: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn suite_gradients(seed: u64) -> Result<String, String> {
    let mut rng = stream(seed, 0x6763_6864);
    let shapes: &[(usize, &[usize], usize)] =
        &[(23, &[16, 16], 8), (5, &[12], 3), (7, &[10, 6], 1), (3, &[], 4)];
    let acts = [Activation::Tanh, Activation::Relu, Activation::Identity];
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for &(i, h, o) in shapes {
        for &act in &acts {
            let net = DenseNet::init(mlp_specs(i, h, o, act, Activation::Identity), &mut rng, None)
                .expect("spec is valid");
            // Keep ReLU probes away from the kink; FD across it is meaningless.
            let input: Vec<f64> = (0..i).map(|_| rng.random_range(0.25..1.0)).collect();
            let err = grad_check(&net, &input);
            if !err.is_finite() {
                return Err(format!("non-finite gradient error on {i}x{h:?}x{o} {act:?}"));
            }
            worst = worst.max(err);
            count += 1;
        }
    }
    check(worst < 1e-4, &format!("max rel err {worst:.3e} >= 1e-4 over {count} nets"))?;
    Ok(format!("max rel err {worst:.3e} over {count} nets"))
}

fn scripted_action(k: usize) -> ElasticAction {
    ElasticAction {
        gas: 0.6,
        brake: 0.0,
        steer: 0.3 * f64::sin(k as f64 * 0.37),
        duration: 0.02 + 0.01 * ((k % 5) as f64),
    }
}

fn suite_env_determinism(seed: u64) -> Result<String, String> {
    let cfg = EnvConfig { start_jitter: 0.3, ..EnvConfig::default() };
    let mut a = Environment::new(TrackSpec::stadium(), cfg);
    let mut b = Environment::new(TrackSpec::stadium(), cfg);
    let steps = 60usize;

    let run = |env: &mut Environment| {
        let mut stream = env.reset(seed).observation;
        for k in 0..steps {
            let sr = env.step(scripted_action(k));
            stream.extend_from_slice(&sr.observation);
            if sr.done != Done::Running {
                break;
            }
        }
        stream
    };
    let sa = run(&mut a);
    let sb = run(&mut b);
    check(sa.len() == sb.len(), "seeded replays took different lengths")?;
    check(
        sa.iter().zip(&sb).all(|(x, y)| x.to_bits() == y.to_bits()),
        "seeded replays disagree bitwise",
    )?;
    let other = a.reset(seed ^ 1).observation;
    check(other[..] != sa[..OBS_DIM], "different seeds produced the same start state")?;

    // Snapshot mid-episode, play a tail, restore, play it again.
    a.reset(seed);
    for k in 0..20 {
        a.step(scripted_action(k));
    }
    let snap = a.snapshot();
    let tail = |env: &mut Environment| {
        let mut stream = Vec::new();
        for k in 20..40 {
            let sr = env.step(scripted_action(k));
            stream.extend_from_slice(&sr.observation);
            if sr.done != Done::Running {
                break;
            }
        }
        stream
    };
    let t1 = tail(&mut a);
    a.restore(&snap);
    let t2 = tail(&mut a);
    check(
        t1.len() == t2.len() && t1.iter().zip(&t2).all(|(x, y)| x.to_bits() == y.to_bits()),
        "snapshot/restore replay disagrees bitwise",
    )?;
    Ok(format!("two seeded replays and a snapshot/restore replay matched bitwise over {steps} steps"))
}

fn suite_reward_rules() -> Result<String, String> {
    check(alpha_eps_of(1.0) == 0.1, "per-step penalty at magnitude 1 is not exactly 0.1")?;
    let mut prev = alpha_eps_of(0.0);
    for i in 1..=50 {
        let cur = alpha_eps_of(i as f64 * 0.1);
        check(cur < prev, "per-step penalty is not strictly decreasing")?;
        prev = cur;
    }

    let p = RewardParams::new(1.0, 5.0, 0.02);
    check(
        close(shape_reward(2.0, 0.1, 0.02, &p), 0.3, 1e-12),
        "shaped reward fixture (r_t 2, duration 0.1) is off",
    )?;
    check(
        close(shape_reward(0.0, 0.5, 0.02, &p), -0.1, 1e-15),
        "zero task reward must cost exactly the per-step penalty",
    )?;
    check(
        close(seac_shape_reward(2.0, 0.1, 0.1, 0.5), 1.85, 1e-12),
        "linear baseline fixture is off",
    )?;

    let mut q = RewardParams::new(1.0, 5.0, 0.02);
    adapt_alpha(&mut q, 1.0);
    check(q.alpha_m == 1.0, "first window must not trigger adaptation")?;
    adapt_alpha(&mut q, 0.9);
    check(close(q.alpha_m, 1.02, 1e-15), "decline must bump the magnitude by psi")?;
    check(q.alpha_eps == alpha_eps_of(q.alpha_m), "stored penalty drifted from its formula")?;
    adapt_alpha(&mut q, 0.9);
    check(close(q.alpha_m, 1.02, 1e-15), "flat window must not trigger adaptation")?;
    let mut r = RewardParams::new(4.99, 5.0, 0.02);
    adapt_alpha(&mut r, 1.0);
    adapt_alpha(&mut r, 0.0);
    adapt_alpha(&mut r, -1.0);
    check(r.alpha_m == 5.0, "magnitude must cap at its maximum")?;
    Ok("fixtures, monotonicity, and adaptation edge cases hold".into())
}

fn suite_checkpoints(seed: u64) -> Result<String, String> {
    let mut rng = stream(seed, 0x636b_7074);
    let spec = AgentSpec { hidden: vec![8], ..AgentSpec::default() };
    let agent = Agent::new(&spec, &mut rng);
    let bytes = agent.encode_bundle(0xABCD_EF01);
    let ck = Agent::decode_bundle(&bytes).map_err(|e| format!("round-trip decode failed: {e}"))?;
    check(ck.config_hash == 0xABCD_EF01, "config hash did not survive the round trip")?;
    let again = Agent::from_checkpoint(
        ck,
        spec.actor_rate,
        spec.critic_rate,
        spec.temp_rate,
        spec.schedule,
    )
    .encode_bundle(0xABCD_EF01);
    check(bytes == again, "re-encoded bundle is not byte-identical")?;

    let mut corrupt = bytes.clone();
    corrupt[0] ^= 0xFF;
    check(
        Agent::decode_bundle(&corrupt).is_err(),
        "bundle with a corrupted magic string was accepted",
    )?;
    check(
        Agent::decode_bundle(&bytes[..bytes.len() - 3]).is_err(),
        "truncated bundle was accepted",
    )?;
    Ok(format!("{}-byte bundle round-trips; corrupted magic and truncation rejected", bytes.len()))
}

pub fn cmd_selfcheck(seed: u64) -> Result<(), Failure> {
    // All suites draw from one named substream so reruns with the same seed
    // print the same numbers.
    let base = stream(seed, 0x7363_686b).random::<u64>();
    let suites: [(&str, Box<dyn Fn() -> Result<String, String>>); 4] = [
        ("gradients", Box::new(move || suite_gradients(base))),
        ("env-determinism", Box::new(move || suite_env_determinism(base ^ 0x0101))),
        ("reward-rules", Box::new(suite_reward_rules)),
        ("checkpoints", Box::new(move || suite_checkpoints(base ^ 0x0202))),
    ];
    let mut failed = 0usize;
    for (name, run) in &suites {
        match run() {
            Ok(detail) => println!("ok   {name}: {detail}"),
            Err(what) => {
                failed += 1;
                println!("FAIL {name}: {what}");
            }
        }
    }
    if failed > 0 {
        return Err(Failure::data(format!("{failed} of {} suites failed", suites.len())));
    }
    println!("all {} suites passed", suites.len());
    Ok(())
}

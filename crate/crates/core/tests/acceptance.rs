//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known to be out of reach for
//! the model as specified; they still run and still print FAIL. The binary
//! exits nonzero if any other criterion fails, or if a listed one starts
//! passing (so the list cannot go stale).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use son_core::baseline::FifoAgent;
use son_core::config::{AgentKind, ExperimentConfig};
use son_core::dqn::ExplorationSchedule;
use son_core::experiment::{run_experiment, run_grid, run_single, RunResult};
use son_core::fault::{AlarmType, FaultEngine, FaultKind, FaultRates, FaultRegister};
use son_core::mdp::{reward, Agent, MdpAction, RewardSchedule, SonEnv, SERVING_CELL};
use son_core::metrics::{empirical_cdf, percentile};
use son_core::nn::QNetwork;
use son_core::radio::{ClusterConfig, RadioEnv};
use son_core::rng::{SeedStreams, SimRng, Stream};

const EXPECTED_FAILURES: &[u32] = &[7, 8];

const SEEDS: u64 = 20;
const REWARD_TIME_LIMIT: Duration = Duration::from_secs(1);
const GRADIENT_NETS: usize = 100;
const GRADIENT_REL_TOL: f64 = 1e-4;
const GRADIENT_ABS_FLOOR: f64 = 1e-6;
const GRADIENT_TIME_LIMIT: Duration = Duration::from_secs(10);
const EPSILON_TOL: f64 = 1e-12;
const FEEDER_TOL_DB: f64 = 1e-9;
const SIGN_TEST_ALPHA: f64 = 0.05;
const LEARNING_TIME_LIMIT: Duration = Duration::from_secs(60);
const PERCENTILE_SETS: usize = 1000;
const RUNTIME_LIMIT: Duration = Duration::from_secs(10);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn default_env(seed: u64) -> SonEnv {
    let c = ExperimentConfig::default();
    SonEnv::new(
        c.cluster,
        c.rates,
        c.rewards,
        c.episode.tau,
        c.azimuth_delta_deg,
        seed,
    )
    .expect("default environment builds")
}

/// Case-by-case transcription of the reward definition, written apart from
/// the library version.
fn reward_oracle(prev: usize, cur: usize) -> f64 {
    let (r1, r2, r3, r4) = (-1.0, 0.0, 1.0, 5.0);
    if cur == 0 {
        return r4;
    }
    if 0 < prev && prev < cur {
        return r1;
    }
    if cur == prev {
        return r2;
    }
    if cur < prev {
        return r3;
    }
    // prev == 0 < cur: the first alarm of an episode counts as an increase.
    r1
}

fn c1_reward() -> Verdict {
    let start = Instant::now();
    let schedule = RewardSchedule::default();
    let mut mismatches = 0;
    for prev in 0..=5 {
        for cur in 0..=5 {
            if reward(prev, cur, &schedule) != reward_oracle(prev, cur) {
                mismatches += 1;
            }
        }
    }
    let took = start.elapsed();
    verdict(
        mismatches == 0 && took < REWARD_TIME_LIMIT,
        format!("36 pairs, {mismatches} mismatches, {took:?}"),
    )
}

/// Pre-activation closest to a ReLU kink, over every hidden unit.
fn kink_margin(net: &QNetwork, input: &[f64]) -> f64 {
    let pre = net.pre_activations(input);
    pre[..pre.len() - 1]
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, z| m.min(z.abs()))
}

fn c2_gradients() -> Verdict {
    let start = Instant::now();
    let mut rng = SeedStreams::new(2024).rng(Stream::NetworkInit);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < GRADIENT_NETS {
        let mut net = QNetwork::new(&[3, 24, 24, 5], &mut rng);
        for p in net.params_mut() {
            *p += rng.random_range(-0.5..0.5);
        }
        let input: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        if kink_margin(&net, &input) < 1e-4 {
            continue;
        }
        let action = rng.random_range(0..5);
        let target = rng.random_range(-5.0..5.0);
        let (_, grads) = net.backward(&input, action, target);
        let analytic: Vec<f64> = grads.params().copied().collect();
        let loss = |n: &QNetwork| {
            let q = n.forward(&input)[action];
            (target - q) * (target - q)
        };
        for (i, g) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(i).unwrap() -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let err = (g - numeric).abs() / g.abs().max(numeric.abs()).max(GRADIENT_ABS_FLOOR);
            worst = worst.max(err);
        }
        checked += 1;
    }
    let took = start.elapsed();
    verdict(
        worst < GRADIENT_REL_TOL && took < GRADIENT_TIME_LIMIT,
        format!("{checked} nets, worst relative error {worst:.2e}, {took:?}"),
    )
}

fn c3_epsilon() -> Verdict {
    let mut s = ExplorationSchedule::default();
    let mut worst = 0.0f64;
    let mut first_floor = None;
    for k in 1..=60 {
        s.decay();
        let expected = 0.91f64.powi(k).max(0.01);
        worst = worst.max((s.epsilon - expected).abs());
        if first_floor.is_none() && s.epsilon == 0.01 {
            first_floor = Some(k);
        }
    }
    verdict(
        worst < EPSILON_TOL && first_floor == Some(49),
        format!("max deviation {worst:.1e}, floor first reached at episode {first_floor:?}"),
    )
}

fn c4_round_trip() -> Verdict {
    let env = default_env(4);
    let healthy = env.radio().cells.clone();
    let mut rng: SimRng = SeedStreams::new(4).rng(Stream::FaultTarget(0));
    let mut failures = Vec::new();
    for alarm in AlarmType::ALL {
        let mut cells = healthy.clone();
        let mut engine = FaultEngine::new(SERVING_CELL, 30.0);
        let mut reg = FaultRegister::new();
        engine.apply(alarm, &mut cells, &mut reg, &mut rng);
        if cells == healthy || reg.count(alarm) != 1 {
            failures.push(format!("{alarm:?} had no effect"));
        }
        engine.clear(alarm, &mut cells, &mut reg);
        if cells != healthy || !reg.is_clear() {
            failures.push(format!("{alarm:?} not restored"));
        }
    }
    let mut cells = healthy.clone();
    let mut engine = FaultEngine::new(SERVING_CELL, 30.0);
    let mut reg = FaultRegister::new();
    let nd = AlarmType::NeighborDown;
    engine.apply(nd, &mut cells, &mut reg, &mut rng);
    engine.apply(nd, &mut cells, &mut reg, &mut rng);
    let down_after_two = cells.iter().filter(|c| !c.is_up).count();
    let ok_two = reg.count(nd) == 2 && reg.active_count() == 1 && down_after_two == 2;
    engine.clear(nd, &mut cells, &mut reg);
    let ok_one = reg.count(nd) == 1 && reg.is_active(nd);
    engine.clear(nd, &mut cells, &mut reg);
    let ok_zero = reg.is_clear() && cells == healthy;
    if !(ok_two && ok_one && ok_zero) {
        failures.push(format!(
            "double neighbour-down counters: {ok_two} {ok_one} {ok_zero}"
        ));
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "4 alarm types restored bit-identically; double neighbour-down counts 2 -> 1 -> 0"
                .into()
        } else {
            failures.join("; ")
        },
    )
}

fn c5_feeder() -> Verdict {
    let cfg = ClusterConfig::default();
    let streams = SeedStreams::new(5);
    let healthy = RadioEnv::build(
        cfg,
        &mut streams.rng(Stream::Geometry),
        &mut streams.rng(Stream::Shadowing),
    )
    .expect("cluster builds");
    let mut faulty = healthy.clone();
    let mut engine = FaultEngine::new(SERVING_CELL, 30.0);
    let mut reg = FaultRegister::new();
    let mut rng = streams.rng(Stream::FaultTarget(0));
    engine.apply(
        AlarmType::FeederFault,
        &mut faulty.cells,
        &mut reg,
        &mut rng,
    );
    let before = healthy.sinr_db();
    let after = faulty.sinr_db();
    let served: Vec<usize> = (0..healthy.ues.len())
        .filter(|&u| healthy.ues[u].serving_cell == Some(SERVING_CELL))
        .collect();
    let worst = served
        .iter()
        .map(|&u| (before[u] - after[u] - 3.0).abs())
        .fold(0.0f64, f64::max);
    verdict(
        !served.is_empty() && worst < FEEDER_TOL_DB,
        format!(
            "{} serving-cell UEs, worst |drop - 3 dB| = {worst:.1e} dB",
            served.len()
        ),
    )
}

fn c6_fifo() -> Verdict {
    // A diversity alarm the FIFO agent never saw keeps the register
    // non-empty, so the episode runs long enough for the script.
    let mut env = default_env(6);
    env.reset(0);
    env.inject(AlarmType::DiversityFailed);
    let script: BTreeMap<u32, AlarmType> = [
        (3, AlarmType::NeighborDown),
        (5, AlarmType::FeederFault),
        (7, AlarmType::AzimuthChanged),
    ]
    .into();
    let mut agent = FifoAgent::new();
    agent.begin_episode();
    let mut actions = Vec::new();
    for t in 1..=10 {
        let a = agent.select_action(env.state(), env.register());
        let event = script
            .get(&t)
            .map_or(FaultKind::Normal, |al| FaultKind::Raise(*al));
        let out = env.step_with_event(event, a).expect("episode alive");
        agent.observe(&out);
        if a != MdpAction::NoOp {
            actions.push((a, t));
        }
    }
    let expected = vec![
        (MdpAction::NeighborUp, 4),
        (MdpAction::RecoverLosses, 6),
        (MdpAction::ResetAzimuth, 8),
    ];
    let shown: Vec<String> = actions.iter().map(|(a, t)| format!("{a}@{t}")).collect();
    verdict(actions == expected, format!("actions {}", shown.join(", ")))
}

/// One-sided sign test: P(X >= k) for X ~ Binomial(n, 1/2).
fn sign_test_p(wins: u64, n: u64) -> f64 {
    let mut total = 0.0;
    for k in wins..=n {
        let mut c = 1.0;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        total += c;
    }
    total / 2f64.powi(n as i32)
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c7_learning() -> Verdict {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        agents: vec![AgentKind::Dqn],
        seeds: (0..SEEDS).collect(),
        ..ExperimentConfig::default()
    };
    let runs = run_grid(&cfg).expect("dqn runs");
    let took = start.elapsed();
    let (mut wins, mut losses) = (0, 0);
    let (mut early_all, mut late_all) = (Vec::new(), Vec::new());
    for r in &runs {
        let early = mean(r.episodes[..10].iter().map(|e| e.total_reward));
        let late = mean(r.episodes[40..50].iter().map(|e| e.total_reward));
        early_all.push(early);
        late_all.push(late);
        if late > early {
            wins += 1;
        } else if late < early {
            losses += 1;
        }
    }
    let p = sign_test_p(wins, wins + losses);
    verdict(
        p < SIGN_TEST_ALPHA && took < LEARNING_TIME_LIMIT,
        format!(
            "episodes 41-50 beat 1-10 on {wins}/{} seeds (p = {p:.4}); mean reward {:.3} -> {:.3}; {took:?}",
            wins + losses,
            mean(early_all),
            mean(late_all)
        ),
    )
}

fn per_agent_mean(
    runs: &[RunResult],
    q: usize,
    f: impl Fn(&RunResult) -> f64,
) -> BTreeMap<AgentKind, f64> {
    AgentKind::ALL
        .iter()
        .map(|a| {
            let v = runs
                .iter()
                .filter(|r| r.agent == *a && r.ues_per_cell == q)
                .map(&f);
            (*a, mean(v))
        })
        .collect()
}

fn c8_ordering(runs: &[RunResult]) -> Verdict {
    let clear = per_agent_mean(runs, 10, |r| r.summary.mean_clearance_ttis);
    let sinr = per_agent_mean(runs, 10, |r| r.summary.mean_sinr_db);
    let (d, f, r) = (AgentKind::Dqn, AgentKind::Fifo, AgentKind::Random);
    let clear_ok = clear[&d] <= clear[&f] && clear[&d] <= clear[&r];
    let sinr_ok = sinr[&d] >= sinr[&f] && sinr[&f] >= sinr[&r];
    verdict(
        clear_ok && sinr_ok,
        format!(
            "clearance TTIs dqn {:.3} fifo {:.3} random {:.3}; mean SINR dB dqn {:.4} fifo {:.4} random {:.4}",
            clear[&d], clear[&f], clear[&r], sinr[&d], sinr[&f], sinr[&r]
        ),
    )
}

fn relative_spread(values: &BTreeMap<AgentKind, f64>) -> f64 {
    let v: Vec<f64> = values.values().copied().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / mean(v)
}

fn c9_convergence(runs: &[RunResult]) -> Verdict {
    let at10 = relative_spread(&per_agent_mean(runs, 10, |r| r.summary.throughput.average));
    let at50 = relative_spread(&per_agent_mean(runs, 50, |r| r.summary.throughput.average));
    verdict(
        at50 < at10,
        format!("relative spread of average UE rate: q=10 {at10:.5}, q=50 {at50:.5}"),
    )
}

/// Independent nearest-rank oracle: smallest sample with at least
/// `p n` samples at or below it.
fn percentile_oracle(samples: &[f64], p: f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    for x in &v {
        let at_or_below = v.iter().filter(|y| *y <= x).count() as f64;
        if at_or_below >= p * n {
            return *x;
        }
    }
    v[v.len() - 1]
}

fn c10_percentiles() -> Verdict {
    let mut rng = SeedStreams::new(10).rng(Stream::Policy);
    let mut mismatches = 0;
    for _ in 0..PERCENTILE_SETS {
        let n = rng.random_range(1..60);
        // Rounded values force ties.
        let samples: Vec<f64> = (0..n)
            .map(|_| (rng.random_range(-20.0..40.0f64) * 2.0).round() / 2.0)
            .collect();
        for p in [0.0, 0.05, 0.25, 0.5, 0.95, 1.0, rng.random::<f64>()] {
            if percentile(&samples, p).unwrap() != percentile_oracle(&samples, p) {
                mismatches += 1;
            }
        }
        let cdf = empirical_cdf(&samples).unwrap();
        let mut distinct = samples.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        let oracle: Vec<(f64, f64)> = distinct
            .iter()
            .map(|x| {
                let k = samples.iter().filter(|y| *y <= x).count();
                (*x, k as f64 / n as f64)
            })
            .collect();
        if cdf != oracle {
            mismatches += 1;
        }
    }
    verdict(
        mismatches == 0,
        format!("{PERCENTILE_SETS} sample sets, {mismatches} mismatches"),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                let mut bytes = std::fs::read(&path).unwrap();
                if rel == "manifest.txt" {
                    // The manifest records where it was written; nothing else
                    // in it may differ.
                    let text = String::from_utf8(bytes).unwrap();
                    bytes = text
                        .lines()
                        .filter(|l| !l.starts_with("experiment.output_dir"))
                        .collect::<Vec<_>>()
                        .join("\n")
                        .into_bytes();
                }
                out.insert(rel, bytes);
            }
        }
    }
    out
}

fn c11_determinism() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let trees: Vec<_> = dirs
        .iter()
        .map(|d| {
            let cfg = ExperimentConfig {
                seeds: vec![11],
                output_dir: d.path().join("out"),
                ..ExperimentConfig::default()
            };
            run_experiment(&cfg).expect("experiment runs");
            read_tree(&cfg.output_dir)
        })
        .collect();
    let csvs = trees[0].keys().filter(|k| k.ends_with(".csv")).count();
    verdict(
        trees[0] == trees[1] && csvs > 0,
        format!(
            "{} files ({csvs} CSV) compared byte for byte",
            trees[0].len()
        ),
    )
}

fn c12_runtime() -> Verdict {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let r = run_single(&cfg, AgentKind::Dqn, 10, 12).expect("run completes");
    let took = start.elapsed();
    verdict(
        took < RUNTIME_LIMIT && r.episodes.len() == 50,
        format!("21 cells, q=10, 50 episodes, tau=20, dqn: {took:?}"),
    )
}

fn main() {
    // Sanity check on the default fault process before anything else.
    assert_eq!(FaultRates::default().probabilities()[0], 5.0 / 9.0);

    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "reward oracle", c1_reward()),
        (2, "gradient correctness", c2_gradients()),
        (3, "epsilon schedule", c3_epsilon()),
        (4, "fault round-trip", c4_round_trip()),
        (5, "feeder physics", c5_feeder()),
        (6, "FIFO ordering", c6_fifo()),
        (7, "learning signal", c7_learning()),
    ];
    let grid = ExperimentConfig {
        seeds: (0..SEEDS).collect(),
        ues_per_cell: vec![10, 50],
        ..ExperimentConfig::default()
    };
    let runs = run_grid(&grid).expect("grid runs");
    results.push((8, "algorithm ordering", c8_ordering(&runs)));
    results.push((9, "high-load convergence", c9_convergence(&runs)));
    results.push((10, "percentile and CDF oracles", c10_percentiles()));
    results.push((11, "determinism", c11_determinism()));
    results.push((12, "desk-scale runtime", c12_runtime()));

    let mut unexpected = Vec::new();
    for (id, name, v) in &results {
        let expected_fail = EXPECTED_FAILURES.contains(id);
        let tag = match (v.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (listed as expected failure)",
        };
        println!("criterion {id:>2} {tag:<34} {name}: {}", v.detail);
        if v.pass == expected_fail {
            unexpected.push(*id);
        }
    }
    let passed = results.iter().filter(|(_, _, v)| v.pass).count();
    println!("{passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}

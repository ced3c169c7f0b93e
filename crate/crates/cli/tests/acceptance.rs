//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary (no libtest harness) so the lines
//! always reach stdout.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use hucrl::agent::{run, Agent, RunConfig, RunManifest};
use hucrl::env::{run_bandit, BanditProblem, Pendulum, Trajectory};
use hucrl::gp_model::{calibration_coverage, kernel_metric, GpDataset, GpPosterior, KernelParams};
use hucrl::hallucination::{recover_eta, AugmentedAction, Dynamics, DynamicsAdapter, KnownDynamics, Strategy, StrategyTag};
use hucrl::planner::{mpc_episode, plan_cem, CemConfig};
use hucrl::rng::seeded;
use hucrl::Error;

const SEEDS: u64 = 5;
const EPISODES: usize = 20;
/// Per (strategy, seed) cell.
const CELL_BUDGET_S: f64 = 600.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn main() -> ExitCode {
    // Like libtest: a bare argument filters criteria by name, flags are ignored.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("bandit demo", bandit),
        ("GP property suite", gp_suite),
        ("reparameterization round-trip", eta_round_trip),
        ("planner oracle equivalence", planner_oracle),
        ("degeneracy equivalence", degeneracy),
        ("determinism", determinism),
        ("pendulum rho=0: all strategies solve", fig1_no_penalty),
        ("pendulum rho=0.2: only H-UCRL solves", fig1_penalty),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let out = check();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {name}: {} ({:.1} s)", out.detail, started.elapsed().as_secs_f64());
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------- bandit

fn bandit() -> Outcome {
    let started = Instant::now();
    let p = BanditProblem::default();
    let kernel = p.default_kernel().unwrap();
    let decoy = p.nearest_index(0.2);
    let best = p.argmax_index();
    let greedy = run_bandit(&p, &kernel, 0.0, 0.2, 40, 0).unwrap();
    let optimistic = run_bandit(&p, &kernel, 2.0, 0.2, 40, 0).unwrap();
    let again = run_bandit(&p, &kernel, 2.0, 0.2, 40, 0).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let stuck = greedy.selections[30..].iter().all(|i| i.abs_diff(decoy) <= 1);
    let last = *optimistic.selections.last().unwrap();
    let found = last.abs_diff(best) <= 1;
    let deterministic = again == optimistic;
    Outcome::new(
        stuck && found && deterministic && elapsed < 10.0,
        format!(
            "beta=0 last 10 within 1 cell of decoy: {stuck}; beta=2 ends {} cells from argmax; deterministic: {deterministic}; {elapsed:.2} s",
            last.abs_diff(best)
        ),
    )
}

// ---------------------------------------------------------------- GP suite

fn se(kernel: &KernelParams, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).zip(&kernel.lengthscales).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    kernel.signal_variance * (-0.5 * d2).exp()
}

fn random_dataset(seed: u64, n: usize, p: usize, q: usize) -> GpDataset {
    let mut rng = seeded(seed);
    let mut ds = GpDataset::new(p, q);
    for _ in 0..n {
        let s: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t: Vec<f64> = (0..p).map(|i| (s[i] - a.iter().sum::<f64>()).cos() + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        ds.push(&s, &a, &t).unwrap();
    }
    ds
}

/// Worst deviation of mean and variance from an explicit-inverse oracle.
fn oracle_error(n: usize, seed: u64) -> f64 {
    let ds = random_dataset(seed, n, 2, 1);
    let kernel = KernelParams::new(vec![0.7, 1.2, 0.9], 1.4, 0.02).unwrap();
    let post = GpPosterior::fit(ds.clone(), kernel.clone()).unwrap();
    let xs: Vec<Vec<f64>> = ds.states().iter().zip(ds.actions()).map(|(s, a)| [s.as_slice(), a.as_slice()].concat()).collect();
    let reg = kernel.noise_variance + post.jitter();
    let k = DMatrix::from_fn(n, n, |i, j| se(&kernel, &xs[i], &xs[j]) + if i == j { reg } else { 0.0 });
    let kinv = k.try_inverse().unwrap();
    let mut rng = seeded(seed + 500);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5)];
        let kx = DVector::from_fn(n, |i, _| se(&kernel, &xs[i], &x));
        let w = &kinv * &kx;
        let var = (se(&kernel, &x, &x) - kx.dot(&w)).max(0.0);
        let pred = post.predict(&x[..2], &x[2..]).unwrap();
        for o in 0..2 {
            let mean: f64 = (0..n).map(|i| w[i] * ds.targets()[i][o]).sum();
            worst = worst.max((pred.mean[o] - mean).abs()).max((pred.std[o].powi(2) - var).abs());
        }
    }
    worst
}

fn contraction_violations() -> usize {
    let kernel = KernelParams::new(vec![0.6, 0.9], 1.2, 1e-3).unwrap();
    let mut bad = 0;
    for seed in 0..30 {
        let all = random_dataset(seed, 30, 1, 1);
        let mut prev: Option<GpPosterior> = None;
        for n in [0, 5, 10, 20, 30] {
            let post = GpPosterior::fit(all.subset(&(0..n).collect::<Vec<_>>()), kernel.clone()).unwrap();
            if let Some(p) = &prev {
                let mut rng = seeded(seed + 7);
                for _ in 0..20 {
                    let (s, u) = ([rng.random_range(-3.0..3.0)], [rng.random_range(-1.0..1.0)]);
                    if post.predict(&s, &u).unwrap().std[0] > p.predict(&s, &u).unwrap().std[0] + 1e-8 {
                        bad += 1;
                    }
                }
            }
            prev = Some(post);
        }
    }
    bad
}

fn lipschitz_violation() -> f64 {
    let kernel = KernelParams::new(vec![0.5, 0.8], 1.3, 0.01).unwrap();
    let post = GpPosterior::fit(random_dataset(3, 25, 1, 1), kernel.clone()).unwrap();
    let mut rng = seeded(11);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-1.5..1.5)];
        let r = if rng.random_bool(0.5) { 0.05 } else { 3.0 };
        let y = [x[0] + r * rng.random_range(-1.0..1.0), x[1] + r * rng.random_range(-1.0..1.0)];
        let sx = post.predict(&x[..1], &x[1..]).unwrap().std[0];
        let sy = post.predict(&y[..1], &y[1..]).unwrap().std[0];
        worst = worst.max((sx - sy).abs() - kernel_metric(&kernel, &x, &y).unwrap());
    }
    worst
}

fn information_monotone() -> bool {
    let kernel = KernelParams::new(vec![1.0, 1.0, 1.0], 1.0, 0.05).unwrap();
    (0..10).all(|seed| {
        let all = random_dataset(seed, 30, 2, 1);
        let mis: Vec<f64> = (0..=30)
            .map(|m| GpPosterior::fit(all.subset(&(0..m).collect::<Vec<_>>()), kernel.clone()).unwrap().mutual_information())
            .collect();
        mis[0] == 0.0 && mis.windows(2).all(|w| w[1] >= w[0] - 1e-12)
    })
}

/// Average beta=2 coverage of the latent function on GP-prior draws.
fn prior_coverage() -> f64 {
    let kernel = KernelParams::new(vec![0.3], 1.0, 1e-4).unwrap();
    let mut total = 0.0;
    for seed in 0..20 {
        let mut rng = seeded(2000 + seed);
        let xs: Vec<f64> = (0..130).map(|_| rng.random_range(0.0..3.0)).collect();
        let k = DMatrix::from_fn(130, 130, |i, j| se(&kernel, &[xs[i]], &[xs[j]]) + if i == j { 1e-10 } else { 0.0 });
        let l = k.cholesky().unwrap().l();
        let f = l * DVector::from_fn(130, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut train = GpDataset::new(1, 0);
        let mut holdout = GpDataset::new(1, 0);
        for i in 0..130 {
            if i < 30 {
                let y = f[i] + kernel.noise_variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
                train.push(&[xs[i]], &[], &[y]).unwrap();
            } else {
                holdout.push(&[xs[i]], &[], &[f[i]]).unwrap();
            }
        }
        let post = GpPosterior::fit(train, kernel.clone()).unwrap();
        total += calibration_coverage(&post, &holdout, 2.0).unwrap();
    }
    total / 20.0
}

fn gp_suite() -> Outcome {
    let oracle = [5, 20, 50].iter().enumerate().map(|(i, &n)| oracle_error(n, i as u64)).fold(0.0, f64::max);
    let contraction = contraction_violations();
    let lipschitz = lipschitz_violation();
    let mi = information_monotone();
    let coverage = prior_coverage();
    Outcome::new(
        oracle <= 1e-8 && contraction == 0 && lipschitz <= 1e-8 && mi && coverage >= 0.9,
        format!(
            "oracle err {oracle:.1e} (<= 1e-8); contraction violations {contraction}; Lipschitz excess {lipschitz:.1e} over 1e4 pairs; MI monotone {mi}; coverage {coverage:.3} (>= 0.9)"
        ),
    )
}

// ---------------------------------------------------------------- eta

fn band_posterior() -> Arc<GpPosterior> {
    let mut rng = seeded(41);
    let mut ds = GpDataset::new(2, 1);
    for _ in 0..25 {
        let s = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let u = [rng.random_range(-1.0..1.0)];
        ds.push(&s, &u, &[0.1 * s[1] + 0.05 * u[0], -0.2 * s[0].sin() + 0.1 * u[0]]).unwrap();
    }
    Arc::new(GpPosterior::fit(ds, KernelParams::new(vec![0.8, 0.8, 1.0], 0.3, 1e-3).unwrap()).unwrap())
}

fn eta_round_trip() -> Outcome {
    let post = band_posterior();
    let mut rng = seeded(42);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let beta = rng.random_range(0.1..3.0);
        let adapter = DynamicsAdapter::new(Strategy::HUcrl { beta }, post.clone(), None).unwrap();
        let s = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let u = [rng.random_range(-1.0..1.0)];
        let pred = post.predict(&s, &u).unwrap();
        let target: Vec<f64> = (0..2).map(|o| pred.mean[o] + beta * pred.std[o] * rng.random_range(-1.0..=1.0)).collect();
        let eta = recover_eta(&post, beta, &s, &u, &target).unwrap();
        let next = adapter.step_hallucinated(&s, &AugmentedAction::new(u.to_vec(), eta), &mut seeded(i)).unwrap();
        for o in 0..2 {
            worst = worst.max((next[o] - s[o] - target[o]).abs());
        }
    }
    let mut rejected = 0;
    for _ in 0..1000 {
        let beta = rng.random_range(0.1..3.0);
        let s = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let u = [rng.random_range(-1.0..1.0)];
        let pred = post.predict(&s, &u).unwrap();
        let bad = rng.random_range(0..2usize);
        let target: Vec<f64> = (0..2)
            .map(|o| {
                let z = if o == bad { rng.random_range(1.01..5.0) } else { rng.random_range(-1.0..=1.0) };
                pred.mean[o] + beta * pred.std[o] * z
            })
            .collect();
        if matches!(recover_eta(&post, beta, &s, &u, &target), Err(Error::OutOfBand { dim, .. }) if dim == bad) {
            rejected += 1;
        }
    }
    Outcome::new(
        worst < 1e-10 && rejected == 1000,
        format!("max round-trip error {worst:.1e} over 1e4 targets (< 1e-10); out-of-band rejected {rejected}/1000"),
    )
}

// ---------------------------------------------------------------- planner

fn cem(horizon: usize, particles: usize, iters: usize) -> CemConfig {
    CemConfig { horizon, n_particles: particles, n_iters: iters, n_elites: (particles / 10).max(1), ..CemConfig::default() }
}

fn snap(u: f64) -> f64 {
    u.round().clamp(-1.0, 1.0)
}

fn planner_oracle() -> Outcome {
    // Two steps over {-1, 0, 1}; the state holds the step count and first action.
    let dynamics = |s: &[f64], u: &[f64]| vec![s[0] + 1.0, if s[0] == 0.0 { snap(u[0]) } else { s[1] }];
    let reward = |s: &[f64], u: &[f64]| {
        let a = (snap(u[0]) + 1.0) as usize;
        if s[0] == 0.0 {
            [0.3, 0.0, 0.5][a]
        } else {
            [[0.1, 0.9, 0.0], [0.4, 0.2, 0.6], [0.2, 0.1, 0.3]][(s[1] + 1.0) as usize][a]
        }
    };
    let mut brute = (f64::NEG_INFINITY, (0.0, 0.0));
    for a in [-1.0, 0.0, 1.0] {
        for b in [-1.0, 0.0, 1.0] {
            let r = reward(&[0.0, 0.0], &[a]) + reward(&dynamics(&[0.0, 0.0], &[a]), &[b]);
            if r > brute.0 {
                brute = (r, (a, b));
            }
        }
    }
    let known = KnownDynamics::new(2, 1, dynamics);
    let exact = (0..10).all(|seed| {
        let plan = plan_cem(&known, &reward, &[0.0, 0.0], &cem(2, 100, 4), None, &mut seeded(seed)).unwrap();
        let seq: Vec<f64> = plan.best_sequence.iter().map(|u| snap(*u)).collect();
        plan.predicted_return == brute.0 && seq == vec![brute.1 .0, brute.1 .1]
    });

    let frozen = KnownDynamics::new(1, 1, |s: &[f64], _: &[f64]| s.to_vec());
    let quad = |_: &[f64], u: &[f64]| -(u[0] - 0.3).powi(2);
    let err = (0..5)
        .map(|seed| (plan_cem(&frozen, &quad, &[0.0], &cem(1, 500, 5), None, &mut seeded(seed)).unwrap().action.u[0] - 0.3).abs())
        .fold(0.0, f64::max);
    Outcome::new(
        exact && err <= 0.05,
        format!("grid CEM equals enumeration (best {}) in 10/10 seeds: {exact}; quadratic optimum error {err:.4} (<= 0.05)", brute.0),
    )
}

// ---------------------------------------------------------------- degeneracy

fn episodes(config: &RunConfig, dynamics: &dyn Dynamics) -> (Trajectory, Trajectory) {
    let params = &config.env.params;
    let mut env = Pendulum::new(params.clone(), config.env.rho, seeded(77)).unwrap();
    let sparse = env.reward_fn();
    let a = mpc_episode(&mut env, dynamics, &sparse, &config.planner, None, &mut seeded(78)).unwrap();
    let mut env = Pendulum::new(params.clone(), config.env.rho, seeded(77)).unwrap();
    let dense = |s: &[f64], u: &[f64]| s[0].cos() - 0.1 * u[0] * u[0];
    let b = mpc_episode(&mut env, dynamics, &dense, &config.planner, None, &mut seeded(78)).unwrap();
    (a, b)
}

fn degeneracy() -> Outcome {
    let mut config = RunConfig::new(2);
    config.env.rho = 0.2;
    config.env.params.horizon = 100;
    let mut agent = Agent::new(config.clone()).unwrap();
    agent.run_episode().unwrap();
    let post = agent.model().clone();
    let noise = Some(config.env.params.noise_std.to_vec());

    let hucrl = DynamicsAdapter::new(Strategy::HUcrl { beta: 0.0 }, post.clone(), noise.clone()).unwrap();
    let greedy = DynamicsAdapter::new(Strategy::Greedy { sample_epistemic: false }, post.clone(), noise.clone()).unwrap();
    let mean = post.clone();
    let known = KnownDynamics::new(2, 1, move |s: &[f64], u: &[f64]| {
        let mu = mean.predict(s, u).unwrap().mean;
        s.iter().zip(mu).map(|(a, b)| a + b).collect()
    })
    .with_angle_dims(vec![0])
    .with_process_noise(noise.clone());
    let a = episodes(&config, &hucrl);
    let b = episodes(&config, &greedy);
    let c = episodes(&config, &known);
    let optimistic = DynamicsAdapter::new(Strategy::HUcrl { beta: 1.0 }, post, noise).unwrap();
    let differs = episodes(&config, &optimistic).1 != a.1;
    Outcome::new(
        a == b && b == c && differs,
        format!(
            "beta=0 H-UCRL == sampling-off greedy: {}; == known GP-mean dynamics: {}; (beta=1 differs: {differs}); 2 rewards x 100 steps",
            a == b,
            b == c
        ),
    )
}

// ---------------------------------------------------------------- determinism

fn cli_run(config: &Path, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_hucrl"))
        .args(["run", "--seed", "3", "--strategy", "thompson", "--rho", "0.1", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("spawn hucrl");
    assert!(status.success(), "hucrl run failed");
    std::fs::read(out.join("curve.csv")).unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::new(2);
    config.env.params.horizon = 150;
    let path = dir.path().join("run.json");
    std::fs::write(&path, serde_json::to_string(&config).unwrap()).unwrap();
    let a = cli_run(&path, &dir.path().join("a"));
    let b = cli_run(&path, &dir.path().join("b"));
    let ma = RunManifest::load(&dir.path().join("a/manifest.json")).unwrap();
    let mb = RunManifest::load(&dir.path().join("b/manifest.json")).unwrap();
    let same_states = ma.episodes.iter().zip(&mb.episodes).all(|(x, y)| x.states == y.states && x.actions == y.actions);
    Outcome::new(
        a == b && same_states && !a.is_empty(),
        format!("two `hucrl run` invocations: curve.csv byte-identical ({} bytes): {}; trajectories identical: {same_states}", a.len(), a == b),
    )
}

// ---------------------------------------------------------------- pendulum

struct Cell {
    solved: bool,
    episodes: usize,
    seconds: f64,
    coverage_late: Vec<f64>,
}

fn cell(strategy: StrategyTag, rho: f64, seed: u64) -> Cell {
    let mut config = RunConfig::new(EPISODES);
    config.strategy.kind = strategy;
    config.env.rho = rho;
    config.seed = seed;
    config.stop_on_solve = true;
    let started = Instant::now();
    let m = run(&config).unwrap();
    let cell = Cell {
        solved: m.final_solved(),
        episodes: m.episodes.len(),
        seconds: started.elapsed().as_secs_f64(),
        coverage_late: m.episodes.iter().filter(|e| e.index > 3).map(|e| e.coverage).collect(),
    };
    println!(
        "    {strategy} rho={rho} seed={seed}: solved {} after {} episodes, longest upright {:?}, {:.0} s",
        cell.solved,
        cell.episodes,
        m.episodes.last().map(|e| e.longest_upright),
        cell.seconds
    );
    cell
}

fn cells(strategy: StrategyTag, rho: f64) -> Vec<Cell> {
    (0..SEEDS).map(|seed| cell(strategy, rho, seed)).collect()
}

fn solves(cells: &[Cell]) -> usize {
    cells.iter().filter(|c| c.solved).count()
}

fn slowest(cells: &[Cell]) -> f64 {
    cells.iter().map(|c| c.seconds).fold(0.0, f64::max)
}

fn fig1_no_penalty() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    let mut slow: f64 = 0.0;
    let mut late = Vec::new();
    for strategy in StrategyTag::ALL {
        let cs = cells(strategy, 0.0);
        let k = solves(&cs);
        pass &= k >= 4;
        slow = slow.max(slowest(&cs));
        late.extend(cs.iter().flat_map(|c| c.coverage_late.iter().copied()));
        detail.push(format!("{strategy} {k}/5"));
    }
    pass &= slow <= CELL_BUDGET_S;
    // Calibration is a reported diagnostic, not gated.
    let cov = if late.is_empty() { "n/a".to_string() } else { format!("{:.3}", late.iter().sum::<f64>() / late.len() as f64) };
    Outcome::new(
        pass,
        format!("solved {} (each >= 4/5); slowest cell {slow:.0} s (<= 600); mean coverage after episode 3: {cov}", detail.join(", ")),
    )
}

fn fig1_penalty() -> Outcome {
    let h = cells(StrategyTag::Hucrl, 0.2);
    let g = cells(StrategyTag::Greedy, 0.2);
    let (kh, kg) = (solves(&h), solves(&g));
    let slow = slowest(&h).max(slowest(&g));
    Outcome::new(
        kh >= 4 && kg <= 1 && slow <= CELL_BUDGET_S,
        format!("hucrl {kh}/5 (>= 4), greedy {kg}/5 (<= 1); slowest cell {slow:.0} s (<= 600)"),
    )
}

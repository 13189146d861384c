//! End-to-end acceptance checks. Each check prints one `PASS`/`FAIL` line;
//! the test fails if any line is `FAIL`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use domstream::bench::{generate_scenarios, run_benchmark, BenchConfig, BenchRun, Dimension, Grid, Scenario};
use domstream::datagen::{episode_digest, read_episode, write_episode, EpisodeLog};
use domstream::expert::{estimate_velocity, Expert, ExpertConfig, VelocityFitWindow};
use domstream::flow::{loss_and_grad, make_flow_sample, sample_chunk, train_on_pairs, ConditionVector, MlpParams};
use domstream::flow::{TrainConfig, TrainingPair};
use domstream::geom::Vec3;
use domstream::sim::{spawn_scene, EndEffectorCommand, ObjectStatus, SceneConfig};
use domstream::streaming::{
    run_closed_loop, run_episode, ChunkPolicy, CommandSource, EpisodeContext, ExecutorConfig, ExecutorMode,
    ExecutorState, GapBehavior, LatencyModel, OraclePolicy,
};
use domstream::streaming::{select_action, ActionChunk};
use domstream::sim::GripperCommand;

// Tolerances and budgets.
const LAAS_BUDGET: Duration = Duration::from_secs(10);
const ABLATION_SEEDS: usize = 200;
const ABLATION_LATENCY: u64 = 5;
const ABLATION_HORIZON: usize = 20;
const ABLATION_MARGIN_PP: f64 = 5.0;
const ABLATION_BUDGET: Duration = Duration::from_secs(300);
const MONOTONE_LATENCIES: [u64; 5] = [0, 2, 4, 6, 8];
const STATIC_SEEDS: u64 = 50;
const COLLAPSE_EPISODES: u64 = 50;
const GRAD_CONFIGS: usize = 100;
const GRAD_REL_TOL: f64 = 1e-5;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const BIMODAL_SAMPLES: u64 = 1000;
const BIMODAL_RADIUS: f64 = 0.25;
const BIMODAL_FRACTION: f64 = 0.90;
const BIMODAL_BUDGET: Duration = Duration::from_secs(120);
const VELOCITY_EXACT_TOL: f64 = 1e-12;
const VELOCITY_REL_TOL: f64 = 1e-9;
const CONSERVATION_SCENES: u64 = 1000;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn verdict(name: &'static str, pass: bool, detail: String) -> Verdict {
    Verdict { name, pass, detail }
}

fn oracle_factory(scene: &SceneConfig<f64>) -> impl Fn() -> Box<dyn ChunkPolicy<f64>> + Sync {
    let expert = Expert::new(ExpertConfig::default(), scene.clone());
    move || Box::new(OraclePolicy::new(expert.clone())) as Box<dyn ChunkPolicy<f64>>
}

fn cr_scenarios() -> (SceneConfig<f64>, Vec<Scenario<f64>>) {
    let scene = SceneConfig::<f64>::default();
    let bench = BenchConfig::<f64> {
        cr_speeds: Grid((0..9).map(|i| 0.2 + 0.05 * i as f64).collect()),
        ..BenchConfig::default()
    };
    let scenarios = generate_scenarios(Dimension::CR, ABLATION_SEEDS, 7, &scene, &bench).unwrap();
    (scene, scenarios)
}

/// Chunk whose action at index `k` targets x = start * 1000 + k.
fn tagged(start: u64, n: usize) -> ActionChunk<f64> {
    let actions = (0..=n as u64)
        .map(|k| EndEffectorCommand::move_to(Vec3::new((start * 1000 + k) as f64, 0.0, 0.0), GripperCommand::Open))
        .collect();
    ActionChunk::new(start, actions)
}

fn laas_brute_force() -> Verdict {
    let t0 = Instant::now();
    let (mut cases, mut bad) = (0usize, 0usize);
    for m in 0..=8u64 {
        for n in 1..=12usize {
            let mut ex = ExecutorState::<f64>::new(ExecutorMode::ContinuousLaas, LatencyModel::Constant(m), n, GapBehavior::Hold);
            // continuous trigger: a new inference starts on every delivery tick
            let starts: Vec<u64> = if m == 0 { (0..=60).collect() } else { (0..=60 / m).map(|k| k * m).collect() };
            let mut delivered: Vec<ActionChunk<f64>> = Vec::new();
            for u in 0..=60u64 {
                let out = ex.tick(u, || u, |o, _, n| Ok(tagged(o, n))).unwrap();
                if starts.contains(&u) {
                    let mut c = tagged(u, n);
                    c.delivery_tick = Some(u + m);
                    delivered.push(c);
                }
                // exhaustive scan: latest start among delivered chunks covering u
                let mut best: Option<u64> = None;
                for &s in &starts {
                    if s + m <= u && s <= u && u <= s + n as u64 {
                        best = Some(best.map_or(s, |b| b.max(s)));
                    }
                }
                let expected = best.map(|s| CommandSource::Chunk {
                    start_tick: s,
                    index: (u - s) as usize,
                });
                let got = match out.source {
                    CommandSource::Hold => None,
                    s => Some(s),
                };
                let by_fn = select_action(&delivered, u).map(|(c, _)| CommandSource::Chunk {
                    start_tick: c.start_tick,
                    index: (u - c.start_tick) as usize,
                });
                cases += 1;
                if got != expected || by_fn != expected {
                    bad += 1;
                }
            }
        }
    }
    let dt = t0.elapsed();
    verdict(
        "laas brute-force equivalence",
        bad == 0 && dt < LAAS_BUDGET,
        format!("{cases} cases, {bad} mismatches, {:.2}s", dt.as_secs_f64()),
    )
}

fn zero_latency_collapse() -> Verdict {
    let scene = SceneConfig::<f64>::default();
    let expert = Expert::new(ExpertConfig::default(), scene.clone());
    let config = ExecutorConfig::new(ExecutorMode::ContinuousLaas, 0);
    let mut bad = 0;
    for seed in 0..COLLAPSE_EPISODES {
        let scenario = Scenario::from_spawn(&scene, 1000 + seed).unwrap();
        let ctx = EpisodeContext::new(seed);
        let closed = run_closed_loop(&scenario, &expert, &ctx).unwrap();
        let mut policy = OraclePolicy::new(expert.clone());
        let streamed = run_episode(&scenario, &mut policy, &config, &ctx).unwrap();
        let bits = |log: &EpisodeLog<f64>| -> Vec<u64> {
            log.commands()
                .iter()
                .flat_map(|c| {
                    let mut v: Vec<u64> = c.target_position.to_array().iter().map(|x| x.to_bits()).collect();
                    v.extend(c.target_orientation.to_array().iter().map(|x| x.to_bits()));
                    v.push(matches!(c.gripper_command, GripperCommand::Close) as u64);
                    v.push(c.hold as u64);
                    v
                })
                .collect()
        };
        if bits(&closed) != bits(&streamed) {
            bad += 1;
        }
    }
    verdict(
        "zero-latency collapse",
        bad == 0,
        format!("{COLLAPSE_EPISODES} episodes, {bad} differ"),
    )
}

fn wait_accounting() -> Verdict {
    let mut problems = Vec::new();
    for m in 1..=8u64 {
        for n in [3usize, 10, 20] {
            let mut ex = ExecutorState::<f64>::new(ExecutorMode::SerializedNaive, LatencyModel::Constant(m), n, GapBehavior::Hold);
            let holds: Vec<bool> = (0..200u64)
                .map(|u| ex.tick(u, || u, |o, _, n| Ok(tagged(o, n))).unwrap().source.is_hold())
                .collect();
            // lengths of maximal hold runs, dropping a run cut off by the end
            let mut runs = Vec::new();
            let mut k = 0;
            while k < holds.len() {
                if holds[k] {
                    let s = k;
                    while k < holds.len() && holds[k] {
                        k += 1;
                    }
                    if k < holds.len() {
                        runs.push(k - s);
                    }
                } else {
                    k += 1;
                }
            }
            if runs.len() < 2 || runs.iter().any(|&r| r as u64 != m) {
                problems.push(format!("serial m={m} n={n} runs={runs:?}"));
            }
        }
        let n = 20usize;
        let mut ex = ExecutorState::<f64>::new(ExecutorMode::ContinuousLaas, LatencyModel::Constant(m), n, GapBehavior::Hold);
        let late_holds = (0..200u64)
            .map(|u| (u, ex.tick(u, || u, |o, _, n| Ok(tagged(o, n))).unwrap().source.is_hold()))
            .filter(|&(u, h)| h && u >= m)
            .count();
        if late_holds != 0 {
            problems.push(format!("ci-laas m={m}: {late_holds} holds after t0+m"));
        }
    }
    verdict(
        "wait accounting",
        problems.is_empty(),
        if problems.is_empty() { "m = 1..8 exact".into() } else { problems.join("; ") },
    )
}

fn ablation_and_monotonicity() -> (Verdict, Verdict) {
    let (scene, scenarios) = cr_scenarios();
    let make = oracle_factory(&scene);
    let t0 = Instant::now();
    let mut rates = Vec::new();
    let mut episodes = Vec::new();
    for mode in ExecutorMode::ALL {
        let mut executor = ExecutorConfig::new(mode, ABLATION_LATENCY);
        executor.chunk_horizon = ABLATION_HORIZON;
        let run = BenchRun::new(executor, 1, 11);
        let (table, eps) = run_benchmark(&make, &run, &scenarios);
        rates.push((mode, table.rows[0].success_rate));
        episodes.push((mode, eps));
    }
    let elapsed = t0.elapsed();
    let sr = |m: ExecutorMode| rates.iter().find(|r| r.0 == m).unwrap().1;
    let best = sr(ExecutorMode::ContinuousLaas);
    let margin_ok = ExecutorMode::ALL
        .iter()
        .filter(|&&m| m != ExecutorMode::ContinuousLaas)
        .all(|&m| best >= sr(m) + ABLATION_MARGIN_PP);
    let eps_of = |m: ExecutorMode| &episodes.iter().find(|e| e.0 == m).unwrap().1;
    let paired: Vec<(f64, f64)> = eps_of(ExecutorMode::ContinuousLaas)
        .iter()
        .zip(eps_of(ExecutorMode::SerializedNaive))
        .filter(|(a, b)| a.record.success && b.record.success)
        .map(|(a, b)| (a.record.completion_time, b.record.completion_time))
        .collect();
    let mean = |f: fn(&(f64, f64)) -> f64| paired.iter().map(f).sum::<f64>() / paired.len().max(1) as f64;
    let (t_ci, t_serial) = (mean(|p| p.0), mean(|p| p.1));
    let time_ok = !paired.is_empty() && t_ci < t_serial;
    let rate_text: Vec<String> = rates.iter().map(|(m, r)| format!("{}={r:.2}", m.name())).collect();
    let ablation = verdict(
        "ablation ordering",
        margin_ok && time_ok && elapsed < ABLATION_BUDGET,
        format!(
            "SR {} | paired n={} time ci-laas {t_ci:.3}s vs serial {t_serial:.3}s | {:.1}s",
            rate_text.join(" "),
            paired.len(),
            elapsed.as_secs_f64()
        ),
    );

    let mut curve = Vec::new();
    for m in MONOTONE_LATENCIES {
        let mut executor = ExecutorConfig::new(ExecutorMode::ContinuousLaas, m);
        executor.chunk_horizon = ABLATION_HORIZON;
        let run = BenchRun::new(executor, 1, 11);
        curve.push(run_benchmark(&make, &run, &scenarios).0.rows[0].success_rate);
    }
    let monotone = curve.windows(2).all(|w| w[1] <= w[0]);
    let text: Vec<String> = MONOTONE_LATENCIES
        .iter()
        .zip(&curve)
        .map(|(m, r)| format!("m={m}:{r:.2}"))
        .collect();
    (ablation, verdict("latency monotonicity", monotone, text.join(" ")))
}

fn static_completeness() -> Verdict {
    let scene = SceneConfig::<f64>::default().with_static_objects();
    let expert = Expert::new(ExpertConfig::default(), scene.clone());
    let config = ExecutorConfig::new(ExecutorMode::ContinuousLaas, 0);
    let mut ok = 0;
    let mut worst = 0;
    for seed in 0..STATIC_SEEDS {
        let scenario = Scenario::from_spawn(&scene, seed).unwrap();
        let mut policy = OraclePolicy::new(expert.clone());
        let log = run_episode(&scenario, &mut policy, &config, &EpisodeContext::new(seed)).unwrap();
        if log.footer.success && log.terminal_tick() <= scene.timeout_ticks {
            ok += 1;
        }
        worst = worst.max(log.terminal_tick());
    }
    verdict(
        "static completeness",
        ok == STATIC_SEEDS,
        format!("{ok}/{STATIC_SEEDS} succeeded, slowest {worst} ticks"),
    )
}

fn gradient_check() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..GRAD_CONFIGS {
        let d = rng.random_range(1..=4usize);
        let c = rng.random_range(1..=3usize);
        let hidden = rng.random_range(2..=6usize);
        let sizes = [d + c + domstream::flow::TIME_FEATURES, hidden, hidden, d];
        let params = MlpParams::<f64>::init(&sizes, rng.random());
        let batch: Vec<_> = (0..rng.random_range(1..=3usize))
            .map(|_| {
                let chunk: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let cond = ConditionVector((0..c).map(|_| rng.random_range(-1.0..1.0)).collect());
                (make_flow_sample(&chunk, &mut rng), cond)
            })
            .collect();
        let (_, grad) = loss_and_grad(&params, &batch).unwrap();
        let analytic = grad.to_flat();
        let flat = params.to_flat();
        let h = 1e-5;
        for (i, &a) in analytic.iter().enumerate() {
            let mut p = params.clone();
            let mut v = flat.clone();
            v[i] = flat[i] + h;
            p.set_flat(&v);
            let up = loss_and_grad(&p, &batch).unwrap().0;
            v[i] = flat[i] - h;
            p.set_flat(&v);
            let down = loss_and_grad(&p, &batch).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    let dt = t0.elapsed();
    verdict(
        "flow gradient check",
        worst <= GRAD_REL_TOL && dt < GRAD_BUDGET,
        format!("max relative error {worst:.2e} over {GRAD_CONFIGS} configs, {:.2}s", dt.as_secs_f64()),
    )
}

fn bimodal_recovery() -> Verdict {
    let t0 = Instant::now();
    let pairs: Vec<TrainingPair<f64>> = [-1.0, 1.0]
        .iter()
        .map(|&x| TrainingPair {
            condition: ConditionVector(vec![0.0]),
            chunk: vec![x],
        })
        .collect();
    let config = TrainConfig {
        steps: 3000,
        batch: 64,
        learning_rate: 2e-3,
        seed: 3,
    };
    let out = train_on_pairs(&pairs, &[64, 64], &config).unwrap();
    let near = (0..BIMODAL_SAMPLES)
        .filter(|&s| {
            let x = sample_chunk(&out.params, &[0.0], 20, s)[0];
            (x - 1.0).abs() <= BIMODAL_RADIUS || (x + 1.0).abs() <= BIMODAL_RADIUS
        })
        .count();
    let frac = near as f64 / BIMODAL_SAMPLES as f64;
    let dt = t0.elapsed();
    verdict(
        "bimodal flow recovery",
        frac >= BIMODAL_FRACTION && dt < BIMODAL_BUDGET,
        format!("{:.1}% within {BIMODAL_RADIUS} of a mode, {:.1}s", 100.0 * frac, dt.as_secs_f64()),
    )
}

/// Slope of the ordinary least-squares line through `(t_i, y_i)` from the
/// 2x2 normal equations, solved by Cramer's rule in absolute time.
fn normal_equations_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let st: f64 = t.iter().sum();
    let stt: f64 = t.iter().map(|x| x * x).sum();
    let sy: f64 = y.iter().sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sty - st * sy) / (n * stt - st * st)
}

fn velocity_exactness() -> Verdict {
    let dt = 0.04;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact_err = 0.0f64;
    let mut rel_err = 0.0f64;
    let noise = Normal::new(0.0, 1e-3).unwrap();
    for _ in 0..200 {
        let w = rng.random_range(2..=12usize);
        let start = rng.random_range(0..300u64);
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
        let p0 = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), 0.03);
        let ticks: Vec<u64> = (0..w as u64).map(|k| start + k).collect();
        let clean = ticks.iter().map(|&k| (k, p0 + v.scale((k - start) as f64 * dt))).collect();
        let est = estimate_velocity(&VelocityFitWindow::new(clean), dt).unwrap();
        exact_err = exact_err.max((est - v).norm());

        let noisy: Vec<(u64, Vec3<f64>)> = ticks
            .iter()
            .map(|&k| {
                let p = p0 + v.scale((k - start) as f64 * dt);
                (k, Vec3::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng), p.z))
            })
            .collect();
        let est = estimate_velocity(&VelocityFitWindow::new(noisy.clone()), dt).unwrap();
        let t: Vec<f64> = noisy.iter().map(|(k, _)| *k as f64 * dt).collect();
        for (axis, got) in [(0usize, est.x), (1, est.y)] {
            let y: Vec<f64> = noisy.iter().map(|(_, p)| p.to_array()[axis]).collect();
            let want = normal_equations_slope(&t, &y);
            rel_err = rel_err.max((got - want).abs() / want.abs().max(1e-12));
        }
    }
    verdict(
        "velocity estimator exactness",
        exact_err <= VELOCITY_EXACT_TOL && rel_err <= VELOCITY_REL_TOL,
        format!("noiseless residual {exact_err:.1e}, noisy relative deviation {rel_err:.1e}"),
    )
}

fn determinism_and_roundtrip() -> Verdict {
    let scene = SceneConfig::<f64>::default();
    let expert = Expert::new(ExpertConfig::default(), scene.clone());
    let mut mismatched = 0;
    let mut broken = 0;
    let mut total = 0;
    for seed in 0..20u64 {
        let scenario = Scenario::from_spawn(&scene, 500 + seed).unwrap();
        for mode in ExecutorMode::ALL {
            let ctx = EpisodeContext::new(seed);
            let config = ExecutorConfig::new(mode, 3);
            let a = run_episode(&scenario, &mut OraclePolicy::new(expert.clone()), &config, &ctx).unwrap();
            let b = run_episode(&scenario, &mut OraclePolicy::new(expert.clone()), &config, &ctx).unwrap();
            total += 1;
            if episode_digest(&a) != episode_digest(&b) {
                mismatched += 1;
            }
            let bytes = write_episode(&a);
            let back: EpisodeLog<f64> = read_episode(&bytes).unwrap();
            if back != a || write_episode(&back) != bytes {
                broken += 1;
            }
        }
        let closed = run_closed_loop(&scenario, &expert, &EpisodeContext::new(seed)).unwrap();
        let bytes = write_episode(&closed);
        total += 1;
        if read_episode::<f64>(&bytes).map(|b| write_episode(&b) != bytes).unwrap_or(true) {
            broken += 1;
        }
    }
    verdict(
        "determinism and round-trip",
        mismatched == 0 && broken == 0,
        format!("{total} episodes, {mismatched} digest mismatches, {broken} round-trip failures"),
    )
}

fn conservation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut increases = 0;
    let mut never_stopped = 0;
    let mut objects = 0;
    for scene_seed in 0..CONSERVATION_SCENES {
        let scene = SceneConfig::<f64> {
            n_objects: rng.random_range(1..=4),
            ..SceneConfig::default()
                .with_speed(0.0, rng.random_range(0.0..1.5))
                .with_friction(0.0, rng.random_range(0.0..2.0))
        };
        let Ok(mut world) = spawn_scene(&scene, scene_seed) else { continue };
        objects += world.objects.len();
        let g = world.gravity;
        let dt = world.dt;
        // a mu > 0 object stops within ceil(v0 / (mu g dt)) ticks
        let bound: Vec<Option<u64>> = world
            .objects
            .iter()
            .map(|o| (o.friction > 0.0).then(|| (o.speed() / (o.friction * g * dt)).ceil() as u64 + 1))
            .collect();
        let horizon = bound.iter().flatten().copied().max().unwrap_or(0).max(50);
        let mut stopped_at: Vec<Option<u64>> = vec![None; world.objects.len()];
        for k in 1..=horizon {
            let before: Vec<f64> = world.objects.iter().map(|o| o.speed()).collect();
            world.step_mut(&EndEffectorCommand::hold());
            for (i, o) in world.objects.iter().enumerate() {
                if o.status != ObjectStatus::Free {
                    continue;
                }
                if o.speed() > before[i] {
                    increases += 1;
                }
                if stopped_at[i].is_none() && o.speed() == 0.0 {
                    stopped_at[i] = Some(k);
                }
            }
        }
        for (i, o) in world.objects.iter().enumerate() {
            let left = o.status != ObjectStatus::Free;
            if let Some(b) = bound[i] {
                if !left && stopped_at[i].is_none_or(|k| k > b) {
                    never_stopped += 1;
                }
            }
        }
    }
    verdict(
        "simulator conservation",
        increases == 0 && never_stopped == 0,
        format!("{objects} objects, {increases} speed increases, {never_stopped} failed to stop"),
    )
}

#[test]
fn acceptance() {
    let mut verdicts = vec![laas_brute_force(), zero_latency_collapse(), wait_accounting()];
    let (ablation, monotone) = ablation_and_monotonicity();
    verdicts.push(ablation);
    verdicts.push(monotone);
    verdicts.extend([
        static_completeness(),
        gradient_check(),
        bimodal_recovery(),
        velocity_exactness(),
        determinism_and_roundtrip(),
        conservation(),
    ]);
    for (i, v) in verdicts.iter().enumerate() {
        println!("{} {:>2} {}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.name, v.detail);
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| !v.pass).map(|v| v.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

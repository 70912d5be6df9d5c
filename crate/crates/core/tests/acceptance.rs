//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.
//!
//! Tolerances and seeds are fixed here; the replay and end-to-end
//! thresholds come from the calibration runs recorded in CALIBRATION.md.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use idmk::config::RunConfig;
use idmk::envsim::{generate_dataset, make_reference, EnvConfig, Scenario, DEFAULT_JITTER};
use idmk::futuresel::{closest_select, static_select, Selector, SelectorKind};
use idmk::harness::{
    evaluate, run_rollout, EvalTable, IdmPolicy, NoopPolicy, ReplayPolicy, RolloutConfig,
};
use idmk::idm::{
    grad_check, grad_check_with, train, Architecture, IdmModel, Modality, TrainConfig, WindowSpec,
};
use idmk::metrics::{auc, coverage_rate, dtw_distance, max_radius};
use idmk::pipeline;
use idmk::{Action, ActionSpec, Exec, Position, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed <= budget, || {
        format!("took {elapsed:.1?}, budget {budget:?}")
    })
}

fn references(scenarios: &[Scenario]) -> Vec<Trajectory> {
    scenarios
        .iter()
        .map(|&s| make_reference(s, 0, ActionSpec::default(), &EnvConfig::default()))
        .collect()
}

// ---------------------------------------------------------------- 1

fn naive_coverage(a: &[Position], b: &[Position], r: f64) -> f64 {
    let mut hits = 0usize;
    for t in 0..a.len() {
        let dx = a[t].x - b[t].x;
        let dy = a[t].y - b[t].y;
        let dz = a[t].z - b[t].z;
        if (dx * dx + dy * dy + dz * dz).sqrt() < r {
            hits += 1;
        }
    }
    hits as f64 / a.len() as f64
}

fn metric_exactness() -> Outcome {
    let start = Instant::now();
    for r in references(&Scenario::ALL) {
        let p = r.positions();
        let a = auc(&p, &p).map_err(|e| e.to_string())?.auc;
        ensure(a == 1.0, || {
            format!("AUC(tau, tau) = {a} on {}", r.meta.scenario)
        })?;
    }

    let p = references(&[Scenario::Winding0]).remove(0).positions();
    let big_r = max_radius(&p);
    let mut worst: f64 = 0.0;
    for d in [0.0, 0.5, 1.0, 3.25, 10.0, 0.5 * big_r, 0.99 * big_r] {
        let shifted: Vec<Position> = p.iter().map(|q| *q + Position::planar(0.0, d)).collect();
        let got = auc(&shifted, &p).map_err(|e| e.to_string())?.auc;
        worst = worst.max((got - (1.0 - d / big_r)).abs());
    }
    ensure(worst < 1e-9, || {
        format!("constant-offset AUC error {worst:e}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let pt = |rng: &mut ChaCha8Rng| {
            Position::planar(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))
        };
        let a: Vec<Position> = (0..n).map(|_| pt(&mut rng)).collect();
        let b: Vec<Position> = (0..n).map(|_| pt(&mut rng)).collect();
        let r = rng.random_range(0.0..8.0);
        let got = coverage_rate(&a, &b, r).map_err(|e| e.to_string())?;
        ensure(got == naive_coverage(&a, &b, r), || {
            format!("coverage mismatch at r={r}")
        })?;
    }
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "AUC(tau,tau)=1 on 8 refs; offset error {worst:.1e}; 1000 coverage pairs exact"
    ))
}

// ---------------------------------------------------------------- 2

/// Minimum over every monotone warping path, enumerated by depth-first
/// search with costs accumulated from the start.
fn brute_dtw(a: &[Position], b: &[Position]) -> f64 {
    fn walk(a: &[Position], b: &[Position], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + a[i].distance(&b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

fn dtw_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Position> {
        (0..n)
            .map(|_| Position::planar(rng.random_range(0..3) as f64, rng.random_range(0..3) as f64))
            .collect()
    };
    let mut cases = 0;
    for la in 1..=6 {
        for lb in 1..=6 {
            for _ in 0..150 {
                let a = grid(&mut rng, la);
                let b = grid(&mut rng, lb);
                let fast = dtw_distance(&a, &b).map_err(|e| e.to_string())?;
                let slow = brute_dtw(&a, &b);
                ensure(fast == slow, || {
                    format!("dtw {fast} vs enumeration {slow} on {a:?} / {b:?}")
                })?;
                cases += 1;
            }
        }
    }
    within_budget(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "{cases} grid pairs (lengths 1..=6, coords in {{0,1,2}}) equal to path enumeration"
    ))
}

// ---------------------------------------------------------------- 3

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let layout = RunConfig::default().layout();
    let model = IdmModel::new(layout, Architecture::default(), 3).map_err(|e| e.to_string())?;
    let report = grad_check(&model, 4, Some(50), 1e-5, 1e-4, 3).map_err(|e| e.to_string())?;
    ensure(report.probes >= 100, || {
        format!("only {} probes", report.probes)
    })?;
    ensure(report.passed, || {
        format!("max relative error {:e}", report.max_rel_error)
    })?;

    // Zero the gradient of one output bias, which is never identically zero.
    let (_, bias) = model.net.layer_ranges(model.net.shapes.len() - 1);
    let victim = bias.start;
    let corrupt = move |m: &IdmModel, x: &[f64], a: &Action| {
        let mut g = m.backward(x, a)?;
        g[victim] = 0.0;
        Ok(g)
    };
    let control =
        grad_check_with(&model, 1, None, 1e-5, 1e-4, 3, &corrupt).map_err(|e| e.to_string())?;
    ensure(!control.passed, || {
        "corrupted gradient passed the check".into()
    })?;
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "max rel error {:.2e} over {} probes (tol 1e-4, h 1e-5); corrupted control rel error {:.2e} fails",
        report.max_rel_error, report.probes, control.max_rel_error
    ))
}

// ---------------------------------------------------------------- 4

fn random_walk(rng: &mut ChaCha8Rng, n: usize, step: f64) -> Vec<Position> {
    let mut p = Position::planar(0.0, 0.0);
    (0..n)
        .map(|_| {
            p = p + Position::planar(rng.random_range(-step..step), rng.random_range(-step..step));
            p
        })
        .collect()
}

fn selector_semantics() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let len = rng.random_range(1..500);
        let t = rng.random_range(0..len);
        let k = rng.random_range(0..600);
        let expect = if t + k > len - 1 { len - 1 } else { t + k };
        ensure(static_select(t, k, len) == expect, || {
            format!("static t={t} k={k} T={len}")
        })?;
    }
    for _ in 0..10_000 {
        let len = rng.random_range(1..80);
        let reference: Vec<Position> = (0..len)
            .map(|_| Position::planar(rng.random_range(0..6) as f64, rng.random_range(0..6) as f64))
            .collect();
        let agent = Position::planar(rng.random_range(-1.0..7.0), rng.random_range(-1.0..7.0));
        let k = rng.random_range(0..20);
        let mut best = 0;
        for i in 1..len {
            if reference[i].distance(&agent) < reference[best].distance(&agent) {
                best = i;
            }
        }
        let expect = (best + k).min(len - 1);
        ensure(closest_select(&reference, &agent, k) == expect, || {
            "closest mismatch".into()
        })?;
    }
    for _ in 0..1000 {
        let (n_ref, n_agent) = (rng.random_range(2..120), rng.random_range(1..150));
        let reference = random_walk(&mut rng, n_ref, 1.0);
        let agent = random_walk(&mut rng, n_agent, 1.0);
        let r = rng.random_range(0.2..4.0);
        let k = rng.random_range(0..5);
        let mut radius =
            Selector::new(SelectorKind::Radius { r, k }, &reference).map_err(|e| e.to_string())?;
        let mut io = Selector::new(
            SelectorKind::InnerOuter {
                r_in: 0.0,
                r_out: r,
                k,
            },
            &reference,
        )
        .map_err(|e| e.to_string())?;
        for (t, p) in agent.iter().enumerate() {
            radius.select(t, *p);
            io.select(t, *p);
        }
        let idx = radius.trace().fut_indices();
        ensure(idx.windows(2).all(|w| w[0] <= w[1]), || {
            "radius fut_idx decreased".into()
        })?;
        ensure(radius.trace() == io.trace(), || {
            format!("InnerOuter(0, {r}) trace differs from Radius({r})")
        })?;
    }
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok("static 1e4, closest 1e4, radius monotone 1e3, InnerOuter(0,r)=Radius(r) 1e3".into())
}

// ---------------------------------------------------------------- 5

fn pathologies() -> Outcome {
    let start = Instant::now();
    let env = EnvConfig::default();

    // A no-op agent parked at the start of pause-then-go stays within any
    // radius of the paused prefix.
    let pause = references(&[Scenario::PauseThenGo]).remove(0);
    let cfg = |selector| RolloutConfig::new(selector, env.clone());
    let closest = run_rollout(&NoopPolicy, &pause, &cfg(SelectorKind::Closest { k: 1 }), 0)
        .map_err(|e| e.to_string())?;
    let radius = run_rollout(
        &NoopPolicy,
        &pause,
        &cfg(SelectorKind::Radius { r: 2.0, k: 1 }),
        0,
    )
    .map_err(|e| e.to_string())?;
    let c_idx = closest.trace.fut_indices();
    let fixed = c_idx.iter().take_while(|&&i| i == c_idx[0]).count();
    ensure(fixed >= 50, || {
        format!("closest fixed for only {fixed} steps")
    })?;
    let r_idx = radius.trace.fut_indices();
    let r_last = *r_idx.last().unwrap();
    ensure(r_last > c_idx[0], || format!("radius stuck at {r_last}"))?;

    // Noisy replay through the self-crossing of the loop.
    let lp = references(&[Scenario::Loop]).remove(0);
    let noisy = |selector| RolloutConfig::new(selector, env.with_sigma(0.05));
    let mut closest_drops = 0;
    let mut radius_drops = 0;
    for seed in 0..10 {
        let c = run_rollout(
            &ReplayPolicy,
            &lp,
            &noisy(SelectorKind::Closest { k: 1 }),
            seed,
        )
        .map_err(|e| e.to_string())?;
        let r = run_rollout(
            &ReplayPolicy,
            &lp,
            &noisy(SelectorKind::Radius { r: 2.0, k: 1 }),
            seed,
        )
        .map_err(|e| e.to_string())?;
        let drops = |idx: Vec<usize>| idx.windows(2).filter(|w| w[1] < w[0]).count();
        closest_drops += drops(c.trace.fut_indices());
        radius_drops += drops(r.trace.fut_indices());
    }
    ensure(closest_drops >= 1, || {
        "closest never decreased on loop".into()
    })?;
    ensure(radius_drops == 0, || {
        format!("radius decreased {radius_drops} times")
    })?;
    within_budget(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "pause-then-go: closest fixed at {} for {fixed} steps, radius reaches {r_last}; loop: closest decreases {closest_drops}x over 10 seeds, radius 0x",
        c_idx[0]
    ))
}

// ---------------------------------------------------------------- 6

fn replay_baseline() -> Outcome {
    let start = Instant::now();
    let w0 = references(&[Scenario::Winding0]).remove(0);
    let end = *w0.positions().last().unwrap();
    let selector = SelectorKind::Radius { r: 2.0, k: 1 };
    let clean = run_rollout(
        &ReplayPolicy,
        &w0,
        &RolloutConfig::new(selector, EnvConfig::default()),
        0,
    )
    .map_err(|e| e.to_string())?;
    ensure(clean.report.auc == 1.0, || {
        format!("sigma=0 replay AUC {}", clean.report.auc)
    })?;
    let noisy = RolloutConfig::new(selector, EnvConfig::default().with_sigma(0.05));
    let mut below = 0;
    let mut far = 0;
    for seed in 0..10 {
        let r = run_rollout(&ReplayPolicy, &w0, &noisy, seed).map_err(|e| e.to_string())?;
        if r.report.auc < 1.0 {
            below += 1;
        }
        if r.agent.positions().last().unwrap().distance(&end) >= 1.0 {
            far += 1;
        }
    }
    ensure(below >= 8, || format!("AUC < 1 in only {below}/10 seeds"))?;
    ensure(far >= 8, || {
        format!("endpoint >= 1.0 away in only {far}/10 seeds")
    })?;
    within_budget(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "sigma=0 AUC=1.0; sigma=0.05 AUC<1 in {below}/10, endpoint gap >= 1.0 in {far}/10"
    ))
}

// ---------------------------------------------------------------- 7 and 8

struct Trained {
    models: BTreeMap<String, IdmModel>,
    train_secs: BTreeMap<String, f64>,
}

fn default_dataset() -> Vec<Trajectory> {
    let cfg = RunConfig::default();
    generate_dataset(
        &cfg.envsim.scenarios,
        cfg.envsim.n_per_scenario,
        cfg.envsim.data_seed,
        DEFAULT_JITTER,
        cfg.core,
        &cfg.env(),
    )
    .expect("dataset")
}

fn train_variants(
    data: &[Trajectory],
    windows: &[(&str, WindowSpec)],
    into: &mut Trained,
) -> Result<(), String> {
    let cfg = TrainConfig::default();
    for (name, w) in windows {
        if into.models.contains_key(*name) {
            continue;
        }
        let t0 = Instant::now();
        let out = train(data, *w, &cfg, Architecture::default(), Exec::default())
            .map_err(|e| e.to_string())?;
        into.train_secs
            .insert(name.to_string(), t0.elapsed().as_secs_f64());
        into.models.insert(name.to_string(), out.model);
    }
    Ok(())
}

fn eval_default(model: &IdmModel, refs: &[Trajectory]) -> Result<EvalTable, String> {
    let rc = RunConfig::default().rollout();
    evaluate(&IdmPolicy(model), refs, &rc, Exec::default()).map_err(|e| e.to_string())
}

const IDM_MIN_AUC: f64 = 0.9;
const BC_GAP: f64 = 0.1;

fn bc_vs_idm(data: &[Trajectory], trained: &mut Trained) -> Outcome {
    let full = WindowSpec::new(10, 10, 1);
    let bc = WindowSpec::new(10, 0, 1);
    train_variants(data, &[("10P-10F", full), ("BC", bc)], trained)?;
    for name in ["10P-10F", "BC"] {
        within_budget(
            Duration::from_secs_f64(trained.train_secs[name]),
            Duration::from_secs(300),
        )?;
    }
    let refs = references(&Scenario::CROSSROADS);
    let idm = eval_default(&trained.models["10P-10F"], &refs)?;
    let bct = eval_default(&trained.models["BC"], &refs)?;
    let mut lines = Vec::new();
    let mut max_gap: f64 = f64::NEG_INFINITY;
    for r in &refs {
        let name = &r.meta.scenario;
        let a = idm.median_auc(name).unwrap();
        let b = bct.median_auc(name).unwrap();
        ensure(a >= IDM_MIN_AUC, || {
            format!("10P-10F median AUC {a:.3} on {name}")
        })?;
        max_gap = max_gap.max(a - b);
        lines.push(format!("{name} {a:.3}/{b:.3}"));
    }
    ensure(max_gap >= BC_GAP, || {
        format!("largest IDM-BC gap {max_gap:.3}")
    })?;
    Ok(format!(
        "10P-10F/BC median AUC: {}; max gap {max_gap:.3}; train {:.0}s/{:.0}s",
        lines.join(", "),
        trained.train_secs["10P-10F"],
        trained.train_secs["BC"]
    ))
}

const MODALITY_TOL: f64 = 0.05;

fn modality_ablation(data: &[Trajectory], trained: &mut Trained) -> Outcome {
    let start = Instant::now();
    let full = WindowSpec::new(10, 10, 1);
    train_variants(
        data,
        &[
            ("10P-10F", full),
            (
                "observations-only",
                full.with_modality(Modality::ObservationsOnly),
            ),
            ("actions-only", full.with_modality(Modality::ActionsOnly)),
        ],
        trained,
    )?;
    let refs = references(&Scenario::ALL);
    let mean = |name: &str| -> Result<f64, String> {
        Ok(eval_default(&trained.models[name], &refs)?.mean_median_auc())
    };
    let f = mean("10P-10F")?;
    let o = mean("observations-only")?;
    let a = mean("actions-only")?;
    ensure((o - f).abs() <= MODALITY_TOL, || {
        format!("observations-only {o:.3} vs full {f:.3}")
    })?;
    ensure(a < f, || {
        format!("actions-only {a:.3} not below full {f:.3}")
    })?;
    let training: f64 = ["10P-10F", "observations-only", "actions-only"]
        .iter()
        .map(|n| trained.train_secs[*n])
        .sum();
    let total = start.elapsed().as_secs_f64() + trained.train_secs["10P-10F"];
    within_budget(Duration::from_secs_f64(total), Duration::from_secs(900))?;
    Ok(format!(
        "mean median AUC over 8 scenarios: full {f:.3}, observations-only {o:.3}, actions-only {a:.3}; {training:.0}s training"
    ))
}

// ---------------------------------------------------------------- 9

fn hash_dir(root: &Path) -> String {
    fn collect(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                collect(&p, root, out);
            } else {
                let rel = p
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut files = Vec::new();
    collect(root, root, &mut files);
    let mut h = Sha256::new();
    for (rel, bytes) in files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    hex::encode(h.finalize())
}

fn run_pipeline(cfg: &RunConfig, root: &Path, exec: Exec) -> Result<(), String> {
    let e = |e: idmk::Error| e.to_string();
    let data = root.join("data");
    pipeline::gen_data(cfg, &data).map_err(e)?;
    pipeline::train(cfg, &data, &root.join("model"), exec).map_err(e)?;
    let ck = root.join("model").join(pipeline::CHECKPOINT_FILE);
    pipeline::eval(cfg, &ck, &data, &root.join("eval"), exec).map_err(e)?;
    pipeline::sweep(cfg, &ck, &data, &root.join("sweep"), exec).map_err(e)?;
    pipeline::report(root).map_err(e)?;
    Ok(())
}

fn determinism() -> Outcome {
    let mut cfg = RunConfig::default();
    cfg.envsim.n_per_scenario = 3;
    cfg.idm.train.epochs = 3;
    cfg.idm.train.updates_per_epoch = 20;
    cfg.harness.n_seeds = 3;
    cfg.futuresel.sweep_radii = vec![1.0, 2.0];
    cfg.futuresel.sweep_pairs = vec![(0.0, 2.0)];
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(&cfg, a.path(), Exec::Parallel)?;
    run_pipeline(&cfg, b.path(), Exec::Sequential)?;
    let (ha, hb) = (hash_dir(a.path()), hash_dir(b.path()));
    ensure(ha == hb, || format!("run directories differ: {ha} vs {hb}"))?;
    Ok(format!(
        "gen-data/train/eval/sweep/report rerun (parallel vs sequential) byte-identical, sha256 {}",
        &ha[..16]
    ))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let data = default_dataset();
    let mut trained = Trained {
        models: BTreeMap::new(),
        train_secs: BTreeMap::new(),
    };
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut check = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match &out {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("{tag} criterion {n} ({name}): {detail}");
        results.push((n, name, out));
    };
    check(1, "metric exactness", &mut metric_exactness);
    check(2, "dtw oracle equivalence", &mut dtw_oracle);
    check(3, "gradient correctness", &mut gradient_correctness);
    check(4, "selector semantics", &mut selector_semantics);
    check(5, "pathology reproduction", &mut pathologies);
    check(6, "replay baseline", &mut replay_baseline);
    check(7, "future conditioning vs BC", &mut || {
        bc_vs_idm(&data, &mut trained)
    });
    check(8, "modality ablation", &mut || {
        modality_ablation(&data, &mut trained)
    });
    check(9, "pipeline determinism", &mut determinism);
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Calibration runs behind the defaults in CALIBRATION.md.
//!
//! cargo run --release -p idmk-core --example calibrate -- [n] [epochs] [lr] [sigma] [replay|modality]

use std::time::Instant;

use idmk::envsim::{generate_dataset, make_reference, EnvConfig, Scenario, DEFAULT_JITTER};
use idmk::futuresel::SelectorKind;
use idmk::harness::{
    evaluate, modality_windows, run_rollout, window_name, IdmPolicy, ReplayPolicy, RolloutConfig,
};
use idmk::idm::{train, Architecture, TrainConfig, WindowSpec};
use idmk::{ActionSpec, Exec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(20, |s| s.parse().unwrap());
    let epochs: usize = args.get(2).map_or(50, |s| s.parse().unwrap());
    let lr: f64 = args.get(3).map_or(1e-3, |s| s.parse().unwrap());
    let sigma: f64 = args.get(4).map_or(0.05, |s| s.parse().unwrap());
    let env = EnvConfig::default();
    let spec = ActionSpec::default();
    let data = generate_dataset(&Scenario::ALL, n, 1, DEFAULT_JITTER, spec, &env).unwrap();
    let refs: Vec<_> = Scenario::ALL
        .iter()
        .map(|&s| make_reference(s, 0, spec, &env))
        .collect();
    for r in &refs {
        eprintln!("{} T={}", r.meta.scenario, r.len());
    }
    if args.get(5).map(String::as_str) == Some("replay") {
        replay(&refs[3], &env, sigma);
        return;
    }
    let cfg = TrainConfig {
        epochs,
        learning_rate: lr,
        ..TrainConfig::default()
    };
    let windows = if args.get(5).map(String::as_str) == Some("modality") {
        modality_windows(1)
    } else {
        vec![WindowSpec::new(10, 10, 1), WindowSpec::new(10, 0, 1)]
    };
    for w in windows {
        let t0 = Instant::now();
        let out = train(&data, w, &cfg, Architecture::default(), Exec::default()).unwrap();
        let l = out.log.last().unwrap().loss;
        eprintln!(
            "{} train {:.1}s loss {:.4} stick_err {:.4} btn_err {:.4}",
            window_name(&w),
            t0.elapsed().as_secs_f64(),
            l.total,
            l.sticks_error_rate,
            l.button_error_rate
        );
        let rc = RolloutConfig::new(SelectorKind::Radius { r: 2.0, k: 1 }, env.with_sigma(sigma));
        let t = evaluate(&IdmPolicy(&out.model), &refs, &rc, Exec::default()).unwrap();
        let s: Vec<String> = t
            .medians()
            .map(|m| format!("{}={:.3}/{:.2}", m.trajectory, m.auc, m.fi))
            .collect();
        eprintln!("  r=2: {}  mean {:.3}", s.join(" "), t.mean_median_auc());
    }
}

fn replay(reference: &idmk::Trajectory, env: &EnvConfig, sigma: f64) {
    let rc = RolloutConfig::new(SelectorKind::Radius { r: 2.0, k: 1 }, env.with_sigma(sigma));
    let end = *reference.positions().last().unwrap();
    let mut gaps = Vec::new();
    let mut below = 0;
    for seed in 0..100 {
        let r = run_rollout(&ReplayPolicy, reference, &rc, seed).unwrap();
        gaps.push(r.agent.positions().last().unwrap().distance(&end));
        if r.report.auc < 1.0 {
            below += 1;
        }
    }
    let far = gaps.iter().filter(|&&g| g >= 1.0).count();
    gaps.sort_by(f64::total_cmp);
    eprintln!(
        "{} sigma={sigma}: auc<1 in {below}/100, end gap>=1 in {far}/100, gap min {:.3} p10 {:.3} median {:.3}",
        reference.meta.scenario, gaps[0], gaps[10], gaps[50]
    );
    for w in 0..10 {
        let f = (w * 10..w * 10 + 10)
            .filter(|&i| {
                let r = run_rollout(&ReplayPolicy, reference, &rc, i as u64).unwrap();
                r.agent.positions().last().unwrap().distance(&end) >= 1.0
            })
            .count();
        eprint!("{f} ");
    }
    eprintln!();
}

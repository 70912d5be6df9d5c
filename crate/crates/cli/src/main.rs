//! `idmk`: data generation, training, evaluation, sweeps and reports for
//! IDM-K trajectory following.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idmk::config::{RunConfig, Strategy, CONFIG_ENV};
use idmk::harness::window_name;
use idmk::idm::Modality;
use idmk::pipeline::{self, CHECKPOINT_FILE};
use idmk::{Error, Exec, Result};

#[derive(Parser, Debug)]
#[command(
    name = "idmk",
    version,
    about = "Trajectory following with future-conditioned inverse dynamics models"
)]
struct Cli {
    /// TOML run configuration. Defaults apply when neither this nor the
    /// environment variable is set.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Worker threads for rollouts and batch gradients (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate reference trajectories and expert demonstrations.
    GenData {
        /// Output directory [default: paths.data].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train an IDM on generated demonstrations.
    Train {
        /// Data directory written by gen-data [default: paths.data].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory for the checkpoint and epoch log [default: paths.model].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run a gradient check on the initial model first and abort if it fails.
        #[arg(long)]
        grad_check: bool,
        /// Train an ablation variant instead of the configured window.
        #[arg(long, value_enum)]
        ablation: Option<Ablation>,
    },
    /// Roll out a checkpoint on the reference trajectories.
    Eval {
        #[command(flatten)]
        io: ModelIo,
        #[command(flatten)]
        sel: SelectorArgs,
        /// Run a Radius sweep over these radii instead of a single evaluation.
        #[arg(long, value_delimiter = ',')]
        sweep_radius: Option<Vec<f64>>,
        /// Score AUC along the DTW alignment.
        #[arg(long)]
        dtw_aligned: bool,
        /// Rollout seeds per trajectory.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Radius and InnerOuter sweeps over the configured radii.
    Sweep {
        #[command(flatten)]
        io: ModelIo,
        /// Radii for the Radius strategy [default: futuresel.sweep_radii].
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Pairs r_in:r_out for InnerOuter [default: futuresel.sweep_pairs].
        #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
        pairs: Option<Vec<(f64, f64)>>,
        /// K for every swept selector [default: futuresel.k].
        #[arg(long = "K")]
        k: Option<usize>,
    },
    /// Summarize every stage found under a run directory.
    Report { run_dir: PathBuf },
    /// Finite-difference check of the model gradients.
    GradCheck {
        #[arg(long, default_value_t = 4)]
        samples: usize,
        /// Parameters probed per sample (all when omitted).
        #[arg(long, default_value_t = 64)]
        probes: usize,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
}

#[derive(Args, Debug)]
struct ModelIo {
    /// Checkpoint [default: paths.model/model.json].
    #[arg(long)]
    model: Option<PathBuf>,
    /// Data directory with references [default: paths.data].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory [default: paths.eval or paths.sweep].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectorArgs {
    /// Future-conditioning strategy [default: futuresel.strategy].
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    /// Conditioning offset K [default: futuresel.k].
    #[arg(long = "K")]
    k: Option<usize>,
    /// Radius strategy threshold [default: futuresel.r]
    #[arg(long)]
    r: Option<f64>,
    /// InnerOuter inner radius [default: futuresel.r_in]
    #[arg(long)]
    r_in: Option<f64>,
    /// InnerOuter outer radius [default: futuresel.r_out]
    #[arg(long)]
    r_out: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Ablation {
    /// 10 past frames, no future (behavioural cloning).
    Bc,
    #[value(name = "1p-1f")]
    P1F1,
    #[value(name = "10p-1f")]
    P10F1,
    #[value(name = "1p-10f")]
    P1F10,
    #[value(name = "10p-10f")]
    P10F10,
    /// Configured window with action features zeroed.
    ObservationsOnly,
    /// Configured window with observation features zeroed.
    ActionsOnly,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected r_in:r_out, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn apply_ablation(cfg: &mut RunConfig, a: Ablation) {
    let mut window = |p, f| {
        cfg.idm.past = p;
        cfg.idm.future = f;
    };
    match a {
        Ablation::Bc => window(10, 0),
        Ablation::P1F1 => window(1, 1),
        Ablation::P10F1 => window(10, 1),
        Ablation::P1F10 => window(1, 10),
        Ablation::P10F10 => window(10, 10),
        Ablation::ObservationsOnly => cfg.idm.modality = Modality::ObservationsOnly,
        Ablation::ActionsOnly => cfg.idm.modality = Modality::ActionsOnly,
    }
}

fn apply_selector(cfg: &mut RunConfig, s: &SelectorArgs) {
    let f = &mut cfg.futuresel;
    if let Some(v) = s.strategy {
        f.strategy = v;
    }
    if let Some(v) = s.k {
        f.k = v;
    }
    if let Some(v) = s.r {
        f.r = v;
    }
    if let Some(v) = s.r_in {
        f.r_in = v;
    }
    if let Some(v) = s.r_out {
        f.r_out = v;
    }
}

fn model_path(cfg: &RunConfig, io: &ModelIo) -> PathBuf {
    io.model
        .clone()
        .unwrap_or_else(|| cfg.paths.model.join(CHECKPOINT_FILE))
}

fn or<'a>(v: &'a Option<PathBuf>, default: &'a Path) -> &'a Path {
    v.as_deref().unwrap_or(default)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match cli.command {
        Command::GenData { out } => {
            let out = or(&out, &cfg.paths.data).to_path_buf();
            let m = pipeline::gen_data(&cfg, &out)?;
            println!(
                "wrote {} references and {} demonstrations to {}",
                m.outputs_with_role("reference").count(),
                m.outputs_with_role("train").count(),
                out.display()
            );
        }
        Command::Train {
            data,
            out,
            grad_check,
            ablation,
        } => {
            if let Some(a) = ablation {
                apply_ablation(&mut cfg, a);
                cfg.check()?;
            }
            if grad_check {
                let r = pipeline::grad_check_fresh(&cfg, 4, Some(64), 1e-5, 1e-4)?;
                println!(
                    "grad-check: max relative error {:e} over {} probes",
                    r.max_rel_error, r.probes
                );
                if !r.passed {
                    return Err(Error::GradCheckFailed {
                        max_rel_error: r.max_rel_error,
                        tol: r.tol,
                    });
                }
            }
            let data = or(&data, &cfg.paths.data).to_path_buf();
            let out = or(&out, &cfg.paths.model).to_path_buf();
            println!(
                "training {} on {}",
                window_name(&cfg.window()),
                data.display()
            );
            let run = pipeline::train(&cfg, &data, &out, exec)?;
            println!("epoch,total,button_loss,sticks_loss,button_err,sticks_err");
            for e in &run.log {
                let l = &e.loss;
                println!(
                    "{},{:.6},{:.6},{:.6},{:.4},{:.4}",
                    e.epoch,
                    l.total,
                    l.button_loss,
                    l.sticks_loss,
                    l.button_error_rate,
                    l.sticks_error_rate
                );
            }
            println!("checkpoint: {}", out.join(CHECKPOINT_FILE).display());
        }
        Command::Eval {
            io,
            sel,
            sweep_radius,
            dtw_aligned,
            seeds,
        } => {
            apply_selector(&mut cfg, &sel);
            if dtw_aligned {
                cfg.harness.dtw_aligned_auc = true;
            }
            if let Some(n) = seeds {
                cfg.harness.n_seeds = n;
            }
            let model = model_path(&cfg, &io);
            let data = or(&io.data, &cfg.paths.data).to_path_buf();
            if let Some(radii) = sweep_radius {
                cfg.futuresel.sweep_radii = radii;
                cfg.futuresel.sweep_pairs.clear();
                cfg.check()?;
                let out = or(&io.out, &cfg.paths.sweep).to_path_buf();
                let run = pipeline::sweep(&cfg, &model, &data, &out, exec)?;
                print_sweep(&run.table);
            } else {
                cfg.check()?;
                let out = or(&io.out, &cfg.paths.eval).to_path_buf();
                let run = pipeline::eval(&cfg, &model, &data, &out, exec)?;
                println!(
                    "{:<18} {:>10} {:>10} {:>12}",
                    "trajectory", "AUC", "FI", "DTW"
                );
                for r in run.table.medians() {
                    println!(
                        "{:<18} {:>10.4} {:>10.4} {:>12.3}",
                        r.trajectory, r.auc, r.fi, r.dtw
                    );
                }
                println!("wrote {}", out.display());
            }
        }
        Command::Sweep {
            io,
            radii,
            pairs,
            k,
        } => {
            if let Some(r) = radii {
                cfg.futuresel.sweep_radii = r;
            }
            if let Some(p) = pairs {
                cfg.futuresel.sweep_pairs = p;
            }
            if let Some(k) = k {
                cfg.futuresel.k = k;
            }
            cfg.check()?;
            let model = model_path(&cfg, &io);
            let data = or(&io.data, &cfg.paths.data).to_path_buf();
            let out = or(&io.out, &cfg.paths.sweep).to_path_buf();
            let run = pipeline::sweep(&cfg, &model, &data, &out, exec)?;
            print_sweep(&run.table);
        }
        Command::Report { run_dir } => {
            print!("{}", pipeline::report(&run_dir)?);
        }
        Command::GradCheck {
            samples,
            probes,
            h,
            tol,
        } => {
            let r = pipeline::grad_check_fresh(&cfg, samples, Some(probes), h, tol)?;
            println!(
                "samples {} probes {} max relative error {:e} (param {}) tol {:e}: {}",
                r.samples,
                r.probes,
                r.max_rel_error,
                r.worst_param,
                r.tol,
                if r.passed { "pass" } else { "FAIL" }
            );
            if !r.passed {
                return Err(Error::GradCheckFailed {
                    max_rel_error: r.max_rel_error,
                    tol: r.tol,
                });
            }
        }
    }
    Ok(())
}

fn print_sweep(t: &idmk::harness::SweepTable) {
    println!(
        "{:<36} {:<18} {:>10} {:>10}",
        "selector", "trajectory", "AUC", "FI"
    );
    for r in &t.rows {
        println!(
            "{:<36} {:<18} {:>10.4} {:>10.4}",
            r.selector.to_string(),
            r.trajectory,
            r.auc,
            r.fi
        );
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

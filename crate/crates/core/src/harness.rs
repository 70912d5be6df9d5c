//! Closed-loop rollouts, multi-seed evaluation and ablations.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::envsim::{observe, step, EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::futuresel::{Selector, SelectorKind, SelectorTrace};
use crate::idm::{self, Architecture, IdmModel, Modality, TrainConfig, WindowSpec};
use crate::metrics::{self, MetricReport};
use crate::trajectory::{Trajectory, TrajectoryMeta, TrajectoryStep};

/// Something that picks an action from the agent's own history and the
/// reference window chosen by the selector.
pub trait Policy: Sync {
    /// Reject references the policy cannot condition on.
    fn check(&self, reference: &Trajectory) -> Result<()>;

    /// `history` holds the agent's steps `0..=t`; the action slot at `t` is a
    /// placeholder.
    fn act(
        &self,
        t: usize,
        history: &[TrajectoryStep],
        reference: &Trajectory,
        fut_idx: usize,
    ) -> Result<Action>;
}

#[derive(Clone, Copy, Debug)]
pub struct IdmPolicy<'m>(pub &'m IdmModel);

impl Policy for IdmPolicy<'_> {
    fn check(&self, reference: &Trajectory) -> Result<()> {
        let layout = &self.0.layout;
        if reference.obs_dim() != layout.obs_dim || reference.action_spec() != layout.actions {
            return Err(Error::IncompatibleWindow(format!(
                "model expects obs_dim {} and {:?}, reference has obs_dim {} and {:?}",
                layout.obs_dim,
                layout.actions,
                reference.obs_dim(),
                reference.action_spec()
            )));
        }
        Ok(())
    }

    fn act(
        &self,
        t: usize,
        history: &[TrajectoryStep],
        reference: &Trajectory,
        fut_idx: usize,
    ) -> Result<Action> {
        let mut x = Vec::with_capacity(self.0.input_width());
        self.0
            .layout
            .build_input(history, t, &reference.steps, fut_idx, &mut x)?;
        self.0.predict_action(&x)
    }
}

/// Open-loop playback of the reference's recorded actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReplayPolicy;

impl Policy for ReplayPolicy {
    fn check(&self, _reference: &Trajectory) -> Result<()> {
        Ok(())
    }

    fn act(
        &self,
        t: usize,
        _history: &[TrajectoryStep],
        reference: &Trajectory,
        _fut_idx: usize,
    ) -> Result<Action> {
        Ok(reference.steps[t.min(reference.len() - 1)].action.clone())
    }
}

/// Always the neutral action.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoopPolicy;

impl Policy for NoopPolicy {
    fn check(&self, _reference: &Trajectory) -> Result<()> {
        Ok(())
    }

    fn act(
        &self,
        _t: usize,
        _history: &[TrajectoryStep],
        reference: &Trajectory,
        _fut_idx: usize,
    ) -> Result<Action> {
        Ok(reference.action_spec().neutral())
    }
}

pub const DEFAULT_FI_RADIUS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    pub selector: SelectorKind,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Radius of the progress monitor behind the FI ratio.
    #[serde(default = "default_fi_radius")]
    pub fi_radius: f64,
    /// Score AUC along the DTW alignment instead of at equal timesteps.
    #[serde(default)]
    pub dtw_aligned_auc: bool,
}

fn default_n_seeds() -> usize {
    10
}

fn default_fi_radius() -> f64 {
    DEFAULT_FI_RADIUS
}

impl RolloutConfig {
    pub fn new(selector: SelectorKind, env: EnvConfig) -> Self {
        Self {
            selector,
            env,
            n_seeds: default_n_seeds(),
            base_seed: 0,
            fi_radius: DEFAULT_FI_RADIUS,
            dtw_aligned_auc: false,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.selector.check()?;
        self.env.check()?;
        if self.n_seeds == 0 {
            return Err(Error::InvalidInput("n_seeds must be >= 1".into()));
        }
        if !(self.fi_radius > 0.0 && self.fi_radius.is_finite()) {
            return Err(Error::InvalidInput("fi_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }

    fn monitor(&self) -> SelectorKind {
        SelectorKind::Radius {
            r: self.fi_radius,
            k: self.selector.k(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RolloutResult {
    pub agent: Trajectory,
    pub trace: SelectorTrace,
    pub monitor: SelectorTrace,
    pub report: MetricReport,
    pub seed: u64,
    pub wall_time: Duration,
}

pub fn score(
    agent: &Trajectory,
    reference: &Trajectory,
    monitor: &SelectorTrace,
    dtw_aligned: bool,
) -> Result<MetricReport> {
    let a = agent.positions();
    let r = reference.positions();
    let auc = if dtw_aligned {
        metrics::auc_dtw_aligned(&a, &r)?
    } else {
        metrics::auc(&a, &r)?
    };
    Ok(MetricReport {
        auc: auc.auc,
        fi: metrics::future_index_ratio(monitor, r.len())?,
        dtw: metrics::dtw_distance(&a, &r)?,
        max_radius: auc.max_radius,
        degenerate: auc.degenerate,
    })
}

/// One closed-loop episode of exactly `reference.len()` steps.
///
/// Each step the selector picks `fut_idx` from the agent's current position,
/// the policy sees the agent's own past and the reference's future, and the
/// environment advances with noise drawn from `seed`. A radius monitor runs
/// alongside for the FI ratio.
pub fn run_rollout<P: Policy + ?Sized>(
    policy: &P,
    reference: &Trajectory,
    cfg: &RolloutConfig,
    seed: u64,
) -> Result<RolloutResult> {
    cfg.check()?;
    if reference.len() < 2 {
        return Err(Error::InvalidInput(
            "reference needs at least two steps".into(),
        ));
    }
    if reference.obs_dim() != cfg.env.obs_dim() {
        return Err(Error::IncompatibleWindow(format!(
            "reference obs_dim {} differs from the environment's {}",
            reference.obs_dim(),
            cfg.env.obs_dim()
        )));
    }
    policy.check(reference)?;
    let started = Instant::now();
    let ref_pos = reference.positions();
    let mut selector = Selector::new(cfg.selector, &ref_pos)?;
    let mut monitor = Selector::new(cfg.monitor(), &ref_pos)?;
    let mut state = EnvState::new(ref_pos[0], seed);
    let mut agent = Trajectory::new(TrajectoryMeta {
        scenario: reference.meta.scenario.clone(),
        seed,
    });
    let placeholder = reference.action_spec().neutral();

    for t in 0..reference.len() {
        let fut_idx = selector.select(t, state.pos);
        monitor.select(t, state.pos);
        let obs = observe(&state, &ref_pos, fut_idx, &cfg.env);
        agent.push(state.pos, obs, placeholder.clone());
        let action = policy.act(t, &agent.steps, reference, fut_idx)?;
        state = step(&state, &action, &cfg.env);
        agent.steps[t].action = action;
    }

    let trace = selector.into_trace();
    let monitor = monitor.into_trace();
    let report = score(&agent, reference, &monitor, cfg.dtw_aligned_auc)?;
    Ok(RolloutResult {
        agent,
        trace,
        monitor,
        report,
        seed,
        wall_time: started.elapsed(),
    })
}

/// All `n_seeds` rollouts on every reference, ordered by (reference, seed).
pub fn run_rollouts<P: Policy + ?Sized>(
    policy: &P,
    references: &[Trajectory],
    cfg: &RolloutConfig,
    exec: Exec,
) -> Result<Vec<Vec<RolloutResult>>> {
    cfg.check()?;
    let n = cfg.n_seeds;
    let flat = exec.map_range(references.len() * n, |i| {
        run_rollout(policy, &references[i / n], cfg, cfg.seed(i % n))
    });
    let mut out: Vec<Vec<RolloutResult>> = Vec::with_capacity(references.len());
    let mut it = flat.into_iter();
    for _ in references {
        out.push(it.by_ref().take(n).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub trajectory: String,
    /// `None` marks the per-trajectory median row.
    pub seed: Option<u64>,
    pub strategy: String,
    pub auc: f64,
    pub fi: f64,
    pub dtw: f64,
    pub max_radius: f64,
}

impl EvalRow {
    pub fn is_median(&self) -> bool {
        self.seed.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub rows: Vec<EvalRow>,
}

impl EvalTable {
    pub const CSV_HEADER: &'static str = "trajectory,seed,strategy,auc,fi,dtw,R";

    pub fn from_results(
        references: &[Trajectory],
        results: &[Vec<RolloutResult>],
        strategy: &str,
    ) -> Result<Self> {
        let mut rows = Vec::new();
        for (reference, runs) in references.iter().zip(results) {
            let name = &reference.meta.scenario;
            for r in runs {
                rows.push(EvalRow {
                    trajectory: name.clone(),
                    seed: Some(r.seed),
                    strategy: strategy.to_string(),
                    auc: r.report.auc,
                    fi: r.report.fi,
                    dtw: r.report.dtw,
                    max_radius: r.report.max_radius,
                });
            }
            let col = |f: fn(&MetricReport) -> f64| -> Result<f64> {
                metrics::median(&runs.iter().map(|r| f(&r.report)).collect::<Vec<_>>())
            };
            rows.push(EvalRow {
                trajectory: name.clone(),
                seed: None,
                strategy: strategy.to_string(),
                auc: col(|m| m.auc)?,
                fi: col(|m| m.fi)?,
                dtw: col(|m| m.dtw)?,
                max_radius: metrics::max_radius(&reference.positions()),
            });
        }
        Ok(Self { rows })
    }

    pub fn medians(&self) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(|r| r.is_median())
    }

    pub fn median_auc(&self, trajectory: &str) -> Option<f64> {
        self.medians()
            .find(|r| r.trajectory == trajectory)
            .map(|r| r.auc)
    }

    /// Mean over trajectories of the median AUC.
    pub fn mean_median_auc(&self) -> f64 {
        let m: Vec<f64> = self.medians().map(|r| r.auc).collect();
        m.iter().sum::<f64>() / m.len().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            let seed = r
                .seed
                .map_or_else(|| "median".to_string(), |s| s.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.trajectory, seed, r.strategy, r.auc, r.fi, r.dtw, r.max_radius
            )?;
        }
        Ok(())
    }
}

/// Per-seed rows plus one median row per reference.
pub fn evaluate<P: Policy + ?Sized>(
    policy: &P,
    references: &[Trajectory],
    cfg: &RolloutConfig,
    exec: Exec,
) -> Result<EvalTable> {
    if references.is_empty() {
        return Err(Error::InvalidInput(
            "evaluate needs at least one reference".into(),
        ));
    }
    let results = run_rollouts(policy, references, cfg, exec)?;
    EvalTable::from_results(references, &results, &cfg.selector.to_string())
}

/// Past/future window configurations compared in the window ablation:
/// BC (10P-0F), 1P-1F, 10P-1F, 1P-10F and 10P-10F.
pub fn standard_windows(skip: usize) -> Vec<WindowSpec> {
    [(10, 0), (1, 1), (10, 1), (1, 10), (10, 10)]
        .into_iter()
        .map(|(p, f)| WindowSpec::new(p, f, skip))
        .collect()
}

/// The full 10P-10F window and its two single-modality variants.
pub fn modality_windows(skip: usize) -> Vec<WindowSpec> {
    [
        Modality::Full,
        Modality::ObservationsOnly,
        Modality::ActionsOnly,
    ]
    .into_iter()
    .map(|m| WindowSpec::new(10, 10, skip).with_modality(m))
    .collect()
}

pub fn window_name(w: &WindowSpec) -> String {
    match w.modality {
        Modality::Full if w.is_bc() => format!("BC({})", w.label()),
        Modality::Full => w.label(),
        Modality::ObservationsOnly => format!("{}/observations-only", w.label()),
        Modality::ActionsOnly => format!("{}/actions-only", w.label()),
    }
}

#[derive(Clone, Debug)]
pub struct AblationEntry {
    pub window: WindowSpec,
    pub model: IdmModel,
    pub log: Vec<idm::EpochLog>,
    pub table: EvalTable,
}

#[derive(Clone, Debug, Default)]
pub struct AblationTable {
    pub entries: Vec<AblationEntry>,
}

impl AblationTable {
    pub const CSV_HEADER: &'static str = "config,trajectory,auc,fi";

    pub fn get(&self, window: &WindowSpec) -> Option<&AblationEntry> {
        self.entries.iter().find(|e| &e.window == window)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for e in &self.entries {
            let name = window_name(&e.window);
            for r in e.table.medians() {
                writeln!(w, "{},{},{},{}", name, r.trajectory, r.auc, r.fi)?;
            }
            writeln!(w, "{},mean,{},", name, e.table.mean_median_auc())?;
        }
        Ok(())
    }
}

/// Train one model per window (same seed for all) and evaluate each on
/// `references`.
pub fn ablate_windows(
    dataset: &[Trajectory],
    references: &[Trajectory],
    windows: &[WindowSpec],
    train_cfg: &TrainConfig,
    arch: Architecture,
    rollout: &RolloutConfig,
    exec: Exec,
) -> Result<AblationTable> {
    let mut table = AblationTable::default();
    for &window in windows {
        let out = idm::train(dataset, window, train_cfg, arch, exec)?;
        let eval = evaluate(&IdmPolicy(&out.model), references, rollout, exec)?;
        table.entries.push(AblationEntry {
            window,
            model: out.model,
            log: out.log,
            table: eval,
        });
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub selector: SelectorKind,
    pub trajectory: String,
    pub auc: f64,
    pub fi: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub tables: Vec<EvalTable>,
}

impl SweepTable {
    pub const CSV_HEADER: &'static str = "strategy,r,r_in,r_out,trajectory,auc,fi";

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for row in &self.rows {
            let (r, r_in, r_out) = match row.selector {
                SelectorKind::Radius { r, .. } => (r.to_string(), String::new(), String::new()),
                SelectorKind::InnerOuter { r_in, r_out, .. } => {
                    (String::new(), r_in.to_string(), r_out.to_string())
                }
                _ => Default::default(),
            };
            writeln!(
                w,
                "{},{r},{r_in},{r_out},{},{},{}",
                row.selector.name(),
                row.trajectory,
                row.auc,
                row.fi
            )?;
        }
        Ok(())
    }
}

/// Evaluate Radius at every `radii` value and InnerOuter at every
/// `(r_in, r_out)` pair, all with the same seeds and `K = k`.
pub fn sweep_radius<P: Policy + ?Sized>(
    policy: &P,
    references: &[Trajectory],
    radii: &[f64],
    io_pairs: &[(f64, f64)],
    k: usize,
    cfg: &RolloutConfig,
    exec: Exec,
) -> Result<SweepTable> {
    if radii.is_empty() && io_pairs.is_empty() {
        return Err(Error::InvalidInput(
            "sweep needs at least one radius".into(),
        ));
    }
    let kinds = radii.iter().map(|&r| SelectorKind::Radius { r, k }).chain(
        io_pairs
            .iter()
            .map(|&(r_in, r_out)| SelectorKind::InnerOuter { r_in, r_out, k }),
    );
    let mut out = SweepTable::default();
    for selector in kinds {
        let cfg = RolloutConfig {
            selector,
            ..cfg.clone()
        };
        let table = evaluate(policy, references, &cfg, exec)?;
        for m in table.medians() {
            out.rows.push(SweepRow {
                selector,
                trajectory: m.trajectory.clone(),
                auc: m.auc,
                fi: m.fi,
            });
        }
        out.tables.push(table);
    }
    Ok(out)
}

//! Minibatch training with a deterministic chunked gradient reduction.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    Architecture, ForwardCache, IdmModel, InputLayout, LossBreakdown, LossWeights, Normalizer,
    WindowSpec,
};
use crate::action::Action;
use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Exec};
use crate::trajectory::Trajectory;

/// Samples per gradient chunk. Chunks are the unit of parallel work and
/// their sums are reduced in a fixed order.
const CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub updates_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            updates_per_epoch: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            seed: 0,
            loss_weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<()> {
        if self.epochs == 0 || self.updates_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::InvalidInput(
                "epochs, updates_per_epoch and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning_rate must be positive".into()));
        }
        let w = self.loss_weights;
        if !(w.buttons >= 0.0 && w.sticks >= 0.0 && w.buttons.is_finite() && w.sticks.is_finite()) {
            return Err(Error::InvalidInput(
                "loss weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Every `(trajectory, t)` pair of a dataset, flattened into model inputs
/// with the future window aligned at `t + skip`.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub layout: InputLayout,
    pub inputs: Vec<f64>,
    pub targets: Vec<Action>,
}

impl TrainingSet {
    pub fn build(dataset: &[Trajectory], window: WindowSpec) -> Result<Self> {
        window.check()?;
        let first = dataset
            .first()
            .ok_or_else(|| Error::InvalidInput("empty training dataset".into()))?;
        let span = window.past + window.future;
        if let Some(short) = dataset.iter().find(|tr| tr.len() < span.max(1)) {
            return Err(Error::IncompatibleWindow(format!(
                "window {} spans {span} steps but a trajectory has only {}",
                window.label(),
                short.len()
            )));
        }
        let layout = InputLayout {
            window,
            obs_dim: first.obs_dim(),
            actions: first.action_spec(),
        };
        let n: usize = dataset.iter().map(Trajectory::len).sum();
        let mut inputs = Vec::with_capacity(n * layout.width());
        let mut targets = Vec::with_capacity(n);
        let mut row = Vec::with_capacity(layout.width());
        for tr in dataset {
            for t in 0..tr.len() {
                layout.build_input(&tr.steps, t, &tr.steps, t + window.skip, &mut row)?;
                inputs.extend_from_slice(&row);
                targets.push(tr.steps[t].action.clone());
            }
        }
        Ok(Self {
            layout,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let w = self.layout.width();
        &self.inputs[i * w..(i + 1) * w]
    }

    /// Mean loss of `model` over the whole set.
    pub fn evaluate(&self, model: &IdmModel, exec: Exec) -> Result<LossBreakdown> {
        let parts = exec.map_range(self.len().div_ceil(CHUNK), |c| -> Result<LossBreakdown> {
            let mut acc = LossBreakdown::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(self.len()) {
                acc.add(&model.loss(self.input(i), &self.targets[i])?);
            }
            Ok(acc)
        });
        let mut total = LossBreakdown::default();
        for p in parts {
            total.add(&p?);
        }
        Ok(finish(total, self.len()))
    }
}

fn finish(sum: LossBreakdown, n: usize) -> LossBreakdown {
    let mut l = sum.scaled(1.0 / n as f64);
    l.total = l.button_loss + l.sticks_loss;
    l
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: LossBreakdown,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str =
        "epoch,total,button_loss,sticks_loss,button_err,sticks_err";

    pub fn write_csv<W: Write>(logs: &[EpochLog], w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for e in logs {
            let l = &e.loss;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.epoch,
                l.total,
                l.button_loss,
                l.sticks_loss,
                l.button_error_rate,
                l.sticks_error_rate
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: IdmModel,
    pub log: Vec<EpochLog>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Train an IDM on every `(trajectory, t)` pair of `dataset`.
///
/// Batches are drawn uniformly with replacement from a ChaCha stream seeded
/// by `cfg.seed`; the same seed also initializes the weights. The result is
/// bit-identical across runs and across execution modes.
pub fn train(
    dataset: &[Trajectory],
    window: WindowSpec,
    cfg: &TrainConfig,
    arch: Architecture,
    exec: Exec,
) -> Result<TrainOutput> {
    cfg.check()?;
    let set = TrainingSet::build(dataset, window)?;
    train_on(&set, cfg, arch, exec)
}

pub(crate) fn train_on(
    set: &TrainingSet,
    cfg: &TrainConfig,
    arch: Architecture,
    exec: Exec,
) -> Result<TrainOutput> {
    cfg.check()?;
    if set.is_empty() {
        return Err(Error::InvalidInput("empty training dataset".into()));
    }
    let mut model = IdmModel::new(set.layout, arch, cfg.seed)?;
    model.norm = Normalizer::fit(&set.inputs, set.layout.width());
    let n_params = model.net.num_params();
    let mut sampler = ChaCha8Rng::seed_from_u64(cfg.seed);
    sampler.set_stream(1);
    let mut adam = Adam::new(n_params);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut batch = vec![0usize; cfg.batch_size];

    for epoch in 0..cfg.epochs {
        let mut epoch_sum = LossBreakdown::default();
        for _ in 0..cfg.updates_per_epoch {
            for b in batch.iter_mut() {
                *b = sampler.random_range(0..set.len());
            }
            let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
            let parts = exec.map(&chunks, |idx| -> Result<(Vec<f64>, LossBreakdown)> {
                let mut g = vec![0.0; n_params];
                let mut cache = ForwardCache::default();
                let mut l = LossBreakdown::default();
                for &i in idx.iter() {
                    let s = model.accumulate_gradient(
                        set.input(i),
                        &set.targets[i],
                        cfg.loss_weights,
                        &mut cache,
                        &mut g,
                    )?;
                    l.add(&s);
                }
                Ok((g, l))
            });
            let mut grads = Vec::with_capacity(parts.len());
            for p in parts {
                let (g, l) = p?;
                epoch_sum.add(&l);
                grads.push(g);
            }
            let mut g = pairwise_sum(grads).expect("batch is non-empty");
            let inv = 1.0 / cfg.batch_size as f64;
            g.iter_mut().for_each(|v| *v *= inv);
            match cfg.optimizer {
                Optimizer::Adam => adam.update(&mut model.net.params, &g, cfg.learning_rate),
                Optimizer::Sgd => {
                    for (p, gi) in model.net.params.iter_mut().zip(&g) {
                        *p -= cfg.learning_rate * gi;
                    }
                }
            }
        }
        log.push(EpochLog {
            epoch,
            loss: finish(epoch_sum, cfg.updates_per_epoch * cfg.batch_size),
        });
    }
    model.check()?;
    Ok(TrainOutput { model, log })
}

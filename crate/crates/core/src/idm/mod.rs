//! The IDM-K model: an MLP over flattened past and future windows with
//! per-modality action heads, its training loop and a gradient checker.

mod checkpoint;
mod gradcheck;
mod loss;
mod network;
mod train;
mod window;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, GradientFn};
pub use loss::{argmax, loss, loss_and_grad, predict_action, LossBreakdown, LossWeights};
pub use network::{ForwardCache, LayerShape, Mlp};
pub use train::{train, EpochLog, Optimizer, TrainConfig, TrainOutput, TrainingSet};
pub use window::{InputLayout, Modality, WindowSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub hidden: usize,
    pub encoder_layers: usize,
    pub head_layers: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: 64,
            encoder_layers: 2,
            head_layers: 2,
        }
    }
}

impl Architecture {
    pub fn check(&self) -> Result<()> {
        if self.hidden == 0 || self.encoder_layers + self.head_layers == 0 {
            return Err(Error::InvalidInput(
                "architecture needs a positive width and at least one layer".into(),
            ));
        }
        Ok(())
    }

    /// Layer widths from input to logits. The encoder and head stacks are
    /// contiguous dense layers, so only their total depth matters here.
    pub fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let depth = self.encoder_layers + self.head_layers;
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(self.hidden, depth - 1));
        w.push(output);
        w
    }
}

/// Per-feature affine input normalization `(x - shift) * scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(width: usize) -> Self {
        Self {
            shift: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    /// Mean and inverse standard deviation of each column of `rows`
    /// (row-major, `width` columns). Constant columns get unit scale.
    pub fn fit(rows: &[f64], width: usize) -> Self {
        let n = rows.len().checked_div(width).unwrap_or(0);
        if n == 0 {
            return Self::identity(width);
        }
        let mut mean = vec![0.0; width];
        for row in rows.chunks_exact(width) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; width];
        for row in rows.chunks_exact(width) {
            for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(row) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .iter()
            .map(|&v| {
                let sd = (v / n as f64).sqrt();
                if sd > 1e-8 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { shift: mean, scale }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.shift)
                .zip(&self.scale)
                .map(|((&v, &s), &k)| (v - s) * k),
        );
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdmModel {
    pub layout: InputLayout,
    pub arch: Architecture,
    pub norm: Normalizer,
    pub net: Mlp,
}

impl IdmModel {
    pub fn new(layout: InputLayout, arch: Architecture, seed: u64) -> Result<Self> {
        layout.window.check()?;
        arch.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = arch.widths(layout.width(), layout.actions.logit_width());
        Ok(Self {
            layout,
            arch,
            norm: Normalizer::identity(layout.width()),
            net: Mlp::init(&widths, &mut rng),
        })
    }

    pub fn input_width(&self) -> usize {
        self.layout.width()
    }

    /// Structural checks: shapes chain from the input layout to the logits
    /// and every parameter is finite.
    pub fn check(&self) -> Result<()> {
        let widths = self
            .arch
            .widths(self.layout.width(), self.layout.actions.logit_width());
        let expected: Vec<LayerShape> = widths
            .windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect();
        if self.net.shapes != expected {
            return Err(Error::InvalidInput(
                "layer shapes do not match the architecture".into(),
            ));
        }
        let n: usize = expected
            .iter()
            .map(|s| s.inputs * s.outputs + s.outputs)
            .sum();
        if self.net.params.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                actual: self.net.params.len(),
            });
        }
        if self.norm.shift.len() != self.input_width()
            || self.norm.scale.len() != self.input_width()
        {
            return Err(Error::InvalidInput("normalizer width mismatch".into()));
        }
        if !self
            .net
            .params
            .iter()
            .chain(&self.norm.shift)
            .chain(&self.norm.scale)
            .all(|p| p.is_finite())
        {
            return Err(Error::InvalidInput("non-finite model parameter".into()));
        }
        Ok(())
    }

    fn check_width(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::ShapeMismatch {
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_width(input)?;
        let mut x = Vec::with_capacity(input.len());
        self.norm.apply(input, &mut x);
        self.net.forward(&x)
    }

    pub fn predict_action(&self, input: &[f64]) -> Result<Action> {
        Ok(predict_action(&self.forward(input)?, &self.layout.actions))
    }

    pub fn loss(&self, input: &[f64], target: &Action) -> Result<LossBreakdown> {
        target.check_spec(&self.layout.actions)?;
        Ok(loss(&self.forward(input)?, target))
    }

    /// Add the gradient of the weighted loss at one sample to `grads`.
    pub fn accumulate_gradient(
        &self,
        input: &[f64],
        target: &Action,
        weights: LossWeights,
        cache: &mut ForwardCache,
        grads: &mut [f64],
    ) -> Result<LossBreakdown> {
        self.check_width(input)?;
        target.check_spec(&self.layout.actions)?;
        let mut x = Vec::with_capacity(input.len());
        self.norm.apply(input, &mut x);
        self.net.forward_cached(&x, cache)?;
        let mut d_logits = vec![0.0; self.net.output_width()];
        let l = loss_and_grad(cache.output(), target, weights, &mut d_logits);
        self.net.backward_accumulate(cache, &d_logits, grads);
        Ok(l)
    }

    /// Gradient of the unweighted total loss at one sample.
    pub fn backward(&self, input: &[f64], target: &Action) -> Result<Vec<f64>> {
        let mut grads = vec![0.0; self.net.num_params()];
        let mut cache = ForwardCache::default();
        self.accumulate_gradient(
            input,
            target,
            LossWeights::default(),
            &mut cache,
            &mut grads,
        )?;
        Ok(grads)
    }
}

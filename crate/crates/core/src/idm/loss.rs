//! Per-modality cross-entropy over button and stick heads.
//!
//! Logits are laid out as `B` two-way button heads followed by `S` eleven-way
//! stick heads. `button_loss` and `sticks_loss` each average over their heads.

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionSpec, STICK_BINS};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub button_loss: f64,
    pub sticks_loss: f64,
    pub button_error_rate: f64,
    pub sticks_error_rate: f64,
}

impl LossBreakdown {
    pub fn add(&mut self, other: &LossBreakdown) {
        self.total += other.total;
        self.button_loss += other.button_loss;
        self.sticks_loss += other.sticks_loss;
        self.button_error_rate += other.button_error_rate;
        self.sticks_error_rate += other.sticks_error_rate;
    }

    pub fn scaled(&self, k: f64) -> LossBreakdown {
        LossBreakdown {
            total: self.total * k,
            button_loss: self.button_loss * k,
            sticks_loss: self.sticks_loss * k,
            button_error_rate: self.button_error_rate * k,
            sticks_error_rate: self.sticks_error_rate * k,
        }
    }
}

/// Relative weights of the two modality losses in the training gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub buttons: f64,
    pub sticks: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            buttons: 1.0,
            sticks: 1.0,
        }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy of one head, writing `softmax - onehot` scaled by `scale`
/// into `grad`.
fn head_ce(logits: &[f64], target: usize, scale: f64, grad: &mut [f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    for (i, (g, &z)) in grad.iter_mut().zip(logits).enumerate() {
        let p = (z - log_z).exp();
        *g = scale * (p - if i == target { 1.0 } else { 0.0 });
    }
    log_z - logits[target]
}

/// Loss of one prediction and its gradient with respect to the logits.
pub fn loss_and_grad(
    logits: &[f64],
    target: &Action,
    weights: LossWeights,
    grad: &mut [f64],
) -> LossBreakdown {
    let spec = target.spec();
    debug_assert_eq!(logits.len(), spec.logit_width());
    let nb = spec.buttons;
    let ns = spec.sticks;
    let mut out = LossBreakdown::default();
    let button_scale = if nb > 0 { 1.0 / nb as f64 } else { 0.0 };
    let stick_scale = if ns > 0 { 1.0 / ns as f64 } else { 0.0 };

    for (i, &pressed) in target.buttons.iter().enumerate() {
        let r = 2 * i..2 * i + 2;
        let cls = pressed as usize;
        out.button_loss += button_scale
            * head_ce(
                &logits[r.clone()],
                cls,
                weights.buttons * button_scale,
                &mut grad[r.clone()],
            );
        if argmax(&logits[r]) != cls {
            out.button_error_rate += button_scale;
        }
    }
    let base = 2 * nb;
    for (j, &bin) in target.sticks.iter().enumerate() {
        let r = base + STICK_BINS * j..base + STICK_BINS * (j + 1);
        let cls = bin as usize;
        out.sticks_loss += stick_scale
            * head_ce(
                &logits[r.clone()],
                cls,
                weights.sticks * stick_scale,
                &mut grad[r.clone()],
            );
        if argmax(&logits[r]) != cls {
            out.sticks_error_rate += stick_scale;
        }
    }
    out.total = out.button_loss + out.sticks_loss;
    out
}

pub fn loss(logits: &[f64], target: &Action) -> LossBreakdown {
    let mut scratch = vec![0.0; logits.len()];
    loss_and_grad(logits, target, LossWeights::default(), &mut scratch)
}

/// Per-head argmax decoding; ties resolve to the lower index (button
/// released, lower bin).
pub fn predict_action(logits: &[f64], spec: &ActionSpec) -> Action {
    let buttons = (0..spec.buttons)
        .map(|i| argmax(&logits[2 * i..2 * i + 2]) == 1)
        .collect();
    let base = 2 * spec.buttons;
    let sticks = (0..spec.sticks)
        .map(|j| argmax(&logits[base + STICK_BINS * j..base + STICK_BINS * (j + 1)]) as u8)
        .collect();
    Action { buttons, sticks }
}

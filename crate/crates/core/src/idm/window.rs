//! Flattening past and future trajectory windows into a model input.
//!
//! A past frame for step `s` is `obs(s) ++ encode(action(s - 1))`; the action
//! that produced the state, never the one being predicted. Steps before 0 are
//! zero blocks.
//!
//! A future frame for reference index `j` is
//! `pos(j) - anchor ++ obs(j) ++ encode(action(j))`, where `anchor` is the
//! agent's current position. Indices past the end repeat the final frame.

use serde::{Deserialize, Serialize};

use crate::action::ActionSpec;
use crate::error::{Error, Result};
use crate::trajectory::TrajectoryStep;

/// Which input modalities the model sees. Masked features are zeroed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Full,
    ObservationsOnly,
    ActionsOnly,
}

impl Modality {
    fn keeps_obs(self) -> bool {
        self != Modality::ActionsOnly
    }

    fn keeps_actions(self) -> bool {
        self != Modality::ObservationsOnly
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub past: usize,
    pub future: usize,
    /// Frames skipped between the current step and the future window.
    pub skip: usize,
    #[serde(default)]
    pub modality: Modality,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            past: 10,
            future: 10,
            skip: 1,
            modality: Modality::Full,
        }
    }
}

impl WindowSpec {
    pub fn new(past: usize, future: usize, skip: usize) -> Self {
        Self {
            past,
            future,
            skip,
            modality: Modality::Full,
        }
    }

    pub fn with_modality(self, modality: Modality) -> Self {
        Self { modality, ..self }
    }

    pub fn is_bc(&self) -> bool {
        self.future == 0
    }

    pub fn check(&self) -> Result<()> {
        if self.past + self.future == 0 {
            return Err(Error::InvalidInput(
                "window needs at least one past or future frame".into(),
            ));
        }
        Ok(())
    }

    /// Short label such as `10P-10F`.
    pub fn label(&self) -> String {
        format!("{}P-{}F", self.past, self.future)
    }
}

pub(crate) const REL_POS_DIM: usize = 3;

/// Window spec plus the per-step feature dimensions it is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputLayout {
    pub window: WindowSpec,
    pub obs_dim: usize,
    pub actions: ActionSpec,
}

impl InputLayout {
    pub fn past_block(&self) -> usize {
        self.obs_dim + self.actions.encoded_width()
    }

    pub fn future_block(&self) -> usize {
        REL_POS_DIM + self.obs_dim + self.actions.encoded_width()
    }

    pub fn width(&self) -> usize {
        self.window.past * self.past_block() + self.window.future * self.future_block()
    }

    fn check_step(&self, s: &TrajectoryStep) -> Result<()> {
        if s.obs.len() != self.obs_dim {
            return Err(Error::ShapeMismatch {
                expected: self.obs_dim,
                actual: s.obs.len(),
            });
        }
        s.action.check_spec(&self.actions)
    }

    /// Model input for step `t`.
    ///
    /// `past` holds the acting trajectory up to and including step `t` (the
    /// action stored at `t` is ignored). `future` is the trajectory providing
    /// the conditioning window starting at `fut_idx`.
    pub fn build_input(
        &self,
        past: &[TrajectoryStep],
        t: usize,
        future: &[TrajectoryStep],
        fut_idx: usize,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        if t >= past.len() {
            return Err(Error::InvalidInput(format!(
                "step {t} outside a history of {} steps",
                past.len()
            )));
        }
        if self.window.future > 0 && future.is_empty() {
            return Err(Error::InvalidInput("empty future trajectory".into()));
        }
        self.check_step(&past[t])?;
        out.clear();
        out.reserve(self.width());
        let modality = self.window.modality;
        let a_width = self.actions.encoded_width();

        for back in (0..self.window.past).rev() {
            let Some(s) = t.checked_sub(back) else {
                out.resize(out.len() + self.past_block(), 0.0);
                continue;
            };
            push_masked(out, &past[s].obs, modality.keeps_obs());
            match s.checked_sub(1) {
                Some(prev) if modality.keeps_actions() => past[prev].action.encode_into(out),
                _ => out.resize(out.len() + a_width, 0.0),
            }
        }

        if self.window.future > 0 {
            let anchor = past[t].pos;
            let last = future.len() - 1;
            for e in 0..self.window.future {
                let f = &future[(fut_idx + e).min(last)];
                let rel = f.pos - anchor;
                push_masked(out, &[rel.x, rel.y, rel.z], modality.keeps_obs());
                push_masked(out, &f.obs, modality.keeps_obs());
                if modality.keeps_actions() {
                    f.action.encode_into(out);
                } else {
                    out.resize(out.len() + a_width, 0.0);
                }
            }
        }
        debug_assert_eq!(out.len(), self.width());
        Ok(())
    }
}

fn push_masked(out: &mut Vec<f64>, values: &[f64], keep: bool) {
    if keep {
        out.extend_from_slice(values);
    } else {
        out.resize(out.len() + values.len(), 0.0);
    }
}

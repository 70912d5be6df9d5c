//! Controller actions and the stick codec.
//!
//! Sticks are continuous axes in `[-1, 1]` quantized into [`STICK_BINS`]
//! uniform bins. Bins are half-open `[lo, hi)` except the last, which is
//! closed so that `1.0` lands in bin 10. Decoding returns the bin center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of quantization bins per stick axis.
pub const STICK_BINS: usize = 11;

/// Bin index of the neutral (0.0) stick position.
pub const NEUTRAL_BIN: u8 = 5;

const BIN_WIDTH: f64 = 2.0 / STICK_BINS as f64;

/// Quantize a raw stick value. Values outside `[-1, 1]` are clamped first.
pub fn discretize_stick(v: f64) -> Result<u8> {
    if !v.is_finite() {
        return Err(Error::InvalidInput(format!(
            "stick value {v} is not finite"
        )));
    }
    let clamped = v.clamp(-1.0, 1.0);
    let bin = ((clamped + 1.0) * STICK_BINS as f64 / 2.0).floor() as usize;
    Ok(bin.min(STICK_BINS - 1) as u8)
}

/// Center of a stick bin.
pub fn dequantize_stick(bin: u8) -> Result<f64> {
    if bin as usize >= STICK_BINS {
        return Err(Error::InvalidInput(format!(
            "stick bin {bin} outside [0, {}]",
            STICK_BINS - 1
        )));
    }
    Ok(bin_center(bin))
}

#[inline]
fn bin_center(bin: u8) -> f64 {
    -1.0 + (bin as f64 + 0.5) * BIN_WIDTH
}

/// Number of button and stick slots in an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActionSpec {
    pub buttons: usize,
    pub sticks: usize,
}

impl Default for ActionSpec {
    fn default() -> Self {
        Self {
            buttons: 2,
            sticks: 2,
        }
    }
}

impl ActionSpec {
    /// Width of [`Action::encode`] output.
    pub fn encoded_width(&self) -> usize {
        self.buttons + self.sticks
    }

    /// Number of output logits for a classifier over this action space.
    pub fn logit_width(&self) -> usize {
        self.buttons * 2 + self.sticks * STICK_BINS
    }

    /// All buttons released, all sticks centered.
    pub fn neutral(&self) -> Action {
        Action {
            buttons: vec![false; self.buttons],
            sticks: vec![NEUTRAL_BIN; self.sticks],
        }
    }
}

/// One controller input: button states plus binned stick axes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub buttons: Vec<bool>,
    pub sticks: Vec<u8>,
}

impl Action {
    pub fn new(buttons: Vec<bool>, sticks: Vec<u8>) -> Result<Self> {
        let action = Self { buttons, sticks };
        action.check()?;
        Ok(action)
    }

    /// Build an action from raw stick values, quantizing each axis.
    pub fn from_raw(buttons: Vec<bool>, sticks: &[f64]) -> Result<Self> {
        let sticks = sticks
            .iter()
            .map(|&v| discretize_stick(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { buttons, sticks })
    }

    pub fn spec(&self) -> ActionSpec {
        ActionSpec {
            buttons: self.buttons.len(),
            sticks: self.sticks.len(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if let Some(&b) = self.sticks.iter().find(|&&b| b as usize >= STICK_BINS) {
            return Err(Error::InvalidInput(format!(
                "stick bin {b} outside [0, {}]",
                STICK_BINS - 1
            )));
        }
        Ok(())
    }

    pub fn check_spec(&self, spec: &ActionSpec) -> Result<()> {
        if self.buttons.len() != spec.buttons {
            return Err(Error::ShapeMismatch {
                expected: spec.buttons,
                actual: self.buttons.len(),
            });
        }
        if self.sticks.len() != spec.sticks {
            return Err(Error::ShapeMismatch {
                expected: spec.sticks,
                actual: self.sticks.len(),
            });
        }
        self.check()
    }

    /// Stick value (bin center) for axis `i`.
    pub fn stick_value(&self, i: usize) -> f64 {
        bin_center(self.sticks[i])
    }

    /// Flat vector: buttons as 0/1 followed by stick bin centers.
    pub fn encode(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.buttons.len() + self.sticks.len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<f64>) {
        out.extend(self.buttons.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        out.extend(self.sticks.iter().map(|&s| bin_center(s)));
    }

    /// Inverse of [`Action::encode`] for vectors produced by it.
    pub fn decode(encoded: &[f64], spec: &ActionSpec) -> Result<Self> {
        if encoded.len() != spec.encoded_width() {
            return Err(Error::ShapeMismatch {
                expected: spec.encoded_width(),
                actual: encoded.len(),
            });
        }
        let (buttons, sticks) = encoded.split_at(spec.buttons);
        let buttons = buttons.iter().map(|&b| b >= 0.5).collect();
        let sticks = sticks
            .iter()
            .map(|&v| discretize_stick(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { buttons, sticks })
    }
}

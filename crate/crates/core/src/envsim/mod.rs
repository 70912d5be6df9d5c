//! A 2D kinematic point-mass environment.
//!
//! Velocity follows a damped first-order update driven by the first two
//! stick axes:
//!
//! ```text
//! vel' = clip(0.8 * vel + 0.2 * gain * stick + noise + bias, v_max)
//! pos' = clip_to_arena(pos + vel')
//! ```
//!
//! `gain` is 2 while button 0 (boost) is held and 1 otherwise. Button 1 and
//! any further buttons or sticks are recorded but have no effect.

mod expert;
mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::trajectory::Position;

pub use expert::{generate_dataset, make_reference, ExpertController, DEFAULT_JITTER, MAX_STEPS};
pub use scenario::{Scenario, PAUSE_STEPS};

pub const VELOCITY_DECAY: f64 = 0.8;
pub const STICK_GAIN: f64 = 0.2;
pub const BOOST_FACTOR: f64 = 2.0;
pub const ARENA_HALF_WIDTH: f64 = 100.0;

/// Circular region adding a constant velocity bias while the agent is inside
/// (moving platforms, conveyor-like hazards).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardRegion {
    pub center: [f64; 2],
    pub radius: f64,
    pub bias: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticitySpec {
    /// Standard deviation of the per-axis Gaussian velocity perturbation.
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub hazard_regions: Vec<HazardRegion>,
}

impl StochasticitySpec {
    pub fn deterministic() -> Self {
        Self::default()
    }

    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            hazard_regions: Vec::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        for h in &self.hazard_regions {
            if h.radius.is_nan() || h.radius <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "hazard radius must be > 0, got {}",
                    h.radius
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Number of reference look-ahead entries appended to each observation.
    #[serde(default)]
    pub obs_future: usize,
    /// Index stride between look-ahead entries.
    #[serde(default = "default_obs_stride")]
    pub obs_stride: usize,
    #[serde(default)]
    pub stochasticity: StochasticitySpec,
}

fn default_v_max() -> f64 {
    1.0
}

fn default_obs_stride() -> usize {
    1
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            v_max: default_v_max(),
            obs_future: 0,
            obs_stride: default_obs_stride(),
            stochasticity: StochasticitySpec::default(),
        }
    }
}

impl EnvConfig {
    pub fn obs_dim(&self) -> usize {
        4 + 2 * self.obs_future
    }

    /// The same environment with all stochastic elements removed.
    pub fn deterministic(&self) -> Self {
        Self {
            stochasticity: StochasticitySpec::deterministic(),
            ..self.clone()
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        out.stochasticity.sigma = sigma;
        out
    }

    pub fn check(&self) -> Result<()> {
        if !(self.v_max > 0.0 && self.v_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "v_max must be > 0, got {}",
                self.v_max
            )));
        }
        if self.obs_stride == 0 {
            return Err(Error::InvalidInput("obs_stride must be >= 1".into()));
        }
        self.stochasticity.check()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub pos: Position,
    pub vel: [f64; 2],
    pub rng: ChaCha8Rng,
}

impl EnvState {
    pub fn new(pos: Position, seed: u64) -> Self {
        Self {
            pos,
            vel: [0.0, 0.0],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Advance the environment by one step.
pub fn step(state: &EnvState, action: &Action, cfg: &EnvConfig) -> EnvState {
    let mut next = state.clone();
    let gain = if action.buttons.first().copied().unwrap_or(false) {
        STICK_GAIN * BOOST_FACTOR
    } else {
        STICK_GAIN
    };
    let stick = |i: usize| {
        if i < action.sticks.len() {
            action.stick_value(i)
        } else {
            0.0
        }
    };
    let mut vel = [
        VELOCITY_DECAY * state.vel[0] + gain * stick(0),
        VELOCITY_DECAY * state.vel[1] + gain * stick(1),
    ];

    let spec = &cfg.stochasticity;
    if spec.sigma > 0.0 {
        let normal = Normal::new(0.0, spec.sigma).expect("sigma checked finite and >= 0");
        vel[0] += normal.sample(&mut next.rng);
        vel[1] += normal.sample(&mut next.rng);
    }
    for h in &spec.hazard_regions {
        let dx = state.pos.x - h.center[0];
        let dy = state.pos.y - h.center[1];
        if (dx * dx + dy * dy).sqrt() < h.radius {
            vel[0] += h.bias[0];
            vel[1] += h.bias[1];
        }
    }

    let speed = (vel[0] * vel[0] + vel[1] * vel[1]).sqrt();
    if speed > cfg.v_max {
        let k = cfg.v_max / speed;
        vel[0] *= k;
        vel[1] *= k;
    }
    next.vel = vel;
    next.pos = Position::new(
        (state.pos.x + vel[0]).clamp(-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH),
        (state.pos.y + vel[1]).clamp(-ARENA_HALF_WIDTH, ARENA_HALF_WIDTH),
        state.pos.z,
    );
    next
}

/// Observation vector: position, velocity, then `obs_future` vectors from the
/// agent to reference points starting at `fut_idx`.
pub fn observe(
    state: &EnvState,
    reference: &[Position],
    fut_idx: usize,
    cfg: &EnvConfig,
) -> Vec<f64> {
    let mut obs = Vec::with_capacity(cfg.obs_dim());
    obs.extend_from_slice(&[state.pos.x, state.pos.y, state.vel[0], state.vel[1]]);
    if cfg.obs_future > 0 && !reference.is_empty() {
        let last = reference.len() - 1;
        for e in 0..cfg.obs_future {
            let goal = reference[(fut_idx + e * cfg.obs_stride).min(last)];
            obs.push(goal.x - state.pos.x);
            obs.push(goal.y - state.pos.y);
        }
    } else {
        obs.resize(cfg.obs_dim(), 0.0);
    }
    obs
}

//! Trajectory following with future-conditioned inverse dynamics models.

pub mod action;
pub mod config;
pub mod envsim;
pub mod error;
pub mod exec;
pub mod futuresel;
pub mod harness;
pub mod idm;
pub mod metrics;
pub mod pipeline;
pub mod trajectory;

pub use action::{Action, ActionSpec};
pub use error::{Error, Result};
pub use exec::Exec;
pub use trajectory::{Position, Trajectory, TrajectoryMeta, TrajectoryStep};

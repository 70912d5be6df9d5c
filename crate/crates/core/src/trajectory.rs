//! Positions, trajectories, validation and the JSONL trajectory format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::{Add, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const ORIGIN: Position = Position {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn planar(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (*self - *other).norm()
    }

    pub fn scale(&self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Position {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<Position> for [f64; 3] {
    fn from(p: Position) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    pub pos: Position,
    pub obs: Vec<f64>,
    /// Action taken at this step, producing the next step's state.
    pub action: Action,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scenario: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self {
            steps: Vec::new(),
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.steps.iter().map(|s| s.pos).collect()
    }

    pub fn obs_dim(&self) -> usize {
        self.steps.first().map_or(0, |s| s.obs.len())
    }

    pub fn action_spec(&self) -> ActionSpec {
        self.steps
            .first()
            .map_or(ActionSpec::default(), |s| s.action.spec())
    }

    /// Append a step with the next contiguous timestep.
    pub fn push(&mut self, pos: Position, obs: Vec<f64>, action: Action) {
        let t = self.steps.len();
        self.steps.push(TrajectoryStep {
            t,
            pos,
            obs,
            action,
        });
    }

    /// Extend to `len` steps by repeating the final step (with fresh
    /// timesteps). No-op if already that long.
    pub fn pad_to(&mut self, len: usize) {
        if let Some(last) = self.steps.last().cloned() {
            while self.steps.len() < len {
                let t = self.steps.len();
                self.steps.push(TrajectoryStep { t, ..last.clone() });
            }
        }
    }

    /// Returns every violation found; an empty list means the trajectory is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps.is_empty() {
            out.push("trajectory has no steps".to_string());
            return out;
        }
        let dim = self.steps[0].obs.len();
        let spec = self.steps[0].action.spec();
        for (i, step) in self.steps.iter().enumerate() {
            if step.t != i {
                out.push(format!(
                    "non-contiguous timestep at index {i}: expected {i}, found {}",
                    step.t
                ));
            }
            if !step.pos.is_finite() {
                out.push(format!("non-finite position at step {i}"));
            }
            if step.obs.len() != dim {
                out.push(format!(
                    "observation dimension {} at step {i} differs from {dim}",
                    step.obs.len()
                ));
            }
            if step.obs.iter().any(|v| !v.is_finite()) {
                out.push(format!("non-finite observation at step {i}"));
            }
            if step.action.spec() != spec {
                out.push(format!("action shape changes at step {i}"));
            }
            if step.action.check().is_err() {
                out.push(format!("stick bin out of range at step {i}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTrajectory(v))
        }
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl_to(&mut w)
            .map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_jsonl_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let spec = self.action_spec();
        let header = Header {
            scenario: self.meta.scenario.clone(),
            seed: self.meta.seed,
            obs_dim: self.obs_dim(),
            buttons: spec.buttons,
            sticks: spec.sticks,
        };
        serde_json::to_writer(&mut *w, &header)?;
        w.write_all(b"\n")?;
        for s in &self.steps {
            let rec = StepRecord {
                t: s.t,
                pos: s.pos,
                obs: s.obs.clone(),
                buttons: s.action.buttons.clone(),
                sticks: s.action.sticks.clone(),
            };
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let header: Header = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&line).map_err(|e| parse_err(1, e.to_string()))?
            }
            None => return Err(parse_err(1, "missing header line".into())),
        };
        let spec = ActionSpec {
            buttons: header.buttons,
            sticks: header.sticks,
        };
        let mut tr = Trajectory::new(TrajectoryMeta {
            scenario: header.scenario,
            seed: header.seed,
        });
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StepRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            if rec.obs.len() != header.obs_dim {
                return Err(parse_err(
                    i + 1,
                    format!(
                        "obs has {} values, header says {}",
                        rec.obs.len(),
                        header.obs_dim
                    ),
                ));
            }
            let action = Action {
                buttons: rec.buttons,
                sticks: rec.sticks,
            };
            action
                .check_spec(&spec)
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
            tr.steps.push(TrajectoryStep {
                t: rec.t,
                pos: rec.pos,
                obs: rec.obs,
                action,
            });
        }
        tr.validate()?;
        Ok(tr)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    scenario: String,
    seed: u64,
    obs_dim: usize,
    buttons: usize,
    sticks: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    t: usize,
    pos: Position,
    obs: Vec<f64>,
    buttons: Vec<bool>,
    sticks: Vec<u8>,
}

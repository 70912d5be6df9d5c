//! Future-conditioning strategies.
//!
//! Each strategy decides which reference index starts the future window the
//! model is conditioned on:
//!
//! * `Static` — `t + K`, ignoring the agent's position.
//! * `Closest` — the nearest reference point to the agent, plus `K`.
//! * `Radius` — a pointer that advances by one whenever the agent is within
//!   `r` of the reference point it currently points at.
//! * `InnerOuter` — like `Radius` inside `r_out`, but skips ahead past every
//!   point that lies within `r_in` of the agent.
//!
//! All indices are clamped to `T - 1`. For the pointer strategies `K` only
//! sets the initial index.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Position;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum SelectorKind {
    Static { k: usize },
    Closest { k: usize },
    Radius { r: f64, k: usize },
    InnerOuter { r_in: f64, r_out: f64, k: usize },
}

impl SelectorKind {
    pub fn k(&self) -> usize {
        match *self {
            SelectorKind::Static { k }
            | SelectorKind::Closest { k }
            | SelectorKind::Radius { k, .. }
            | SelectorKind::InnerOuter { k, .. } => k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectorKind::Static { .. } => "static",
            SelectorKind::Closest { .. } => "closest",
            SelectorKind::Radius { .. } => "radius",
            SelectorKind::InnerOuter { .. } => "inner_outer",
        }
    }

    pub fn check(&self) -> Result<()> {
        match *self {
            SelectorKind::Radius { r, .. } if !(r > 0.0 && r.is_finite()) => Err(
                Error::InvalidInput(format!("radius must be finite and > 0, got {r}")),
            ),
            SelectorKind::InnerOuter { r_in, r_out, .. }
                if !(r_in >= 0.0 && r_in < r_out && r_out.is_finite()) =>
            {
                Err(Error::InvalidInput(format!(
                    "need 0 <= r_in < r_out, got r_in={r_in}, r_out={r_out}"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SelectorKind::Static { k } => write!(f, "static(K={k})"),
            SelectorKind::Closest { k } => write!(f, "closest(K={k})"),
            SelectorKind::Radius { r, k } => write!(f, "radius(r={r},K={k})"),
            SelectorKind::InnerOuter { r_in, r_out, k } => {
                write!(f, "inner_outer(r_in={r_in},r_out={r_out},K={k})")
            }
        }
    }
}

/// `min(t + K, T - 1)`.
pub fn static_select(t_current: usize, k: usize, len: usize) -> usize {
    t_current.saturating_add(k).min(len.saturating_sub(1))
}

/// Nearest reference index to `agent` (smallest index on ties), plus `K`,
/// clamped to `T - 1`.
pub fn closest_select(reference: &[Position], agent: &Position, k: usize) -> usize {
    assert!(!reference.is_empty(), "reference must be non-empty");
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in reference.iter().enumerate() {
        let d = p.distance(agent);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    (best + k).min(reference.len() - 1)
}

/// Selector state for one rollout: the strategy, its pointer and the
/// reference it indexes into.
#[derive(Clone, Copy, Debug)]
pub struct SelectorState<'r> {
    pub kind: SelectorKind,
    pub fut_idx: usize,
    pub reference: &'r [Position],
}

impl<'r> SelectorState<'r> {
    pub fn new(kind: SelectorKind, reference: &'r [Position]) -> Result<Self> {
        kind.check()?;
        if reference.is_empty() {
            return Err(Error::InvalidInput("reference must be non-empty".into()));
        }
        Ok(Self {
            kind,
            fut_idx: kind.k().min(reference.len() - 1),
            reference,
        })
    }

    fn last(&self) -> usize {
        self.reference.len() - 1
    }

    pub fn distance_to_target(&self, agent: &Position) -> f64 {
        self.reference[self.fut_idx].distance(agent)
    }
}

/// Advance by one when the agent is within `r` (inclusive) of the current
/// conditioning point.
pub fn radius_update<'r>(state: SelectorState<'r>, agent: &Position) -> SelectorState<'r> {
    let SelectorKind::Radius { r, .. } = state.kind else {
        panic!("radius_update called on {}", state.kind);
    };
    let mut next = state;
    if state.distance_to_target(agent) <= r {
        next.fut_idx = (state.fut_idx + 1).min(state.last());
    }
    next
}

/// Inside `r_in`: advance until the conditioning point leaves `r_in`.
/// Within `r_out`: advance by one. Otherwise hold.
pub fn inner_outer_update<'r>(state: SelectorState<'r>, agent: &Position) -> SelectorState<'r> {
    let SelectorKind::InnerOuter { r_in, r_out, .. } = state.kind else {
        panic!("inner_outer_update called on {}", state.kind);
    };
    let mut next = state;
    let last = state.last();
    let d = state.distance_to_target(agent);
    if d < r_in {
        while next.fut_idx < last && next.distance_to_target(agent) < r_in {
            next.fut_idx += 1;
        }
    } else if d <= r_out {
        next.fut_idx = (state.fut_idx + 1).min(last);
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub t: usize,
    pub pos: Position,
    pub fut_idx: usize,
    /// Distance from the agent to the reference point at `fut_idx`.
    pub dist: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectorTrace {
    pub entries: Vec<TraceEntry>,
}

impl SelectorTrace {
    pub fn fut_indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.fut_idx).collect()
    }

    pub fn last_fut_idx(&self) -> Option<usize> {
        self.entries.last().map(|e| e.fut_idx)
    }

    /// CSV with header `t,fut_idx,dist`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,fut_idx,dist")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.t, e.fut_idx, e.dist)?;
        }
        Ok(())
    }
}

/// A selector together with the trace of its decisions.
#[derive(Clone, Debug)]
pub struct Selector<'r> {
    state: SelectorState<'r>,
    trace: SelectorTrace,
}

impl<'r> Selector<'r> {
    pub fn new(kind: SelectorKind, reference: &'r [Position]) -> Result<Self> {
        Ok(Self {
            state: SelectorState::new(kind, reference)?,
            trace: SelectorTrace::default(),
        })
    }

    pub fn state(&self) -> &SelectorState<'r> {
        &self.state
    }

    pub fn trace(&self) -> &SelectorTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SelectorTrace {
        self.trace
    }

    /// Conditioning index for step `t_current` with the agent at `agent`.
    ///
    /// Static and Closest are memoryless. The pointer strategies return the
    /// current pointer and then apply their update rule, so the first call
    /// returns `min(K, T - 1)`.
    pub fn select(&mut self, t_current: usize, agent: Position) -> usize {
        let len = self.state.reference.len();
        let fut_idx = match self.state.kind {
            SelectorKind::Static { k } => static_select(t_current, k, len),
            SelectorKind::Closest { k } => closest_select(self.state.reference, &agent, k),
            SelectorKind::Radius { .. } => {
                let idx = self.state.fut_idx;
                self.state = radius_update(self.state, &agent);
                idx
            }
            SelectorKind::InnerOuter { .. } => {
                let idx = self.state.fut_idx;
                self.state = inner_outer_update(self.state, &agent);
                idx
            }
        };
        if matches!(
            self.state.kind,
            SelectorKind::Static { .. } | SelectorKind::Closest { .. }
        ) {
            self.state.fut_idx = fut_idx;
        }
        self.trace.entries.push(TraceEntry {
            t: t_current,
            pos: agent,
            fut_idx,
            dist: self.state.reference[fut_idx].distance(&agent),
        });
        fut_idx
    }
}

//! Trajectory similarity and progress metrics.
//!
//! Coverage `f(r)` is the fraction of timesteps where the rollout lies
//! strictly within `r` of the same-timestep reference point. The AUC averages
//! `f` over `[0, R]`, with `R` the reference's largest displacement from its
//! first point. Because `f` is a step function that jumps at each pointwise
//! distance `d_t`, the integral has the closed form
//!
//! ```text
//! AUC = (1 / T) * sum_t max(0, 1 - d_t / R)
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::futuresel::SelectorTrace;
use crate::trajectory::Position;

/// Dynamic time warping distance with Euclidean point cost and the
/// match/insert/delete step pattern, no band constraint.
pub fn dtw_distance(a: &[Position], b: &[Position]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("dtw needs non-empty sequences".into()));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for pa in a {
        cur[0] = f64::INFINITY;
        for (j, pb) in b.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = pa.distance(pb) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Optimal warping path as `(i, j)` index pairs from `(0, 0)` to the ends.
pub fn dtw_path(a: &[Position], b: &[Position]) -> Result<Vec<(usize, usize)>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("dtw needs non-empty sequences".into()));
    }
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    acc[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = acc[idx(i - 1, j - 1)]
                .min(acc[idx(i - 1, j)])
                .min(acc[idx(i, j - 1)]);
            acc[idx(i, j)] = a[i - 1].distance(&b[j - 1]) + best;
        }
    }
    let (mut i, mut j) = (n, m);
    let mut path = vec![(n - 1, m - 1)];
    while i > 1 || j > 1 {
        let diag = acc[idx(i - 1, j - 1)];
        let up = acc[idx(i - 1, j)];
        let left = acc[idx(i, j - 1)];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i - 1, j - 1));
    }
    path.reverse();
    Ok(path)
}

fn check_equal_len(rollout: &[Position], reference: &[Position]) -> Result<()> {
    if rollout.len() != reference.len() {
        return Err(Error::InvalidInput(format!(
            "rollout has {} steps but reference has {}",
            rollout.len(),
            reference.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::InvalidInput("empty trajectories".into()));
    }
    Ok(())
}

fn pointwise_distances(rollout: &[Position], reference: &[Position]) -> Vec<f64> {
    rollout
        .iter()
        .zip(reference)
        .map(|(a, b)| a.distance(b))
        .collect()
}

/// Fraction of timesteps with `||x_t - x̂_t|| < r`.
pub fn coverage_rate(rollout: &[Position], reference: &[Position], r: f64) -> Result<f64> {
    check_equal_len(rollout, reference)?;
    if r.is_nan() || r < 0.0 {
        return Err(Error::InvalidInput(format!("radius must be >= 0, got {r}")));
    }
    let hits = rollout
        .iter()
        .zip(reference)
        .filter(|(a, b)| a.distance(b) < r)
        .count();
    Ok(hits as f64 / reference.len() as f64)
}

/// `max_t ||x_0 - x_t||` over the reference.
pub fn max_radius(reference: &[Position]) -> f64 {
    let Some(first) = reference.first() else {
        return 0.0;
    };
    reference
        .iter()
        .map(|p| p.distance(first))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub auc: f64,
    pub max_radius: f64,
    /// `R = 0`: the reference never leaves its start.
    pub degenerate: bool,
}

fn auc_from_distances(distances: &[f64], max_radius: f64) -> AucResult {
    if max_radius == 0.0 {
        let all_zero = distances.iter().all(|&d| d == 0.0);
        return AucResult {
            auc: if all_zero { 1.0 } else { 0.0 },
            max_radius,
            degenerate: true,
        };
    }
    let sum: f64 = distances
        .iter()
        .map(|&d| (1.0 - d / max_radius).max(0.0))
        .sum();
    AucResult {
        auc: sum / distances.len() as f64,
        max_radius,
        degenerate: false,
    }
}

/// Area under the coverage curve on `[0, R]`, normalized by `R`.
pub fn auc(rollout: &[Position], reference: &[Position]) -> Result<AucResult> {
    check_equal_len(rollout, reference)?;
    if reference.len() < 2 {
        return Err(Error::InvalidInput(
            "auc needs a reference of length >= 2".into(),
        ));
    }
    let distances = pointwise_distances(rollout, reference);
    Ok(auc_from_distances(&distances, max_radius(reference)))
}

/// AUC variant where distances are taken along the optimal DTW alignment
/// instead of at equal timesteps.
pub fn auc_dtw_aligned(rollout: &[Position], reference: &[Position]) -> Result<AucResult> {
    if reference.len() < 2 {
        return Err(Error::InvalidInput(
            "auc needs a reference of length >= 2".into(),
        ));
    }
    let path = dtw_path(rollout, reference)?;
    let distances: Vec<f64> = path
        .iter()
        .map(|&(i, j)| rollout[i].distance(&reference[j]))
        .collect();
    Ok(auc_from_distances(&distances, max_radius(reference)))
}

/// Coverage rate sampled at `n` evenly spaced radii on `[0, R]`, endpoints
/// included.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageCurve {
    pub max_radius: f64,
    pub points: Vec<(f64, f64)>,
}

impl CoverageCurve {
    pub fn sample(rollout: &[Position], reference: &[Position], n: usize) -> Result<Self> {
        check_equal_len(rollout, reference)?;
        let n = n.max(2);
        let max_radius = max_radius(reference);
        let mut distances = pointwise_distances(rollout, reference);
        distances.sort_by(f64::total_cmp);
        let total = distances.len() as f64;
        let points = (0..n)
            .map(|i| {
                let r = max_radius * i as f64 / (n - 1) as f64;
                let below = distances.partition_point(|&d| d < r);
                (r, below as f64 / total)
            })
            .collect();
        Ok(Self { max_radius, points })
    }

    /// CSV with header `r,f`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "r,f")?;
        for (r, f) in &self.points {
            writeln!(w, "{r},{f}")?;
        }
        Ok(())
    }
}

/// Progress ratio reached by a radius-style monitor: the final index in its
/// trace divided by `T - 1`.
pub fn future_index_ratio(monitor_trace: &SelectorTrace, len: usize) -> Result<f64> {
    let last = monitor_trace
        .last_fut_idx()
        .ok_or_else(|| Error::InvalidInput("empty monitor trace".into()))?;
    if len < 2 {
        return Ok(1.0);
    }
    Ok(last as f64 / (len - 1) as f64)
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("median of an empty list".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub fi: f64,
    pub dtw: f64,
    pub max_radius: f64,
    pub degenerate: bool,
}

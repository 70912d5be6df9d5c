//! Central finite-difference check of the analytic gradients.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::IdmModel;
use crate::action::{Action, STICK_BINS};
use crate::error::{Error, Result};

/// Gradient under test: `(model, input, target) -> d total / d params`.
pub type GradientFn<'a> = dyn Fn(&IdmModel, &[f64], &Action) -> Result<Vec<f64>> + 'a;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub samples: usize,
    pub probes: usize,
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Denominator floor so that parameters with vanishing gradients are judged
/// on absolute error.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Check [`IdmModel::backward`] on `n_samples` random `(input, target)`
/// pairs. `probes_per_sample` parameters are drawn per sample, or all of
/// them when `None`.
pub fn grad_check(
    model: &IdmModel,
    n_samples: usize,
    probes_per_sample: Option<usize>,
    h: f64,
    tol: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_with(
        model,
        n_samples,
        probes_per_sample,
        h,
        tol,
        seed,
        &|m, x, a| m.backward(x, a),
    )
}

pub fn grad_check_with(
    model: &IdmModel,
    n_samples: usize,
    probes_per_sample: Option<usize>,
    h: f64,
    tol: f64,
    seed: u64,
    gradient: &GradientFn<'_>,
) -> Result<GradCheckReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput(
            "grad_check needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_params = model.net.num_params();
    let spec = model.layout.actions;
    let mut probe_model = model.clone();
    let mut report = GradCheckReport {
        samples: n_samples,
        probes: 0,
        max_rel_error: 0.0,
        worst_param: 0,
        tol,
        passed: true,
    };

    for _ in 0..n_samples {
        // Inputs in raw feature space; the normalizer maps them back to
        // roughly unit scale.
        let input: Vec<f64> = (0..model.input_width())
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                model.norm.shift[i] + z / model.norm.scale[i]
            })
            .collect();
        let target = Action {
            buttons: (0..spec.buttons).map(|_| rng.random_bool(0.5)).collect(),
            sticks: (0..spec.sticks)
                .map(|_| rng.random_range(0..STICK_BINS as u8))
                .collect(),
        };
        let analytic = gradient(model, &input, &target)?;
        if analytic.len() != n_params {
            return Err(Error::ShapeMismatch {
                expected: n_params,
                actual: analytic.len(),
            });
        }
        let probes: Vec<usize> = match probes_per_sample {
            Some(k) if k < n_params => {
                let mut v = sample(&mut rng, n_params, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n_params).collect(),
        };
        for p in probes {
            let orig = probe_model.net.params[p];
            probe_model.net.params[p] = orig + h;
            let up = probe_model.loss(&input, &target)?.total;
            probe_model.net.params[p] = orig - h;
            let dn = probe_model.loss(&input, &target)?.total;
            probe_model.net.params[p] = orig;
            let numeric = (up - dn) / (2.0 * h);
            let err = relative_error(analytic[p], numeric);
            report.probes += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst_param = p;
            }
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}

use rand::seq::index;

use super::rng::seeded;
use super::{Gradients, NumError, ParamStore};

/// Settings for a central-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Coordinates sampled per tensor; `None` checks every coordinate.
    pub per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            per_tensor: None,
            seed: 0,
        }
    }
}

/// The coordinate with the largest disagreement.
#[derive(Debug, Clone)]
pub struct Discrepancy {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub worst: Option<Discrepancy>,
    /// Max relative error per parameter tensor, in store order.
    pub per_tensor: Vec<(String, f64)>,
}

/// Relative error with denominator `max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central differences
/// `(f(θ+h) − f(θ−h)) / 2h` of `loss_fn`. Each perturbed coordinate is
/// restored to its exact original value afterwards. At least 100
/// coordinates are checked (all of them when the store is smaller).
pub fn grad_check<F>(
    mut loss_fn: F,
    analytic: &Gradients,
    store: &mut ParamStore,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NumError>
where
    F: FnMut(&ParamStore) -> f64,
{
    if analytic.len() != store.len() {
        return Err(NumError::Argument(format!(
            "{} gradients for {} parameters",
            analytic.len(),
            store.len()
        )));
    }
    let total = store.num_values();
    let per_tensor = match cfg.per_tensor {
        Some(k) if total > 100 => {
            // Raise the per-tensor sample until at least 100 coordinates are covered.
            let mut k = k.max(1);
            while (0..store.len()).map(|i| store.get(i).len().min(k)).sum::<usize>() < 100 {
                k *= 2;
            }
            Some(k)
        }
        _ => None,
    };

    let mut rng = seeded(cfg.seed);
    let h = cfg.step;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst: None,
        per_tensor: Vec::with_capacity(store.len()),
    };
    for id in 0..store.len() {
        let len = store.get(id).len();
        if analytic.get(id).len() != len {
            return Err(NumError::Dimension(format!(
                "gradient for {} has {} values, parameter has {len}",
                store.name(id),
                analytic.get(id).len()
            )));
        }
        let coords: Vec<usize> = match per_tensor {
            Some(k) if k < len => {
                let mut v = index::sample(&mut rng, len, k).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        let mut tensor_max = 0.0f64;
        for i in coords {
            let original = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = original + h;
            let plus = loss_fn(store);
            store.get_mut(id).data_mut()[i] = original - h;
            let minus = loss_fn(store);
            store.get_mut(id).data_mut()[i] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NumError::NonFinite(format!(
                    "loss not finite while perturbing {}[{i}]",
                    store.name(id)
                )));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.get(id).data()[i];
            let err = relative_error(a, numeric);
            report.checked += 1;
            tensor_max = tensor_max.max(err);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(Discrepancy {
                    name: store.name(id).to_string(),
                    index: i,
                    analytic: a,
                    numeric,
                    rel_error: err,
                });
            }
        }
        report.per_tensor.push((store.name(id).to_string(), tensor_max));
    }
    Ok(report)
}

use crate::model::{reference_trace, Dataset, ModelGraph};

use super::ApproxError;

pub const SAFETY_FACTOR: f64 = 1.25;
pub const INTERVAL_FLOOR: f64 = 1.0;

/// Calibrated half-width `R` of a layer's approximation interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerInterval {
    pub layer: usize,
    pub radius: f64,
    /// The raw quantile before the safety factor and floor.
    pub quantile: f64,
}

/// Linear-interpolation quantile of `values` at `percentile` in `(0, 100]`.
pub fn quantile(values: &mut [f64], percentile: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let pos = (percentile / 100.0) * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] + (values[hi] - values[lo]) * frac
}

/// Per-layer interval radii from the empirical distribution of activation inputs.
///
/// For each layer the absolute values fed to its nonlinearity are collected
/// over the sample (for pooling layers, the pooled inputs, which bound the
/// pairwise differences of the max approximation). The radius is the
/// `percentile` quantile times [`SAFETY_FACTOR`], never below [`INTERVAL_FLOOR`].
pub fn calibrate_interval(
    model: &ModelGraph,
    sample: &Dataset,
    percentile: f64,
) -> Result<Vec<LayerInterval>, ApproxError> {
    if sample.is_empty() {
        return Err(ApproxError::InvalidSpec("calibration sample is empty".into()));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(ApproxError::InvalidSpec(format!(
            "percentile must lie in (0, 100], got {percentile}"
        )));
    }
    let mut magnitudes: Vec<Vec<f64>> = vec![Vec::new(); model.layers.len()];
    for x in &sample.inputs {
        let traces = reference_trace(model, x)
            .map_err(|e| ApproxError::InvalidSpec(format!("calibration sample: {e}")))?;
        for (l, layer) in model.layers.iter().enumerate() {
            if layer.kind.is_pool() {
                let inputs = if l == 0 { x.as_slice() } else { traces[l - 1].output.as_slice() };
                magnitudes[l].extend(inputs.iter().map(|v| v.abs()));
            } else {
                magnitudes[l].extend(traces[l].pre_activation.iter().map(|v| v.abs()));
            }
        }
    }
    Ok(magnitudes
        .iter_mut()
        .enumerate()
        .map(|(layer, values)| {
            let q = quantile(values, percentile);
            LayerInterval {
                layer,
                radius: (q * SAFETY_FACTOR).max(INTERVAL_FLOOR),
                quantile: q,
            }
        })
        .collect())
}

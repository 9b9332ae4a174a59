use super::{Layer, LayerKind, ModelError, ModelGraph};

/// Result of the float reference forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub class: usize,
}

/// Per-layer values recorded during a forward pass.
#[derive(Clone, Debug, Default)]
pub struct LayerTrace {
    /// Values fed to the activation (weighted sums, pooled or normalized values).
    pub pre_activation: Vec<f64>,
    pub output: Vec<f64>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn pre_activation(layer: &Layer, x: &[f64]) -> Vec<f64> {
    match layer.kind {
        LayerKind::Dense | LayerKind::SoftmaxOutput => layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect(),
        LayerKind::Conv2D => {
            let sets = layer.connectivity.as_ref().expect("validated conv layer");
            layer
                .weights
                .iter()
                .zip(sets)
                .zip(&layer.bias)
                .map(|((row, set), b)| row.iter().zip(set).map(|(w, &i)| w * x[i]).sum::<f64>() + b)
                .collect()
        }
        LayerKind::MaxPool | LayerKind::MeanPool => {
            let sets = layer.connectivity.as_ref().expect("validated pool layer");
            let mean = layer.kind == LayerKind::MeanPool || layer.mean_replaced;
            sets.iter()
                .enumerate()
                .map(|(j, set)| {
                    let pooled = if mean {
                        set.iter().map(|&i| x[i]).sum::<f64>() / set.len() as f64
                    } else {
                        set.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max)
                    };
                    pooled + layer.bias.get(j).copied().unwrap_or(0.0)
                })
                .collect()
        }
        LayerKind::BatchNorm => {
            let bn = layer.batch_norm.as_ref().expect("validated batch norm layer");
            (0..layer.output_width)
                .map(|j| bn.gamma[j] * (x[j] - bn.mean[j]) / bn.var[j].sqrt() + bn.beta[j])
                .collect()
        }
    }
}

/// Forward pass keeping every layer's pre-activation and output.
pub fn reference_trace(model: &ModelGraph, x: &[f64]) -> Result<Vec<LayerTrace>, ModelError> {
    if x.len() != model.input_width {
        return Err(ModelError::WidthMismatch {
            expected: model.input_width,
            actual: x.len(),
        });
    }
    let mut traces = Vec::with_capacity(model.layers.len());
    let mut current = x.to_vec();
    for layer in &model.layers {
        let pre = pre_activation(layer, &current);
        let output: Vec<f64> = pre.iter().map(|&z| layer.activation.apply(z)).collect();
        current = output.clone();
        traces.push(LayerTrace {
            pre_activation: pre,
            output,
        });
    }
    Ok(traces)
}

/// Exact float forward pass with the true activations.
///
/// Classification takes the argmax of the logits, which equals the argmax of
/// the softmax probabilities.
pub fn reference_infer(model: &ModelGraph, x: &[f64]) -> Result<Inference, ModelError> {
    let traces = reference_trace(model, x)?;
    let logits = traces.into_iter().last().map(|t| t.output).unwrap_or_default();
    let probabilities = softmax(&logits);
    let class = argmax(&logits);
    Ok(Inference {
        logits,
        probabilities,
        class,
    })
}

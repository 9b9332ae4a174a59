use super::{BatchNormParams, Layer, LayerKind, ModelError, ModelGraph};

fn scale_shift(bn: &BatchNormParams) -> (Vec<f64>, Vec<f64>) {
    let scale: Vec<f64> = bn.gamma.iter().zip(&bn.var).map(|(g, v)| g / v.sqrt()).collect();
    let shift = bn
        .beta
        .iter()
        .zip(&bn.mean)
        .zip(&scale)
        .map(|((b, m), s)| b - s * m)
        .collect();
    (scale, shift)
}

fn is_linear(layer: &Layer) -> bool {
    matches!(layer.kind, LayerKind::Dense | LayerKind::Conv2D) && layer.activation.is_identity()
}

/// Folds `bn` into the preceding linear layer: `s * (Wx + b - mean) + beta`.
fn fold_into_previous(prev: &mut Layer, bn_layer: &Layer) {
    let bn = bn_layer.batch_norm.as_ref().expect("batch norm layer");
    let scale: Vec<f64> = bn.gamma.iter().zip(&bn.var).map(|(g, v)| g / v.sqrt()).collect();
    for (j, row) in prev.weights.iter_mut().enumerate() {
        for w in row.iter_mut() {
            *w *= scale[j];
        }
        prev.bias[j] = scale[j] * (prev.bias[j] - bn.mean[j]) + bn.beta[j];
    }
    prev.activation = bn_layer.activation;
}

/// Folds `bn` (identity activation) into the following linear layer.
fn fold_into_next(next: &mut Layer, bn_layer: &Layer) {
    let bn = bn_layer.batch_norm.as_ref().expect("batch norm layer");
    let (scale, shift) = scale_shift(bn);
    for unit in 0..next.output_width {
        let inputs = next.inputs_of(unit);
        let row = &mut next.weights[unit];
        let mut extra = 0.0;
        for (w, &i) in row.iter_mut().zip(&inputs) {
            extra += *w * shift[i];
            *w *= scale[i];
        }
        next.bias[unit] += extra;
    }
}

/// Removes every batch-norm layer by folding it into an adjacent linear layer.
///
/// A batch norm directly after a Dense/Conv2D layer with identity activation
/// is folded backwards and contributes its activation to the merged layer.
/// Otherwise a batch norm with identity activation directly before a
/// Dense/Conv2D/SoftmaxOutput layer is folded forwards.
pub fn fold_batch_norm(model: &ModelGraph) -> Result<ModelGraph, ModelError> {
    let mut layers: Vec<Layer> = Vec::with_capacity(model.layers.len());
    let mut pending: Option<(usize, Layer)> = None;
    for (index, layer) in model.layers.iter().enumerate() {
        if let Some((bn_index, bn)) = pending.take() {
            let mut next = layer.clone();
            if !matches!(
                next.kind,
                LayerKind::Dense | LayerKind::Conv2D | LayerKind::SoftmaxOutput
            ) {
                return Err(ModelError::Unsupported {
                    layer: bn_index,
                    message: "batch norm has no foldable neighbor".into(),
                });
            }
            fold_into_next(&mut next, &bn);
            layers.push(next);
            continue;
        }
        if layer.kind != LayerKind::BatchNorm {
            layers.push(layer.clone());
            continue;
        }
        match layers.last_mut() {
            Some(prev) if is_linear(prev) => fold_into_previous(prev, layer),
            _ if layer.activation.is_identity() && index + 1 < model.layers.len() => {
                pending = Some((index, layer.clone()));
            }
            _ => {
                return Err(ModelError::Unsupported {
                    layer: index,
                    message: "batch norm has no foldable neighbor".into(),
                })
            }
        }
    }
    let folded = ModelGraph {
        layers,
        ..model.clone()
    };
    folded.validate()?;
    Ok(folded)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActivationKind, BatchNormParams, Layer, LayerKind, ModelError, ModelGraph};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    #[serde(default = "default_version")]
    version: String,
    input_width: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
    layers: Vec<LayerFile>,
}

fn default_version() -> String {
    "1".into()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    kind: String,
    /// `[input_width, output_width]`.
    widths: [usize; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bias: Vec<f64>,
    #[serde(default = "default_activation")]
    activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leak_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bn: Option<BatchNormFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    connectivity: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "is_false")]
    mean_replaced: bool,
}

fn default_activation() -> String {
    "identity".into()
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchNormFile {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl LayerFile {
    fn into_layer(self, index: usize) -> Result<Layer, ModelError> {
        let err = |field: &'static str, message: String| ModelError::Validation {
            layer: index,
            field,
            message,
        };
        let kind = LayerKind::from_name(&self.kind)
            .ok_or_else(|| err("kind", format!("unknown layer kind `{}`", self.kind)))?;
        let mut activation = ActivationKind::from_name(&self.activation)
            .ok_or_else(|| err("activation", format!("unknown activation `{}`", self.activation)))?;
        match (&mut activation, self.leak_slope) {
            (ActivationKind::LeakyReLu { leak_slope }, Some(s)) => *leak_slope = s,
            (ActivationKind::LeakyReLu { .. }, None) => {}
            (_, Some(_)) => {
                return Err(err("leak_slope", "only valid for leaky_relu".into()));
            }
            _ => {}
        }
        let [input_width, output_width] = self.widths;
        let weights = match kind {
            LayerKind::Dense | LayerKind::SoftmaxOutput => {
                if self.weights.len() != input_width * output_width {
                    return Err(err(
                        "weights",
                        format!(
                            "expected {}x{} = {} row-major entries, got {}",
                            output_width,
                            input_width,
                            input_width * output_width,
                            self.weights.len()
                        ),
                    ));
                }
                if input_width == 0 {
                    vec![Vec::new(); output_width]
                } else {
                    self.weights.chunks(input_width).map(<[f64]>::to_vec).collect()
                }
            }
            LayerKind::Conv2D => {
                let sets = self
                    .connectivity
                    .as_ref()
                    .ok_or_else(|| err("connectivity", "required for conv2d".into()))?;
                let total: usize = sets.iter().map(Vec::len).sum();
                if self.weights.len() != total {
                    return Err(err(
                        "weights",
                        format!(
                            "conv weights must list one entry per connection ({total}), got {}",
                            self.weights.len()
                        ),
                    ));
                }
                let mut rest = self.weights.as_slice();
                sets.iter()
                    .map(|s| {
                        let (row, tail) = rest.split_at(s.len());
                        rest = tail;
                        row.to_vec()
                    })
                    .collect()
            }
            _ => {
                if !self.weights.is_empty() {
                    return Err(err("weights", format!("not allowed for {}", self.kind)));
                }
                Vec::new()
            }
        };
        let bias = if kind.is_pool() && self.bias.is_empty() {
            vec![0.0; output_width]
        } else {
            self.bias
        };
        Ok(Layer {
            kind,
            input_width,
            output_width,
            weights,
            bias,
            activation,
            batch_norm: self.bn.map(|b| BatchNormParams {
                gamma: b.gamma,
                beta: b.beta,
                mean: b.mean,
                var: b.var,
            }),
            connectivity: self.connectivity,
            mean_replaced: self.mean_replaced,
        })
    }

    fn from_layer(layer: &Layer) -> Self {
        let leak_slope = match layer.activation {
            ActivationKind::LeakyReLu { leak_slope } => Some(leak_slope),
            _ => None,
        };
        let bias = if layer.kind.is_pool() && layer.bias.iter().all(|&b| b == 0.0) {
            Vec::new()
        } else {
            layer.bias.clone()
        };
        LayerFile {
            kind: layer.kind.name().into(),
            widths: [layer.input_width, layer.output_width],
            weights: layer.weights.iter().flatten().copied().collect(),
            bias,
            activation: layer.activation.name().into(),
            leak_slope,
            bn: layer.batch_norm.as_ref().map(|b| BatchNormFile {
                gamma: b.gamma.clone(),
                beta: b.beta.clone(),
                mean: b.mean.clone(),
                var: b.var.clone(),
            }),
            connectivity: layer.connectivity.clone(),
            mean_replaced: layer.mean_replaced,
        }
    }
}

/// Parses and validates a model from its JSON text.
pub fn model_from_json(text: &str) -> Result<ModelGraph, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.into_layer(i))
        .collect::<Result<Vec<_>, _>>()?;
    let model = ModelGraph {
        name: file.name,
        version: file.version,
        input_width: file.input_width,
        layers,
        metadata: file.metadata,
    };
    model.validate()?;
    Ok(model)
}

pub fn model_to_json(model: &ModelGraph) -> String {
    let file = ModelFile {
        name: model.name.clone(),
        version: model.version.clone(),
        input_width: model.input_width,
        metadata: model.metadata.clone(),
        layers: model.layers.iter().map(LayerFile::from_layer).collect(),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelGraph, ModelError> {
    let text = fs::read_to_string(path)?;
    model_from_json(&text)
}

pub fn save_model(model: &ModelGraph, path: impl AsRef<Path>) -> Result<(), ModelError> {
    fs::write(path, model_to_json(model))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "name": "tiny",
        "input_width": 2,
        "layers": [
            {"kind": "dense", "widths": [2, 2], "weights": [1, 2, 3, 4], "bias": [0.5, -0.5], "activation": "relu"},
            {"kind": "dense", "widths": [2, 1], "weights": [1, -1], "bias": [0]}
        ]
    }"#;

    #[test]
    fn loads_minimal_dense_model() {
        let m = model_from_json(TINY).unwrap();
        assert_eq!(m.layers.len(), 2);
        assert_eq!(m.widths(), vec![2, 1]);
        assert_eq!(m.layers[0].weights, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.layers[1].activation, ActivationKind::Identity);
    }

    #[test]
    fn json_round_trip_is_stable() {
        let m = model_from_json(TINY).unwrap();
        let text = model_to_json(&m);
        let again = model_from_json(&text).unwrap();
        assert_eq!(m, again);
        assert_eq!(text, model_to_json(&again));
    }

    #[test]
    fn wrong_row_length_is_a_validation_error() {
        let bad = TINY.replace("[1, -1]", "[1, -1, 2]");
        let err = model_from_json(&bad).unwrap_err();
        assert!(matches!(err, ModelError::Validation { layer: 1, field: "weights", .. }), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let bad = TINY.replace("\"widths\": [2, 1], ", "");
        let err = model_from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("widths"), "{err}");
    }

    #[test]
    fn unknown_activation_is_named() {
        let bad = TINY.replace("\"relu\"", "\"gelu\"");
        let err = model_from_json(&bad).unwrap_err();
        assert!(matches!(err, ModelError::Validation { layer: 0, field: "activation", .. }));
    }
}

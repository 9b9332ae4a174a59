//! Trained network description, ingestion and the float reference forward pass.

mod batch_norm;
mod dataset;
mod infer;
mod schema;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use batch_norm::fold_batch_norm;
pub use dataset::{load_csv, load_dataset, load_idx, write_idx, Dataset, DatasetSource};
pub use infer::{argmax, reference_infer, reference_trace, softmax, Inference, LayerTrace};
pub use schema::{load_model, model_from_json, model_to_json, save_model};

/// Slope of the negative branch of the leaky ReLu.
pub const LEAK_SLOPE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("layer {layer}: invalid `{field}`: {message}")]
    Validation {
        layer: usize,
        field: &'static str,
        message: String,
    },
    #[error("model: {0}")]
    Structure(String),
    #[error("layer {layer}: unsupported structure: {message}")]
    Unsupported { layer: usize, message: String },
    #[error("input width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("dataset format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Activation applied after a layer's affine part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationKind {
    ReLu,
    LeakyReLu { leak_slope: f64 },
    Sigmoid,
    Tanh,
    Identity,
}

impl ActivationKind {
    pub fn leaky_relu() -> Self {
        ActivationKind::LeakyReLu {
            leak_slope: LEAK_SLOPE,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::ReLu => x.max(0.0),
            ActivationKind::LeakyReLu { leak_slope } => {
                if x <= 0.0 {
                    leak_slope * x
                } else {
                    x
                }
            }
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Identity => x,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ActivationKind::Identity)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::ReLu => "relu",
            ActivationKind::LeakyReLu { .. } => "leaky_relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "relu" => ActivationKind::ReLu,
            "leaky_relu" => ActivationKind::leaky_relu(),
            "sigmoid" => ActivationKind::Sigmoid,
            "tanh" => ActivationKind::Tanh,
            "identity" => ActivationKind::Identity,
            _ => return None,
        })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Dense,
    Conv2D,
    MaxPool,
    MeanPool,
    BatchNorm,
    /// Dense layer whose outputs are logits fed to a softmax.
    SoftmaxOutput,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv2D => "conv2d",
            LayerKind::MaxPool => "max_pool",
            LayerKind::MeanPool => "mean_pool",
            LayerKind::BatchNorm => "batch_norm",
            LayerKind::SoftmaxOutput => "softmax_output",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "dense" => LayerKind::Dense,
            "conv2d" => LayerKind::Conv2D,
            "max_pool" => LayerKind::MaxPool,
            "mean_pool" => LayerKind::MeanPool,
            "batch_norm" => LayerKind::BatchNorm,
            "softmax_output" => LayerKind::SoftmaxOutput,
            _ => return None,
        })
    }

    /// Kinds whose units compute a full weighted sum of all predecessors.
    pub fn is_dense(&self) -> bool {
        matches!(self, LayerKind::Dense | LayerKind::SoftmaxOutput)
    }

    pub fn is_pool(&self) -> bool {
        matches!(self, LayerKind::MaxPool | LayerKind::MeanPool)
    }
}

/// Inference-time batch normalization: `gamma * (z - mean) / sqrt(var) + beta`.
///
/// `var` already includes any epsilon the training framework used.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub input_width: usize,
    pub output_width: usize,
    /// One row per output unit. Dense rows have `input_width` entries; Conv2D
    /// rows are aligned with the unit's connectivity set. Empty for pooling
    /// and batch norm.
    pub weights: Vec<Vec<f64>>,
    /// Pre-activation is `sum_i w_i x_i + b`.
    pub bias: Vec<f64>,
    pub activation: ActivationKind,
    pub batch_norm: Option<BatchNormParams>,
    /// Predecessor indices feeding each output unit (Conv2D and pooling).
    pub connectivity: Option<Vec<Vec<usize>>>,
    /// MaxPool layers whose network was trained with mean pooling instead.
    pub mean_replaced: bool,
}

impl Layer {
    pub fn dense(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: ActivationKind) -> Self {
        let input_width = weights.first().map_or(0, Vec::len);
        Layer {
            kind: LayerKind::Dense,
            input_width,
            output_width: weights.len(),
            weights,
            bias,
            activation,
            batch_norm: None,
            connectivity: None,
            mean_replaced: false,
        }
    }

    pub fn softmax_output(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        Layer {
            kind: LayerKind::SoftmaxOutput,
            ..Layer::dense(weights, bias, ActivationKind::Identity)
        }
    }

    pub fn batch_norm(params: BatchNormParams, activation: ActivationKind) -> Self {
        let width = params.gamma.len();
        Layer {
            kind: LayerKind::BatchNorm,
            input_width: width,
            output_width: width,
            weights: Vec::new(),
            bias: Vec::new(),
            activation,
            batch_norm: Some(params),
            connectivity: None,
            mean_replaced: false,
        }
    }

    pub fn conv2d(
        input_width: usize,
        connectivity: Vec<Vec<usize>>,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        activation: ActivationKind,
    ) -> Self {
        Layer {
            kind: LayerKind::Conv2D,
            input_width,
            output_width: connectivity.len(),
            weights,
            bias,
            activation,
            batch_norm: None,
            connectivity: Some(connectivity),
            mean_replaced: false,
        }
    }

    pub fn pool(kind: LayerKind, input_width: usize, connectivity: Vec<Vec<usize>>) -> Self {
        assert!(kind.is_pool());
        Layer {
            kind,
            input_width,
            output_width: connectivity.len(),
            weights: Vec::new(),
            bias: Vec::new(),
            activation: ActivationKind::Identity,
            batch_norm: None,
            connectivity: Some(connectivity),
            mean_replaced: false,
        }
    }

    /// Predecessor indices read by output unit `unit`.
    pub fn inputs_of(&self, unit: usize) -> Vec<usize> {
        match &self.connectivity {
            Some(sets) if !self.kind.is_dense() => sets[unit].clone(),
            _ if self.kind == LayerKind::BatchNorm => vec![unit],
            _ => (0..self.input_width).collect(),
        }
    }

    fn validate(&self, index: usize, expected_input: usize) -> Result<(), ModelError> {
        let err = |field: &'static str, message: String| ModelError::Validation {
            layer: index,
            field,
            message,
        };
        if self.input_width != expected_input {
            return Err(err(
                "widths",
                format!(
                    "input width {} does not match predecessor width {}",
                    self.input_width, expected_input
                ),
            ));
        }
        if self.output_width == 0 {
            return Err(err("widths", "layer has no units".into()));
        }
        if let ActivationKind::LeakyReLu { leak_slope } = self.activation {
            if leak_slope != LEAK_SLOPE {
                return Err(err(
                    "leak_slope",
                    format!("leaky ReLu slope must be {LEAK_SLOPE}, got {leak_slope}"),
                ));
            }
        }
        let check_bias = |allow_empty: bool| -> Result<(), ModelError> {
            if (allow_empty && self.bias.is_empty()) || self.bias.len() == self.output_width {
                Ok(())
            } else {
                Err(err(
                    "bias",
                    format!(
                        "expected {} entries, got {}",
                        self.output_width,
                        self.bias.len()
                    ),
                ))
            }
        };
        let check_connectivity = || -> Result<&Vec<Vec<usize>>, ModelError> {
            let sets = self
                .connectivity
                .as_ref()
                .ok_or_else(|| err("connectivity", "required for this layer kind".into()))?;
            if sets.len() != self.output_width {
                return Err(err(
                    "connectivity",
                    format!("expected {} sets, got {}", self.output_width, sets.len()),
                ));
            }
            for (unit, set) in sets.iter().enumerate() {
                if set.is_empty() {
                    return Err(err("connectivity", format!("unit {unit} has an empty set")));
                }
                if let Some(bad) = set.iter().find(|&&i| i >= self.input_width) {
                    return Err(err(
                        "connectivity",
                        format!("unit {unit} references predecessor {bad} out of range"),
                    ));
                }
            }
            Ok(sets)
        };
        match self.kind {
            LayerKind::Dense | LayerKind::SoftmaxOutput => {
                if self.weights.len() != self.output_width {
                    return Err(err(
                        "weights",
                        format!(
                            "expected {} rows, got {}",
                            self.output_width,
                            self.weights.len()
                        ),
                    ));
                }
                if let Some((row, w)) = self
                    .weights
                    .iter()
                    .enumerate()
                    .find(|(_, w)| w.len() != self.input_width)
                {
                    return Err(err(
                        "weights",
                        format!(
                            "row {row} has {} entries, predecessor width is {}",
                            w.len(),
                            self.input_width
                        ),
                    ));
                }
                check_bias(false)?;
            }
            LayerKind::Conv2D => {
                let sets = check_connectivity()?;
                if self.weights.len() != self.output_width
                    || self.weights.iter().zip(sets).any(|(w, s)| w.len() != s.len())
                {
                    return Err(err(
                        "weights",
                        "conv rows must align with connectivity sets".into(),
                    ));
                }
                check_bias(false)?;
            }
            LayerKind::MaxPool | LayerKind::MeanPool => {
                check_connectivity()?;
                check_bias(true)?;
            }
            LayerKind::BatchNorm => {
                let bn = self
                    .batch_norm
                    .as_ref()
                    .ok_or_else(|| err("bn", "batch norm parameters missing".into()))?;
                if self.input_width != self.output_width {
                    return Err(err("widths", "batch norm must preserve width".into()));
                }
                for (name, v) in [
                    ("bn.gamma", &bn.gamma),
                    ("bn.beta", &bn.beta),
                    ("bn.mean", &bn.mean),
                    ("bn.var", &bn.var),
                ] {
                    if v.len() != self.output_width {
                        return Err(err(
                            "bn",
                            format!("{name} has {} entries, expected {}", v.len(), self.output_width),
                        ));
                    }
                }
                if let Some(v) = bn.var.iter().find(|&&v| v.is_nan() || v <= 0.0) {
                    return Err(err("bn", format!("variance must be positive, got {v}")));
                }
            }
        }
        let finite = self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite());
        if !finite {
            return Err(err("weights", "non-finite parameter".into()));
        }
        Ok(())
    }
}

/// A strictly feed-forward network: layer `l` reads only layer `l - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGraph {
    pub name: String,
    pub version: String,
    pub input_width: usize,
    pub layers: Vec<Layer>,
    pub metadata: BTreeMap<String, String>,
}

impl ModelGraph {
    pub fn new(name: impl Into<String>, input_width: usize, layers: Vec<Layer>) -> Result<Self, ModelError> {
        let model = ModelGraph {
            name: name.into(),
            version: "1".into(),
            input_width,
            layers,
            metadata: BTreeMap::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.input_width == 0 {
            return Err(ModelError::Structure("input_width must be positive".into()));
        }
        let last = self
            .layers
            .last()
            .ok_or_else(|| ModelError::Structure("model has no layers".into()))?;
        let mut width = self.input_width;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i, width)?;
            if layer.kind == LayerKind::SoftmaxOutput && i + 1 != self.layers.len() {
                return Err(ModelError::Validation {
                    layer: i,
                    field: "kind",
                    message: "softmax_output must be the last layer".into(),
                });
            }
            width = layer.output_width;
        }
        let logit_output = last.kind == LayerKind::SoftmaxOutput
            || (last.kind == LayerKind::Dense && last.activation.is_identity());
        if !logit_output {
            return Err(ModelError::Validation {
                layer: self.layers.len() - 1,
                field: "kind",
                message: "last layer must be softmax_output or dense with identity activation".into(),
            });
        }
        Ok(())
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output_width)
    }

    /// Output widths of every layer.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.output_width).collect()
    }

    pub fn has_batch_norm(&self) -> bool {
        self.layers.iter().any(|l| l.kind == LayerKind::BatchNorm)
    }

    /// Accuracy recorded by whoever exported the model, if any.
    pub fn recorded_accuracy(&self) -> Option<f64> {
        self.metadata.get("reference_accuracy")?.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_two_one() -> Vec<Layer> {
        vec![
            Layer::dense(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.0, 0.0], ActivationKind::ReLu),
            Layer::dense(vec![vec![1.0, -1.0]], vec![0.5], ActivationKind::Identity),
        ]
    }

    #[test]
    fn widths_of_small_dense_model() {
        let m = ModelGraph::new("t", 2, two_two_one()).unwrap();
        assert_eq!(m.widths(), vec![2, 1]);
    }

    #[test]
    fn dense_row_length_must_match_predecessor() {
        let mut layers = two_two_one();
        layers[1].weights[0].push(7.0);
        layers[1].input_width = 2;
        let err = ModelGraph::new("t", 2, layers).unwrap_err();
        match err {
            ModelError::Validation { layer, field, .. } => {
                assert_eq!(layer, 1);
                assert_eq!(field, "weights");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn last_layer_must_emit_logits() {
        let layers = vec![Layer::dense(vec![vec![1.0]], vec![0.0], ActivationKind::ReLu)];
        assert!(ModelGraph::new("t", 1, layers).is_err());
    }

    #[test]
    fn leaky_slope_is_pinned() {
        let mut layers = two_two_one();
        layers[0].activation = ActivationKind::LeakyReLu { leak_slope: 0.2 };
        let err = ModelGraph::new("t", 2, layers).unwrap_err();
        assert!(matches!(err, ModelError::Validation { field: "leak_slope", .. }));
    }

    #[test]
    fn pool_connectivity_must_be_in_range() {
        let layers = vec![
            Layer::pool(LayerKind::MaxPool, 3, vec![vec![0, 1], vec![2, 3]]),
            Layer::dense(vec![vec![1.0, 1.0]], vec![0.0], ActivationKind::Identity),
        ];
        let err = ModelGraph::new("t", 3, layers).unwrap_err();
        assert!(matches!(err, ModelError::Validation { layer: 0, field: "connectivity", .. }));
    }

    #[test]
    fn batch_norm_variance_positive() {
        let bn = BatchNormParams {
            gamma: vec![1.0],
            beta: vec![0.0],
            mean: vec![0.0],
            var: vec![0.0],
        };
        let layers = vec![
            Layer::dense(vec![vec![1.0]], vec![0.0], ActivationKind::Identity),
            Layer::batch_norm(bn, ActivationKind::ReLu),
            Layer::dense(vec![vec![1.0]], vec![0.0], ActivationKind::Identity),
        ];
        assert!(ModelGraph::new("t", 1, layers).is_err());
    }

    #[test]
    fn leaky_relu_negative_branch() {
        let a = ActivationKind::leaky_relu();
        assert_eq!(a.apply(-2.0), -0.02);
        assert_eq!(a.apply(3.0), 3.0);
        assert_eq!(a.apply(0.0), 0.0);
    }
}

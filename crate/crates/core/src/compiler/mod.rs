//! Network-to-polynomial compilation.
//!
//! [`compile_nested`] produces a [`PolyProgram`]: a DAG in which every node
//! applies a univariate polynomial to an affine combination of earlier
//! values. Evaluating it touches each node exactly once. [`expand`]
//! substitutes the DAG bottom-up into one multivariate polynomial per output.

mod artifact;
mod expand;
mod pseudo;

use std::collections::HashMap;

use thiserror::Error;

use crate::approx::{approx_activation, ApproxError, ApproxSpec, FitReport, PolySqrtMax};
use crate::model::{argmax, ActivationKind, LayerKind, ModelError, ModelGraph};
use crate::polyalg::{ConversionConfig, PolyError, UniPoly};

pub use artifact::{load_program, program_from_json, program_to_json, save_program, write_compile_report, ProgramArtifact};
pub use expand::{estimate_expansion, expand, ExpandOptions, ExpandedNetworkPoly, ExpansionEstimate, SelfCheck};
pub use pseudo::insert_pseudo_units;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("layer {layer}: batch norm must be folded before compilation")]
    NotFolded { layer: usize },
    #[error("expected {expected} layer intervals, got {got}")]
    IntervalCount { expected: usize, got: usize },
    #[error("softmax output requires softmax mode `drop`")]
    Softmax,
    #[error(
        "expansion too large: degree bound {degree} (cap {degree_cap}), \
         term bound {terms:.3e} (cap {term_cap}); use nested mode"
    )]
    ExpansionTooLarge {
        degree: usize,
        degree_cap: usize,
        terms: f64,
        term_cap: usize,
    },
    #[error("expansion self-check failed: expanded {expanded} vs nested {nested} at output {output}")]
    SelfCheck {
        output: usize,
        expanded: f64,
        nested: f64,
    },
    #[error("input width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("layer {layer}: {source}")]
    Approx {
        layer: usize,
        #[source]
        source: ApproxError,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("program artifact: {0}")]
    Artifact(String),
}

impl CompileError {
    pub fn is_expansion_limit(&self) -> bool {
        match self {
            CompileError::ExpansionTooLarge { .. } => true,
            CompileError::Poly(p) => p.is_expansion_limit(),
            _ => false,
        }
    }
}

/// What the compiled program does with a softmax output layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SoftmaxMode {
    /// Outputs are the logits; classification is their argmax.
    #[default]
    DropArgmax,
    /// The model must end in plain logits.
    None,
}

impl SoftmaxMode {
    pub fn name(&self) -> &'static str {
        match self {
            SoftmaxMode::DropArgmax => "drop",
            SoftmaxMode::None => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "drop" | "drop_argmax" => Some(SoftmaxMode::DropArgmax),
            "none" => Some(SoftmaxMode::None),
            _ => None,
        }
    }
}

/// Lowering of max pooling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolMode {
    /// Mean over the window.
    Mean,
    /// Chained pairwise max with a polynomial square root.
    Eq2,
}

impl PoolMode {
    pub fn name(&self) -> &'static str {
        match self {
            PoolMode::Mean => "mean",
            PoolMode::Eq2 => "eq2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mean" => Some(PoolMode::Mean),
            "eq2" => Some(PoolMode::Eq2),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CompileOptions {
    pub degree: usize,
    pub sqrt_degree: usize,
    /// `None` lowers max pooling to the mean only for layers trained that way.
    pub pool_mode: Option<PoolMode>,
    pub softmax_mode: SoftmaxMode,
    pub conversion: ConversionConfig,
}

impl CompileOptions {
    pub fn with_degree(degree: usize) -> Self {
        CompileOptions {
            degree,
            sqrt_degree: ApproxSpec::DEFAULT_SQRT_DEGREE,
            pool_mode: None,
            softmax_mode: SoftmaxMode::DropArgmax,
            conversion: ConversionConfig::default(),
        }
    }
}

/// Source of one affine-combination operand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Input(usize),
    Node(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolyNode {
    pub id: usize,
    pub layer: usize,
    /// Unit index within the layer; `None` for auxiliary max-pool nodes.
    pub unit: Option<usize>,
    pub inputs: Vec<(Operand, f64)>,
    pub bias: f64,
    pub activation: UniPoly,
    pub is_pseudo: bool,
}

impl PolyNode {
    pub fn is_aux(&self) -> bool {
        self.unit.is_none()
    }
}

/// Fit summary for one approximated function of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    pub layer: usize,
    pub kind: String,
    pub degree: usize,
    pub fit: FitReport,
    pub units: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolyProgram {
    pub input_width: usize,
    /// Topologically ordered: operands always reference earlier nodes.
    pub nodes: Vec<PolyNode>,
    pub outputs: Vec<usize>,
    pub softmax_mode: SoftmaxMode,
    pub degree: usize,
    pub intervals: Vec<f64>,
    pub reports: Vec<LayerReport>,
}

/// Arithmetic performed by one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    pub mul: u64,
    pub add: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.mul + self.add
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestedEval {
    pub outputs: Vec<f64>,
    pub class: usize,
    /// How many times each node was evaluated.
    pub eval_counts: Vec<u32>,
    pub ops: OpCount,
}

impl PolyProgram {
    pub fn check_input(&self, x: &[f64]) -> Result<(), CompileError> {
        if x.len() != self.input_width {
            Err(CompileError::WidthMismatch {
                expected: self.input_width,
                actual: x.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Node values in one pass, without instrumentation.
    pub fn node_values(&self, x: &[f64]) -> Vec<f64> {
        let mut values = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut acc = node.bias;
            for &(op, w) in &node.inputs {
                let v = match op {
                    Operand::Input(i) => x[i],
                    Operand::Node(j) => values[j],
                };
                acc += w * v;
            }
            let out = if node.activation.is_identity() {
                acc
            } else {
                node.activation.eval(acc)
            };
            values.push(out);
        }
        values
    }

    /// Output values only.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let values = self.node_values(x);
        self.outputs.iter().map(|&i| values[i]).collect()
    }

    pub fn pseudo_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_pseudo).count()
    }

    /// Number of non-auxiliary nodes per layer.
    pub fn layer_widths(&self) -> Vec<usize> {
        let layers = self.nodes.iter().map(|n| n.layer + 1).max().unwrap_or(0);
        let mut widths = vec![0; layers];
        for n in self.nodes.iter().filter(|n| !n.is_aux()) {
            widths[n.layer] += 1;
        }
        widths
    }
}

/// Memoized single pass: every node is evaluated exactly once.
pub fn eval_nested(program: &PolyProgram, x: &[f64]) -> Result<NestedEval, CompileError> {
    program.check_input(x)?;
    let mut values: Vec<f64> = Vec::with_capacity(program.nodes.len());
    let mut eval_counts = vec![0u32; program.nodes.len()];
    let mut ops = OpCount::default();
    for node in &program.nodes {
        let mut acc = node.bias;
        for &(op, w) in &node.inputs {
            let v = match op {
                Operand::Input(i) => x[i],
                Operand::Node(j) => values[j],
            };
            acc += w * v;
        }
        ops.mul += node.inputs.len() as u64;
        ops.add += node.inputs.len() as u64;
        let out = if node.activation.is_identity() {
            acc
        } else {
            let d = node.activation.degree() as u64;
            ops.mul += d;
            ops.add += d;
            node.activation.eval(acc)
        };
        eval_counts[node.id] += 1;
        values.push(out);
    }
    let outputs: Vec<f64> = program.outputs.iter().map(|&i| values[i]).collect();
    let class = argmax(&outputs);
    Ok(NestedEval {
        outputs,
        class,
        eval_counts,
        ops,
    })
}

struct Builder {
    nodes: Vec<PolyNode>,
}

impl Builder {
    fn push(
        &mut self,
        layer: usize,
        unit: Option<usize>,
        inputs: Vec<(Operand, f64)>,
        bias: f64,
        activation: UniPoly,
    ) -> Operand {
        let id = self.nodes.len();
        self.nodes.push(PolyNode {
            id,
            layer,
            unit,
            inputs,
            bias,
            activation,
            is_pseudo: false,
        });
        Operand::Node(id)
    }
}

/// Compiles a batch-norm-free model into a nested polynomial program.
///
/// `intervals[l]` is the half-width of the approximation interval of layer `l`.
pub fn compile_nested(
    model: &ModelGraph,
    intervals: &[f64],
    options: &CompileOptions,
) -> Result<PolyProgram, CompileError> {
    if let Some(l) = model.layers.iter().position(|l| l.kind == LayerKind::BatchNorm) {
        return Err(CompileError::NotFolded { layer: l });
    }
    if intervals.len() != model.layers.len() {
        return Err(CompileError::IntervalCount {
            expected: model.layers.len(),
            got: intervals.len(),
        });
    }
    let last = model.layers.last().expect("validated model");
    if last.kind == LayerKind::SoftmaxOutput && options.softmax_mode == SoftmaxMode::None {
        return Err(CompileError::Softmax);
    }

    let mut builder = Builder { nodes: Vec::new() };
    let mut reports = Vec::new();
    let mut cache: HashMap<(&'static str, u64), (UniPoly, FitReport)> = HashMap::new();
    let mut prev: Vec<Operand> = (0..model.input_width).map(Operand::Input).collect();

    for (l, layer) in model.layers.iter().enumerate() {
        let radius = intervals[l];
        let activation = if layer.kind == LayerKind::SoftmaxOutput {
            ActivationKind::Identity
        } else {
            layer.activation
        };
        let (act_poly, act_fit) = if activation.is_identity() {
            (UniPoly::identity(), FitReport::exact(-radius, radius))
        } else {
            let key = (activation.name(), radius.to_bits());
            if let Some(hit) = cache.get(&key) {
                hit.clone()
            } else {
                let spec = ApproxSpec {
                    sqrt_degree: options.sqrt_degree,
                    ..ApproxSpec::symmetric(options.degree, radius)
                };
                let a = approx_activation(activation, &spec, &options.conversion)
                    .map_err(|source| CompileError::Approx { layer: l, source })?;
                let entry = (a.poly, a.monomial_fit);
                cache.insert(key, entry.clone());
                entry
            }
        };
        reports.push(LayerReport {
            layer: l,
            kind: activation.name().into(),
            degree: if activation.is_identity() { 1 } else { options.degree },
            fit: act_fit,
            units: layer.output_width,
        });

        let mut current = Vec::with_capacity(layer.output_width);
        match layer.kind {
            LayerKind::Dense | LayerKind::SoftmaxOutput => {
                for (j, row) in layer.weights.iter().enumerate() {
                    let inputs = prev.iter().copied().zip(row.iter().copied()).collect();
                    current.push(builder.push(l, Some(j), inputs, bias_of(layer, j), act_poly.clone()));
                }
            }
            LayerKind::Conv2D => {
                let sets = layer.connectivity.as_ref().expect("validated conv layer");
                for (j, (row, set)) in layer.weights.iter().zip(sets).enumerate() {
                    let inputs = set.iter().map(|&i| prev[i]).zip(row.iter().copied()).collect();
                    current.push(builder.push(l, Some(j), inputs, bias_of(layer, j), act_poly.clone()));
                }
            }
            LayerKind::MeanPool | LayerKind::MaxPool => {
                let sets = layer.connectivity.as_ref().expect("validated pool layer");
                let mode = if layer.kind == LayerKind::MeanPool {
                    PoolMode::Mean
                } else {
                    options.pool_mode.unwrap_or(if layer.mean_replaced {
                        PoolMode::Mean
                    } else {
                        PoolMode::Eq2
                    })
                };
                match mode {
                    PoolMode::Mean => {
                        for (j, set) in sets.iter().enumerate() {
                            let w = 1.0 / set.len() as f64;
                            let inputs = set.iter().map(|&i| (prev[i], w)).collect();
                            current.push(builder.push(l, Some(j), inputs, bias_of(layer, j), act_poly.clone()));
                        }
                    }
                    PoolMode::Eq2 => {
                        let max = PolySqrtMax::fit(radius, options.sqrt_degree, &options.conversion)
                            .map_err(|source| CompileError::Approx { layer: l, source })?;
                        reports.push(LayerReport {
                            layer: l,
                            kind: "sqrt".into(),
                            degree: options.sqrt_degree,
                            fit: max.sqrt_fit,
                            units: layer.output_width,
                        });
                        let diff = max.difference_poly();
                        for (j, set) in sets.iter().enumerate() {
                            let (&last_in, rest) = set.split_last().expect("validated non-empty window");
                            let mut acc = prev[last_in];
                            if rest.is_empty() {
                                current.push(builder.push(
                                    l,
                                    Some(j),
                                    vec![(acc, 1.0)],
                                    bias_of(layer, j),
                                    act_poly.clone(),
                                ));
                                continue;
                            }
                            for (step, &i) in rest.iter().rev().enumerate() {
                                let a = prev[i];
                                let g = builder.push(l, None, vec![(a, 1.0), (acc, -1.0)], 0.0, diff.clone());
                                let inputs = vec![(a, 0.5), (acc, 0.5), (g, 1.0)];
                                acc = if step + 1 == rest.len() {
                                    builder.push(l, Some(j), inputs, bias_of(layer, j), act_poly.clone())
                                } else {
                                    builder.push(l, None, inputs, 0.0, UniPoly::identity())
                                };
                            }
                            current.push(acc);
                        }
                    }
                }
            }
            LayerKind::BatchNorm => unreachable!("rejected above"),
        }
        prev = current;
    }

    let outputs: Vec<usize> = prev
        .iter()
        .map(|op| match op {
            Operand::Node(id) => *id,
            Operand::Input(_) => unreachable!("every layer creates nodes"),
        })
        .collect();
    let mut nodes = builder.nodes;
    mark_pseudo_units(&mut nodes, &outputs);

    Ok(PolyProgram {
        input_width: model.input_width,
        nodes,
        outputs,
        softmax_mode: options.softmax_mode,
        degree: options.degree,
        intervals: intervals.to_vec(),
        reports,
    })
}

fn bias_of(layer: &crate::model::Layer, unit: usize) -> f64 {
    layer.bias.get(unit).copied().unwrap_or(0.0)
}

/// Flags hidden units whose every outgoing weight is exactly zero.
fn mark_pseudo_units(nodes: &mut [PolyNode], outputs: &[usize]) {
    let mut live = vec![false; nodes.len()];
    for node in nodes.iter() {
        for &(op, w) in &node.inputs {
            if let Operand::Node(j) = op {
                if w != 0.0 {
                    live[j] = true;
                }
            }
        }
    }
    for &o in outputs {
        live[o] = true;
    }
    for node in nodes.iter_mut() {
        node.is_pseudo = !node.is_aux() && !live[node.id];
    }
}

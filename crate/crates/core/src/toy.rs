//! Small random networks for property tests and the MPC demo.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::approx::calibrate_interval;
use crate::model::{ActivationKind, Dataset, Layer, ModelGraph};

#[derive(Clone, Copy, Debug)]
pub struct ToyConfig {
    pub max_inputs: usize,
    /// Including the linear output layer.
    pub max_layers: usize,
    pub max_width: usize,
    pub max_outputs: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            max_inputs: 4,
            max_layers: 3,
            max_width: 3,
            max_outputs: 3,
        }
    }
}

const ACTIVATIONS: [ActivationKind; 4] = [
    ActivationKind::ReLu,
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
    ActivationKind::LeakyReLu {
        leak_slope: crate::model::LEAK_SLOPE,
    },
];

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// Dense network with random widths, activations and weights in `[-1, 1]`,
/// ending in a linear output layer.
pub fn random_toy_network(rng: &mut impl Rng, config: &ToyConfig) -> ModelGraph {
    let inputs = rng.random_range(1..=config.max_inputs);
    let hidden = rng.random_range(0..config.max_layers);
    let mut width = inputs;
    let mut layers = Vec::with_capacity(hidden + 1);
    for _ in 0..hidden {
        let out = rng.random_range(1..=config.max_width);
        let act = *ACTIVATIONS.choose(rng).expect("non-empty");
        let bias = (0..out).map(|_| rng.random_range(-0.5..=0.5)).collect();
        layers.push(Layer::dense(random_matrix(rng, out, width), bias, act));
        width = out;
    }
    let outputs = rng.random_range(1..=config.max_outputs);
    let bias = (0..outputs).map(|_| rng.random_range(-0.5..=0.5)).collect();
    layers.push(Layer::dense(random_matrix(rng, outputs, width), bias, ActivationKind::Identity));
    ModelGraph::new("toy", inputs, layers).expect("generated network is valid")
}

/// Uniform inputs in `[lo, hi]^width`.
pub fn random_inputs(rng: &mut impl Rng, count: usize, width: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..width).map(|_| rng.random_range(lo..=hi)).collect())
        .collect()
}

/// Interval radii calibrated on uniform inputs in `[-1, 1]`.
pub fn toy_intervals(model: &ModelGraph, rng: &mut impl Rng) -> Vec<f64> {
    let inputs = random_inputs(rng, 200, model.input_width, -1.0, 1.0);
    let labels = vec![0; inputs.len()];
    let data = Dataset::new(inputs, labels).expect("consistent widths");
    calibrate_interval(model, &data, 100.0)
        .expect("non-empty sample")
        .into_iter()
        .map(|i| i.radius)
        .collect()
}

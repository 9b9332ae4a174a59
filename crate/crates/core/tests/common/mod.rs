#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use polydnn::compiler::{compile_nested, expand, CompileOptions, ExpandOptions, ExpandedNetworkPoly};
use polydnn::model::{load_idx, load_model, ActivationKind, Dataset, Layer, ModelGraph};
use polydnn::toy::{random_toy_network, toy_intervals, ToyConfig};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny").join(name)
}

pub fn fixture() -> (ModelGraph, Dataset) {
    let model = load_model(fixture_path("model.json")).expect("fixture model loads");
    let data = load_idx(fixture_path("images.idx"), fixture_path("labels.idx")).expect("fixture data loads");
    (model, data)
}

/// A random toy network expanded at `degree`, plus the RNG for drawing inputs.
pub fn toy_expanded(seed: u64, degree: usize) -> (ModelGraph, ExpandedNetworkPoly, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_toy_network(&mut rng, &ToyConfig::default());
    let intervals = toy_intervals(&model, &mut rng);
    let program = compile_nested(&model, &intervals, &CompileOptions::with_degree(degree)).expect("toy compiles");
    let poly = expand(&program, &ExpandOptions::default()).expect("toy expands");
    (model, poly, rng)
}

/// One input, one hidden layer approximated at `degree`, a few linear outputs.
pub fn univariate_expanded(seed: u64, degree: usize) -> ExpandedNetworkPoly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = rng.random_range(1..=3);
    let outputs = rng.random_range(1..=3);
    let acts = [ActivationKind::ReLu, ActivationKind::Sigmoid, ActivationKind::Tanh];
    let act = acts[rng.random_range(0..acts.len())];
    let w1 = (0..hidden).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
    let b1 = (0..hidden).map(|_| rng.random_range(-0.5..0.5)).collect();
    let w2 = (0..outputs)
        .map(|_| (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let b2 = (0..outputs).map(|_| rng.random_range(-0.5..0.5)).collect();
    let model = ModelGraph::new(
        "univariate",
        1,
        vec![
            Layer::dense(w1, b1, act),
            Layer::dense(w2, b2, ActivationKind::Identity),
        ],
    )
    .expect("valid");
    let program = compile_nested(&model, &[2.0, 2.0], &CompileOptions::with_degree(degree)).expect("compiles");
    expand(&program, &ExpandOptions::default()).expect("expands")
}

/// Pearson statistic of `counts` against a uniform distribution and the
/// critical value at significance `alpha`.
pub fn chi_square_uniform(counts: &[u64], alpha: f64) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    (stat, dist.inverse_cdf(1.0 - alpha))
}

/// Top `bits` bits of a field element in a `field_bits`-bit field.
pub fn bucket(value: u128, field_bits: u32, bits: u32) -> usize {
    (value >> (field_bits - bits)) as usize
}

/// Chebyshev interpolant through `degree + 1` first-kind nodes, evaluated
/// with the barycentric formula rather than a Chebyshev series.
pub fn barycentric_interpolant(f: impl Fn(f64) -> f64, degree: usize, lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let n = degree + 1;
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let theta: Vec<f64> = (0..n).map(|j| std::f64::consts::PI * (j as f64 + 0.5) / n as f64).collect();
    let nodes: Vec<f64> = theta.iter().map(|t| mid + half * t.cos()).collect();
    let values: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
    let weights: Vec<f64> = theta
        .iter()
        .enumerate()
        .map(|(j, t)| if j % 2 == 0 { t.sin() } else { -t.sin() })
        .collect();
    move |x| {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            let d = x - nodes[j];
            if d == 0.0 {
                return values[j];
            }
            num += weights[j] * values[j] / d;
            den += weights[j] / d;
        }
        num / den
    }
}

/// Largest `|f - g|` over `points` evenly spaced points of `[lo, hi]`.
pub fn grid_max_error(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .map(|x| (f(x) - g(x)).abs())
        .fold(0.0, f64::max)
}

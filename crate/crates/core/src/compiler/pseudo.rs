use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Layer, LayerKind, ModelError, ModelGraph};

/// Adds `counts[l]` pseudo-units to each hidden layer `l`.
///
/// Pseudo-units get random incoming weights and biases in `[-1, 1]` (pooling
/// pseudo-units get a random window) and are placed at random positions
/// within the layer. Every weight leaving them is exactly zero, so the
/// network function is unchanged. Batch-norm layers directly after an
/// augmented layer pass pseudo-units through with identity statistics.
///
/// `counts` has one entry per layer; entries for the output layer and for
/// batch-norm layers must be zero.
pub fn insert_pseudo_units(model: &ModelGraph, counts: &[usize], seed: u64) -> Result<ModelGraph, ModelError> {
    if counts.len() != model.layers.len() {
        return Err(ModelError::Structure(format!(
            "expected {} pseudo-unit counts, got {}",
            model.layers.len(),
            counts.len()
        )));
    }
    let last = model.layers.len() - 1;
    for (l, &n) in counts.iter().enumerate() {
        if n > 0 && (l == last || model.layers[l].kind == LayerKind::BatchNorm) {
            return Err(ModelError::Unsupported {
                layer: l,
                message: "pseudo-units can only be added to hidden non-normalization layers".into(),
            });
        }
    }
    if counts.iter().all(|&n| n == 0) {
        return Ok(model.clone());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = model.layers.clone();
    // which inputs of each layer are pseudo-units of an earlier layer
    let mut pseudo_inputs: Vec<Option<Vec<bool>>> = vec![None; layers.len()];
    for l in 0..layers.len() {
        let n = counts[l];
        if n == 0 {
            continue;
        }
        let old_width = layers[l].output_width;
        let new_width = old_width + n;
        let mut pseudo_slots: Vec<usize> = sample(&mut rng, new_width, n).into_vec();
        pseudo_slots.sort_unstable();
        let mut is_pseudo = vec![false; new_width];
        for &s in &pseudo_slots {
            is_pseudo[s] = true;
        }
        // old unit index -> new position
        let remap: Vec<usize> = (0..new_width).filter(|&s| !is_pseudo[s]).collect();

        let upstream = pseudo_inputs[l].take().unwrap_or_else(|| vec![false; layers[l].input_width]);
        augment_layer(&mut layers[l], &is_pseudo, &upstream, &mut rng);
        let mut next = l + 1;
        while layers[next].kind == LayerKind::BatchNorm {
            augment_batch_norm(&mut layers[next], &is_pseudo);
            next += 1;
        }
        widen_successor(&mut layers[next], &is_pseudo, &remap);
        pseudo_inputs[next] = Some(is_pseudo);
    }

    let mut out = ModelGraph::new(model.name.clone(), model.input_width, layers)?;
    out.version = model.version.clone();
    out.metadata = model.metadata.clone();
    Ok(out)
}

/// Rebuilds per-unit vectors with pseudo entries spliced in at `is_pseudo` slots.
fn splice<T>(old: Vec<T>, is_pseudo: &[bool], mut fresh: impl FnMut() -> T) -> Vec<T> {
    let mut old = old.into_iter();
    is_pseudo
        .iter()
        .map(|&p| if p { fresh() } else { old.next().expect("enough real units") })
        .collect()
}

/// New units read only real inputs: a pseudo-unit feeding another one would
/// give it a nonzero outgoing weight.
fn augment_layer(layer: &mut Layer, is_pseudo: &[bool], upstream: &[bool], rng: &mut ChaCha8Rng) {
    let real_inputs: Vec<usize> = (0..layer.input_width).filter(|&i| !upstream[i]).collect();
    match layer.kind {
        LayerKind::Dense => {
            layer.weights = splice(std::mem::take(&mut layer.weights), is_pseudo, || {
                upstream
                    .iter()
                    .map(|&p| if p { 0.0 } else { rng.random_range(-1.0..=1.0) })
                    .collect()
            });
        }
        LayerKind::Conv2D | LayerKind::MaxPool | LayerKind::MeanPool => {
            let sets = layer.connectivity.take().expect("validated layer");
            let window = sets[0].len().min(real_inputs.len());
            let mut new_sets = Vec::with_capacity(is_pseudo.len());
            let mut new_weights = Vec::with_capacity(is_pseudo.len());
            let mut old_sets = sets.into_iter();
            let mut old_weights = std::mem::take(&mut layer.weights).into_iter();
            for &p in is_pseudo {
                if p {
                    let mut set: Vec<usize> = sample(rng, real_inputs.len(), window)
                        .into_iter()
                        .map(|i| real_inputs[i])
                        .collect();
                    set.sort_unstable();
                    if layer.kind == LayerKind::Conv2D {
                        new_weights.push((0..window).map(|_| rng.random_range(-1.0..=1.0)).collect());
                    }
                    new_sets.push(set);
                } else {
                    new_sets.push(old_sets.next().expect("enough real units"));
                    if layer.kind == LayerKind::Conv2D {
                        new_weights.push(old_weights.next().expect("enough real units"));
                    }
                }
            }
            layer.connectivity = Some(new_sets);
            layer.weights = new_weights;
        }
        LayerKind::SoftmaxOutput | LayerKind::BatchNorm => unreachable!("rejected by the caller"),
    }
    if !layer.bias.is_empty() || layer.kind.is_dense() || layer.kind == LayerKind::Conv2D {
        layer.bias = splice(std::mem::take(&mut layer.bias), is_pseudo, || rng.random_range(-1.0..=1.0));
    }
    layer.output_width = is_pseudo.len();
}

fn augment_batch_norm(layer: &mut Layer, is_pseudo: &[bool]) {
    let bn = layer.batch_norm.as_mut().expect("batch norm layer");
    bn.gamma = splice(std::mem::take(&mut bn.gamma), is_pseudo, || 1.0);
    bn.beta = splice(std::mem::take(&mut bn.beta), is_pseudo, || 0.0);
    bn.mean = splice(std::mem::take(&mut bn.mean), is_pseudo, || 0.0);
    bn.var = splice(std::mem::take(&mut bn.var), is_pseudo, || 1.0);
    layer.input_width = is_pseudo.len();
    layer.output_width = is_pseudo.len();
}

fn widen_successor(layer: &mut Layer, is_pseudo: &[bool], remap: &[usize]) {
    match layer.kind {
        LayerKind::Dense | LayerKind::SoftmaxOutput => {
            for row in &mut layer.weights {
                *row = splice(std::mem::take(row), is_pseudo, || 0.0);
            }
        }
        LayerKind::Conv2D | LayerKind::MaxPool | LayerKind::MeanPool => {
            for set in layer.connectivity.as_mut().expect("validated layer") {
                for i in set.iter_mut() {
                    *i = remap[*i];
                }
            }
        }
        LayerKind::BatchNorm => unreachable!("skipped by the caller"),
    }
    layer.input_width = is_pseudo.len();
}

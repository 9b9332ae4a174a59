use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::argmax;
use crate::polyalg::{PolyLimits, SparseMultiPoly};

use super::{eval_nested, CompileError, Operand, PolyProgram, SoftmaxMode};

/// Post-expansion comparison against [`eval_nested`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelfCheck {
    pub samples: usize,
    /// Accepts `|expanded - nested| <= tolerance * (1 + |nested|)`.
    pub tolerance: f64,
    /// Inputs are drawn uniformly from `[lo, hi]` in every coordinate.
    pub input_range: (f64, f64),
    pub seed: u64,
}

impl Default for SelfCheck {
    fn default() -> Self {
        SelfCheck {
            samples: 100,
            tolerance: 1e-6,
            input_range: (-1.0, 1.0),
            seed: 0x5e1f,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExpandOptions {
    pub limits: PolyLimits,
    pub self_check: Option<SelfCheck>,
}

/// The whole network as one polynomial per output over the raw inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandedNetworkPoly {
    pub outputs: Vec<SparseMultiPoly>,
    pub total_degree: usize,
    pub term_count: usize,
    pub softmax_mode: SoftmaxMode,
}

impl ExpandedNetworkPoly {
    pub fn new(outputs: Vec<SparseMultiPoly>, softmax_mode: SoftmaxMode) -> Self {
        let total_degree = outputs.iter().map(|p| p.total_degree()).max().unwrap_or(0);
        let term_count = outputs.iter().map(|p| p.len()).sum();
        ExpandedNetworkPoly {
            outputs,
            total_degree,
            term_count,
            softmax_mode,
        }
    }

    pub fn input_width(&self) -> usize {
        self.outputs.first().map_or(0, |p| p.num_vars())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|p| p.eval(x)).collect()
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        argmax(&self.eval(x))
    }

    /// Copy without exact-zero coefficients.
    pub fn pruned(&self) -> Self {
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                SparseMultiPoly::from_terms(
                    p.num_vars(),
                    p.terms().filter(|(_, c)| *c != 0.0).map(|(e, c)| (e.clone(), c)),
                )
                .expect("subset of a valid polynomial")
            })
            .collect();
        ExpandedNetworkPoly::new(outputs, self.softmax_mode)
    }
}

/// Upper bounds computed before any polynomial is built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionEstimate {
    pub degree: usize,
    /// `C(n + D, D)`: the number of monomials of degree at most `D` in `n` variables.
    pub terms: f64,
}

fn binomial_bound(n: usize, d: usize) -> f64 {
    (1..=n.min(d)).fold(1.0, |acc, i| acc * (n.max(d) + i) as f64 / i as f64)
}

pub fn estimate_expansion(program: &PolyProgram) -> ExpansionEstimate {
    let mut degrees = vec![0usize; program.nodes.len()];
    for node in &program.nodes {
        let inner = node
            .inputs
            .iter()
            .filter(|(_, w)| *w != 0.0)
            .map(|(op, _)| match op {
                Operand::Input(_) => 1,
                Operand::Node(j) => degrees[*j],
            })
            .max()
            .unwrap_or(0);
        degrees[node.id] = inner.saturating_mul(node.activation.degree());
    }
    let degree = program.outputs.iter().map(|&o| degrees[o]).max().unwrap_or(0);
    ExpansionEstimate {
        degree,
        terms: binomial_bound(program.input_width, degree) * program.outputs.len() as f64,
    }
}

/// Substitutes the program bottom-up into one polynomial per output.
pub fn expand(program: &PolyProgram, options: &ExpandOptions) -> Result<ExpandedNetworkPoly, CompileError> {
    let limits = &options.limits;
    let estimate = estimate_expansion(program);
    if estimate.degree > limits.max_total_degree || estimate.terms > limits.max_terms as f64 {
        return Err(CompileError::ExpansionTooLarge {
            degree: estimate.degree,
            degree_cap: limits.max_total_degree,
            terms: estimate.terms,
            term_cap: limits.max_terms,
        });
    }

    let n = program.input_width;
    let mut polys: Vec<SparseMultiPoly> = Vec::with_capacity(program.nodes.len());
    for node in &program.nodes {
        let mut affine = SparseMultiPoly::constant(n, node.bias);
        for &(op, w) in &node.inputs {
            if w == 0.0 {
                continue;
            }
            match op {
                Operand::Input(i) => affine.add_scaled(&SparseMultiPoly::var(n, i), w, limits)?,
                Operand::Node(j) => affine.add_scaled(&polys[j], w, limits)?,
            }
        }
        let p = if node.activation.is_identity() {
            affine
        } else {
            affine.compose_into(&node.activation, limits)?
        };
        polys.push(p);
    }
    let outputs = program.outputs.iter().map(|&o| polys[o].clone()).collect();
    let expanded = ExpandedNetworkPoly::new(outputs, program.softmax_mode);

    if let Some(check) = &options.self_check {
        self_check(program, &expanded, check)?;
    }
    Ok(expanded)
}

fn self_check(program: &PolyProgram, expanded: &ExpandedNetworkPoly, check: &SelfCheck) -> Result<(), CompileError> {
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let (lo, hi) = check.input_range;
    for _ in 0..check.samples {
        let x: Vec<f64> = (0..program.input_width).map(|_| rng.random_range(lo..=hi)).collect();
        let nested = eval_nested(program, &x)?.outputs;
        for (output, (e, v)) in expanded.eval(&x).into_iter().zip(nested).enumerate() {
            if (e - v).abs().is_nan() || (e - v).abs() > check.tolerance * (1.0 + v.abs()) {
                return Err(CompileError::SelfCheck {
                    output,
                    expanded: e,
                    nested: v,
                });
            }
        }
    }
    Ok(())
}

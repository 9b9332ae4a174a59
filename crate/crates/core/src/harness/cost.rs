use std::io::Write;
use std::time::Instant;

use crate::compiler::{compile_nested, eval_nested, CompileOptions, OpCount};
use crate::model::{LayerKind, ModelGraph};
use crate::{Error, Result};

/// Arithmetic per inference of the nested program at one degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostRow {
    pub degree: usize,
    pub ops: OpCount,
    /// Mean wall time of one nested evaluation.
    pub nanos_per_inference: f64,
}

/// Counted operations of the float forward pass, with one comparison per
/// nonlinear activation.
pub fn reference_cost(model: &ModelGraph) -> OpCount {
    let mut ops = OpCount::default();
    for layer in &model.layers {
        for unit in 0..layer.output_width {
            let fan_in = layer.inputs_of(unit).len() as u64;
            match layer.kind {
                LayerKind::Dense | LayerKind::Conv2D | LayerKind::SoftmaxOutput => {
                    ops.mul += fan_in;
                    ops.add += fan_in;
                }
                LayerKind::MaxPool | LayerKind::MeanPool => ops.add += fan_in,
                LayerKind::BatchNorm => {
                    ops.mul += 2;
                    ops.add += 2;
                }
            }
            if !layer.activation.is_identity() {
                ops.add += 1;
            }
        }
    }
    ops
}

/// Compiles at every degree and counts the operations of one evaluation.
///
/// Counts are exact; `timing_reps` evaluations on a zero input give the
/// wall-time column (0 skips timing).
pub fn cost_profile(
    folded: &ModelGraph,
    intervals: &[f64],
    degrees: &[usize],
    options: &CompileOptions,
    timing_reps: usize,
) -> Result<Vec<CostRow>> {
    let x = vec![0.0; folded.input_width];
    degrees
        .iter()
        .map(|&degree| {
            let program = compile_nested(folded, intervals, &CompileOptions { degree, ..*options })?;
            let ops = eval_nested(&program, &x)?.ops;
            let nanos_per_inference = if timing_reps == 0 {
                0.0
            } else {
                let start = Instant::now();
                for _ in 0..timing_reps {
                    std::hint::black_box(program.eval(std::hint::black_box(&x)));
                }
                start.elapsed().as_nanos() as f64 / timing_reps as f64
            };
            Ok(CostRow {
                degree,
                ops,
                nanos_per_inference,
            })
        })
        .collect()
}

/// Least-squares line and its coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { slope, intercept, r2 }
}

/// Columns: `degree,mul,add,total,ns_per_inference`.
pub fn write_cost_csv(out: impl Write, rows: &[CostRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["degree", "mul", "add", "total", "ns_per_inference"])?;
    for r in rows {
        w.write_record([
            r.degree.to_string(),
            r.ops.mul.to_string(),
            r.ops.add.to_string(),
            r.ops.total().to_string(),
            format!("{:.1}", r.nanos_per_inference),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

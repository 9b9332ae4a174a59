use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::approx::calibrate_interval;
use crate::compiler::{compile_nested, CompileOptions};
use crate::model::{argmax, fold_batch_norm, reference_infer, Dataset, ModelGraph};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub degrees: Vec<usize>,
    pub runs: usize,
    pub samples_per_run: usize,
    pub seed: u64,
    /// Draw samples with replacement when the dataset is too small for disjoint runs.
    pub with_replacement: bool,
    /// Calibration percentile of activation-input magnitudes.
    pub percentile: f64,
    /// Everything but the degree, which the sweep sets.
    pub compile: CompileOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            degrees: vec![2, 4, 8, 16, 24, 30, 32],
            runs: 10,
            samples_per_run: 500,
            seed: 0,
            with_replacement: false,
            percentile: 99.5,
            compile: CompileOptions::with_degree(1),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.degrees.is_empty() || self.degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("degrees must be non-empty and strictly ascending".into()));
        }
        if self.degrees[0] == 0 {
            return Err(Error::Config("degrees must be at least 1".into()));
        }
        if self.runs == 0 || self.samples_per_run == 0 {
            return Err(Error::Config("runs and samples per run must be at least 1".into()));
        }
        if dataset_len == 0 {
            return Err(Error::Config("dataset is empty".into()));
        }
        if !self.with_replacement && dataset_len < self.runs * self.samples_per_run {
            return Err(Error::Config(format!(
                "{} runs of {} samples need {} examples, dataset has {dataset_len}; \
                 allow sampling with replacement",
                self.runs,
                self.samples_per_run,
                self.runs * self.samples_per_run
            )));
        }
        Ok(())
    }
}

/// Mean and spread over runs for one degree.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub degree: usize,
    /// Fraction of samples whose polynomial class equals the reference class.
    pub agreement_mean: f64,
    pub agreement_std: f64,
    /// `|poly - reference| / |reference|` on the logit vector, averaged per run.
    pub rel_diff_mean: f64,
    pub rel_diff_std: f64,
    /// Polynomial accuracy against the dataset labels.
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Reference accuracy over every sampled example.
    pub reference_accuracy: f64,
    pub intervals: Vec<f64>,
}

impl SweepReport {
    pub fn row(&self, degree: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.degree == degree)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn l2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn draw_runs(config: &SweepConfig, n: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if n >= config.runs * config.samples_per_run {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
            .chunks(config.samples_per_run)
            .take(config.runs)
            .map(<[usize]>::to_vec)
            .collect()
    } else {
        (0..config.runs)
            .map(|_| (0..config.samples_per_run).map(|_| rng.random_range(0..n)).collect())
            .collect()
    }
}

/// Recompiles the model at every degree and compares it with the float
/// reference on the same sampled examples.
///
/// Intervals are calibrated once on `calibration`; all degrees see identical
/// samples, so differences between rows come from the degree alone.
pub fn run_sweep(
    model: &ModelGraph,
    calibration: &Dataset,
    data: &Dataset,
    config: &SweepConfig,
) -> Result<SweepReport> {
    config.validate(data.len())?;
    let folded = fold_batch_norm(model)?;
    let intervals: Vec<f64> = calibrate_interval(&folded, calibration, config.percentile)?
        .into_iter()
        .map(|i| i.radius)
        .collect();
    let runs = draw_runs(config, data.len());

    let mut used: Vec<usize> = runs.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let mut reference = vec![None; data.len()];
    for &i in &used {
        reference[i] = Some(reference_infer(model, &data.inputs[i])?);
    }
    let ref_correct = runs
        .iter()
        .flatten()
        .filter(|&&i| reference[i].as_ref().expect("computed").class == data.labels[i])
        .count();
    let reference_accuracy = ref_correct as f64 / (runs.len() * config.samples_per_run) as f64;

    let rows = config
        .degrees
        .par_iter()
        .map(|&degree| -> Result<SweepRow> {
            let options = CompileOptions {
                degree,
                ..config.compile
            };
            let program = compile_nested(&folded, &intervals, &options)?;
            let mut agreement = Vec::with_capacity(runs.len());
            let mut rel_diff = Vec::with_capacity(runs.len());
            let mut accuracy = Vec::with_capacity(runs.len());
            for run in &runs {
                let (mut agree, mut correct, mut diff) = (0usize, 0usize, 0.0);
                for &i in run {
                    let r = reference[i].as_ref().expect("computed");
                    let out = program.eval(&data.inputs[i]);
                    let class = argmax(&out);
                    agree += usize::from(class == r.class);
                    correct += usize::from(class == data.labels[i]);
                    let num = l2(out.iter().zip(&r.logits).map(|(a, b)| a - b));
                    diff += num / l2(r.logits.iter().copied()).max(1e-12);
                }
                let n = run.len() as f64;
                agreement.push(agree as f64 / n);
                accuracy.push(correct as f64 / n);
                rel_diff.push(diff / n);
            }
            let (agreement_mean, agreement_std) = mean_std(&agreement);
            let (rel_diff_mean, rel_diff_std) = mean_std(&rel_diff);
            let (accuracy_mean, accuracy_std) = mean_std(&accuracy);
            Ok(SweepRow {
                degree,
                agreement_mean,
                agreement_std,
                rel_diff_mean,
                rel_diff_std,
                accuracy_mean,
                accuracy_std,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepReport {
        rows,
        reference_accuracy,
        intervals,
    })
}

/// Columns: `degree,agreement_mean,agreement_std,rel_diff_mean,rel_diff_std,accuracy_mean,accuracy_std,reference_accuracy`.
pub fn write_sweep_csv(out: impl Write, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "degree",
        "agreement_mean",
        "agreement_std",
        "rel_diff_mean",
        "rel_diff_std",
        "accuracy_mean",
        "accuracy_std",
        "reference_accuracy",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.degree.to_string(),
            format!("{:.6}", r.agreement_mean),
            format!("{:.6}", r.agreement_std),
            format!("{:.6e}", r.rel_diff_mean),
            format!("{:.6e}", r.rel_diff_std),
            format!("{:.6}", r.accuracy_mean),
            format!("{:.6}", r.accuracy_std),
            format!("{:.6}", report.reference_accuracy),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

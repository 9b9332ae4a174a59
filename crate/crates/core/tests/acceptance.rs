//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p polydnn-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use common::{
    barycentric_interpolant, bucket, chi_square_uniform, fixture, grid_max_error, toy_expanded,
    univariate_expanded,
};
use polydnn::approx::{approx_activation, calibrate_interval, max_pair, power_mean_max, ApproxSpec, MaxMode};
use polydnn::compiler::{compile_nested, eval_nested, expand, insert_pseudo_units, CompileOptions, ExpandOptions};
use polydnn::harness::{cost_profile, linear_fit, run_sweep, SweepConfig};
use polydnn::model::{fold_batch_norm, ActivationKind};
use polydnn::mpc::{clear_fixed_eval, share_secret, Field, FixedPointParams, Session};
use polydnn::polyalg::ConversionConfig;
use polydnn::toy::{random_inputs, random_toy_network, toy_intervals, ToyConfig};

const TOY_NETS: u64 = 50;
const MPC_PARTIES: [usize; 4] = [2, 3, 5, 10];
const MPC_QUERIES_PER_NET: usize = 3;
const MPC_TIME_LIMIT: Duration = Duration::from_secs(60);
const NESTED_INPUTS: usize = 100;
const NESTED_TOLERANCE: f64 = 1e-6;
const PSEUDO_LOGIT_TOLERANCE: f64 = 1e-12;
/// Max grid error of the degree-30 ReLU fit on the fixture's first calibrated
/// interval, from the barycentric dense-grid oracle on its first run.
const RELU_D30_GOLDEN: f64 = 4.424795e-2;
const ORACLE_GRID: usize = 20_001;
const MONOTONE_SLACK: f64 = 1.05;
const SWEEP_DEGREES: [usize; 6] = [2, 4, 8, 16, 30, 32];
const PLATEAU_TOLERANCE: f64 = 0.02;
const COST_R2: f64 = 0.999;
const SHARINGS: usize = 100_000;
const BUCKET_BITS: u32 = 6;
const ALPHA: f64 = 0.01;
const SECRET_DEGREE: usize = 10;
const SECRET_PARTIES: usize = 3;
const MAX_PAIRS: usize = 100_000;
/// Relative slack for the max identities, a few ulps of the operands.
const MAX_IDENTITY_SLACK: f64 = 4.0 * f64::EPSILON;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mpc_exactness() -> Outcome {
    let start = Instant::now();
    let params = FixedPointParams::default();
    let mut queries = 0;
    for seed in 0..TOY_NETS {
        let degree = 1 + (seed as usize % 4);
        let (model, poly, mut rng) = toy_expanded(seed, degree);
        let inputs = random_inputs(&mut rng, MPC_QUERIES_PER_NET, model.input_width, -1.0, 1.0);
        for k in MPC_PARTIES {
            let mut session = Session::new(params, k, seed).map_err(|e| e.to_string())?;
            let programs = session.deal(&poly).map_err(|e| e.to_string())?;
            for x in &inputs {
                let shared = session.eval_public(&programs, x).map_err(|e| e.to_string())?;
                let clear = clear_fixed_eval(&poly, &params, x).map_err(|e| e.to_string())?;
                if shared.values != clear {
                    return Err(format!("net {seed}, k={k}: field sums differ from the clear evaluation"));
                }
                queries += 1;
            }
            if session.transcript.party_to_party() != 0 {
                return Err(format!("net {seed}, k={k}: {}", session.transcript));
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < MPC_TIME_LIMIT,
        format!(
            "{TOY_NETS} nets, k in {MPC_PARTIES:?}, {queries} queries bit-exact, 0 party-to-party messages, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn nested_equals_expanded() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..TOY_NETS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let model = random_toy_network(&mut rng, &ToyConfig::default());
        let intervals = toy_intervals(&model, &mut rng);
        let degree = 1 + (seed as usize % 4);
        let program = compile_nested(&model, &intervals, &CompileOptions::with_degree(degree)).map_err(|e| e.to_string())?;
        let poly = expand(&program, &ExpandOptions::default()).map_err(|e| e.to_string())?;
        for x in random_inputs(&mut rng, NESTED_INPUTS, model.input_width, -1.0, 1.0) {
            let nested = eval_nested(&program, &x).map_err(|e| e.to_string())?.outputs;
            for (e, v) in poly.eval(&x).iter().zip(&nested) {
                worst = worst.max((e - v).abs() / (1.0 + v.abs()));
            }
        }
    }
    check(
        worst <= NESTED_TOLERANCE,
        format!("{TOY_NETS} nets x {NESTED_INPUTS} inputs, max relative deviation {worst:.3e} (limit {NESTED_TOLERANCE:e})"),
    )
}

fn pseudo_invariance() -> Outcome {
    let opts = CompileOptions::with_degree(3);
    let mut checked = 0;
    for seed in 0..TOY_NETS {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let model = random_toy_network(&mut rng, &ToyConfig::default());
        if model.layers.len() < 2 {
            continue;
        }
        let intervals = toy_intervals(&model, &mut rng);
        let mut counts = vec![0; model.layers.len()];
        counts[rng.random_range(0..model.layers.len() - 1)] = rng.random_range(1..=3);
        let hidden = insert_pseudo_units(&model, &counts, seed).map_err(|e| e.to_string())?;
        let a = compile_nested(&model, &intervals, &opts).map_err(|e| e.to_string())?;
        let b = compile_nested(&hidden, &intervals, &opts).map_err(|e| e.to_string())?;
        let ea = expand(&a, &ExpandOptions::default()).map_err(|e| e.to_string())?.pruned();
        let eb = expand(&b, &ExpandOptions::default()).map_err(|e| e.to_string())?.pruned();
        if ea.outputs != eb.outputs {
            return Err(format!("net {seed}: term maps differ"));
        }
        checked += 1;
    }

    let (model, data) = fixture();
    let folded = fold_batch_norm(&model).map_err(|e| e.to_string())?;
    let radii: Vec<f64> = calibrate_interval(&folded, &data, 99.5)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|i| i.radius)
        .collect();
    let hidden = insert_pseudo_units(&model, &[8, 0, 8, 0, 0], 11).map_err(|e| e.to_string())?;
    let hidden_folded = fold_batch_norm(&hidden).map_err(|e| e.to_string())?;
    let fixture_opts = CompileOptions::with_degree(30);
    let a = compile_nested(&folded, &radii, &fixture_opts).map_err(|e| e.to_string())?;
    let b = compile_nested(&hidden_folded, &radii, &fixture_opts).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for x in random_inputs(&mut rng, 100, model.input_width, 0.0, 1.0) {
        for (p, q) in a.eval(&x).iter().zip(b.eval(&x)) {
            worst = worst.max((p - q).abs());
        }
    }
    check(
        worst <= PSEUDO_LOGIT_TOLERANCE && b.pseudo_count() == 16,
        format!(
            "{checked} toy term maps equal after pruning; fixture + {} pseudo-units max logit change {worst:e}",
            b.pseudo_count()
        ),
    )
}

fn approximation_quality() -> Outcome {
    let (model, data) = fixture();
    let folded = fold_batch_norm(&model).map_err(|e| e.to_string())?;
    let r = calibrate_interval(&folded, &data, 99.5).map_err(|e| e.to_string())?[0].radius;
    let conv = ConversionConfig::default();

    let relu = ActivationKind::ReLu;
    let fit = approx_activation(relu, &ApproxSpec::symmetric(30, r), &conv).map_err(|e| e.to_string())?;
    let series = fit.series.as_ref().ok_or("relu fit has no series")?;
    let oracle = barycentric_interpolant(|x| relu.apply(x), 30, -r, r);
    let oracle_err = grid_max_error(|x| relu.apply(x), oracle, -r, r, ORACLE_GRID);
    let series_err = grid_max_error(|x| relu.apply(x), |x| series.eval(x), -r, r, ORACLE_GRID);
    let poly_err = grid_max_error(|x| relu.apply(x), |x| fit.poly.eval(x), -r, r, ORACLE_GRID);
    if (series_err - oracle_err).abs() > 1e-9 || series_err > RELU_D30_GOLDEN || poly_err > RELU_D30_GOLDEN {
        return Err(format!(
            "relu d=30 on [-{r:.4}, {r:.4}]: series {series_err:e}, monomial {poly_err:e}, oracle {oracle_err:e}, golden {RELU_D30_GOLDEN:e}"
        ));
    }

    let mut trail = Vec::new();
    for kind in [ActivationKind::Sigmoid, ActivationKind::Tanh] {
        let errs = [4, 8, 16, 30]
            .iter()
            .map(|&d| {
                approx_activation(kind, &ApproxSpec::symmetric(d, r), &conv).map(|a| a.monomial_fit.max_abs_error)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        if errs.windows(2).any(|w| w[1] > w[0] * MONOTONE_SLACK) {
            return Err(format!("{} errors not decreasing: {errs:?}", kind.name()));
        }
        trail.push(format!("{} {:.1e}->{:.1e}", kind.name(), errs[0], errs[3]));
    }
    Ok(format!(
        "relu d=30 error {poly_err:.6e} <= golden {RELU_D30_GOLDEN:e} (oracle {oracle_err:.6e}); {} over d in {{4,8,16,30}}",
        trail.join(", ")
    ))
}

fn plateau() -> Outcome {
    let (model, data) = fixture();
    let config = SweepConfig {
        degrees: SWEEP_DEGREES.to_vec(),
        runs: 10,
        samples_per_run: 100,
        seed: 42,
        ..SweepConfig::default()
    };
    let report = run_sweep(&model, &data, &data, &config).map_err(|e| e.to_string())?;
    let rows: Vec<_> = SWEEP_DEGREES.iter().map(|&d| report.row(d).expect("swept")).collect();
    let summary = rows
        .iter()
        .map(|r| format!("{}:{:.3}", r.degree, r.agreement_mean))
        .collect::<Vec<_>>()
        .join(" ");
    // non-decreasing within one standard deviation through d = 30
    let rising = rows[..5]
        .windows(2)
        .all(|w| w[1].agreement_mean + w[0].agreement_std.max(w[1].agreement_std) >= w[0].agreement_mean);
    let gap = (rows[5].agreement_mean - rows[4].agreement_mean).abs();
    check(
        rising && gap <= PLATEAU_TOLERANCE,
        format!("agreement {summary}; |a(32)-a(30)| = {gap:.3} (limit {PLATEAU_TOLERANCE})"),
    )
}

fn linear_cost() -> Outcome {
    let (model, data) = fixture();
    let folded = fold_batch_norm(&model).map_err(|e| e.to_string())?;
    let radii: Vec<f64> = calibrate_interval(&folded, &data, 99.5)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|i| i.radius)
        .collect();
    let rows = cost_profile(&folded, &radii, &[8, 16, 32], &CompileOptions::with_degree(1), 0)
        .map_err(|e| e.to_string())?;
    let xs: Vec<f64> = rows.iter().map(|r| r.degree as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ops.total() as f64).collect();
    let fit = linear_fit(&xs, &ys);
    check(
        fit.r2 >= COST_R2,
        format!("ops {ys:?} at d = {xs:?}; slope {:.1}, r2 {:.6} (limit {COST_R2})", fit.slope, fit.r2),
    )
}

fn share_privacy() -> Outcome {
    let f = Field::mersenne(127).map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let secret = FixedPointParams::default().encode(0.75).map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for k in [2usize, 3] {
        let mut counts = vec![vec![0u64; 1 << BUCKET_BITS]; k];
        for _ in 0..SHARINGS {
            let shares = share_secret(&f, secret, k, &mut rng).map_err(|e| e.to_string())?;
            for s in &shares {
                counts[s.party][bucket(s.value, 127, BUCKET_BITS)] += 1;
            }
        }
        for (party, c) in counts.iter().enumerate() {
            let (stat, critical) = chi_square_uniform(c, ALPHA);
            if stat >= critical {
                return Err(format!("k={k} party {party}: chi-square {stat:.1} >= {critical:.1}"));
            }
            results.push(stat);
        }
    }
    let (_, critical) = chi_square_uniform(&[1; 1 << BUCKET_BITS], ALPHA);
    let worst = results.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "{SHARINGS} sharings, k in {{2,3}}, every party: max chi-square {worst:.1} < {critical:.1} ({} buckets, alpha {ALPHA})",
        1 << BUCKET_BITS
    ))
}

fn secret_input() -> Outcome {
    let params = FixedPointParams::default();
    let mut queries = 0;
    for seed in 0..20u64 {
        let poly = univariate_expanded(seed, SECRET_DEGREE);
        let mut session = Session::new(params, SECRET_PARTIES, seed).map_err(|e| e.to_string())?;
        let programs = session.deal(&poly).map_err(|e| e.to_string())?;
        let (mut dealer, masks) = session.setup_secret_input(&poly, &programs, seed + 100).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let shared = session.eval_secret(&programs, &mut dealer, &masks, x).map_err(|e| e.to_string())?;
            let clear = clear_fixed_eval(&poly, &params, &[x]).map_err(|e| e.to_string())?;
            if shared.values != clear {
                return Err(format!("program {seed}, x = {x}: field sums differ"));
            }
            queries += 1;
        }
        if session.transcript.party_to_party() != 0 {
            return Err(format!("program {seed}: {}", session.transcript));
        }
    }
    Ok(format!(
        "20 degree-{SECRET_DEGREE} programs, k={SECRET_PARTIES}, {queries} secret queries bit-exact, 0 party-to-party messages"
    ))
}

fn max_approximations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..MAX_PAIRS {
        let (x, y): (f64, f64) = (rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let scale = x.abs() + y.abs();
        let exact = max_pair(x, y, &MaxMode::ExactAbs);
        if (exact - x.max(y)).abs() > MAX_IDENTITY_SLACK * scale {
            return Err(format!("exact_abs({x}, {y}) = {exact}"));
        }
        let over = max_pair(x, y, &MaxMode::PaperLiteral) - x.max(y);
        if (over - 0.5 * (x - y).abs()).abs() > MAX_IDENTITY_SLACK * scale {
            return Err(format!("paper_literal({x}, {y}) overshoot {over}"));
        }
    }
    let mut shrank = 0;
    let vectors = 1000;
    for _ in 0..vectors {
        let n = rng.random_range(2..10);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
        let truth = xs.iter().cloned().fold(0.0, f64::max);
        let e8 = power_mean_max(&xs, 8).map_err(|e| e.to_string())? - truth;
        let e32 = power_mean_max(&xs, 32).map_err(|e| e.to_string())? - truth;
        // both at rounding level means there was nothing left to shrink
        let floor = MAX_IDENTITY_SLACK * truth;
        shrank += usize::from(e32 < e8 || (e8.abs() <= floor && e32.abs() <= floor));
    }
    check(
        shrank == vectors,
        format!("{MAX_PAIRS} pairs exact and half-gap overshoot confirmed; power-mean error shrank d=8 -> 32 on {shrank}/{vectors} vectors"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("mpc-exactness", mpc_exactness),
        ("nested-equals-expanded", nested_equals_expanded),
        ("pseudo-unit-invariance", pseudo_invariance),
        ("approximation-quality", approximation_quality),
        ("degree-plateau", plateau),
        ("linear-cost", linear_cost),
        ("share-privacy", share_privacy),
        ("secret-input", secret_input),
        ("max-approximations", max_approximations),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

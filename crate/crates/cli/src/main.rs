//! `polydnn`: compile networks to polynomials, evaluate them, and run the
//! file-based multi-party demo.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

use polydnn::approx::calibrate_interval;
use polydnn::compiler::{
    compile_nested, eval_nested, expand, insert_pseudo_units, load_program, save_program, write_compile_report,
    CompileOptions, ExpandOptions, PoolMode, PolyProgram, SelfCheck, SoftmaxMode,
};
use polydnn::harness::{cost_profile, linear_fit, reference_cost, run_sweep, write_cost_csv, write_sweep_csv, SweepConfig};
use polydnn::model::{
    argmax, fold_batch_norm, load_csv, load_idx, load_model, reference_infer, save_model, Dataset, LayerKind,
    ModelGraph,
};
use polydnn::mpc::{
    deal_program, load_party_output, load_party_program, party_eval_public_input, reconstruct_output,
    save_party_output, save_party_program, FixedPointParams, PartyOutput, DEFAULT_FIELD_BITS, DEFAULT_FRAC_BITS,
};
use polydnn::toy::random_inputs;
use polydnn::{Error, Result};

#[derive(Parser)]
#[command(name = "polydnn", version, about = "Polynomial compilation and communication-less MPC inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a model into a polynomial program artifact and a CSV report.
    Compile(CompileArgs),
    /// Evaluate a program artifact or a model on one input or a dataset.
    Eval(EvalArgs),
    /// Agreement between polynomial and reference inference across degrees.
    Sweep(SweepArgs),
    /// Split an expanded program into one share file per party.
    Share(ShareArgs),
    /// One party's local evaluation on a public input.
    PartyEval(PartyEvalArgs),
    /// Sum output shares and decode logits and class.
    Reconstruct(ReconstructArgs),
    /// Counted arithmetic per inference across degrees.
    Cost(CostArgs),
    /// Insert pseudo-units into a model without changing its function.
    Hide(HideArgs),
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed; falls back to POLYDNN_SEED, then 0.
    #[arg(long, env = "POLYDNN_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset: a CSV file (label first) or an idx image file paired with --labels.
    #[arg(long)]
    data: Option<PathBuf>,
    /// idx label file for --data.
    #[arg(long)]
    labels: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<Option<Dataset>> {
        let Some(data) = &self.data else { return Ok(None) };
        let set = match &self.labels {
            Some(labels) => load_idx(data, labels)?,
            None if data.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => load_csv(data)?,
            None => return Err(Error::Config("idx data needs --labels".into())),
        };
        Ok(Some(set))
    }
}

#[derive(Args)]
struct CompileFlags {
    /// Chebyshev degree of every activation approximation.
    #[arg(long, default_value_t = 30)]
    degree: usize,
    /// Max-pool lowering: mean or eq2 (defaults to what each layer was trained with).
    #[arg(long, value_parser = parse_pool_mode)]
    pool_mode: Option<PoolMode>,
    /// Output handling: drop (argmax of logits) or none (reject softmax outputs).
    #[arg(long, value_parser = parse_softmax_mode, default_value = "drop")]
    softmax_mode: SoftmaxMode,
    /// Calibration percentile of activation-input magnitudes.
    #[arg(long, default_value_t = 99.5)]
    percentile: f64,
    /// Without --data, calibrate on uniform inputs drawn from this range.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "0,1")]
    input_range: (f64, f64),
}

impl CompileFlags {
    fn options(&self, degree: usize) -> CompileOptions {
        CompileOptions {
            pool_mode: self.pool_mode,
            softmax_mode: self.softmax_mode,
            ..CompileOptions::with_degree(degree)
        }
    }
}

#[derive(Args)]
struct CompileArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    flags: CompileFlags,
    /// Also expand the whole network into one polynomial per output.
    #[arg(long)]
    expand: bool,
    /// Pseudo-units spread over the hidden layers before compiling.
    #[arg(long, default_value_t = 0)]
    pseudo_units: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Program artifact path.
    #[arg(long)]
    out: PathBuf,
    /// CSV report path (defaults to the artifact path with a .csv extension).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Program artifact to evaluate.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    program: Option<PathBuf>,
    /// Model to evaluate with the float reference.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use the expanded polynomials of the artifact instead of the nested program.
    #[arg(long, requires = "program")]
    expanded: bool,
    /// Comma-separated input vector.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "data",
        required_unless_present = "data"
    )]
    input: Option<Vec<f64>>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated ascending degrees.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,24,30,32")]
    degrees: Vec<usize>,
    /// Disjoint evaluation runs per degree.
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Samples drawn per run.
    #[arg(long, default_value_t = 500)]
    samples_per_run: usize,
    /// Sample with replacement when the dataset is smaller than runs x samples.
    #[arg(long)]
    with_replacement: bool,
    #[command(flatten)]
    flags: CompileFlags,
    #[command(flatten)]
    seed: SeedArg,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ShareArgs {
    /// Program artifact compiled with --expand.
    #[arg(long)]
    program: PathBuf,
    /// Number of parties k; all k share files are needed to reconstruct.
    #[arg(long, default_value_t = 3)]
    parties: usize,
    /// Mersenne exponent b of the field modulus 2^b - 1.
    #[arg(long, default_value_t = DEFAULT_FIELD_BITS)]
    field_bits: u32,
    /// Fractional bits of the fixed-point encoding.
    #[arg(long, default_value_t = DEFAULT_FRAC_BITS)]
    frac_bits: u32,
    #[command(flatten)]
    seed: SeedArg,
    /// Directory receiving party-<i>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartyEvalArgs {
    /// This party's share file.
    #[arg(long)]
    shares: PathBuf,
    /// Comma-separated public input vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    input: Vec<f64>,
    /// Output-share file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    /// One output-share file per party.
    #[arg(required = true)]
    outputs: Vec<PathBuf>,
}

#[derive(Args)]
struct CostArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated degrees to profile.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,24,32")]
    degrees: Vec<usize>,
    #[command(flatten)]
    flags: CompileFlags,
    /// Timed evaluations per degree (0 skips timing).
    #[arg(long, default_value_t = 200)]
    timing_reps: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HideArgs {
    /// Model JSON file.
    #[arg(long)]
    model: PathBuf,
    /// Pseudo-units spread round-robin over the hidden layers.
    #[arg(long)]
    pseudo_units: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Output model path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let bounds = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match bounds.as_slice() {
        &[lo, hi] if lo < hi => Ok((lo, hi)),
        _ => Err("expected lo,hi with lo < hi".into()),
    }
}

fn parse_pool_mode(s: &str) -> std::result::Result<PoolMode, String> {
    PoolMode::from_name(s).ok_or_else(|| format!("unknown pool mode {s:?} (mean, eq2)"))
}

fn parse_softmax_mode(s: &str) -> std::result::Result<SoftmaxMode, String> {
    SoftmaxMode::from_name(s).ok_or_else(|| format!("unknown softmax mode {s:?} (drop, none)"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn format_values(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Spreads `total` pseudo-units round-robin over the layers that accept them.
fn pseudo_counts(model: &ModelGraph, total: usize) -> Result<Vec<usize>> {
    let last = model.layers.len() - 1;
    let eligible: Vec<usize> = (0..last).filter(|&l| model.layers[l].kind != LayerKind::BatchNorm).collect();
    let mut counts = vec![0; model.layers.len()];
    if total == 0 {
        return Ok(counts);
    }
    if eligible.is_empty() {
        return Err(Error::Config("model has no hidden layer to hold pseudo-units".into()));
    }
    for i in 0..total {
        counts[eligible[i % eligible.len()]] += 1;
    }
    Ok(counts)
}

/// Folds batch norm and derives interval radii from the data, or from
/// uniform synthetic inputs when no data is given.
fn prepare(
    model: &ModelGraph,
    data: Option<&Dataset>,
    flags: &CompileFlags,
    seed: u64,
) -> Result<(ModelGraph, Vec<f64>)> {
    let folded = fold_batch_norm(model)?;
    let synthetic;
    let sample = match data {
        Some(d) => d,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (lo, hi) = flags.input_range;
            let inputs = random_inputs(&mut rng, 500, model.input_width, lo, hi);
            synthetic = Dataset::new(inputs, vec![0; 500])?;
            &synthetic
        }
    };
    let intervals = calibrate_interval(&folded, sample, flags.percentile)?
        .into_iter()
        .map(|i| i.radius)
        .collect();
    Ok((folded, intervals))
}

fn cmd_compile(args: CompileArgs) -> Result<()> {
    let mut model = load_model(&args.model)?;
    if args.pseudo_units > 0 {
        let counts = pseudo_counts(&model, args.pseudo_units)?;
        model = insert_pseudo_units(&model, &counts, args.seed.seed)?;
    }
    let data = args.data.load()?;
    let (folded, intervals) = prepare(&model, data.as_ref(), &args.flags, args.seed.seed)?;
    let program = compile_nested(&folded, &intervals, &args.flags.options(args.flags.degree))?;
    let expanded = if args.expand {
        let options = ExpandOptions {
            self_check: Some(SelfCheck {
                input_range: args.flags.input_range,
                seed: args.seed.seed,
                ..SelfCheck::default()
            }),
            ..ExpandOptions::default()
        };
        Some(expand(&program, &options)?)
    } else {
        None
    };
    save_program(&args.out, &program, expanded.as_ref())?;
    let report = args.report.unwrap_or_else(|| args.out.with_extension("csv"));
    write_compile_report(create(&report)?, &program, expanded.as_ref())?;
    println!(
        "compiled {} nodes ({} pseudo) at degree {} -> {}",
        program.nodes.len(),
        program.pseudo_count(),
        program.degree,
        args.out.display()
    );
    if let Some(e) = &expanded {
        println!("expanded: total degree {}, {} terms", e.total_degree, e.term_count);
    }
    Ok(())
}

enum Evaluator {
    Nested(PolyProgram),
    Expanded(polydnn::compiler::ExpandedNetworkPoly),
    Reference(ModelGraph),
}

impl Evaluator {
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(match self {
            Evaluator::Nested(p) => eval_nested(p, x)?.outputs,
            Evaluator::Expanded(e) => {
                if x.len() != e.input_width() {
                    return Err(Error::Config(format!(
                        "input has {} values, program expects {}",
                        x.len(),
                        e.input_width()
                    )));
                }
                e.eval(x)
            }
            Evaluator::Reference(m) => reference_infer(m, x)?.logits,
        })
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let evaluator = match (&args.program, &args.model) {
        (Some(path), _) => {
            let (program, expanded) = load_program(path)?;
            match (args.expanded, expanded) {
                (true, Some(e)) => Evaluator::Expanded(e),
                (true, None) => return Err(Error::Config("artifact has no expanded polynomials".into())),
                (false, _) => Evaluator::Nested(program),
            }
        }
        (None, Some(path)) => Evaluator::Reference(load_model(path)?),
        (None, None) => unreachable!("clap requires one of --program and --model"),
    };
    if let Some(x) = &args.input {
        let logits = evaluator.logits(x)?;
        println!("logits {}", format_values(&logits));
        println!("class {}", argmax(&logits));
        return Ok(());
    }
    let data = args.data.load()?.expect("clap requires --input or --data");
    let mut correct = 0;
    for (x, &label) in data.inputs.iter().zip(&data.labels) {
        correct += usize::from(argmax(&evaluator.logits(x)?) == label);
    }
    println!("samples {}", data.len());
    println!("accuracy {:.6}", correct as f64 / data.len() as f64);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = args.data.load()?.ok_or_else(|| Error::Config("sweep needs --data".into()))?;
    let config = SweepConfig {
        degrees: args.degrees,
        runs: args.runs,
        samples_per_run: args.samples_per_run,
        seed: args.seed.seed,
        with_replacement: args.with_replacement,
        percentile: args.flags.percentile,
        compile: args.flags.options(1),
    };
    let report = run_sweep(&model, &data, &data, &config)?;
    write_sweep_csv(csv_sink(&args.out)?, &report)
}

fn cmd_share(args: ShareArgs) -> Result<()> {
    let (_, expanded) = load_program(&args.program)?;
    let poly = expanded.ok_or_else(|| Error::Config("sharing needs an artifact compiled with --expand".into()))?;
    let params = FixedPointParams::new(args.field_bits, args.frac_bits)?;
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed.seed);
    let programs = deal_program(&poly, args.parties, &params, &mut rng)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    for pp in &programs {
        save_party_program(pp, args.out.join(format!("party-{}.json", pp.party_id)))?;
    }
    println!(
        "{} share files, fingerprint {} -> {}",
        programs.len(),
        programs[0].fingerprint,
        args.out.display()
    );
    Ok(())
}

fn cmd_party_eval(args: PartyEvalArgs) -> Result<()> {
    let pp = load_party_program(&args.shares)?;
    let out = party_eval_public_input(&pp, &args.input)?;
    save_party_output(&out, &pp.params, &args.out)?;
    Ok(())
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<()> {
    let mut outputs: Vec<PartyOutput> = Vec::with_capacity(args.outputs.len());
    let mut params: Option<FixedPointParams> = None;
    for path in &args.outputs {
        let (out, p) = load_party_output(path)?;
        match params {
            Some(q) if q != p => {
                return Err(Error::Config(format!("{}: field parameters differ", path.display())))
            }
            _ => params = Some(p),
        }
        outputs.push(out);
    }
    let r = reconstruct_output(&outputs, &params.expect("at least one file"))?;
    println!("logits {}", format_values(&r.logits));
    println!("class {}", r.class);
    Ok(())
}

fn cmd_cost(args: CostArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let data = args.data.load()?;
    let (folded, intervals) = prepare(&model, data.as_ref(), &args.flags, args.seed.seed)?;
    let rows = cost_profile(&folded, &intervals, &args.degrees, &args.flags.options(1), args.timing_reps)?;
    write_cost_csv(csv_sink(&args.out)?, &rows)?;
    let xs: Vec<f64> = rows.iter().map(|r| r.degree as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ops.total() as f64).collect();
    let fit = linear_fit(&xs, &ys);
    eprintln!(
        "ops = {:.1} * degree + {:.1} (r2 {:.6}); float reference {} ops",
        fit.slope,
        fit.intercept,
        fit.r2,
        reference_cost(&folded).total()
    );
    Ok(())
}

fn cmd_hide(args: HideArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let counts = pseudo_counts(&model, args.pseudo_units)?;
    let hidden = insert_pseudo_units(&model, &counts, args.seed.seed)?;
    save_model(&hidden, &args.out)?;
    println!("widths {:?} -> {:?}", model.widths(), hidden.widths());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compile(a) => cmd_compile(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Share(a) => cmd_share(a),
        Command::PartyEval(a) => cmd_party_eval(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Hide(a) => cmd_hide(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

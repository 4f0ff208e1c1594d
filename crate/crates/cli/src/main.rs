//! `dctnet` command-line front end.
//!
//! Exit status: 0 on success, 1 on a domain error (message on stderr), 2 on
//! a usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dctnet::cost::{self, CostConfig, CostReport, Variant, ALL_VARIANTS};
use dctnet::harness::{self, BenchConfig, BenchMode, PrepareOptions, ReportFormat};
use dctnet::reduce::{self, ReductionKind, ReductionOperator};
use dctnet::tensor::{self, FbsSpec, FbsStrategy, TensorOptions};

#[derive(Parser)]
#[command(
    name = "dctnet",
    version,
    about = "Partial JPEG decoding, DCT tensors, reduction operators and cost models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a baseline JPEG to a DCTT coefficient tensor without any IDCT.
    Decode(DecodeArgs),
    /// Keep a frequency band of a coefficient tensor.
    Select(SelectArgs),
    /// Apply an LP, LA or CCPP channel reduction to a tensor.
    Reduce(ReduceArgs),
    /// Compare analytic and finite-difference gradients of a reduction operator.
    Gradcheck(GradcheckArgs),
    /// Parameter and FLOP counts of the network variants.
    Cost(CostArgs),
    /// Time full against partial decoding on a prepared corpus.
    Bench(BenchArgs),
    /// Center-crop a directory of JPEGs into a benchmark corpus.
    PrepareCorpus(PrepareArgs),
    /// Write a synthetic JPEG corpus (gradients, shapes and noise).
    SynthCorpus(SynthArgs),
}

#[derive(Args)]
struct DecodeArgs {
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Store quantized integers (int16) instead of dequantized values.
    #[arg(long)]
    keep_quantized: bool,
    /// Keep only the luma channels.
    #[arg(long)]
    luma_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Lowest,
    Median,
    Highest,
    Extremes,
    List,
}

#[derive(Args)]
struct SelectArgs {
    tensor: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Coefficients kept per component (lowest only).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated zigzag indices (list only).
    #[arg(long, value_delimiter = ',')]
    indices: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReduceArgs {
    tensor: PathBuf,
    #[arg(long)]
    op: ReductionKind,
    /// Weight file written by --save-weights.
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    /// Seed for randomly initialized weights.
    #[arg(long, required_unless_present = "weights")]
    seed: Option<u64>,
    /// Output channels for seeded weights.
    #[arg(long, default_value_t = 64)]
    out_channels: usize,
    /// Also write the operator's weights here.
    #[arg(long)]
    save_weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    op: ReductionKind,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Text,
}

#[derive(Args)]
struct CostArgs {
    /// Variant name, e.g. resnet50, upsampling-rfa, fbs16, ccpp64, skip2-ccpp.
    #[arg(long, required_unless_present_any = ["all", "calibrate"], conflicts_with = "all")]
    variant: Vec<String>,
    /// Every in-scope variant.
    #[arg(long)]
    all: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Add FLOP and parameter ratios against this variant.
    #[arg(long)]
    baseline: Option<String>,
    /// Width and stride configuration (TOML); defaults to the built-in one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run the width and stride search and print the resulting config.
    #[arg(long)]
    calibrate: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// key=value protocol file (runs, batches, batch, warmup, seed, parallel, corpus, mode).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mode to time; repeatable. rgb, dct, dct+fbs=lowest:16, dct+ccpp, ...
    #[arg(long)]
    mode: Vec<String>,
    /// Prepared corpus directory.
    #[arg(long, env = "DCTNET_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decode the images of a batch on separate threads.
    #[arg(long)]
    parallel: bool,
    /// Report file: CSV for .csv, a text table for .txt, JSON otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the report printed on standard output.
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Args)]
struct PrepareArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = 224)]
    crop: usize,
    /// Re-encode quality; defaults to the source quality when recognizable.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=100))]
    quality: Option<u8>,
}

#[derive(Args)]
struct SynthArgs {
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn report_format(f: FormatArg) -> ReportFormat {
    match f {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Text => ReportFormat::Text,
    }
}

fn decode(args: DecodeArgs) -> Result<()> {
    let bytes = std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let opts = TensorOptions {
        keep_quantized: args.keep_quantized,
        luma_only: args.luma_only,
        fbs: None,
    };
    let t = tensor::tensor_from_jpeg(&bytes, &opts).with_context(|| format!("decoding {}", args.input.display()))?;
    tensor::write_tensor_file(&t, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{}x{}x{} {} tensor -> {}",
        t.channels,
        t.rows,
        t.cols,
        t.data.dtype_name(),
        args.out.display()
    );
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let t = tensor::read_tensor_file(&args.tensor).with_context(|| format!("reading {}", args.tensor.display()))?;
    let strategy = match args.strategy {
        StrategyArg::Lowest => FbsStrategy::LowestN,
        StrategyArg::Median => FbsStrategy::MedianBand,
        StrategyArg::Highest => FbsStrategy::HighestBand,
        StrategyArg::Extremes => FbsStrategy::Extremes,
        StrategyArg::List => FbsStrategy::ExplicitList,
    };
    let spec = FbsSpec::from_strategy(strategy, args.n, &args.indices)?;
    let out = tensor::select(&t, &spec)?;
    tensor::write_tensor_file(&out, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "retained {{{}}} per component ({} channels)",
        inclusive_ranges(spec.indices()),
        out.channels
    );
    Ok(())
}

// Sorted zigzag indices as inclusive runs: 0..15,48..63 or 0,1,5.
fn inclusive_ranges(indices: &[u8]) -> String {
    let mut runs: Vec<(u8, u8)> = Vec::new();
    for &i in indices {
        match runs.last_mut() {
            Some((_, end)) if *end + 1 == i => *end = i,
            _ => runs.push((i, i)),
        }
    }
    runs.iter()
        .map(|&(a, b)| if a == b { a.to_string() } else { format!("{a}..{b}") })
        .collect::<Vec<_>>()
        .join(",")
}

fn reduce_cmd(args: ReduceArgs) -> Result<()> {
    let t = tensor::read_tensor_file(&args.tensor).with_context(|| format!("reading {}", args.tensor.display()))?;
    let op = match (&args.weights, args.seed) {
        (Some(path), _) => {
            let op = reduce::read_weights_file(path).with_context(|| format!("reading {}", path.display()))?;
            if op.kind() != args.op {
                bail!("weight file holds {} weights, --op is {}", op.kind(), args.op);
            }
            op
        }
        (None, Some(seed)) => ReductionOperator::random(args.op, t.channels, args.out_channels, seed)?,
        (None, None) => unreachable!("clap requires --weights or --seed"),
    };
    let out = op.apply(&t)?;
    if let Some(path) = &args.save_weights {
        reduce::write_weights_file(&op, path).with_context(|| format!("writing {}", path.display()))?;
    }
    tensor::write_tensor_file(&out, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{} {} -> {} channels -> {}",
        args.op,
        t.channels,
        out.channels,
        args.out.display()
    );
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let report = reduce::grad_check(args.op, args.trials, args.seed)?;
    let tolerance = reduce::GradCheckConfig::default().tolerance;
    let detail = format!(
        "{} trials, step {:e}, max relative error {:.3e}, {} kink positions excluded",
        report.trials, report.step, report.max_relative_error, report.excluded
    );
    if report.passed {
        println!("PASS max_rel_err < {tolerance:e} ({detail})");
        Ok(())
    } else {
        bail!("FAIL max_rel_err >= {tolerance:e} ({detail})")
    }
}

fn cost_text(r: &CostReport) -> String {
    format!(
        "{:<16} {:.2} GFLOPs / {:.1}M params  (entry {:.3} GFLOPs, {} params; aux {:.3} G ops)",
        r.name,
        r.gflops(),
        r.mparams(),
        r.entry_flops as f64 / 1e9,
        r.entry_params,
        r.total_aux_ops as f64 / 1e9
    )
}

fn cost_cmd(args: CostArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            CostConfig::from_toml(&text)?
        }
        None => CostConfig::builtin(),
    };
    if args.calibrate {
        print!("{}", cost::calibrate(&config)?.to_toml());
        return Ok(());
    }
    let variants: Vec<Variant> = if args.all {
        ALL_VARIANTS.to_vec()
    } else {
        args.variant.iter().map(|v| v.parse()).collect::<Result<_, _>>()?
    };
    let mut reports = variants
        .iter()
        .map(|&v| cost::count(&cost::build_variant_with(v, &config)?))
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = match &args.baseline {
        Some(b) => {
            let base: Variant = b.parse()?;
            let name = base.canonical().to_string();
            if !reports.iter().any(|r| r.name == name) {
                reports.insert(0, cost::count(&cost::build_variant_with(base, &config)?)?);
            }
            Some(cost::compare(&reports, &name)?)
        }
        None => None,
    };
    match args.format {
        FormatArg::Csv => {
            print!("{}", cost::reports_to_csv(&reports));
            if let Some(c) = &comparison {
                print!("\n{}", c.to_csv());
            }
        }
        FormatArg::Json => {
            let value = match &comparison {
                Some(c) => serde_json::json!({ "reports": reports, "comparison": c }),
                None => serde_json::json!(reports),
            };
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        FormatArg::Text => {
            for r in &reports {
                println!("{}", cost_text(r));
            }
            if let Some(c) = &comparison {
                println!("\nrelative to {}:", c.baseline);
                for row in &c.rows {
                    println!(
                        "{:<16} flops x{:.3}  params x{:.3}",
                        row.name, row.flops_ratio, row.params_ratio
                    );
                }
            }
            println!("\nconventions:");
            for c in cost::conventions() {
                println!("  {c}");
            }
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            BenchConfig::from_kv(&text)?
        }
        None => BenchConfig::default(),
    };
    if let Some(c) = args.corpus {
        config.corpus_dir = c;
    } else if args.config.is_none() {
        bail!("corpus not prepared: pass --corpus, set DCTNET_CORPUS, or name one in --config");
    }
    if !args.mode.is_empty() {
        config.modes = args
            .mode
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<BenchMode>, _>>()?;
    }
    config.runs = args.runs.unwrap_or(config.runs);
    config.batches_per_run = args.batches.unwrap_or(config.batches_per_run);
    config.batch_size = args.batch.unwrap_or(config.batch_size);
    config.warmup_batches = args.warmup.unwrap_or(config.warmup_batches);
    config.seed = args.seed.unwrap_or(config.seed);
    config.parallel |= args.parallel;
    config.validate()?;

    let report = harness::run_bench(&config)?;
    if let Some(path) = &args.out {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            Some("txt") => ReportFormat::Text,
            _ => ReportFormat::Json,
        };
        harness::write_report(&report, format, path)?;
    }
    print!("{}", harness::emit_report(&report, report_format(args.format)));
    Ok(())
}

fn prepare(args: PrepareArgs) -> Result<()> {
    let opts = PrepareOptions {
        crop: args.crop,
        quality: args.quality,
        ..PrepareOptions::default()
    };
    let manifest = harness::prepare_corpus(&args.input, &args.output, &opts)?;
    println!(
        "{} images prepared, {} skipped -> {}",
        manifest.images().count(),
        manifest.skipped(),
        args.output.join(harness::MANIFEST_NAME).display()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let paths = harness::synth_corpus(&args.output, args.count, args.seed)?;
    println!("{} images -> {}", paths.len(), args.output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decode(a) => decode(a),
        Command::Select(a) => select(a),
        Command::Reduce(a) => reduce_cmd(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Cost(a) => cost_cmd(a),
        Command::Bench(a) => bench(a),
        Command::PrepareCorpus(a) => prepare(a),
        Command::SynthCorpus(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

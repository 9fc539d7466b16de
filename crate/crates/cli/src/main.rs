//! `bary`: exact discrete Wasserstein barycenters from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bary_core::bench::{self, BenchConfig, FractionalityRow};
use bary_core::diagnostics::{non_tu_witness, uniform_point, vertex_rank};
use bary_core::generate::{from_spec, symmetric_instance, RandomSpec};
use bary_core::pricing::build_gen_lp;
use bary_core::{
    colgen, BranchingStrategy, Error, Instance, InstanceFormat, LoadOptions, PricingBackend, SolverConfig,
    WorkingSet,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser)]
#[command(name = "bary", version, about = "Exact discrete Wasserstein barycenters by column generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an exact barycenter.
    Solve(SolveArgs),
    /// Solve one pricing problem for given or master-derived duals.
    Price(PriceArgs),
    /// Compare branching strategies on the same pricing problems.
    Bench(BenchArgs),
    /// Report fractionality of the root pricing relaxation.
    Fractionality(FractionalityArgs),
    /// Check the non-unimodularity witness and the uniform-point rank certificate.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    /// Instance file.
    #[arg(long)]
    input: PathBuf,
    /// Instance format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// CSV file with one weight per measure.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Rescale mass and weight sums that are slightly off one.
    #[arg(long)]
    renormalize: bool,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<Instance> {
        let format = match self.format {
            Some(FormatArg::Json) => InstanceFormat::Json,
            Some(FormatArg::Csv) => InstanceFormat::Csv,
            None => InstanceFormat::from_path(&self.input),
        };
        let opts = LoadOptions {
            renormalize: self.renormalize,
        };
        Ok(Instance::load(&self.input, format, self.weights.as_deref(), opts)?)
    }
}

#[derive(Args)]
struct PricingArgs {
    /// Pricing backend.
    #[arg(long, default_value = "mip")]
    pricing: PricingBackend,
    /// Branching rule of the MIP backend.
    #[arg(long, default_value = "most_repeated")]
    strategy: BranchingStrategy,
    /// Worker threads for pricing.
    #[arg(long, env = "BARY_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pricing: PricingArgs,
    /// Order measures by increasing support size before solving.
    #[arg(long)]
    sort: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Stop once no combination has reduced cost above this value.
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    /// Enumerate once at the end to certify optimality.
    #[arg(long)]
    certify: bool,
    /// Barycenter JSON output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run report JSON output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    pricing: PricingArgs,
    /// JSON array of duals, measure-major. Defaults to the duals of the
    /// master over the greedy working set.
    #[arg(long)]
    duals: Option<PathBuf>,
    /// Write the pricing relaxation in LP format.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Args)]
struct SourceArgs {
    /// Random instance `n,p,seed`.
    #[arg(long, conflicts_with = "input")]
    random: Option<RandomSpec>,
    /// Number of random instances, with consecutive seeds.
    #[arg(long, default_value_t = 1, requires = "random")]
    count: u64,
    /// Instance file.
    #[arg(long)]
    input: Option<PathBuf>,
}

impl SourceArgs {
    fn instances(&self) -> anyhow::Result<Vec<Instance>> {
        match (&self.random, &self.input) {
            (Some(spec), _) => Ok((0..self.count)
                .map(|k| {
                    from_spec(RandomSpec {
                        seed: spec.seed + k,
                        ..*spec
                    })
                })
                .collect()),
            (None, Some(path)) => {
                let inst = Instance::load(path, InstanceFormat::from_path(path), None, LoadOptions::default())?;
                Ok(vec![inst])
            }
            (None, None) => Err(UsageError("one of --random or --input is required".into()).into()),
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, env = "BARY_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Report `wall_ms` as 0 so that output is reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Stats CSV output; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FractionalityArgs {
    /// Symmetric construction `n,p` priced with zero duals.
    #[arg(long, conflicts_with_all = ["random", "input"])]
    symmetric: Option<String>,
    #[command(flatten)]
    source: SourceArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    p: usize,
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<()> {
    let inst = args.input.load()?;
    let cfg = SolverConfig {
        pricing: args.pricing.pricing,
        strategy: args.pricing.strategy,
        sort_measures: args.sort,
        reduced_cost_tol: args.tolerance,
        max_iterations: args.max_iterations,
        workers: args.pricing.workers.max(1),
        certify: args.certify,
    };
    let (bary, report) = colgen::run(&inst, &cfg)?;
    if let Some(path) = &args.output {
        write_file(path, &serde_json::to_string_pretty(&bary.to_json_value())?)?;
    }
    if let Some(path) = &args.report {
        write_file(path, &serde_json::to_string_pretty(&report)?)?;
    }
    println!("cost={:?}", report.final_cost);
    println!("iterations={}", report.iterations);
    println!("support={}", bary.support.len());
    if let Some(c) = report.certificate {
        println!("certificate={c:?}");
    }
    Ok(())
}

fn cmd_price(args: &PriceArgs) -> anyhow::Result<()> {
    let inst = args.input.load()?;
    let y = match &args.duals {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<Vec<f64>>(&text).map_err(|e| Error::Parse(format!("duals: {e}")))?
        }
        None => bench::pricing_duals(&inst)?,
    };
    let (shifted, _) = inst.shift_to_positive_orthant();
    if let Some(path) = &args.dump_lp {
        write_file(path, &build_gen_lp(&shifted, &y)?.lp().to_lp_format())?;
    }
    let cfg = SolverConfig {
        pricing: args.pricing.pricing,
        strategy: args.pricing.strategy,
        workers: args.pricing.workers.max(1),
        ..SolverConfig::default()
    };
    let (best, stats) = colgen::price(&shifted, &y, &WorkingSet::new(), &cfg)?;
    let out = serde_json::json!({
        "combination": best.combination.one_based(),
        "reduced_cost": best.reduced_cost,
        "stats": stats,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let cfg = BenchConfig {
        repeats: args.repeats,
        workers: args.workers.max(1),
        timing: !args.no_timing,
    };
    let mut rows = Vec::new();
    for (k, inst) in args.source.instances()?.iter().enumerate() {
        info!("benchmarking instance {k}");
        rows.extend(bench::bench_instance(inst, &cfg)?);
    }
    let table = bench::summary_table(&rows);
    match &args.output {
        Some(path) => {
            write_file(path, &bench::csv_string(&rows))?;
            print!("{table}");
        }
        None => {
            print!("{}", bench::csv_string(&rows));
            eprint!("{table}");
        }
    }
    Ok(())
}

fn parse_pair(s: &str) -> anyhow::Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(n), Ok(p)) => Ok((n, p)),
            _ => Err(UsageError(format!("expected n,p, got `{s}`")).into()),
        },
        _ => Err(UsageError(format!("expected n,p, got `{s}`")).into()),
    }
}

fn cmd_fractionality(args: &FractionalityArgs) -> anyhow::Result<()> {
    let rows: Vec<FractionalityRow> = match &args.symmetric {
        Some(s) => {
            let (n, p) = parse_pair(s)?;
            if n < 2 || p < 1 {
                bail!(UsageError("symmetric construction needs n ≥ 2 and p ≥ 1".into()));
            }
            let inst = symmetric_instance(n, p);
            vec![bench::root_fractionality(&inst, &vec![0.0; inst.total_support()])?]
        }
        None => args
            .source
            .instances()?
            .iter()
            .map(bench::fractionality)
            .collect::<Result<_, _>>()?,
    };
    println!("{}", FractionalityRow::HEADER);
    for r in rows {
        println!("{}", r.csv_line());
    }
    Ok(())
}

/// Returns whether both checks held.
fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<bool> {
    if args.n < 2 {
        bail!(UsageError(Error::WitnessTooSmall("n ≥ 2".into()).to_string()));
    }
    if args.p < 2 {
        bail!(UsageError(Error::WitnessTooSmall("p ≥ 2".into()).to_string()));
    }
    let inst = symmetric_instance(args.n, args.p);
    let model = build_gen_lp(&inst, &vec![0.0; inst.total_support()])?;
    let det = non_tu_witness(&model)?;
    let cert = vertex_rank(&model, &uniform_point(&model), 1e-9)?;
    println!("det={det} rank={}", if cert.is_vertex { "full" } else { "deficient" });
    println!(
        "rank={} dimension={} active_rows={}",
        cert.rank, cert.dimension, cert.active_rows
    );
    let mut ok = true;
    if det != -2 {
        eprintln!("error: witness determinant is {det}, expected -2");
        ok = false;
    }
    if !cert.is_vertex {
        eprintln!(
            "error: rank certificate failed: rank {} below dimension {}",
            cert.rank, cert.dimension
        );
        ok = false;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a).map(|_| true),
        Command::Price(a) => cmd_price(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
        Command::Fractionality(a) => cmd_fractionality(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

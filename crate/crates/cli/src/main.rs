use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sqmc::bench::{run_bench, write_outputs, BenchConfig, ReferenceSpec, DEFAULT_REFERENCE_N};
use sqmc::filter::{estimate_log_likelihood, run_smc, run_sqmc, Algorithm};
use sqmc::fkmodel::{ModelConfig, ModelKind, RescaleOverride};
use sqmc::smooth::{smooth, SmoothingMethod, TestFunction};
use sqmc::FeynmanKac;

#[derive(Parser)]
#[command(name = "sqmc", version, about = "Sequential quasi-Monte Carlo filtering and smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a forward pass and write per-t filtering means.
    Filter(FilterArgs),
    /// Run a smoother and write per-t estimates.
    Smooth(SmoothArgs),
    /// Replicate SMC and SQMC smoothers and compute gain factors.
    Bench(BenchArgs),
    /// Write the observations (and simulated states) of a model configuration.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model configuration (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Logistic rescaling locations, one per state coordinate.
    #[arg(long, value_delimiter = ',', requires = "rescale_scale")]
    rescale_loc: Option<Vec<f64>>,
    /// Logistic rescaling scales, one per state coordinate.
    #[arg(long, value_delimiter = ',', requires = "rescale_loc")]
    rescale_scale: Option<Vec<f64>>,
}

impl ModelArgs {
    fn load(&self) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::from_path(&self.model)
            .with_context(|| format!("reading model configuration {}", self.model.display()))?;
        if let (Some(loc), Some(scale)) = (&self.rescale_loc, &self.rescale_scale) {
            cfg.rescale = Some(RescaleOverride { loc: loc.clone(), scale: scale.clone() });
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "sqmc")]
    algo: Algorithm,
    /// Number of particles.
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SmoothArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "marginal")]
    method: SmoothingMethod,
    /// Forward pass feeding the smoother.
    #[arg(long, default_value = "sqmc")]
    algo: Algorithm,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Test functions (`x1`, `x2^2`, ...); all coordinates and second moments by default.
    #[arg(long, value_delimiter = ',')]
    phi: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "marginal,backward-qmc,backward-iid")]
    methods: Vec<SmoothingMethod>,
    #[arg(long, value_delimiter = ',', default_value = "smc,sqmc")]
    algos: Vec<Algorithm>,
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "x1")]
    phi: Vec<String>,
    /// Fast profile: T = 99, 20 replications, N = 256 unless overridden.
    #[arg(long)]
    quick: bool,
    /// Stored reference file (JSON) for models without an exact smoother.
    #[arg(long, conflicts_with = "save_reference")]
    reference: Option<PathBuf>,
    /// Particle count of a freshly computed reference.
    #[arg(long, default_value_t = DEFAULT_REFERENCE_N)]
    reference_n: usize,
    #[arg(long, default_value_t = 12345)]
    reference_seed: u64,
    /// Where to store a freshly computed reference.
    #[arg(long)]
    save_reference: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    outdir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_filter(args: &FilterArgs) -> Result<()> {
    let (model, _) = args.model.load()?.build()?;
    let hist = match args.algo {
        Algorithm::Smc => run_smc(&model, args.n, args.seed)?,
        Algorithm::Sqmc => run_sqmc(&model, args.n, args.seed)?,
    };
    hist.validate()?;
    let means = hist.filtering_means();
    let mut out = output(args.out.as_deref())?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=model.dim()).map(|i| format!("mean_x{i}")));
    header.push("loglik_increment".into());
    writeln!(out, "{}", header.join(","))?;
    for (t, m) in means.iter().enumerate() {
        let cols: Vec<String> = m.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{t},{},{}", cols.join(","), hist.log_likelihood_increments[t])?;
    }
    out.flush()?;
    eprintln!("log-likelihood estimate: {}", estimate_log_likelihood(&hist));
    Ok(())
}

fn cmd_smooth(args: &SmoothArgs) -> Result<()> {
    let (model, _) = args.model.load()?.build()?;
    let phis = match &args.phi {
        Some(ids) => ids.iter().map(|p| TestFunction::parse(p, model.dim())).collect::<sqmc::Result<Vec<_>>>()?,
        None => TestFunction::registry(model.dim()),
    };
    let res = smooth(&model, args.algo, args.method, args.n, args.seed, &phis)?;
    let mut out = output(args.out.as_deref())?;
    let mut header = vec!["t".to_string()];
    header.extend(phis.iter().map(|p| p.id()));
    if res.distinct_initial_ancestors.is_some() {
        header.push("distinct_ancestors".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for t in 0..=model.horizon() {
        let mut row = vec![t.to_string()];
        row.extend(res.estimates.iter().map(|e| e[t].to_string()));
        if let Some(d) = &res.distinct_initial_ancestors {
            row.push(d[t].to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<bool> {
    let mut model = args.model.load()?;
    if args.quick && model.data_seed.is_some() {
        model.horizon = 99;
    }
    let reference = match (&args.reference, model.model) {
        (Some(path), _) => ReferenceSpec::Stored { path: path.clone() },
        (None, ModelKind::Lg1d) => ReferenceSpec::Kalman,
        (None, ModelKind::Sv2d) => {
            ReferenceSpec::Computed { n: args.reference_n, seed: args.reference_seed, save: args.save_reference.clone() }
        }
    };
    let (default_ns, default_reps) = if args.quick { (vec![256], 20) } else { (vec![256, 1024], 100) };
    let cfg = BenchConfig {
        model,
        methods: args.methods.clone(),
        algorithms: args.algos.clone(),
        ns: args.n.clone().unwrap_or(default_ns),
        reps: args.reps.unwrap_or(default_reps),
        base_seed: args.seed,
        phis: args.phi.clone(),
        reference,
    };
    if cfg.ns.iter().any(|n| *n < 2) {
        bail!("every N must be at least 2");
    }
    let report = run_bench(&cfg)?;
    write_outputs(&cfg, &report, &args.outdir)?;
    let mut ok = true;
    for g in &report.gains {
        let supported = g.majority_supported();
        println!(
            "{:<9} N={:<6} {}: gain > 1 at {:.0}% of t (90% bootstrap {:.0}%..{:.0}%) majority={}",
            g.comparison,
            g.n,
            g.phi,
            100.0 * g.fraction_above_one,
            100.0 * g.fraction_lo,
            100.0 * g.fraction_hi,
            supported
        );
        ok &= g.rows.iter().all(|r| r.gain.is_finite() && r.gain > 0.0);
    }
    println!("wrote {}", args.outdir.display());
    Ok(ok)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let data = args.model.load()?.data()?;
    data.write_csv(output(args.out.as_deref())?)?;
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || matches!(c.downcast_ref::<sqmc::Error>(), Some(sqmc::Error::Io(io)) if io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Filter(a) => cmd_filter(a).map(|_| true),
        Command::Smooth(a) => cmd_smooth(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a),
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: invariant check failed");
            ExitCode::FAILURE
        }
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

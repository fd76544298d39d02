use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use densevar::pipeline::{
    estimate_densities, fit_sweep, run_analysis, write_network, FactorSweep, FitArtifact,
    FitOutcome, PipelineConfig, WeeklyWeights,
};
use densevar::simulation::{run_sweep, write_metrics_csv, SweepConfig};

#[derive(Parser)]
#[command(
    name = "densevar",
    version,
    about = "Density-valued VAR networks with latent factors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over VAR strength and factor count; writes a metrics CSV.
    Simulate(SimulateArgs),
    /// Ingest observations and write the weekly regional weights CSV.
    Densities(PipelineArgs),
    /// Fit the factor VAR to a weights CSV and write the fit as JSON.
    Fit(PipelineArgs),
    /// Select edges from a fit JSON and write the network as JSON and CSV.
    Network(NetworkArgs),
    /// Run ingest through network export in one go.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML sweep description (keys of the sweep plus a `[dgp]` table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Base seed; replication i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Factor counts, e.g. `5`, `0,2,4` or `0-8`.
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    fdr: Option<f64>,
    /// Number of replications per design.
    #[arg(long)]
    reps: Option<usize>,
    /// VAR strengths, e.g. `0,0.5,1`.
    #[arg(long)]
    alpha: Option<String>,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Observations CSV (densities, pipeline) or weights CSV (fit).
    #[arg(long)]
    input: PathBuf,
    /// Output file (densities, fit) or directory (pipeline).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Factor counts, e.g. `5`, `0,2,4` or `0-8`.
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    fdr: Option<f64>,
}

#[derive(Args)]
struct NetworkArgs {
    /// Fit JSON written by `fit`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Pipeline configuration supplying the FDR level and edge conventions.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fdr: Option<f64>,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| anyhow::anyhow!("invalid {what} '{s}'"))
        })
        .collect()
}

fn parse_factor_counts(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once('-') {
        let lo: usize = lo.trim().parse().context("invalid start of r range")?;
        let hi: usize = hi.trim().parse().context("invalid end of r range")?;
        if lo > hi {
            bail!("empty r range {text}");
        }
        return Ok((lo..=hi).collect());
    }
    let v = parse_list(text, "factor count")?;
    if v.is_empty() {
        bail!("no factor counts given");
    }
    Ok(v)
}

fn load_pipeline_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(r) = &args.r {
        cfg.r = FactorSweep::Many(parse_factor_counts(r)?);
    }
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    if let Some(q) = args.fdr {
        cfg.fdr = q;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::from_toml(&fs::read_to_string(path)?)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(r) = &args.r {
        cfg.factor_counts = parse_factor_counts(r)?;
    }
    if let Some(q) = args.fdr {
        cfg.fdr = q;
    }
    if let Some(n) = args.reps {
        cfg.n_reps = n;
    }
    if let Some(a) = &args.alpha {
        cfg.alphas = parse_list(a, "alpha")?;
    }
    log::info!(
        "sweep: {} alpha values x {} factor counts x {} replications",
        cfg.alphas.len(),
        cfg.factor_counts.len(),
        cfg.n_reps
    );
    let rows = run_sweep(&cfg)?;
    write_metrics_csv(&rows, BufWriter::new(create(&args.out)?))?;
    for row in &rows {
        println!(
            "alpha_v={:<4} r={} edges={:.2} recall={:.3} fdp={:.3} precision={:.3} ok={} failed={}",
            row.alpha_v,
            row.r,
            row.mean_edges,
            row.mean_recall,
            row.mean_fdp,
            row.mean_precision,
            row.n_reps,
            row.n_failures
        );
    }
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn densities(args: PipelineArgs) -> Result<()> {
    let cfg = load_pipeline_config(&args)?;
    let stage = estimate_densities(&cfg, &args.input)?;
    stage
        .weights
        .write_csv(BufWriter::new(create(&args.out)?))?;
    println!(
        "{} observations ({} outside support, {} outside window), {} weeks, {} regions -> {}",
        stage.observations,
        stage.dropped_out_of_support,
        stage.dropped_outside_window,
        stage.weights.weeks,
        stage.weights.regions,
        args.out.display()
    );
    Ok(())
}

fn fit(args: PipelineArgs) -> Result<()> {
    let cfg = load_pipeline_config(&args)?;
    let weights = WeeklyWeights::read_csv(
        File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?,
    )?;
    if weights.num_weights() != cfg.j + 1 {
        bail!(
            "weights file has {} components but the config implies J + 1 = {}",
            weights.num_weights(),
            cfg.j + 1
        );
    }
    let artifacts = fit_sweep(&cfg, &weights)?;
    serde_json::to_writer(BufWriter::new(create(&args.out)?), &artifacts)?;
    for art in &artifacts {
        match &art.outcome {
            FitOutcome::Fitted { fit, .. } => println!(
                "r={} iterations={} converged={} objective={:.6e}",
                art.r,
                fit.iterations,
                fit.converged,
                fit.objective_trace.last().copied().unwrap_or(f64::NAN)
            ),
            FitOutcome::Degenerate { .. } => {
                println!("r={} degenerate panel (all coefficients zero)", art.r)
            }
        }
    }
    Ok(())
}

fn network(args: NetworkArgs) -> Result<()> {
    let mut selection = match &args.config {
        Some(path) => PipelineConfig::load(path)?.selection(),
        None => densevar::EdgeSelection::at_level(0.05),
    };
    if let Some(q) = args.fdr {
        selection.fdr = q;
    }
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let artifacts: Vec<FitArtifact> = serde_json::from_str(&text).context("parsing fit JSON")?;
    fs::create_dir_all(&args.out)?;
    for art in &artifacts {
        let net = art.network(&selection)?;
        let (json, _) = write_network(&net, &art.labels, &args.out, art.r)?;
        println!(
            "r={} selected {} of {} tested edges -> {}",
            art.r,
            net.num_selected(),
            net.n_hypotheses,
            json.display()
        );
    }
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let cfg = load_pipeline_config(&args)?;
    let summary = run_analysis(&cfg, &args.input, &args.out)?;
    println!(
        "{} observations ({} outside support, {} outside window), {} weeks, {} regions",
        summary.observations,
        summary.dropped_out_of_support,
        summary.dropped_outside_window,
        summary.weeks,
        summary.regions
    );
    for m in &summary.per_r {
        println!(
            "r={} edges={} tested={} iterations={} converged={}",
            m.r, m.n_edges, m.n_hypotheses, m.iterations, m.converged
        );
    }
    println!("outputs written to {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Densities(a) => densities(a),
        Command::Fit(a) => fit(a),
        Command::Network(a) => network(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_count_syntax() {
        assert_eq!(parse_factor_counts("5").unwrap(), vec![5]);
        assert_eq!(parse_factor_counts("0,2, 4").unwrap(), vec![0, 2, 4]);
        assert_eq!(parse_factor_counts("0-3").unwrap(), vec![0, 1, 2, 3]);
        assert!(parse_factor_counts("3-1").is_err());
        assert!(parse_factor_counts("x").is_err());
        assert_eq!(
            parse_list::<f64>("0,0.5,1", "alpha").unwrap(),
            vec![0.0, 0.5, 1.0]
        );
    }
}

//! Command-line interface: simulate benchmark data, fit the measurement
//! model, discover the latent structure, run the full pipeline, sweep a
//! benchmark grid, and check measurement designs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use latent_causal::ges::{ges, BdeuConfig, ScoreKind};
use latent_causal::graphs::{composite_graph, dag_to_cpdag, GraphJson};
use latent_causal::identcheck;
use latent_causal::io;
use latent_causal::model::ResponseFamily;
use latent_causal::pipeline::{bench, run_pipeline, BenchGrid, PipelineConfig, SamplingRule};
use latent_causal::saem::{
    fit, InitKind, PenaltyKind, PenaltySpec, SaemConfig, StepSchedule,
};
use latent_causal::synth::{simulate, QKind, SimDesign};

#[derive(Parser)]
#[command(
    name = "latent-causal",
    about = "Causal structure learning for binary latents behind mixed-type measurements",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset (X.csv, Z.csv, params and truth graphs)
    Simulate(SimulateArgs),
    /// Fit the latent law, coefficients, and measurement graph from X.csv
    Fit(FitArgs),
    /// Run greedy equivalence search on a 0/1 latent matrix
    Discover(DiscoverArgs),
    /// Full estimate-resample-discover run on X.csv
    Pipeline(PipelineArgs),
    /// Replicate sweep over a benchmark grid; writes results.csv and summary.csv
    Bench(BenchArgs),
    /// Check identifiability conditions of a measurement matrix CSV
    CheckQ(CheckQArgs),
}

/// Optional JSON config; every CLI flag overrides its field.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    dag: Option<String>,
    q: Option<String>,
    family: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
    k: Option<usize>,
    lambda: Option<f64>,
    tau: Option<f64>,
    penalty: Option<String>,
    max_iter: Option<usize>,
    tol: Option<f64>,
    burn_in: Option<usize>,
    exponent: Option<f64>,
    init: Option<String>,
    f_mult: Option<f64>,
    score: Option<String>,
    ess: Option<f64>,
    replicates: Option<usize>,
    threads: Option<usize>,
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark DAG name (chain-5, tree-5, model-5, chain-10, tree-10,
    /// model-7, model-8, model-13)
    #[arg(long)]
    dag: Option<String>,
    /// Measurement design: q1 or q2
    #[arg(long)]
    q: Option<String>,
    /// Response family: gaussian, poisson, bernoulli, lognormal
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix; files are written as <prefix>X.csv, <prefix>Z.csv, ...
    #[arg(long, default_value = "")]
    out_prefix: String,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Observations CSV with a family-name header row
    #[arg(long)]
    data: PathBuf,
    /// Optional families schema (JSON array); overrides the CSV header
    #[arg(long)]
    families: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Penalty kind: tlp or scad
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initialization: spectral or random
    #[arg(long)]
    init: Option<String>,
    #[arg(long, default_value = "")]
    out_prefix: String,
}

#[derive(Args)]
struct DiscoverArgs {
    /// Latent matrix CSV (0/1 entries, no header)
    #[arg(long)]
    data: PathBuf,
    /// Score: bdeu or bic
    #[arg(long, default_value = "bdeu")]
    score: String,
    /// Equivalent sample size of the BDeu prior
    #[arg(long, default_value_t = 1.0)]
    ess: f64,
    /// Output path for the CPDAG JSON (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    families: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init: Option<String>,
    /// Resample-size multiple: f(N) = c N
    #[arg(long)]
    f_mult: Option<f64>,
    #[arg(long)]
    score: Option<String>,
    #[arg(long)]
    ess: Option<f64>,
    #[arg(long, default_value = "")]
    out_prefix: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated benchmark DAG names
    #[arg(long, value_delimiter = ',')]
    dags: Vec<String>,
    /// Comma-separated designs (q1, q2)
    #[arg(long, value_delimiter = ',')]
    qs: Vec<String>,
    /// Comma-separated families
    #[arg(long, value_delimiter = ',')]
    families: Vec<String>,
    /// Comma-separated sample sizes
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    f_mult: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CheckQArgs {
    /// Measurement matrix CSV (0/1 entries, no header)
    #[arg(long)]
    q: PathBuf,
}

fn prefixed(prefix: &str, name: &str) -> PathBuf {
    let p = format!("{prefix}{name}");
    if let Some(parent) = Path::new(&p).parent() {
        if !parent.as_os_str().is_empty() {
            let _ = std::fs::create_dir_all(parent);
        }
    }
    PathBuf::from(p)
}

#[allow(clippy::too_many_arguments)]
fn saem_config_from(
    k: usize,
    cfg: &FileConfig,
    lambda: Option<f64>,
    tau: Option<f64>,
    penalty: &Option<String>,
    max_iter: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
    init: &Option<String>,
) -> Result<SaemConfig> {
    let mut saem = SaemConfig::new(k);
    let lambda = lambda.or(cfg.lambda);
    let tau = tau.or(cfg.tau);
    let kind = match penalty.clone().or_else(|| cfg.penalty.clone()) {
        None => PenaltyKind::Tlp,
        Some(ref s) => match s.to_ascii_lowercase().as_str() {
            "tlp" => PenaltyKind::Tlp,
            "scad" => PenaltyKind::Scad,
            other => bail!("unknown penalty '{other}'"),
        },
    };
    if lambda.is_some() || tau.is_some() || penalty.is_some() || cfg.penalty.is_some() {
        // NaN fields are replaced by the sample-size defaults once the data
        // dimensions are known
        saem.penalty = Some(PenaltySpec {
            kind,
            lambda: lambda.unwrap_or(f64::NAN),
            tau: tau.unwrap_or(f64::NAN),
            scad_a: 3.7,
        });
    }
    if let Some(m) = max_iter.or(cfg.max_iter) {
        saem.max_iter = m;
    }
    if let Some(t) = tol.or(cfg.tol) {
        saem.tol = t;
    }
    if let Some(b) = cfg.burn_in {
        saem.schedule = StepSchedule { burn_in: b, ..saem.schedule };
    }
    if let Some(e) = cfg.exponent {
        saem.schedule = StepSchedule { exponent: e, ..saem.schedule };
    }
    saem.seed = seed.or(cfg.seed).unwrap_or(0);
    match init.clone().or_else(|| cfg.init.clone()).as_deref() {
        None | Some("spectral") => saem.init = InitKind::Spectral,
        Some("random") => saem.init = InitKind::Random,
        Some(other) => bail!("unknown init '{other}'"),
    }
    Ok(saem)
}

/// Fill NaN penalty fields with the sample-size defaults.
fn finalize_penalty(saem: &mut SaemConfig, n: usize, j: usize) {
    if let Some(p) = &mut saem.penalty {
        let default = PenaltySpec::default_for(n, j);
        if p.lambda.is_nan() {
            p.lambda = default.lambda;
        }
        if p.tau.is_nan() {
            p.tau = default.tau;
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let design = SimDesign {
        dag_name: args
            .dag
            .or(cfg.dag)
            .context("--dag is required (or set 'dag' in the config)")?,
        q_kind: QKind::parse(&args.q.or(cfg.q).unwrap_or_else(|| "q1".into()))?,
        family: ResponseFamily::parse(
            &args.family.or(cfg.family).unwrap_or_else(|| "gaussian".into()),
        )?,
        n: args.n.or(cfg.n).context("--n is required")?,
        seed: args.seed.or(cfg.seed).unwrap_or(0),
    };
    let (truth, z, x) = simulate(&design)?;
    let prefix = &args.out_prefix;
    io::write_x_csv(&prefixed(prefix, "X.csv"), &x, &truth.params.families)?;
    io::write_z_csv(&prefixed(prefix, "Z.csv"), &z)?;
    io::write_q_csv(&prefixed(prefix, "q.csv"), &truth.q)?;
    io::write_params_json(&prefixed(prefix, "params.json"), &truth.params)?;
    io::write_graph_json(&prefixed(prefix, "dag.json"), &GraphJson::from(&truth.dag))?;
    let cpdag = dag_to_cpdag(&truth.dag);
    io::write_graph_json(&prefixed(prefix, "cpdag.json"), &GraphJson::from(&cpdag))?;
    let composite = composite_graph(&cpdag, &truth.q)?;
    io::write_graph_json(&prefixed(prefix, "composite.json"), &GraphJson::from(&composite))?;
    eprintln!(
        "wrote {}X.csv ({} x {}), {}Z.csv, truth params and graphs",
        prefix,
        x.n(),
        x.j(),
        prefix
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let (x, header_families) = io::read_x_csv(&args.data)?;
    let families = match &args.families {
        Some(path) => io::read_families_schema(path)?,
        None => header_families,
    };
    let k = args.k.or(cfg.k).context("--k is required")?;
    let mut saem = saem_config_from(
        k,
        &cfg,
        args.lambda,
        args.tau,
        &args.penalty,
        args.max_iter,
        args.tol,
        args.seed,
        &args.init,
    )?;
    finalize_penalty(&mut saem, x.n(), x.j());
    let (params, q, diag) = fit(&x, k, &families, &saem)?;
    let prefix = &args.out_prefix;
    io::write_params_json(&prefixed(prefix, "params.json"), &params)?;
    io::write_q_csv(&prefixed(prefix, "q.csv"), &q)?;
    std::fs::write(
        prefixed(prefix, "diagnostics.json"),
        serde_json::to_string_pretty(&diag)?,
    )?;
    eprintln!(
        "fit: {} iterations, converged = {}, {:.1}s",
        diag.iterations, diag.converged, diag.seconds
    );
    Ok(())
}

fn cmd_discover(args: DiscoverArgs) -> Result<()> {
    let z = io::read_z_csv(&args.data)?;
    let kind = ScoreKind::parse(&args.score)?;
    let g = ges(&z, kind, &BdeuConfig { ess: args.ess })?;
    let json = serde_json::to_string_pretty(&GraphJson::from(&g))?;
    match &args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let (x, header_families) = io::read_x_csv(&args.data)?;
    let families = match &args.families {
        Some(path) => io::read_families_schema(path)?,
        None => header_families,
    };
    let k = args.k.or(cfg.k).context("--k is required")?;
    let mut saem = saem_config_from(
        k,
        &cfg,
        args.lambda,
        args.tau,
        &args.penalty,
        args.max_iter,
        args.tol,
        args.seed,
        &args.init,
    )?;
    finalize_penalty(&mut saem, x.n(), x.j());
    let mut config = PipelineConfig::new(k);
    config.saem = saem;
    let f_mult = args.f_mult.or(cfg.f_mult).unwrap_or(1.0);
    config.rule = if (f_mult - 1.0).abs() < 1e-12 {
        SamplingRule::Identity
    } else {
        SamplingRule::Multiple(f_mult)
    };
    config.score = ScoreKind::parse(&args.score.or(cfg.score).unwrap_or_else(|| "bdeu".into()))?;
    config.bdeu = BdeuConfig { ess: args.ess.or(cfg.ess).unwrap_or(1.0) };
    let result = run_pipeline(&x, k, &families, &config)?;
    let prefix = &args.out_prefix;
    io::write_params_json(&prefixed(prefix, "params.json"), &result.params)?;
    io::write_q_csv(&prefixed(prefix, "q.csv"), &result.q_hat)?;
    io::write_graph_json(&prefixed(prefix, "g.json"), &GraphJson::from(&result.g_hat))?;
    std::fs::write(
        prefixed(prefix, "diagnostics.json"),
        serde_json::to_string_pretty(&result.diagnostics)?,
    )?;
    eprintln!(
        "pipeline: fit {:.1}s, resample {:.2}s, discover {:.1}s; latent edges {}",
        result.timings.fit,
        result.timings.resample,
        result.timings.discover,
        result.g_hat.n_edges()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let qs = if args.qs.is_empty() { vec!["q1".to_string()] } else { args.qs.clone() };
    let families = if args.families.is_empty() {
        vec!["gaussian".to_string()]
    } else {
        args.families.clone()
    };
    if args.dags.is_empty() {
        bail!("--dags is required");
    }
    if args.ns.is_empty() {
        bail!("--ns is required");
    }
    let grid = BenchGrid {
        dags: args.dags.clone(),
        qs: qs.iter().map(|s| QKind::parse(s)).collect::<latent_causal::Result<_>>()?,
        families: families
            .iter()
            .map(|s| ResponseFamily::parse(s))
            .collect::<latent_causal::Result<_>>()?,
        ns: args.ns.clone(),
        replicates: args.replicates.or(cfg.replicates).unwrap_or(20),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
    };
    let mut base = PipelineConfig::new(1);
    if let Some(m) = args.max_iter.or(cfg.max_iter) {
        base.saem.max_iter = m;
    }
    let f_mult = args.f_mult.or(cfg.f_mult).unwrap_or(1.0);
    base.rule = if (f_mult - 1.0).abs() < 1e-12 {
        SamplingRule::Identity
    } else {
        SamplingRule::Multiple(f_mult)
    };
    let threads = args.threads.or(cfg.threads).unwrap_or(0);
    let report = bench(&grid, &base, threads)?;
    io::write_bench_csvs(&args.out_dir, &report)?;
    for s in &report.summary {
        println!(
            "{:10} {:3} {:10} N={:6}: mean SHD {:.3}, Q match {:.0}%, failures {}",
            s.dag,
            s.q,
            s.family,
            s.n,
            s.mean_shd,
            100.0 * s.q_match_rate,
            s.failures
        );
    }
    eprintln!("wrote {}/results.csv and summary.csv", args.out_dir.display());
    Ok(())
}

fn cmd_check_q(args: CheckQArgs) -> Result<()> {
    let q = io::read_q_csv(&args.q)?;
    let report = identcheck::report(&q);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Discover(args) => cmd_discover(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Bench(args) => cmd_bench(args),
        Command::CheckQ(args) => cmd_check_q(args),
    }
}

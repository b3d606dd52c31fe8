//! `sbm` — fit, simulate, Monte Carlo, and embed commands for stochastic
//! blockmodels with discrete nodal covariates.
//!
//! Exit codes: 0 success; 2 degenerate fit (empty cluster or collapsed
//! estimate); 1 any other error (bad input, parse failure, numerical
//! failure).

mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbm_core::error::Error;
use sbm_core::estimator::{self, Clusterer, EstimatorKind, FitOptions};
use sbm_core::graphio::{self, BinarizeRule, Graph};
use sbm_core::inference::Regime;
use sbm_core::model::LinkFunction;
use sbm_core::{config, simulate, spectral};

#[derive(Parser)]
#[command(
    name = "sbm",
    about = "Spectral estimation for stochastic blockmodels with nodal covariates",
    version
)]
struct Cli {
    /// Thread count for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Verbose progress output on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the spectral pipeline to an edge list and write a JSON report.
    Fit(FitArgs),
    /// Sample a network from a model spec config and write it to files.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo design and write a TSV summary.
    Montecarlo(MontecarloArgs),
    /// Write the adjacency spectral embedding as TSV.
    Embed(EmbedArgs),
}

#[derive(Args)]
struct GraphInput {
    /// Edge list file: one `u v` pair per line, `#` comments allowed.
    #[arg(long)]
    edges: PathBuf,
    /// Covariate table (CSV or TSV with a header row).
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Name of the node-ID column in the covariate table.
    #[arg(long, default_value = "id")]
    id_column: String,
    /// Binarization rule `column=one_value[,missing=VALUE]`; repeatable, the
    /// order fixes the covariate order.
    #[arg(long = "binarize")]
    binarize: Vec<String>,
    /// Drop nodes with missing covariates, then keep the largest connected
    /// component.
    #[arg(long)]
    lcc: bool,
    /// Degree-regularize the adjacency operator: A + (γ·d̄/n)·J.
    #[arg(long, value_name = "GAMMA")]
    regularize: Option<f64>,
}

#[derive(Args)]
struct FitOptionArgs {
    /// Number of latent blocks K.
    #[arg(long)]
    k: usize,
    /// Embedding dimension override (default: profile-likelihood selection).
    #[arg(long)]
    d: Option<usize>,
    /// Link function: identity | logit.
    #[arg(long, default_value = "identity")]
    link: String,
    /// β estimator: simple | weighted | both.
    #[arg(long, default_value = "both")]
    estimator: String,
    /// Clustering procedure: gmm | kmeans.
    #[arg(long, default_value = "gmm")]
    clusterer: String,
    /// RNG seed for clustering initializations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability clipping bound ε.
    #[arg(long, default_value_t = 1e-6)]
    clip_epsilon: f64,
    /// Use the sparse-regime plug-in formulas and ρ̂ rescaling.
    #[arg(long)]
    sparse: bool,
    /// Sparsity factor ρ̂ (default in sparse mode: observed edge density).
    #[arg(long)]
    rho: Option<f64>,
    /// Disable the hollow-diagonal bias correction.
    #[arg(long)]
    no_hollow_correction: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: GraphInput,
    #[command(flatten)]
    options: FitOptionArgs,
    /// Fit differential homophily (β₁, β₂) instead of a shared β; requires
    /// exactly one covariate.
    #[arg(long)]
    differential: bool,
    /// Output path for the JSON report (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write per-node assignments (id, expanded block, latent block) as
    /// TSV.
    #[arg(long)]
    assignments: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model spec config file (see docs/formats.md).
    #[arg(long)]
    spec: PathBuf,
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Sampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes PREFIX.edges, PREFIX.covariates.tsv,
    /// PREFIX.truth.tsv.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct MontecarloArgs {
    /// Design config file (model + design keys, see docs/formats.md).
    #[arg(long)]
    design: PathBuf,
    /// Output path for the TSV summary (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    input: GraphInput,
    /// Embedding dimension (default: profile-likelihood selection).
    #[arg(long)]
    d: Option<usize>,
    /// Output path for the TSV embedding (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot configure thread pool: {}", e);
            return ExitCode::from(1);
        }
    }
    let verbose = cli.verbose;
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args, verbose),
        Command::Simulate(args) => cmd_simulate(args, verbose),
        Command::Montecarlo(args) => cmd_montecarlo(args, verbose),
        Command::Embed(args) => cmd_embed(args, verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::DegenerateFit(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn parse_link(s: &str) -> Result<LinkFunction, Error> {
    match s {
        "identity" => Ok(LinkFunction::Identity),
        "logit" => Ok(LinkFunction::Logit),
        other => Err(Error::ConfigError(format!("unknown link `{}`", other))),
    }
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, Error> {
    match s {
        "simple" => Ok(EstimatorKind::SimpleMean),
        "weighted" => Ok(EstimatorKind::WeightedMean),
        "both" => Ok(EstimatorKind::Both),
        other => Err(Error::ConfigError(format!("unknown estimator `{}`", other))),
    }
}

fn parse_clusterer(s: &str) -> Result<Clusterer, Error> {
    match s {
        "gmm" => Ok(Clusterer::Gmm),
        "kmeans" => Ok(Clusterer::KMeans),
        other => Err(Error::ConfigError(format!("unknown clusterer `{}`", other))),
    }
}

fn parse_binarize_rule(s: &str) -> Result<BinarizeRule, Error> {
    let (column, rest) = s.split_once('=').ok_or_else(|| {
        Error::ConfigError(format!(
            "--binarize `{}`: expected column=one_value[,missing=VALUE]",
            s
        ))
    })?;
    let (one_value, missing_value) = match rest.split_once(",missing=") {
        Some((v, m)) => (v, Some(m.to_string())),
        None => (rest, None),
    };
    Ok(BinarizeRule {
        column: column.to_string(),
        one_value: one_value.to_string(),
        missing_value,
    })
}

struct LoadedGraph {
    graph: Graph,
    duplicates: usize,
    self_loops: usize,
    required: Vec<String>,
}

fn load_graph(input: &GraphInput, verbose: bool) -> Result<LoadedGraph, Error> {
    let (mut graph, warnings) = graphio::read_edge_list(&input.edges)?;
    if verbose {
        eprintln!(
            "loaded {} nodes, {} edges ({} duplicates, {} self-loops dropped)",
            graph.n,
            graph.edges.len(),
            warnings.duplicates,
            warnings.self_loops
        );
    }
    let rules: Vec<BinarizeRule> = input
        .binarize
        .iter()
        .map(|s| parse_binarize_rule(s))
        .collect::<Result<_, _>>()?;
    if let Some(path) = &input.covariates {
        if rules.is_empty() {
            return Err(Error::ConfigError(
                "--covariates given without any --binarize rule".into(),
            ));
        }
        graphio::read_covariates(&mut graph, path, &input.id_column, &rules)?;
    } else if !rules.is_empty() {
        return Err(Error::ConfigError(
            "--binarize given without --covariates".into(),
        ));
    }
    let required: Vec<String> = rules.iter().map(|r| r.column.clone()).collect();
    if input.lcc {
        let cols: Vec<&str> = required.iter().map(|s| s.as_str()).collect();
        graph = graphio::drop_missing_and_lcc(&graph, &cols)?;
        if verbose {
            eprintln!(
                "after missing-drop + LCC: {} nodes, {} edges",
                graph.n,
                graph.edges.len()
            );
        }
    }
    Ok(LoadedGraph {
        graph,
        duplicates: warnings.duplicates,
        self_loops: warnings.self_loops,
        required,
    })
}

fn build_fit_options(o: &FitOptionArgs) -> Result<FitOptions, Error> {
    Ok(FitOptions {
        k: o.k,
        d_hat: o.d,
        link: parse_link(&o.link)?,
        estimator: parse_estimator(&o.estimator)?,
        clusterer: parse_clusterer(&o.clusterer)?,
        seed: o.seed,
        clip_epsilon: o.clip_epsilon,
        regime: if o.sparse {
            Regime::Sparse
        } else {
            Regime::Dense
        },
        rho_hat: o.rho,
        hollow_correction: !o.no_hollow_correction,
    })
}

fn write_output(path: &Option<PathBuf>, contents: &str) -> Result<(), Error> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| Error::ParseError(format!("cannot write {}: {}", p.display(), e))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::ParseError(format!("cannot write stdout: {}", e)))
        }
    }
}

fn cmd_fit(args: FitArgs, verbose: bool) -> Result<(), Error> {
    let loaded = load_graph(&args.input, verbose)?;
    let opts = build_fit_options(&args.options)?;
    let t0 = std::time::Instant::now();
    let json = if args.differential {
        let fit = estimator::fit_differential_homophily(&loaded.graph, &opts)?;
        report::differential_report(&loaded, &opts, &fit, t0.elapsed().as_secs_f64())
    } else {
        let fit = run_fit(&loaded.graph, &args.input, &opts)?;
        if let Some(path) = &args.assignments {
            let mut tsv = String::from("id\texpanded_block\tlatent_block\n");
            for i in 0..loaded.graph.n {
                tsv.push_str(&format!(
                    "{}\t{}\t{}\n",
                    loaded.graph.node_ids[i], fit.block_fit.xi_hat[i], fit.block_fit.tau_hat[i]
                ));
            }
            std::fs::write(path, tsv).map_err(|e| {
                Error::ParseError(format!("cannot write {}: {}", path.display(), e))
            })?;
        }
        if verbose {
            eprintln!(
                "stage timings: embed {:.3}s, cluster {:.3}s, estimate {:.3}s",
                fit.timings.embed_s, fit.timings.cluster_s, fit.timings.estimate_s
            );
        }
        report::fit_report(&loaded, &opts, &fit, t0.elapsed().as_secs_f64())
    };
    write_output(&args.output, &serde_json::to_string_pretty(&json).unwrap())
}

/// Runs the pipeline, regularizing the adjacency operator first if requested.
fn run_fit(
    graph: &Graph,
    input: &GraphInput,
    opts: &FitOptions,
) -> Result<estimator::FitResult, Error> {
    match input.regularize {
        Some(gamma) => {
            if gamma < 0.0 {
                return Err(Error::InvalidInput("--regularize must be ≥ 0".into()));
            }
            let covs: Vec<Vec<u8>> = (0..graph.covariates.len())
                .map(|i| graph.covariate_values(i))
                .collect::<Result<_, _>>()?;
            let csr = graph.adjacency()?;
            let op = graphio::regularize_degrees(&csr, gamma);
            let density = if graph.n > 1 {
                2.0 * graph.edges.len() as f64 / (graph.n as f64 * (graph.n - 1) as f64)
            } else {
                0.0
            };
            estimator::fit_operator(&op, &covs, density, opts)
        }
        None => estimator::fit(graph, opts),
    }
}

fn cmd_simulate(args: SimulateArgs, verbose: bool) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.spec)
        .map_err(|e| Error::ParseError(format!("cannot read {}: {}", args.spec.display(), e)))?;
    let spec = config::parse_spec(&text)?;
    let sample = simulate::sample_graph(&spec, args.n, args.seed)?;
    let prefix = args.out_prefix.to_string_lossy();

    let edges_path = format!("{}.edges", prefix);
    let file = std::fs::File::create(&edges_path)
        .map_err(|e| Error::ParseError(format!("cannot write {}: {}", edges_path, e)))?;
    sample.graph.write_edge_list(std::io::BufWriter::new(file))?;

    let cov_path = format!("{}.covariates.tsv", prefix);
    let mut cov = String::from("id");
    for c in &sample.graph.covariates {
        cov.push('\t');
        cov.push_str(&c.name);
    }
    cov.push('\n');
    for i in 0..sample.graph.n {
        cov.push_str(&sample.graph.node_ids[i].to_string());
        for c in &sample.graph.covariates {
            cov.push('\t');
            match c.values[i] {
                Some(v) => cov.push_str(&v.to_string()),
                None => cov.push_str("NA"),
            }
        }
        cov.push('\n');
    }
    std::fs::write(&cov_path, cov)
        .map_err(|e| Error::ParseError(format!("cannot write {}: {}", cov_path, e)))?;

    let truth_path = format!("{}.truth.tsv", prefix);
    let mut truth = String::from("id\ttau\texpanded_block\n");
    for i in 0..sample.graph.n {
        truth.push_str(&format!(
            "{}\t{}\t{}\n",
            sample.graph.node_ids[i], sample.tau[i], sample.expanded[i]
        ));
    }
    std::fs::write(&truth_path, truth)
        .map_err(|e| Error::ParseError(format!("cannot write {}: {}", truth_path, e)))?;

    if verbose {
        eprintln!(
            "wrote {} nodes, {} edges to {}.{{edges,covariates.tsv,truth.tsv}}",
            sample.graph.n,
            sample.graph.edges.len(),
            prefix
        );
    }
    Ok(())
}

fn cmd_montecarlo(args: MontecarloArgs, verbose: bool) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.design)
        .map_err(|e| Error::ParseError(format!("cannot read {}: {}", args.design.display(), e)))?;
    let design = config::parse_design(&text)?;
    if verbose {
        eprintln!(
            "running design `{}`: n ∈ {:?}, {} replicates",
            design.name, design.n_values, design.replicates
        );
    }
    let summary = simulate::run_design(&design)?;
    let mut tsv =
        String::from("n\tcovariate\testimator\tabs_err\tmcse\tmean_ari\ttime_s\tdivergent\n");
    for row in &summary.rows {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.4}\t{:.3}\t{}\n",
            row.n,
            row.covariate + 1,
            report::variant_name(row.variant),
            row.mean_abs_err,
            row.mcse,
            row.mean_ari,
            row.mean_time_s,
            row.divergent
        ));
    }
    write_output(&args.output, tsv.trim_end())
}

fn cmd_embed(args: EmbedArgs, verbose: bool) -> Result<(), Error> {
    let loaded = load_graph(&args.input, verbose)?;
    let graph = &loaded.graph;
    let csr = graph.adjacency()?;
    let embedding = match args.input.regularize {
        Some(gamma) => {
            let op = graphio::regularize_degrees(&csr, gamma);
            embed_operator(&op, args.d)?
        }
        None => embed_operator(&csr, args.d)?,
    };
    let d = embedding.y.ncols();
    let mut tsv = String::from("id");
    for j in 0..d {
        tsv.push_str(&format!("\ty{}", j + 1));
    }
    tsv.push('\n');
    for i in 0..graph.n {
        tsv.push_str(&graph.node_ids[i].to_string());
        for j in 0..d {
            // 12 significant digits
            tsv.push_str(&format!("\t{:.11e}", embedding.y[(i, j)]));
        }
        tsv.push('\n');
    }
    if verbose {
        eprintln!(
            "embedded {} nodes into {} dimensions, signature ({}, {})",
            graph.n, d, embedding.signature.0, embedding.signature.1
        );
    }
    write_output(&args.output, tsv.trim_end())
}

fn embed_operator<M: sbm_core::sparse::SymOp>(
    a: &M,
    d: Option<usize>,
) -> Result<sbm_core::Embedding, Error> {
    let n = a.dim();
    let d = match d {
        Some(d) => d,
        None => {
            let scan = 20.min(n.saturating_sub(1)).max(2);
            let mags = spectral::ritz_magnitudes(a, scan)?;
            spectral::select_dimension(&mags, scan)?
        }
    };
    let sel = spectral::top_eigenpairs(a, d.min(n))?;
    Ok(spectral::embed_selection(&sel))
}

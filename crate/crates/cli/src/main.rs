//! prodgraph: build and query substitute/complementary product graphs
//! from behavior logs.
//!
//! Exit codes: 0 success, 1 validation or I/O error, 2 internal
//! consistency failure. Every build command writes its exact resolved
//! configuration next to its outputs, and every command is
//! deterministic given that configuration and its input files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use prodgraph::baselines::{top_k_baseline_sharded, Measure};
use prodgraph::eval::{build_cases, score, score_by_day, EvalOptions, SeedSelection};
use prodgraph::ingest::{parse_catalog, parse_log, CatalogBuilder, Dictionaries, ParseMode};
use prodgraph::labelprop::{propagate, ClusterAssignment, LpParams, SimilarityDigraph};
use prodgraph::model::{
    Action, BipartiteGraph, ClusterLabel, IdDictionary, ItemId, NeighborList, ScoredNeighbor,
};
use prodgraph::pipeline::{ShardPlan, TimingReport};
use prodgraph::surprise::{build_category_relevance, surprise_all_sharded, SurpriseParams};
use prodgraph::swing::{swing_all_sharded, SwingParams};
use prodgraph::tsv;
use prodgraph::{Error, Result};

#[derive(Parser)]
#[command(name = "prodgraph", version, about = "Product graph builder and evaluator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the substitute index from a click log.
    BuildSwing(BuildSwingArgs),
    /// Build a baseline similarity index from a click log.
    BuildBaseline(BuildBaselineArgs),
    /// Cluster items over a previously built substitute index.
    Cluster(ClusterArgs),
    /// Build the complementary index from a purchase log.
    BuildSurprise(BuildSurpriseArgs),
    /// Score an index against held-out behavior.
    Evaluate(EvaluateArgs),
    /// Look up one item's neighbors in an index directory.
    Query(QueryArgs),
}

#[derive(clap::Args)]
struct BuildSwingArgs {
    /// Click log: user \t item \t action \t epoch_seconds.
    #[arg(long)]
    clicks: PathBuf,
    /// Output directory for neighbors.tsv, config.json and timing.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Smoothing added to each user pair's shared-item count.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "top-k", default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Discount active users by 1/sqrt(click count).
    #[arg(long = "user-weighting", default_value_t = true, action = clap::ArgAction::Set)]
    user_weighting: bool,
    /// Ignore users with more clicks than this when pairing.
    #[arg(long = "max-user-degree")]
    max_user_degree: Option<usize>,
}

#[derive(clap::Args)]
struct BuildBaselineArgs {
    #[arg(long)]
    clicks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// cosine, jaccard, pearson or weighted-cf.
    #[arg(long)]
    measure: String,
    #[arg(long = "top-k", default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(clap::Args)]
struct ClusterArgs {
    /// Directory holding the substitute index (neighbors.tsv).
    #[arg(long = "swing-index")]
    swing_index: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Damping probability: updates apply when random() > beta.
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long = "rng-seed", default_value_t = 0)]
    rng_seed: u64,
    /// Neighbors per seed used for digraph edges (default: all stored).
    #[arg(long = "top-n")]
    top_n: Option<usize>,
}

#[derive(clap::Args)]
struct BuildSurpriseArgs {
    /// Purchase log; rows may carry an inline fifth category column.
    #[arg(long)]
    purchases: PathBuf,
    /// Catalog file: item \t category.
    #[arg(long)]
    catalog: PathBuf,
    /// Cluster directory from the cluster command. Omitting it forces
    /// omega = 1 (item-level scores only).
    #[arg(long)]
    clusters: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Blend weight between item-level and cluster-level scores.
    #[arg(long, default_value_t = 0.8)]
    omega: f64,
    /// Item-level scores need more than this many ordered co-purchasers.
    #[arg(long, default_value_t = 1)]
    gamma: u64,
    #[arg(long = "top-k", default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Index directory (neighbors.tsv) to score.
    #[arg(long)]
    index: PathBuf,
    /// Behavior log providing train/test sequences.
    #[arg(long)]
    events: PathBuf,
    /// Train/test boundary timestamp; test events are strictly after.
    #[arg(long)]
    split: u64,
    /// Prediction cutoff.
    #[arg(long)]
    k: usize,
    #[arg(long = "rng-seed", default_value_t = 0)]
    rng_seed: u64,
    /// Seed choice per user sequence: first or random.
    #[arg(long = "seed-selection", default_value = "first")]
    seed_selection: String,
    /// Write per-day metric rows to this TSV for plotting.
    #[arg(long = "emit-plot-data")]
    emit_plot_data: Option<PathBuf>,
    /// Optional directory for report.tsv and config.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// External item id to look up.
    #[arg(long)]
    item: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Internal(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildSwing(args) => build_swing(args),
        Command::BuildBaseline(args) => build_baseline(args),
        Command::Cluster(args) => cluster(args),
        Command::BuildSurprise(args) => build_surprise(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Query(args) => query(args),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_config<C: Serialize>(dir: &Path, config: &C) -> Result<()> {
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| Error::Internal(format!("config serialization: {e}")))?;
    write_file(&dir.join("config.json"), &format!("{json}\n"))
}

fn write_timing(dir: &Path, timing: &TimingReport) -> Result<()> {
    write_file(&dir.join("timing.tsv"), &timing.to_tsv())
}

fn load_clicks(path: &Path) -> Result<(BipartiteGraph, Dictionaries)> {
    let mut dicts = Dictionaries::new();
    let (events, report) = parse_log(path, ParseMode::Lenient, &mut dicts, None)?;
    if report.rejected > 0 {
        eprintln!("{report}");
    }
    let graph = BipartiteGraph::build(&events, Action::Click)?;
    Ok((graph, dicts))
}

#[derive(Serialize)]
struct SwingRunConfig {
    command: &'static str,
    clicks: String,
    out: String,
    alpha: f64,
    top_k: usize,
    shards: usize,
    workers: usize,
    user_weighting: bool,
    max_user_degree: Option<usize>,
}

fn build_swing(args: BuildSwingArgs) -> Result<()> {
    let (graph, dicts) = load_clicks(&args.clicks)?;
    let params = SwingParams {
        alpha: args.alpha,
        user_weighting: args.user_weighting,
        top_k: args.top_k,
        max_user_degree: args.max_user_degree,
        ordered_pairs: false,
    };
    let plan = ShardPlan::new(args.shards, args.workers)?;
    let (lists, timing) = swing_all_sharded(&graph, &params, &plan)?;

    ensure_dir(&args.out)?;
    tsv::write_neighbor_tsv(&args.out.join("neighbors.tsv"), &lists, &dicts.items)?;
    write_timing(&args.out, &timing)?;
    write_config(
        &args.out,
        &SwingRunConfig {
            command: "build-swing",
            clicks: args.clicks.display().to_string(),
            out: args.out.display().to_string(),
            alpha: args.alpha,
            top_k: args.top_k,
            shards: args.shards,
            workers: args.workers,
            user_weighting: args.user_weighting,
            max_user_degree: args.max_user_degree,
        },
    )?;
    println!(
        "swing index: {} seeds, {} edges, {} ms -> {}",
        lists.len(),
        lists.iter().map(NeighborList::len).sum::<usize>(),
        timing.total_millis,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct BaselineRunConfig {
    command: &'static str,
    clicks: String,
    out: String,
    measure: String,
    top_k: usize,
    shards: usize,
    workers: usize,
}

fn build_baseline(args: BuildBaselineArgs) -> Result<()> {
    let measure: Measure = args.measure.parse()?;
    if measure == Measure::Pearson {
        eprintln!(
            "warning: pearson needs explicit ratings; click data is binary, \
             so every pair is degenerate and the index will be empty"
        );
    }
    let (graph, dicts) = load_clicks(&args.clicks)?;
    let plan = ShardPlan::new(args.shards, args.workers)?;
    let (lists, timing) = top_k_baseline_sharded(&graph, measure, args.top_k, &plan)?;

    ensure_dir(&args.out)?;
    tsv::write_neighbor_tsv(&args.out.join("neighbors.tsv"), &lists, &dicts.items)?;
    write_timing(&args.out, &timing)?;
    write_config(
        &args.out,
        &BaselineRunConfig {
            command: "build-baseline",
            clicks: args.clicks.display().to_string(),
            out: args.out.display().to_string(),
            measure: measure.name().to_string(),
            top_k: args.top_k,
            shards: args.shards,
            workers: args.workers,
        },
    )?;
    println!(
        "{} index: {} seeds, {} edges, {} ms -> {}",
        measure.name(),
        lists.len(),
        lists.iter().map(NeighborList::len).sum::<usize>(),
        timing.total_millis,
        args.out.display()
    );
    Ok(())
}

/// Reads an index directory back into internal lists, interning item
/// names in file order (sorted by seed) so ids are reproducible.
fn load_index(dir: &Path) -> Result<(Vec<NeighborList>, IdDictionary)> {
    let by_seed = tsv::read_neighbor_tsv(&dir.join("neighbors.tsv"))?;
    let mut items = IdDictionary::new();
    let mut lists = Vec::with_capacity(by_seed.len());
    for (seed, neighbors) in &by_seed {
        let seed = ItemId(items.intern(seed));
        let entries = neighbors
            .iter()
            .map(|(name, score)| ScoredNeighbor {
                item: ItemId(items.intern(name)),
                score: *score,
            })
            .collect::<Vec<_>>();
        let k = entries.len();
        lists.push(NeighborList { seed, entries, k });
    }
    Ok((lists, items))
}

#[derive(Serialize)]
struct ClusterRunConfig {
    command: &'static str,
    swing_index: String,
    out: String,
    beta: f64,
    iterations: usize,
    rng_seed: u64,
    top_n: Option<usize>,
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let (lists, items) = load_index(&args.swing_index)?;
    let digraph = SimilarityDigraph::from_index(&lists, args.top_n);
    let params = LpParams {
        beta: args.beta,
        iterations: args.iterations,
        rng_seed: args.rng_seed,
        early_exit: false,
    };
    let assignment = propagate(&digraph, &params)?;

    ensure_dir(&args.out)?;
    tsv::write_cluster_tsv(&args.out.join("clusters.tsv"), &assignment, &items)?;
    write_config(
        &args.out,
        &ClusterRunConfig {
            command: "cluster",
            swing_index: args.swing_index.display().to_string(),
            out: args.out.display().to_string(),
            beta: args.beta,
            iterations: args.iterations,
            rng_seed: args.rng_seed,
            top_n: args.top_n,
        },
    )?;
    println!(
        "clusters: {} items in {} clusters -> {}",
        assignment.len(),
        assignment.distinct_labels(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SurpriseRunConfig {
    command: &'static str,
    purchases: String,
    catalog: String,
    clusters: Option<String>,
    out: String,
    omega: f64,
    effective_omega: f64,
    gamma: u64,
    top_k: usize,
    shards: usize,
    workers: usize,
    time_unit_secs: u64,
}

fn build_surprise(args: BuildSurpriseArgs) -> Result<()> {
    let mut dicts = Dictionaries::new();
    let mut builder = CatalogBuilder::new();
    let (events, report) = parse_log(
        &args.purchases,
        ParseMode::Lenient,
        &mut dicts,
        Some(&mut builder),
    )?;
    if report.rejected > 0 {
        eprintln!("{report}");
    }
    parse_catalog(&args.catalog, &mut dicts, &mut builder)?;
    let mut catalog = builder.finish();
    catalog.count_purchases(&events)?;

    let graph = BipartiteGraph::build(&events, Action::Purchase)?;
    let relevance = build_category_relevance(&events, &catalog)?;

    let clusters = match &args.clusters {
        None => None,
        Some(dir) => {
            let pairs = tsv::read_cluster_tsv(&dir.join("clusters.tsv"))?;
            Some(ClusterAssignment::from_pairs(pairs.into_iter().map(
                |(item, label)| {
                    (
                        ItemId(dicts.items.intern(&item)),
                        ClusterLabel(dicts.items.intern(&label)),
                    )
                },
            )))
        }
    };

    let params = SurpriseParams {
        omega: args.omega,
        gamma: args.gamma,
        time_unit_secs: 86_400,
        top_k: args.top_k,
        sqrt_denominator: false,
    };
    let plan = ShardPlan::new(args.shards, args.workers)?;
    let (lists, timing) =
        surprise_all_sharded(&graph, &catalog, &relevance, clusters.as_ref(), &params, &plan)?;
    let effective_omega = if clusters.is_some() { args.omega } else { 1.0 };

    ensure_dir(&args.out)?;
    tsv::write_surprise_tsv(&args.out.join("neighbors.tsv"), &lists, &dicts.items)?;
    tsv::write_category_report(
        &args.out.join("categories.tsv"),
        &relevance,
        &dicts.categories,
    )?;
    write_timing(&args.out, &timing)?;
    write_config(
        &args.out,
        &SurpriseRunConfig {
            command: "build-surprise",
            purchases: args.purchases.display().to_string(),
            catalog: args.catalog.display().to_string(),
            clusters: args.clusters.as_ref().map(|p| p.display().to_string()),
            out: args.out.display().to_string(),
            omega: args.omega,
            effective_omega,
            gamma: args.gamma,
            top_k: args.top_k,
            shards: args.shards,
            workers: args.workers,
            time_unit_secs: 86_400,
        },
    )?;
    println!(
        "surprise index: {} seeds, {} edges, {} ms -> {}",
        lists.iter().filter(|l| !l.is_empty()).count(),
        lists.iter().map(|l| l.entries.len()).sum::<usize>(),
        timing.total_millis,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluateRunConfig {
    command: &'static str,
    index: String,
    events: String,
    split: u64,
    k: usize,
    rng_seed: u64,
    seed_selection: String,
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let selection = match args.seed_selection.as_str() {
        "first" => SeedSelection::First,
        "random" => SeedSelection::Random,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown seed selection '{other}' (expected first or random)"
            )))
        }
    };
    let mut dicts = Dictionaries::new();
    let (events, report) = parse_log(&args.events, ParseMode::Lenient, &mut dicts, None)?;
    if report.rejected > 0 {
        eprintln!("{report}");
    }

    let by_seed = tsv::read_neighbor_tsv(&args.index.join("neighbors.tsv"))?;
    let mut index: BTreeMap<ItemId, Vec<ItemId>> = BTreeMap::new();
    for (seed, neighbors) in &by_seed {
        let seed = ItemId(dicts.items.intern(seed));
        let list = neighbors
            .iter()
            .map(|(name, _)| ItemId(dicts.items.intern(name)))
            .collect();
        index.insert(seed, list);
    }

    let opts = EvalOptions {
        k: args.k,
        selection,
        rng_seed: args.rng_seed,
    };
    let cases = build_cases(&events, &index, args.split, &opts)?;
    let metrics = score(&cases)?;

    println!("cases\t{}", metrics.case_count);
    println!("precision\t{}", metrics.precision);
    println!("recall\t{}", metrics.recall);
    println!("map_literal\t{}", metrics.map_literal);
    println!("ap_standard\t{}", metrics.ap_standard);

    if let Some(plot_path) = &args.emit_plot_data {
        let mut out = String::from("day\tprecision\trecall\tmap_literal\tap_standard\tcases\n");
        for (day, report) in score_by_day(&cases) {
            out.push_str(&format!(
                "{day}\t{}\t{}\t{}\t{}\t{}\n",
                report.precision,
                report.recall,
                report.map_literal,
                report.ap_standard,
                report.case_count
            ));
        }
        write_file(plot_path, &out)?;
    }

    if let Some(out_dir) = &args.out {
        ensure_dir(out_dir)?;
        let report_tsv = format!(
            "cases\t{}\nprecision\t{}\nrecall\t{}\nmap_literal\t{}\nap_standard\t{}\n",
            metrics.case_count,
            metrics.precision,
            metrics.recall,
            metrics.map_literal,
            metrics.ap_standard
        );
        write_file(&out_dir.join("report.tsv"), &report_tsv)?;
        write_config(
            out_dir,
            &EvaluateRunConfig {
                command: "evaluate",
                index: args.index.display().to_string(),
                events: args.events.display().to_string(),
                split: args.split,
                k: args.k,
                rng_seed: args.rng_seed,
                seed_selection: args.seed_selection.clone(),
            },
        )?;
    }
    Ok(())
}

fn query(args: QueryArgs) -> Result<()> {
    if args.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let by_seed = tsv::read_neighbor_tsv(&args.index.join("neighbors.tsv"))?;
    let Some(neighbors) = by_seed.get(&args.item) else {
        return Err(Error::InvalidParameter(format!(
            "item '{}' is not in the index",
            args.item
        )));
    };
    for (rank0, (neighbor, score)) in neighbors.iter().take(args.k).enumerate() {
        println!("{neighbor}\t{score}\t{}", rank0 + 1);
    }
    Ok(())
}

//! Command-line front end: `run` executes a benchmark, `summarize`
//! recomputes the summary table from a records CSV, and `inspect-tree`
//! shows how the selection tree partitions a labeled set.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::data::{load_csv, LabelColumn, PoolState};
use crate::error::{Error, Result};
use crate::harness::{
    apply_config_file, parse_label_column, parse_strategies, prepare_repeat, read_records_csv,
    run_experiment_on, summarize, write_records_csv, write_summary_csv, ExperimentConfig,
    SummaryRow,
};
use crate::seeding::{derive_seed, stage};
use crate::strategies::{ctal_plan, SelectionPlan, StrategyKind};

#[derive(Parser)]
#[command(
    name = "ctal",
    version,
    about = "Pool-based active learning benchmark with tree-guided budget allocation",
    long_about = "Runs pool-based active learning benchmarks: repeated train/test splits, \
                  batched label selection, and random-forest evaluation.\n\n\
                  Configuration comes from an optional `key = value` config file; \
                  command-line flags override file keys, and repeatable --set KEY=VALUE \
                  pairs are applied last."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark and write records.csv plus summary.csv.
    Run(RunArgs),
    /// Recompute the summary table from an existing records CSV.
    Summarize(SummarizeArgs),
    /// Fit the selection tree on one repeat's labeled set and dump its
    /// leaves and budget allocation.
    InspectTree(InspectTreeArgs),
}

/// Flags shared by the subcommands that load a dataset.
#[derive(Args)]
struct CommonArgs {
    /// Config file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dataset CSV path.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Label column, by header name or zero-based index.
    #[arg(long, value_name = "COLUMN")]
    label_col: Option<String>,
    /// Treat the first CSV row as data instead of a header.
    #[arg(long)]
    no_header: bool,
    /// Encoding of non-numeric feature columns: ordinal or one-hot.
    #[arg(long, value_name = "MODE")]
    categorical: Option<String>,
    /// Master seed everything derives from.
    #[arg(long)]
    seed: Option<u64>,
    /// Set any config key directly; applied after the other flags.
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated strategies to compare (rs, ctal-rs, ctal-divrep,
    /// irdm, qbc).
    #[arg(long, value_name = "LIST")]
    strategies: Option<String>,
    /// Randomly labeled samples before the first evaluation.
    #[arg(long)]
    n_init: Option<usize>,
    /// Labels added per active-selection round.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Final labeled-set size.
    #[arg(long)]
    max_budget: Option<usize>,
    /// Train/test splits to average over.
    #[arg(long)]
    repeats: Option<usize>,
    /// Fraction of the dataset held out for evaluation.
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Trees in the evaluation forest.
    #[arg(long)]
    n_trees: Option<usize>,
    /// Output directory for records.csv and summary.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Records CSV produced by `run`.
    #[arg(value_name = "RECORDS")]
    records: PathBuf,
    /// Summary CSV destination; defaults to summary.csv next to the
    /// records file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectTreeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Labeled-set size the tree is fitted on.
    #[arg(long, default_value_t = 20)]
    labeled: usize,
    /// Active-batch size whose leaf allocation is shown.
    #[arg(long, default_value_t = 20)]
    batch: usize,
    /// Repeat index whose split and initial labels are used.
    #[arg(long, default_value_t = 0)]
    repeat: usize,
}

/// Parses `argv` and executes the chosen subcommand, returning the process
/// exit code: 0 on success (including `--help` and `--version`), 1 on
/// usage or configuration errors, 2 on data errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::InspectTree(args) => cmd_inspect_tree(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Usage and configuration problems exit with 1, anything rooted in the
/// data (unreadable files, malformed CSV, impossible budgets) with 2.
fn exit_code(error: &Error) -> i32 {
    match error {
        Error::InvalidConfig(_)
        | Error::ConfigFile { .. }
        | Error::UnknownStrategy { .. }
        | Error::InvalidTestFraction(_) => 1,
        _ => 2,
    }
}

/// Builds the experiment config from the file (if any) and the shared
/// flags, then applies `--set` pairs last.
fn build_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::new(PathBuf::new(), LabelColumn::Name(String::new()));
    if let Some(path) = &common.config {
        apply_config_file(&mut config, path)?;
    }
    if let Some(data) = &common.data {
        config.data_path = data.clone();
    }
    if let Some(label_col) = &common.label_col {
        config.csv_options.label_column = parse_label_column(label_col);
    }
    if common.no_header {
        config.csv_options.has_header = false;
    }
    if let Some(mode) = &common.categorical {
        config.apply_key("categorical_mode", mode)?;
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn apply_set_pairs(config: &mut ExperimentConfig, pairs: &[String]) -> Result<()> {
    for pair in pairs {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "--set expects KEY=VALUE, got {pair:?}"
            )));
        };
        config.apply_key(key.trim(), value.trim())?;
    }
    Ok(())
}

fn require_dataset(config: &ExperimentConfig) -> Result<()> {
    if config.data_path.as_os_str().is_empty() {
        return Err(Error::InvalidConfig(
            "missing dataset path: pass --data or set `data` in the config file".into(),
        ));
    }
    if config.csv_options.label_column == LabelColumn::Name(String::new()) {
        return Err(Error::InvalidConfig(
            "missing label column: pass --label-col or set `label_column` in the config file"
                .into(),
        ));
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = build_config(&args.common)?;
    if let Some(list) = &args.strategies {
        config.strategies = parse_strategies(list)?;
    }
    if let Some(n_init) = args.n_init {
        config.n_init = n_init;
    }
    if let Some(batch_size) = args.batch_size {
        config.batch_size = batch_size;
    }
    if let Some(max_budget) = args.max_budget {
        config.max_budget = max_budget;
    }
    if let Some(repeats) = args.repeats {
        config.n_repeats = repeats;
    }
    if let Some(test_fraction) = args.test_fraction {
        config.test_fraction = test_fraction;
    }
    if let Some(n_trees) = args.n_trees {
        config.forest_params.n_trees = n_trees;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    apply_set_pairs(&mut config, &args.common.set)?;
    require_dataset(&config)?;
    config.validate()?;

    let dataset = load_csv(&config.data_path, &config.csv_options)?;
    let table = run_experiment_on(&dataset, &config)?;

    std::fs::create_dir_all(&config.output_dir).map_err(|source| Error::Io {
        path: config.output_dir.clone(),
        source,
    })?;
    let records_path = config.output_dir.join("records.csv");
    let summary_path = config.output_dir.join("summary.csv");
    write_records_csv(&records_path, &table.records)?;
    write_summary_csv(&summary_path, &table.summary)?;

    println!(
        "wrote {} ({} records) and {}",
        records_path.display(),
        table.records.len(),
        summary_path.display()
    );
    print!("{}", summary_table(&table.summary));
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let records = read_records_csv(&args.records)?;
    let summary = summarize(&records);
    let out = args.out.clone().unwrap_or_else(|| {
        args.records
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("summary.csv")
    });
    write_summary_csv(&out, &summary)?;
    println!("wrote {}", out.display());
    print!("{}", summary_table(&summary));
    Ok(())
}

fn cmd_inspect_tree(args: InspectTreeArgs) -> Result<()> {
    if args.labeled == 0 {
        return Err(Error::InvalidConfig("--labeled must be at least 1".into()));
    }
    if args.batch == 0 {
        return Err(Error::InvalidConfig("--batch must be at least 1".into()));
    }
    let mut config = build_config(&args.common)?;
    apply_set_pairs(&mut config, &args.common.set)?;
    require_dataset(&config)?;
    config.tree_params.validate()?;
    config.n_init = args.labeled;
    config.max_budget = args.labeled;

    let dataset = load_csv(&config.data_path, &config.csv_options)?;
    let setup = prepare_repeat(&dataset, &config, args.repeat)?;
    let mut pool = PoolState::new(&setup.train_indices);
    pool.label(&setup.initial_labeled);
    let labeled = pool.labeled_vec();
    let labeled_labels: Vec<usize> = labeled.iter().map(|&i| dataset.labels[i]).collect();

    let strategy = config.strategy_config(StrategyKind::CtalRs);
    let plan = ctal_plan(
        setup.features.view(),
        &pool,
        &labeled_labels,
        dataset.n_classes,
        args.batch,
        &strategy,
        derive_seed(setup.repeat_seed, &[stage::SELECT]),
    )?;

    println!(
        "{}: {} samples, {} features, {} classes",
        dataset.name,
        dataset.n_samples(),
        dataset.n_features(),
        dataset.n_classes
    );
    println!(
        "repeat {}: {} pool / {} test, {} labeled, batch {}",
        args.repeat,
        setup.train_indices.len(),
        setup.test_indices.len(),
        labeled.len(),
        args.batch
    );
    println!();
    print!("{}", plan.tree.dump_text());
    println!();
    print!("{}", leaf_table(&plan));
    Ok(())
}

/// Renders summary rows as a fixed-width table with three-decimal values.
/// Flags: `*` marks the best mean at a budget, `=` a strategy not
/// significantly different from it.
fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<14} {:>6} {:>7} {:>7} {:>9}  flags",
        "strategy", "budget", "mean", "std", "p_vs_best"
    )
    .expect("writing to a string cannot fail");
    for row in rows {
        let mut flags = String::new();
        if row.is_best {
            flags.push('*');
        }
        if row.is_equivalent {
            flags.push('=');
        }
        writeln!(
            out,
            "{:<14} {:>6} {:>7.3} {:>7.3} {:>9.3}  {}",
            row.strategy, row.budget, row.mean, row.std, row.p_vs_best, flags
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// Renders the per-leaf statistics and budget split of a selection plan.
fn leaf_table(plan: &SelectionPlan) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:>4} {:>8} {:>10} {:>5} {:>8} {:>8} {:>6}",
        "leaf", "labeled", "unlabeled", "pure", "entropy", "density", "batch"
    )
    .expect("writing to a string cannot fail");
    for stat in &plan.leaf_stats {
        writeln!(
            out,
            "{:>4} {:>8} {:>10} {:>5} {:>8.3} {:>8.3} {:>6}",
            stat.leaf_id,
            stat.labeled_indices.len(),
            stat.unlabeled_indices.len(),
            if stat.is_pure { "yes" } else { "no" },
            stat.entropy,
            stat.density,
            stat.allocation
        )
        .expect("writing to a string cannot fail");
    }
    writeln!(
        out,
        "batch split: {} to pure leaves, {} to impure leaves",
        plan.allocation.n_pure_group, plan.allocation.n_impure_group
    )
    .expect("writing to a string cannot fail");
    out
}

//! Benchmark loop tying the pieces together: repeated train/test splits,
//! an initial random labeling, batched active selection with retraining,
//! forest evaluation at every budget level, and summary statistics with
//! significance flags.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::data::{
    load_csv, train_test_split, CategoricalMode, CsvOptions, Dataset, LabelColumn, PoolState,
    Standardizer,
};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, FeaturesPerSplit, ForestParams};
use crate::metrics::{balanced_accuracy, wilcoxon_rank_sum};
use crate::seeding::{derive_seed, stage};
use crate::strategies::{
    ctal_select, irdm_select, qbc_select, random_select, AllocationParams, AllocationScope,
    InLeafSampling, StrategyConfig, StrategyKind,
};
use crate::tree::TreeParams;

/// Environment variable controlling how many worker threads run repeats.
/// Unset means one worker per available core.
pub const WORKERS_ENV: &str = "CTAL_WORKERS";

/// Column header line of a records CSV.
pub const RECORDS_HEADER: &str = "strategy,repeat,budget,balanced_accuracy,wall_time_s";

/// Column header line of a summary CSV.
pub const SUMMARY_HEADER: &str = "strategy,budget,mean,std,p_vs_best,is_best,is_equivalent";

/// Full description of a benchmark run: dataset location and parsing,
/// the strategies to compare, the labeling schedule, the evaluator, and
/// the master seed everything derives from.
///
/// Strategy-level knobs (selection-tree leaf size, committee size, budget
/// allocation) are stored once here and applied to every configured
/// strategy via [`ExperimentConfig::strategy_configs`].
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    pub csv_options: CsvOptions,
    pub strategies: Vec<StrategyKind>,
    /// Number of randomly labeled samples before the first evaluation.
    pub n_init: usize,
    /// Labels added per active-selection round.
    pub batch_size: usize,
    /// Final labeled-set size; `max_budget - n_init` must be a multiple of
    /// `batch_size`.
    pub max_budget: usize,
    /// Independent train/test splits to average over.
    pub n_repeats: usize,
    pub test_fraction: f64,
    /// Evaluation forest.
    pub forest_params: ForestParams,
    /// Selection-tree and committee-tree limits.
    pub tree_params: TreeParams,
    pub allocation: AllocationParams,
    pub qbc_committee_size: usize,
    pub divrep_max_rounds: usize,
    pub master_seed: u64,
    /// Directory receiving `records.csv` and `summary.csv`.
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Builds a config with the benchmark defaults: every strategy, 20
    /// initial labels, batches of 20 up to 200, 100 repeats, an 80/20
    /// split, and a 50-tree evaluation forest.
    pub fn new(data_path: impl Into<PathBuf>, label_column: LabelColumn) -> Self {
        Self {
            data_path: data_path.into(),
            csv_options: CsvOptions::new(label_column),
            strategies: StrategyKind::ALL.to_vec(),
            n_init: 20,
            batch_size: 20,
            max_budget: 200,
            n_repeats: 100,
            test_fraction: 0.2,
            forest_params: ForestParams::default(),
            tree_params: TreeParams {
                min_samples_leaf: 10,
                max_depth: None,
            },
            allocation: AllocationParams::default(),
            qbc_committee_size: 10,
            divrep_max_rounds: 10,
            master_seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }

    /// Checks the schedule arithmetic and every numeric knob.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::InvalidConfig(message));
        if self.strategies.is_empty() {
            return fail("strategies: expected at least one identifier".into());
        }
        for (i, kind) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(kind) {
                return fail(format!("duplicate strategy {kind}"));
            }
        }
        if self.n_init == 0 {
            return fail("n_init must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.max_budget < self.n_init {
            return fail(format!(
                "max_budget {} is smaller than n_init {}",
                self.max_budget, self.n_init
            ));
        }
        if !(self.max_budget - self.n_init).is_multiple_of(self.batch_size) {
            return fail(format!(
                "max_budget - n_init = {} is not a multiple of batch_size {}",
                self.max_budget - self.n_init,
                self.batch_size
            ));
        }
        if self.n_repeats == 0 {
            return fail("n_repeats must be at least 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidTestFraction(self.test_fraction));
        }
        if self.forest_params.n_trees == 0 {
            return fail("n_trees must be at least 1".into());
        }
        if self.forest_params.min_samples_leaf == 0 {
            return fail("forest_min_samples_leaf must be at least 1".into());
        }
        self.tree_params.validate()?;
        if self.qbc_committee_size < 2 {
            return fail("qbc_committee_size must be at least 2".into());
        }
        if self.divrep_max_rounds == 0 {
            return fail("divrep_max_rounds must be at least 1".into());
        }
        if !(self.allocation.impure_bias.is_finite() && self.allocation.impure_bias > 0.0) {
            return fail(format!(
                "impure_bias must be a positive finite number, got {}",
                self.allocation.impure_bias
            ));
        }
        Ok(())
    }

    /// Labeled-set sizes at which evaluation happens, in order. Empty when
    /// the schedule fields are inconsistent; [`validate`](Self::validate)
    /// reports the reason.
    pub fn budget_schedule(&self) -> Vec<usize> {
        if self.batch_size == 0 || self.max_budget < self.n_init {
            return Vec::new();
        }
        (self.n_init..=self.max_budget)
            .step_by(self.batch_size)
            .collect()
    }

    /// Materializes the [`StrategyConfig`] for one strategy kind using
    /// this config's strategy-level knobs.
    pub fn strategy_config(&self, kind: StrategyKind) -> StrategyConfig {
        let mut sc = StrategyConfig::new(kind);
        sc.tree_params = self.tree_params.clone();
        sc.qbc_committee_size = self.qbc_committee_size;
        sc.divrep_max_rounds = self.divrep_max_rounds;
        sc.allocation = self.allocation.clone();
        sc
    }

    /// Materializes one [`StrategyConfig`] per configured strategy, all
    /// sharing this config's strategy-level knobs.
    pub fn strategy_configs(&self) -> Vec<StrategyConfig> {
        self.strategies
            .iter()
            .map(|&kind| self.strategy_config(kind))
            .collect()
    }

    /// Sets one configuration field from its textual key and value. The
    /// same keys work in config files and as CLI flag targets; flags are
    /// applied after the file so they win.
    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "data" => self.data_path = PathBuf::from(value),
            "label_column" => self.csv_options.label_column = parse_label_column(value),
            "categorical_mode" => {
                self.csv_options.categorical_mode = match value {
                    "ordinal" => CategoricalMode::Ordinal,
                    "one-hot" => CategoricalMode::OneHot,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "categorical_mode: expected `ordinal` or `one-hot`, got {value:?}"
                        )))
                    }
                }
            }
            "has_header" => self.csv_options.has_header = parse_value(key, value)?,
            "strategies" => self.strategies = parse_strategies(value)?,
            "n_init" => self.n_init = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "max_budget" => self.max_budget = parse_value(key, value)?,
            "n_repeats" => self.n_repeats = parse_value(key, value)?,
            "test_fraction" => self.test_fraction = parse_value(key, value)?,
            "n_trees" => self.forest_params.n_trees = parse_value(key, value)?,
            "forest_min_samples_leaf" => {
                self.forest_params.min_samples_leaf = parse_value(key, value)?
            }
            "bootstrap" => self.forest_params.bootstrap = parse_value(key, value)?,
            "features_per_split" => {
                self.forest_params.features_per_split = match value {
                    "sqrt" => FeaturesPerSplit::Sqrt,
                    "all" => FeaturesPerSplit::All,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "features_per_split: expected `sqrt` or `all`, got {value:?}"
                        )))
                    }
                }
            }
            "tree_min_samples_leaf" => self.tree_params.min_samples_leaf = parse_value(key, value)?,
            "tree_max_depth" => {
                self.tree_params.max_depth = if value == "none" {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "impure_bias" => self.allocation.impure_bias = parse_value(key, value)?,
            "allocation_scope" => {
                self.allocation.scope = match value {
                    "per-group" => AllocationScope::PerGroup,
                    "global" => AllocationScope::Global,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "allocation_scope: expected `per-group` or `global`, got {value:?}"
                        )))
                    }
                }
            }
            "qbc_committee_size" => self.qbc_committee_size = parse_value(key, value)?,
            "divrep_max_rounds" => self.divrep_max_rounds = parse_value(key, value)?,
            "seed" => self.master_seed = parse_value(key, value)?,
            "output" => self.output_dir = PathBuf::from(value),
            _ => return Err(Error::InvalidConfig(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

/// Interprets a label-column argument: a non-negative integer selects by
/// position, anything else selects by header name.
pub fn parse_label_column(value: &str) -> LabelColumn {
    match value.parse::<usize>() {
        Ok(index) => LabelColumn::Index(index),
        Err(_) => LabelColumn::Name(value.to_string()),
    }
}

/// Parses a comma-separated strategy list, rejecting unknown identifiers
/// and duplicates.
pub fn parse_strategies(value: &str) -> Result<Vec<StrategyKind>> {
    let mut kinds = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let kind: StrategyKind = part.parse()?;
        if kinds.contains(&kind) {
            return Err(Error::InvalidConfig(format!("duplicate strategy {kind}")));
        }
        kinds.push(kind);
    }
    if kinds.is_empty() {
        return Err(Error::InvalidConfig(
            "strategies: expected at least one identifier".into(),
        ));
    }
    Ok(kinds)
}

/// Applies a flat `key = value` config text to `config`, in line order.
/// Lines that are blank or start with `#` are skipped.
pub fn apply_config_text(config: &mut ExperimentConfig, text: &str) -> Result<()> {
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {line_no}: expected `key = value`, found {trimmed:?}"
            )));
        };
        config
            .apply_key(key.trim(), value.trim())
            .map_err(|e| Error::InvalidConfig(format!("line {line_no}: {}", config_message(e))))?;
    }
    Ok(())
}

/// Reads a config file and applies it to `config`.
pub fn apply_config_file(config: &mut ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    apply_config_text(config, &text).map_err(|e| Error::ConfigFile {
        path: path.to_path_buf(),
        message: config_message(e),
    })
}

/// Unwraps the message of a config error so nesting does not stack
/// "invalid configuration:" prefixes.
fn config_message(e: Error) -> String {
    match e {
        Error::InvalidConfig(message) => message,
        other => other.to_string(),
    }
}

/// One evaluation point: a strategy's balanced accuracy at one labeled-set
/// size within one repeat, plus the wall-clock seconds the selection and
/// evaluation for that point took.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: String,
    pub repeat: usize,
    pub budget: usize,
    pub balanced_accuracy: f64,
    pub wall_time_s: f64,
}

/// One `(strategy, budget)` aggregate over repeats. `p_vs_best` is the
/// two-sided rank-sum p-value against the best-mean strategy at the same
/// budget; the best row itself carries `p_vs_best = 1.0`. A strategy is
/// `is_equivalent` when it is not significantly different from the best at
/// the 0.05 level.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub budget: usize,
    pub mean: f64,
    pub std: f64,
    pub p_vs_best: f64,
    pub is_best: bool,
    pub is_equivalent: bool,
}

/// All records of an experiment plus their summary.
#[derive(Debug, Clone)]
pub struct ResultsTable {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Everything a repeat shares across strategies: the split, the initial
/// labeled set, and the feature matrix standardized on the training pool.
/// Building this once per repeat is what keeps strategy comparisons
/// paired.
#[derive(Debug, Clone)]
pub struct RepeatSetup {
    pub repeat_seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub initial_labeled: Vec<usize>,
    /// Standardized copy of the full feature matrix (fit on the training
    /// pool only, so test rows leak nothing into the transform).
    pub features: Array2<f64>,
}

/// Splits, standardizes, and draws the initial labeled set for one repeat.
/// Deterministic in `(dataset, config.master_seed, repeat)` and
/// independent of any strategy.
pub fn prepare_repeat(
    dataset: &Dataset,
    config: &ExperimentConfig,
    repeat: usize,
) -> Result<RepeatSetup> {
    let repeat_seed = derive_seed(config.master_seed, &[repeat as u64]);
    let (train_indices, test_indices) = train_test_split(
        dataset,
        config.test_fraction,
        derive_seed(repeat_seed, &[stage::SPLIT]),
    )?;
    if config.max_budget > train_indices.len() {
        return Err(Error::BudgetExceedsPool {
            budget: config.max_budget,
            pool: train_indices.len(),
        });
    }
    let standardizer = Standardizer::fit(dataset.features.view(), &train_indices)?;
    let features = standardizer.transform(dataset.features.view());
    let pool = PoolState::new(&train_indices);
    let initial_labeled =
        random_select(&pool, config.n_init, derive_seed(repeat_seed, &[stage::INIT]));
    Ok(RepeatSetup {
        repeat_seed,
        train_indices,
        test_indices,
        initial_labeled,
        features,
    })
}

/// Stable tag mixed into a strategy's seed derivations (FNV-1a over the
/// strategy identifier), so adding or reordering strategies in a config
/// never shifts another strategy's random stream.
fn strategy_tag(kind: StrategyKind) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in kind.id().bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Fits the evaluation forest on `train_rows` and scores balanced accuracy
/// on `test_rows`.
fn evaluate_budget(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    train_rows: &[usize],
    test_rows: &[usize],
    params: &ForestParams,
    rng_seed: u64,
) -> Result<f64> {
    let forest = fit_forest(features, labels, train_rows, n_classes, params, rng_seed)?;
    let predictions = forest.predict_rows(features, test_rows)?;
    let truth: Vec<usize> = test_rows.iter().map(|&i| labels[i]).collect();
    balanced_accuracy(&truth, &predictions, n_classes)
}

/// Retries a failed selection with uniform random sampling when the
/// failure is an unfittable selection or committee tree (too few labels
/// for the leaf-size floor); anything else propagates.
fn with_random_fallback(
    outcome: Result<Vec<usize>>,
    pool: &PoolState,
    k: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    match outcome {
        Err(Error::UnfittableTree { .. }) => Ok(random_select(pool, k, rng_seed)),
        other => other,
    }
}

/// Runs one strategy through the full labeling schedule of one repeat and
/// returns a record per budget level.
///
/// Each round evaluates the current labeled set, then queries the next
/// batch, so the budgets seen are exactly `config.budget_schedule()`. The
/// stateless iRDM strategy instead reselects its whole training set from
/// the pristine pool at every budget. All randomness is derived from
/// `(master_seed, repeat)` plus the strategy's own identifier.
pub fn run_single(
    dataset: &Dataset,
    strategy: &StrategyConfig,
    config: &ExperimentConfig,
    repeat: usize,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let setup = prepare_repeat(dataset, config, repeat)?;
    run_prepared(dataset, &setup, strategy, config, repeat)
}

fn run_prepared(
    dataset: &Dataset,
    setup: &RepeatSetup,
    strategy: &StrategyConfig,
    config: &ExperimentConfig,
    repeat: usize,
) -> Result<Vec<RunRecord>> {
    let features = setup.features.view();
    let labels = &dataset.labels;
    let n_classes = dataset.n_classes;
    let schedule = config.budget_schedule();
    let tag = strategy_tag(strategy.kind);
    let test_set: HashSet<usize> = setup.test_indices.iter().copied().collect();
    let mut records = Vec::with_capacity(schedule.len());

    let mut record = |budget: usize, train_rows: &[usize], started: Instant| -> Result<()> {
        assert!(
            train_rows.iter().all(|i| !test_set.contains(i)),
            "test indices leaked into the training set"
        );
        let accuracy = evaluate_budget(
            features,
            labels,
            n_classes,
            train_rows,
            &setup.test_indices,
            &config.forest_params,
            derive_seed(setup.repeat_seed, &[tag, stage::EVAL, budget as u64]),
        )?;
        records.push(RunRecord {
            strategy: strategy.kind.id().to_string(),
            repeat,
            budget,
            balanced_accuracy: accuracy,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        Ok(())
    };

    if strategy.kind == StrategyKind::Irdm {
        // Stateless path: every budget reselects its whole training set
        // from the untouched pool, so earlier picks are discarded.
        let pool = PoolState::new(&setup.train_indices);
        for &budget in &schedule {
            let started = Instant::now();
            let chosen = irdm_select(
                features,
                &pool,
                budget,
                derive_seed(setup.repeat_seed, &[tag, stage::SELECT, budget as u64]),
                strategy.divrep_max_rounds,
            )?;
            record(budget, &chosen, started)?;
        }
        return Ok(records);
    }

    let mut pool = PoolState::new(&setup.train_indices);
    pool.label(&setup.initial_labeled);
    for &budget in &schedule {
        let started = Instant::now();
        if budget > pool.n_labeled() {
            let k = budget - pool.n_labeled();
            let select_seed = derive_seed(setup.repeat_seed, &[tag, stage::SELECT, budget as u64]);
            let labeled = pool.labeled_vec();
            let labeled_labels: Vec<usize> = labeled.iter().map(|&i| labels[i]).collect();
            let batch = match strategy.kind {
                StrategyKind::Rs => random_select(&pool, k, select_seed),
                StrategyKind::CtalRs => with_random_fallback(
                    ctal_select(
                        features,
                        &pool,
                        &labeled_labels,
                        n_classes,
                        k,
                        InLeafSampling::Random,
                        strategy,
                        select_seed,
                    ),
                    &pool,
                    k,
                    select_seed,
                )?,
                StrategyKind::CtalDivrep => with_random_fallback(
                    ctal_select(
                        features,
                        &pool,
                        &labeled_labels,
                        n_classes,
                        k,
                        InLeafSampling::DivRep,
                        strategy,
                        select_seed,
                    ),
                    &pool,
                    k,
                    select_seed,
                )?,
                StrategyKind::Qbc => with_random_fallback(
                    qbc_select(
                        features,
                        &pool,
                        &labeled_labels,
                        n_classes,
                        k,
                        strategy,
                        select_seed,
                    ),
                    &pool,
                    k,
                    select_seed,
                )?,
                StrategyKind::Irdm => unreachable!("handled by the stateless path"),
            };
            pool.label(&batch);
            assert_eq!(pool.n_labeled(), budget, "selection under-delivered");
        }
        record(budget, &pool.labeled_vec(), started)?;
    }
    Ok(records)
}

fn parse_worker_count(raw: &str) -> Result<usize> {
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))
    })?;
    if n == 0 {
        return Err(Error::InvalidConfig(format!(
            "{WORKERS_ENV} must be at least 1"
        )));
    }
    Ok(n)
}

fn configured_workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => parse_worker_count(&raw).map(Some),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::InvalidConfig(format!("{WORKERS_ENV}: {e}"))),
    }
}

/// Loads the configured dataset and runs the full experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsTable> {
    let dataset = load_csv(&config.data_path, &config.csv_options)?;
    run_experiment_on(&dataset, config)
}

/// Runs every configured strategy over every repeat of an already loaded
/// dataset.
///
/// Repeats run in parallel (worker count from [`WORKERS_ENV`], default one
/// per core); each owns its split and random streams, and records are
/// ordered by `(strategy position, repeat, budget)` afterwards, so the
/// output does not depend on scheduling. Within a repeat all strategies
/// share the same split and initial labeled set.
pub fn run_experiment_on(dataset: &Dataset, config: &ExperimentConfig) -> Result<ResultsTable> {
    config.validate()?;
    let strategy_configs = config.strategy_configs();
    let run_all = || -> Result<Vec<Vec<RunRecord>>> {
        (0..config.n_repeats)
            .into_par_iter()
            .map(|repeat| {
                let setup = prepare_repeat(dataset, config, repeat)?;
                let mut records = Vec::new();
                for strategy in &strategy_configs {
                    records.extend(run_prepared(dataset, &setup, strategy, config, repeat)?);
                }
                Ok(records)
            })
            .collect()
    };
    let per_repeat = match configured_workers()? {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let position: HashMap<&str, usize> = config
        .strategies
        .iter()
        .enumerate()
        .map(|(i, kind)| (kind.id(), i))
        .collect();
    let mut records: Vec<RunRecord> = per_repeat.into_iter().flatten().collect();
    records.sort_by_key(|r| {
        (
            position.get(r.strategy.as_str()).copied().unwrap_or(usize::MAX),
            r.repeat,
            r.budget,
        )
    });
    let summary = summarize(&records);
    Ok(ResultsTable { records, summary })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Aggregates records into per-`(strategy, budget)` rows: mean, sample
/// standard deviation, and a two-sided rank-sum comparison against the
/// best-mean strategy at the same budget (ties go to the strategy listed
/// first). Strategies keep their first-appearance order; budgets ascend.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut strategy_order: Vec<&str> = Vec::new();
    for r in records {
        if !strategy_order.contains(&r.strategy.as_str()) {
            strategy_order.push(&r.strategy);
        }
    }
    let mut budgets: Vec<usize> = records.iter().map(|r| r.budget).collect();
    budgets.sort_unstable();
    budgets.dedup();

    let mut samples: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for r in records {
        let s = strategy_order
            .iter()
            .position(|name| *name == r.strategy)
            .expect("strategy was registered above");
        samples.entry((s, r.budget)).or_default().push(r.balanced_accuracy);
    }

    let mut best_at: HashMap<usize, usize> = HashMap::new();
    for &budget in &budgets {
        let mut best: Option<(usize, f64)> = None;
        for s in 0..strategy_order.len() {
            if let Some(values) = samples.get(&(s, budget)) {
                let m = mean(values);
                if best.is_none_or(|(_, best_mean)| m > best_mean) {
                    best = Some((s, m));
                }
            }
        }
        if let Some((s, _)) = best {
            best_at.insert(budget, s);
        }
    }

    let mut rows = Vec::new();
    for (s, name) in strategy_order.iter().enumerate() {
        for &budget in &budgets {
            let Some(values) = samples.get(&(s, budget)) else {
                continue;
            };
            let best = best_at[&budget];
            let (p_vs_best, is_equivalent) = if s == best {
                (1.0, true)
            } else {
                let best_values = &samples[&(best, budget)];
                let test = wilcoxon_rank_sum(values, best_values)
                    .expect("summary groups are non-empty");
                (test.p_value, !test.significant)
            };
            rows.push(SummaryRow {
                strategy: (*name).to_string(),
                budget,
                mean: mean(values),
                std: sample_std(values),
                p_vs_best,
                is_best: s == best,
                is_equivalent,
            });
        }
    }
    rows
}

/// Renders records as CSV text: the fixed header, one row per record,
/// full-precision floats, LF line endings.
pub fn render_records_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.strategy, r.repeat, r.budget, r.balanced_accuracy, r.wall_time_s
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// Renders summary rows as CSV text with the fixed header.
pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.strategy, r.budget, r.mean, r.std, r.p_vs_best, r.is_best, r.is_equivalent
        )
        .expect("writing to a string cannot fail");
    }
    out
}

/// Writes records to a CSV file.
pub fn write_records_csv(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_records_csv(records)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes summary rows to a CSV file.
pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_summary_csv(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_record_cell<T: std::str::FromStr>(
    row: &csv::StringRecord,
    column: usize,
    name: &str,
    line: usize,
    path: &Path,
) -> Result<T> {
    let bad = |message: String| Error::RecordsFile {
        path: path.to_path_buf(),
        message,
    };
    let raw = row
        .get(column)
        .ok_or_else(|| bad(format!("line {line}: missing {name} column")))?;
    raw.trim()
        .parse()
        .map_err(|_| bad(format!("line {line}: cannot parse {name} from {raw:?}")))
}

/// Reads a records CSV produced by [`write_records_csv`] (or any file with
/// the same header) back into memory.
pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let bad = |message: String| Error::RecordsFile {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?;
    let found = headers.iter().collect::<Vec<_>>().join(",");
    if found != RECORDS_HEADER {
        return Err(bad(format!(
            "expected header {RECORDS_HEADER:?}, found {found:?}"
        )));
    }
    let mut records = Vec::new();
    for (index, row) in reader.records().enumerate() {
        let line = index + 2;
        let row = row.map_err(|e| bad(e.to_string()))?;
        let strategy = row
            .get(0)
            .ok_or_else(|| bad(format!("line {line}: missing strategy column")))?
            .to_string();
        let balanced_accuracy: f64 =
            parse_record_cell(&row, 3, "balanced_accuracy", line, path)?;
        if !balanced_accuracy.is_finite() {
            return Err(bad(format!(
                "line {line}: balanced_accuracy must be finite, got {balanced_accuracy}"
            )));
        }
        records.push(RunRecord {
            strategy,
            repeat: parse_record_cell(&row, 1, "repeat", line, path)?,
            budget: parse_record_cell(&row, 2, "budget", line, path)?,
            balanced_accuracy,
            wall_time_s: parse_record_cell(&row, 4, "wall_time_s", line, path)?,
        });
    }
    Ok(records)
}

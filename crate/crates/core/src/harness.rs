//! Active-learning experiment orchestration.
//!
//! A [`Benchmark`] materializes the dataset and its held-out validation split
//! once; runs are then keyed by strategy, pool-removal fraction and
//! replicate seed. Every random stream of a run derives from its replicate
//! seed, so results are reproducible byte for byte.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{select_batch, AcquisitionStrategy, StrategyKind};
use crate::cartography::{ablate_pool, bucket_histogram, compute_map, BucketCounts, DatasetMap, ScoreRule};
use crate::data::{generate_synthetic, load_csv, split_indices, stratified_holdout, Dataset, GeneratorConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{init_model, train, ModelKind, ModelSpec, TrainConfig};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Generator(GeneratorConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        num_classes: Option<usize>,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Generator(g) => generate_synthetic(g),
            DatasetSource::Csv { path, num_classes } => load_csv(path, *num_classes),
        }
    }
}

fn default_hidden_dim() -> usize {
    64
}
fn default_dropout() -> f64 {
    0.2
}
fn default_init_scale() -> f64 {
    1.0
}

/// Architecture knobs; input and output sizes come from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Mlp,
            hidden_dim: default_hidden_dim(),
            dropout_rate: default_dropout(),
            init_scale: default_init_scale(),
        }
    }
}

impl ModelConfig {
    pub fn spec_for(&self, data: &Dataset, rng_seed: u64) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            hidden_dim: self.hidden_dim,
            dropout_rate: self.dropout_rate,
            vision_dims: data.vision_dims(),
            language_dims: data.language_dims(),
            num_classes: data.num_classes(),
            init_scale: self.init_scale,
            rng_seed,
        }
    }
}

fn default_epochs() -> usize {
    30
}
fn default_minibatch() -> usize {
    32
}
fn default_l2() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Defaults to 0.1 for logistic regression, 0.05 for the MLP.
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default = "default_minibatch")]
    pub minibatch_size: usize,
    #[serde(default = "default_l2")]
    pub l2_penalty: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: default_epochs(),
            learning_rate: None,
            minibatch_size: default_minibatch(),
            l2_penalty: default_l2(),
        }
    }
}

impl TrainSettings {
    pub fn config_for(&self, kind: ModelKind, rng_seed: u64) -> TrainConfig {
        let base = TrainConfig::default_for(kind);
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            minibatch_size: self.minibatch_size,
            l2_penalty: self.l2_penalty,
            rng_seed,
        }
    }
}

fn default_validation_fraction() -> f64 {
    0.2
}
fn default_seed_fraction() -> f64 {
    0.1
}
fn default_batch_fraction() -> f64 {
    0.1
}
fn default_strategies() -> Vec<AcquisitionStrategy> {
    StrategyKind::ALL.into_iter().map(AcquisitionStrategy::new).collect()
}
fn default_removal_fractions() -> Vec<f64> {
    vec![0.10, 0.25, 0.50]
}
fn default_replicates() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}
fn default_target_fraction() -> f64 {
    0.9
}

/// Full description of an experiment family. One file drives every CLI
/// subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// Seeds the validation split and the reference-map training run.
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<AcquisitionStrategy>,
    #[serde(default = "default_seed_fraction")]
    pub seed_fraction: f64,
    /// Batch size as a fraction of the pool at the start of acquisition.
    #[serde(default = "default_batch_fraction")]
    pub batch_fraction: f64,
    /// Cap on acquisition rounds; unlimited when unset.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    /// Pool removal for `run`.
    #[serde(default)]
    pub removal_fraction: f64,
    /// Pool removals swept by `ablate`.
    #[serde(default = "default_removal_fractions")]
    pub removal_fractions: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicate_seeds: Vec<u64>,
    #[serde(default)]
    pub score_rule: ScoreRule,
    /// Sample-efficiency target as a fraction of full-data accuracy.
    #[serde(default = "default_target_fraction")]
    pub target_fraction: f64,
}

impl Default for ExperimentConfig {
    /// The standard synthetic benchmark.
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Generator(GeneratorConfig::default()),
            validation_fraction: default_validation_fraction(),
            split_seed: 0,
            model: ModelConfig::default(),
            train: TrainSettings::default(),
            strategies: default_strategies(),
            seed_fraction: default_seed_fraction(),
            batch_fraction: default_batch_fraction(),
            max_iterations: None,
            removal_fraction: 0.0,
            removal_fractions: default_removal_fractions(),
            replicate_seeds: default_replicates(),
            score_rule: ScoreRule::Product,
            target_fraction: default_target_fraction(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::config("batch_fraction must lie in (0, 1]"));
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction < 1.0) {
            return Err(Error::config("seed_fraction must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        if self.replicate_seeds.is_empty() {
            return Err(Error::config("replicate_seeds must not be empty"));
        }
        for f in std::iter::once(&self.removal_fraction).chain(&self.removal_fractions) {
            if !(0.0..1.0).contains(f) {
                return Err(Error::config(format!("removal fraction {f} outside [0, 1)")));
            }
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::config("target_fraction must lie in (0, 1]"));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        if let DatasetSource::Generator(g) = &self.dataset {
            g.validate()?;
        }
        Ok(())
    }
}

/// One evaluation of the model trained on the labeled set at an iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 for the seed-trained model.
    pub iteration: usize,
    pub labeled_size: usize,
    pub val_accuracy: f64,
    /// Batch chosen by this iteration's model; empty after the last round.
    pub acquired: Vec<usize>,
    /// Bucket composition of `acquired` under the reference map.
    pub acquired_buckets: Option<BucketCounts>,
    /// Excluded from the serialized result so result files are reproducible.
    #[serde(skip)]
    pub wall_clock_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub strategy: AcquisitionStrategy,
    pub removal_fraction: f64,
    pub replicate_seed: u64,
    pub batch_size: usize,
    pub seed_indices: Vec<usize>,
    /// Pool at the start of acquisition, after any removal.
    pub initial_pool: Vec<usize>,
    pub iterations: Vec<IterationRecord>,
    pub config: ExperimentConfig,
}

impl ExperimentResult {
    pub fn kind(&self) -> StrategyKind {
        self.strategy.kind
    }

    /// Number of acquisition rounds performed.
    pub fn rounds(&self) -> usize {
        self.iterations.iter().filter(|r| !r.acquired.is_empty()).count()
    }

    pub fn final_accuracy(&self) -> f64 {
        self.iterations.last().map_or(0.0, |r| r.val_accuracy)
    }

    pub fn file_name(&self) -> String {
        result_file_name(self.kind(), self.removal_fraction, self.replicate_seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn result_file_name(kind: StrategyKind, removal_fraction: f64, replicate_seed: u64) -> String {
    format!("{}_f{:.2}_r{}.json", kind, removal_fraction, replicate_seed)
}

/// Identifies one run within an experiment family.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub strategy: AcquisitionStrategy,
    pub removal_fraction: f64,
    pub replicate_seed: u64,
}

/// Dataset, validation split and (lazily) the reference map shared by the
/// runs of one configuration.
pub struct Benchmark {
    cfg: ExperimentConfig,
    data: Dataset,
    train_indices: Vec<usize>,
    val_indices: Vec<usize>,
    reference_map: Option<DatasetMap>,
}

impl Benchmark {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let data = cfg.dataset.load()?;
        let (train_indices, val_indices) =
            stratified_holdout(&data, cfg.validation_fraction, rng::derive_str(cfg.split_seed, "validation"))?;
        Ok(Benchmark {
            cfg: cfg.clone(),
            data,
            train_indices,
            val_indices,
            reference_map: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Seed ∪ pool: every non-validation example.
    pub fn train_indices(&self) -> &[usize] {
        &self.train_indices
    }

    pub fn val_indices(&self) -> &[usize] {
        &self.val_indices
    }

    pub fn reference_map(&self) -> Option<&DatasetMap> {
        self.reference_map.as_ref()
    }

    /// Builds the reference map once and caches it.
    pub fn ensure_reference_map(&mut self) -> Result<&DatasetMap> {
        if self.reference_map.is_none() {
            self.reference_map = Some(self.build_reference_map()?);
        }
        Ok(self.reference_map.as_ref().expect("just built"))
    }

    /// Trains the configured model once on the entire training pool while
    /// logging dynamics for every member, and builds the map from them.
    pub fn build_reference_map(&self) -> Result<DatasetMap> {
        let spec = self.cfg.model.spec_for(&self.data, rng::derive_str(self.cfg.split_seed, "reference-init"));
        let train_cfg = self
            .cfg
            .train
            .config_for(spec.kind, rng::derive_str(self.cfg.split_seed, "reference-train"));
        let outcome = train(
            init_model(&spec)?,
            &self.data,
            &self.train_indices,
            &train_cfg,
            Some(&self.train_indices),
        )?;
        let mut map = compute_map(&outcome.dynamics.expect("watch set given"), self.cfg.score_rule)?;
        map.attach_groups(&self.data);
        Ok(map)
    }

    fn iteration_seeds(replicate_seed: u64, iteration: usize) -> (u64, u64) {
        (
            rng::derive(rng::derive_str(replicate_seed, "init"), iteration as u64),
            rng::derive(rng::derive_str(replicate_seed, "train"), iteration as u64),
        )
    }

    /// Validation accuracy of a fresh model trained on `subset` with the
    /// seeds of (`replicate_seed`, `iteration`).
    pub fn train_and_evaluate(&self, subset: &[usize], replicate_seed: u64, iteration: usize) -> Result<(f64, crate::model::Model)> {
        let (init_seed, train_seed) = Self::iteration_seeds(replicate_seed, iteration);
        let spec = self.cfg.model.spec_for(&self.data, init_seed);
        let train_cfg = self.cfg.train.config_for(spec.kind, train_seed);
        let model = train(init_model(&spec)?, &self.data, subset, &train_cfg, None)?.model;
        let acc = model.accuracy(&self.data, &self.val_indices)?;
        Ok((acc, model))
    }

    /// One-shot training on the whole training pool.
    pub fn one_shot_accuracy(&self, replicate_seed: u64, iteration: usize) -> Result<f64> {
        Ok(self.train_and_evaluate(&self.train_indices, replicate_seed, iteration)?.0)
    }

    /// Mean one-shot full-data accuracy over the configured replicates.
    pub fn full_data_accuracy(&self, exec: Exec) -> Result<f64> {
        let accs: Vec<f64> = exec
            .map(&self.cfg.replicate_seeds, |&s| self.one_shot_accuracy(s, 0))
            .into_iter()
            .collect::<Result<_>>()?;
        Ok(accs.iter().sum::<f64>() / accs.len() as f64)
    }

    /// Runs one active-learning experiment.
    ///
    /// Non-zero removal fractions need the reference map
    /// ([`Benchmark::ensure_reference_map`]); when the map is present it is
    /// also used to profile every acquired batch.
    pub fn run(&self, run: &RunSpec, exec: Exec) -> Result<ExperimentResult> {
        run.strategy.validate()?;
        let rep = run.replicate_seed;
        let split = split_indices(&self.train_indices, self.cfg.seed_fraction, rng::derive_str(rep, "seed-pool"))?;
        let mut labeled = split.seed_indices.clone();
        let mut pool = split.pool_indices;
        if run.removal_fraction > 0.0 {
            let map = self
                .reference_map
                .as_ref()
                .ok_or_else(|| Error::usage("pool removal requires the reference map"))?;
            pool = ablate_pool(&pool, map, run.removal_fraction)?;
        } else if run.removal_fraction < 0.0 {
            return Err(Error::config("removal fraction must be non-negative"));
        }
        let initial_pool = pool.clone();
        let b = ((self.cfg.batch_fraction * pool.len() as f64).round() as usize).max(1);
        let max_rounds = self.cfg.max_iterations.unwrap_or(usize::MAX);

        let mut iterations = Vec::new();
        for iteration in 0.. {
            let started = Instant::now();
            let (val_accuracy, model) = self.train_and_evaluate(&labeled, rep, iteration)?;
            let mut record = IterationRecord {
                iteration,
                labeled_size: labeled.len(),
                val_accuracy,
                acquired: Vec::new(),
                acquired_buckets: None,
                wall_clock_ms: 0.0,
            };
            if !pool.is_empty() && iteration < max_rounds {
                let seed = rng::derive(rng::derive_str(rep, "acquire"), iteration as u64);
                let take = b.min(pool.len());
                let selection = select_batch(&run.strategy, &model, &self.data, &labeled, &pool, take, seed, exec)?;
                let acquired = selection.batch.indices;
                if let Some(map) = &self.reference_map {
                    record.acquired_buckets = Some(bucket_histogram(map, &acquired)?);
                }
                let chosen: HashSet<usize> = acquired.iter().copied().collect();
                pool.retain(|i| !chosen.contains(i));
                labeled.extend_from_slice(&acquired);
                record.acquired = acquired;
            }
            record.wall_clock_ms = started.elapsed().as_secs_f64() * 1e3;
            let done = record.acquired.is_empty();
            log::debug!(
                "{} f={} r={} it={} n={} acc={:.4}",
                run.strategy.kind,
                run.removal_fraction,
                rep,
                iteration,
                record.labeled_size,
                record.val_accuracy
            );
            iterations.push(record);
            if done {
                break;
            }
        }
        Ok(ExperimentResult {
            strategy: run.strategy.clone(),
            removal_fraction: run.removal_fraction,
            replicate_seed: rep,
            batch_size: b,
            seed_indices: split.seed_indices,
            initial_pool,
            iterations,
            config: self.cfg.clone(),
        })
    }

    /// Runs every spec, independent runs spread over `exec`.
    pub fn run_all(&self, runs: &[RunSpec], exec: Exec) -> Result<Vec<ExperimentResult>> {
        exec.map(runs, |r| self.run(r, exec)).into_iter().collect()
    }

    /// Every (strategy, replicate) pair of the config at one removal fraction.
    pub fn run_specs(&self, removal_fraction: f64) -> Vec<RunSpec> {
        let mut specs = Vec::new();
        for s in &self.cfg.strategies {
            for &seed in &self.cfg.replicate_seeds {
                specs.push(RunSpec {
                    strategy: s.clone(),
                    removal_fraction,
                    replicate_seed: seed,
                });
            }
        }
        specs
    }
}

/// Prepares the benchmark and runs a single experiment. Builds the reference
/// map when the run needs it for pool removal.
pub fn run_experiment(cfg: &ExperimentConfig, run: &RunSpec) -> Result<ExperimentResult> {
    let mut bench = Benchmark::prepare(cfg)?;
    if run.removal_fraction > 0.0 {
        bench.ensure_reference_map()?;
    }
    bench.run(run, Exec::default())
}

pub fn build_reference_map(cfg: &ExperimentConfig) -> Result<DatasetMap> {
    Benchmark::prepare(cfg)?.build_reference_map()
}

/// Builds the reference map once, then runs every strategy and replicate at
/// every removal fraction. Results come back ordered by fraction, then
/// strategy, then replicate.
pub fn run_ablation_suite(cfg: &ExperimentConfig, removal_fractions: &[f64], exec: Exec) -> Result<Vec<ExperimentResult>> {
    let mut bench = Benchmark::prepare(cfg)?;
    bench.ensure_reference_map()?;
    let specs: Vec<RunSpec> = removal_fractions.iter().flat_map(|&f| bench.run_specs(f)).collect();
    bench.run_all(&specs, exec)
}

/// Bucket composition of each acquired batch next to the pool's baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionProfile {
    pub strategy: StrategyKind,
    pub removal_fraction: f64,
    pub replicate_seed: u64,
    /// Bucket shares of the initial pool.
    pub baseline: [f64; 4],
    pub baseline_counts: BucketCounts,
    /// One histogram per acquisition round, in order.
    pub rounds: Vec<BucketCounts>,
}

pub fn profile_acquisitions(result: &ExperimentResult, map: &DatasetMap) -> Result<AcquisitionProfile> {
    let baseline_counts = bucket_histogram(map, &result.initial_pool)?;
    let rounds = result
        .iterations
        .iter()
        .filter(|r| !r.acquired.is_empty())
        .map(|r| bucket_histogram(map, &r.acquired))
        .collect::<Result<Vec<_>>>()?;
    Ok(AcquisitionProfile {
        strategy: result.kind(),
        removal_fraction: result.removal_fraction,
        replicate_seed: result.replicate_seed,
        baseline: baseline_counts.proportions(),
        baseline_counts,
        rounds,
    })
}

/// Header of the aggregate results table.
pub const RESULTS_CSV_HEADER: &str = "strategy,removal_fraction,replicate,iteration,labeled_size,val_accuracy";

pub fn results_csv(results: &[ExperimentResult]) -> String {
    let mut out = format!("{RESULTS_CSV_HEADER}\n");
    for r in results {
        for it in &r.iterations {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.kind(),
                r.removal_fraction,
                r.replicate_seed,
                it.iteration,
                it.labeled_size,
                it.val_accuracy
            ));
        }
    }
    out
}

/// Writes one JSON file per result plus `results.csv` into `dir`. Returns
/// the written paths.
pub fn write_results(results: &[ExperimentResult], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for r in results {
        let path = dir.join(r.file_name());
        fs::write(&path, r.to_json()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let csv_path = dir.join("results.csv");
    fs::write(&csv_path, results_csv(results)).map_err(|e| Error::io(&csv_path, e))?;
    written.push(csv_path);
    Ok(written)
}

/// Reads every `*.json` result in `dir`, sorted by file name.
pub fn read_results(dir: impl AsRef<Path>) -> Result<Vec<ExperimentResult>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(ExperimentResult::from_json_file).collect()
}

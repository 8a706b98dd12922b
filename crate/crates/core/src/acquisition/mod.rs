//! Acquisition strategies: scoring the unlabeled pool and selecting a batch.

mod coreset;
mod pca;
mod scores;

use std::fmt;
use std::str::FromStr;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use coreset::{coreset_amortized, coreset_greedy, coverage_radius};
pub use pca::{pca_project, PcaProjection};
pub use scores::{check_distribution, score_bald, score_entropy, score_least_confidence, score_mc_entropy};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{mc_dropout_proba, representations, Model, RepresentationSpace};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Random,
    LeastConfidence,
    Entropy,
    McEntropy,
    Bald,
    CoresetVision,
    CoresetLanguage,
    CoresetFused,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Random,
        StrategyKind::LeastConfidence,
        StrategyKind::Entropy,
        StrategyKind::McEntropy,
        StrategyKind::Bald,
        StrategyKind::CoresetVision,
        StrategyKind::CoresetLanguage,
        StrategyKind::CoresetFused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::LeastConfidence => "least-confidence",
            StrategyKind::Entropy => "entropy",
            StrategyKind::McEntropy => "mc-entropy",
            StrategyKind::Bald => "bald",
            StrategyKind::CoresetVision => "coreset-vision",
            StrategyKind::CoresetLanguage => "coreset-language",
            StrategyKind::CoresetFused => "coreset-fused",
        }
    }

    pub fn is_bayesian(self) -> bool {
        matches!(self, StrategyKind::McEntropy | StrategyKind::Bald)
    }

    pub fn is_uncertainty(self) -> bool {
        matches!(
            self,
            StrategyKind::LeastConfidence | StrategyKind::Entropy | StrategyKind::McEntropy | StrategyKind::Bald
        )
    }

    pub fn coreset_space(self) -> Option<RepresentationSpace> {
        match self {
            StrategyKind::CoresetVision => Some(RepresentationSpace::Vision),
            StrategyKind::CoresetLanguage => Some(RepresentationSpace::Language),
            StrategyKind::CoresetFused => Some(RepresentationSpace::Fused),
            _ => None,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoresetMode {
    #[default]
    Exact,
    Amortized,
}

fn default_k_passes() -> usize {
    10
}

/// A strategy plus its knobs. Deserializes from either a bare name
/// (`"bald"`) or an object (`{"kind": "bald", "k_passes": 20}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "StrategyRepr")]
pub struct AcquisitionStrategy {
    pub kind: StrategyKind,
    /// Dropout passes for the Bayesian kinds.
    #[serde(default = "default_k_passes")]
    pub k_passes: usize,
    #[serde(default)]
    pub coreset_mode: CoresetMode,
    /// PCA target dimension for amortized Core-Set; `min(32, D)` when unset.
    #[serde(default)]
    pub pca_dims: Option<usize>,
    /// Picks between distance refreshes; `max(1, round(0.05 B))` when unset.
    #[serde(default)]
    pub refresh_interval: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StrategyRepr {
    Name(StrategyKind),
    Full {
        kind: StrategyKind,
        #[serde(default = "default_k_passes")]
        k_passes: usize,
        #[serde(default)]
        coreset_mode: CoresetMode,
        #[serde(default)]
        pca_dims: Option<usize>,
        #[serde(default)]
        refresh_interval: Option<usize>,
    },
}

impl From<StrategyRepr> for AcquisitionStrategy {
    fn from(r: StrategyRepr) -> Self {
        match r {
            StrategyRepr::Name(kind) => AcquisitionStrategy::new(kind),
            StrategyRepr::Full {
                kind,
                k_passes,
                coreset_mode,
                pca_dims,
                refresh_interval,
            } => AcquisitionStrategy {
                kind,
                k_passes,
                coreset_mode,
                pca_dims,
                refresh_interval,
            },
        }
    }
}

impl AcquisitionStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        AcquisitionStrategy {
            kind,
            k_passes: default_k_passes(),
            coreset_mode: CoresetMode::Exact,
            pca_dims: None,
            refresh_interval: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_bayesian() && self.k_passes < 2 {
            return Err(Error::config(format!("{} needs k_passes >= 2", self.kind)));
        }
        if self.refresh_interval == Some(0) {
            return Err(Error::config("refresh_interval must be at least 1"));
        }
        if self.pca_dims == Some(0) {
            return Err(Error::config("pca_dims must be at least 1"));
        }
        Ok(())
    }

    pub fn refresh_for_batch(&self, b: usize) -> usize {
        self.refresh_interval.unwrap_or_else(|| default_refresh_interval(b))
    }
}

/// About 5% of an acquisition batch, at least one.
pub fn default_refresh_interval(b: usize) -> usize {
    ((0.05 * b as f64).round() as usize).max(1)
}

/// Ordered acquisitions with the score each had when it was picked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionBatch {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub batch: AcquisitionBatch,
    /// Set when the requested size exceeded the pool and the whole pool was
    /// returned.
    pub truncated: bool,
}

/// Top-`b` pool members by score, ties broken by ascending example index.
pub fn top_b(pool: &[usize], scores: &[f64], b: usize) -> AcquisitionBatch {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(pool[x].cmp(&pool[y])));
    order.truncate(b);
    AcquisitionBatch {
        indices: order.iter().map(|&j| pool[j]).collect(),
        scores: order.iter().map(|&j| scores[j]).collect(),
    }
}

/// Scores every pool member under a score-based strategy.
pub fn score_pool(
    kind: StrategyKind,
    k_passes: usize,
    model: &Model,
    data: &Dataset,
    pool: &[usize],
    seed: u64,
    exec: Exec,
) -> Result<Vec<f64>> {
    let features = data.features();
    match kind {
        StrategyKind::LeastConfidence | StrategyKind::Entropy => {
            let probs = model.predict_proba_batch(features.select(Axis(0), pool).view())?;
            let score = if kind == StrategyKind::LeastConfidence {
                score_least_confidence
            } else {
                score_entropy
            };
            let rows: Vec<usize> = (0..pool.len()).collect();
            exec.map(&rows, |&r| score(probs.row(r).as_slice().expect("contiguous")))
                .into_iter()
                .collect()
        }
        StrategyKind::McEntropy | StrategyKind::Bald => {
            let mc_seed = rng::derive_str(seed, "mc-dropout");
            exec.map(pool, |&i| {
                let passes = mc_dropout_proba(model, features.row(i), k_passes, rng::derive(mc_seed, i as u64))?;
                if kind == StrategyKind::Bald {
                    score_bald(passes.view())
                } else {
                    score_mc_entropy(passes.view())
                }
            })
            .into_iter()
            .collect()
        }
        other => Err(Error::usage(format!("{other} is not a score-based strategy"))),
    }
}

/// Selects up to `b` pool members to label next.
///
/// Random draws uniformly without replacement; score-based strategies take
/// the top-`b` scores; Core-Set strategies run greedy k-center against the
/// labeled set. Deterministic given `seed`, independent of `exec`.
#[allow(clippy::too_many_arguments)]
pub fn select_batch(
    strategy: &AcquisitionStrategy,
    model: &Model,
    data: &Dataset,
    labeled: &[usize],
    pool: &[usize],
    b: usize,
    seed: u64,
    exec: Exec,
) -> Result<Selection> {
    strategy.validate()?;
    if b == 0 {
        return Err(Error::usage("batch size must be at least 1"));
    }
    if pool.is_empty() {
        return Err(Error::usage("pool is empty"));
    }
    if let Some(bad) = pool.iter().chain(labeled).find(|&&i| i >= data.len()) {
        return Err(Error::usage(format!("index {bad} out of range")));
    }
    let mut pool: Vec<usize> = pool.to_vec();
    pool.sort_unstable();
    let truncated = b > pool.len();
    if truncated {
        log::warn!("batch size {b} exceeds pool of {}; taking the whole pool", pool.len());
    }
    let b = b.min(pool.len());

    let batch = match strategy.kind {
        StrategyKind::Random => {
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rng::rng(rng::derive_str(seed, "random-acquisition")));
            shuffled.truncate(b);
            let scores = vec![0.0; shuffled.len()];
            AcquisitionBatch {
                indices: shuffled,
                scores,
            }
        }
        kind if kind.coreset_space().is_some() => {
            let space = kind.coreset_space().expect("checked");
            let reps = representations(model, data.features(), space)?;
            match strategy.coreset_mode {
                CoresetMode::Exact => coreset_greedy(reps.view(), labeled, &pool, b, exec)?,
                CoresetMode::Amortized => {
                    let dims = strategy.pca_dims.unwrap_or(32).min(reps.ncols());
                    coreset_amortized(reps.view(), labeled, &pool, b, dims, strategy.refresh_for_batch(b), exec)?
                }
            }
        }
        kind => {
            let scores = score_pool(kind, strategy.k_passes, model, data, &pool, seed, exec)?;
            top_b(&pool, &scores, b)
        }
    };
    Ok(Selection { batch, truncated })
}

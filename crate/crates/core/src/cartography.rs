//! Dataset Maps: per-example mean gold-label confidence and its variability
//! across training epochs, difficulty buckets, and outlier-score ablation.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Group};
use crate::error::{Error, Result};
use crate::model::TrainingDynamics;

/// Difficulty bucket by mean confidence: easy `[0.75, 1]`, medium
/// `[0.50, 0.75)`, hard `[0.25, 0.50)`, impossible `[0, 0.25)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bucket {
    Easy,
    Medium,
    Hard,
    Impossible,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::Easy, Bucket::Medium, Bucket::Hard, Bucket::Impossible];

    pub fn from_confidence(mu: f64) -> Bucket {
        if mu >= 0.75 {
            Bucket::Easy
        } else if mu >= 0.50 {
            Bucket::Medium
        } else if mu >= 0.25 {
            Bucket::Hard
        } else {
            Bucket::Impossible
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Easy => "easy",
            Bucket::Medium => "medium",
            Bucket::Hard => "hard",
            Bucket::Impossible => "impossible",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bucket {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Bucket::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown bucket {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
    pub impossible: usize,
}

impl BucketCounts {
    pub fn get(&self, bucket: Bucket) -> usize {
        self.as_array()[bucket.slot()]
    }

    pub fn add(&mut self, bucket: Bucket) {
        match bucket {
            Bucket::Easy => self.easy += 1,
            Bucket::Medium => self.medium += 1,
            Bucket::Hard => self.hard += 1,
            Bucket::Impossible => self.impossible += 1,
        }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.easy, self.medium, self.hard, self.impossible]
    }

    pub fn total(&self) -> usize {
        self.as_array().iter().sum()
    }

    /// Share of each bucket; all zero for an empty histogram.
    pub fn proportions(&self) -> [f64; 4] {
        let total = self.total();
        self.as_array()
            .map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
    }
}

/// How the outlier score combines confidence and variability.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreRule {
    /// `mu * sigma`.
    #[default]
    Product,
    /// `sqrt(mu^2 + sigma^2)`, the distance from the map's origin corner.
    /// Not the literal product rule; provided for comparison.
    CornerDistance,
}

impl ScoreRule {
    pub fn score(self, mu: f64, sigma: f64) -> f64 {
        match self {
            ScoreRule::Product => mu * sigma,
            ScoreRule::CornerDistance => mu.hypot(sigma),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapEntry {
    pub index: usize,
    pub mu: f64,
    pub sigma: f64,
    pub correctness: f64,
    pub bucket: Bucket,
    pub outlier_score: f64,
    pub group: Option<Group>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMap {
    entries: Vec<MapEntry>,
    position: HashMap<usize, usize>,
}

impl DatasetMap {
    pub fn from_entries(entries: Vec<MapEntry>) -> Result<Self> {
        let mut position = HashMap::with_capacity(entries.len());
        for (k, e) in entries.iter().enumerate() {
            if position.insert(e.index, k).is_some() {
                return Err(Error::usage(format!("duplicate map entry for example {}", e.index)));
            }
        }
        Ok(DatasetMap { entries, position })
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&MapEntry> {
        self.position.get(&index).map(|&k| &self.entries[k])
    }

    fn require(&self, index: usize) -> Result<&MapEntry> {
        self.get(index)
            .ok_or_else(|| Error::usage(format!("example {index} is not covered by the map")))
    }

    pub fn bucket_of(&self, index: usize) -> Result<Bucket> {
        Ok(self.require(index)?.bucket)
    }

    /// Records each entry's provenance tag from `dataset`.
    pub fn attach_groups(&mut self, dataset: &Dataset) {
        for e in &mut self.entries {
            e.group = dataset.groups().get(e.index).copied();
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// `index,mu,sigma,correctness,bucket,outlier_score,group`; the group
    /// column is empty when unknown.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("index,mu,sigma,correctness,bucket,outlier_score,group\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.index,
                e.mu,
                e.sigma,
                e.correctness,
                e.bucket,
                e.outlier_score,
                e.group.map_or("", Group::as_str)
            ));
        }
        out
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ["index", "mu", "sigma", "correctness", "bucket", "outlier_score", "group"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected map header {header:?}"),
            });
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let err = |message: String| Error::Parse { line, message };
            let num = |k: usize| -> Result<f64> {
                record[k]
                    .parse::<f64>()
                    .map_err(|_| err(format!("invalid number {:?}", &record[k])))
            };
            entries.push(MapEntry {
                index: record[0].parse().map_err(|_| err(format!("invalid index {:?}", &record[0])))?,
                mu: num(1)?,
                sigma: num(2)?,
                correctness: num(3)?,
                bucket: record[4].parse().map_err(err)?,
                outlier_score: num(5)?,
                group: match &record[6] {
                    "" => None,
                    g => Some(g.parse().map_err(err)?),
                },
            });
        }
        Self::from_entries(entries)
    }
}

/// Builds the map from logged dynamics. Needs at least two epochs.
pub fn compute_map(dynamics: &TrainingDynamics, rule: ScoreRule) -> Result<DatasetMap> {
    let epochs = dynamics.epochs();
    if epochs < 2 {
        return Err(Error::usage("a dataset map needs dynamics from at least two epochs"));
    }
    let e = epochs as f64;
    let entries = dynamics
        .indices
        .iter()
        .enumerate()
        .map(|(r, &index)| {
            let conf = dynamics.gold_confidence.row(r);
            // a constant row is exact: rounding in the mean must not leak
            // into a tiny non-zero variability
            let (mu, sigma) = if conf.iter().all(|&c| c == conf[0]) {
                (conf[0], 0.0)
            } else {
                let mu = conf.sum() / e;
                (mu, (conf.iter().map(|c| (c - mu) * (c - mu)).sum::<f64>() / e).sqrt())
            };
            let correctness = dynamics.correct.row(r).iter().filter(|&&c| c).count() as f64 / e;
            MapEntry {
                index,
                mu,
                sigma,
                correctness,
                bucket: Bucket::from_confidence(mu),
                outlier_score: rule.score(mu, sigma),
                group: None,
            }
        })
        .collect();
    DatasetMap::from_entries(entries)
}

/// Example indices in ascending outlier score; ties by ascending index.
pub fn rank_by_outlier_score(map: &DatasetMap) -> Vec<usize> {
    let mut order: Vec<&MapEntry> = map.entries.iter().collect();
    order.sort_by(|a, b| a.outlier_score.total_cmp(&b.outlier_score).then(a.index.cmp(&b.index)));
    order.into_iter().map(|e| e.index).collect()
}

/// Removes the `floor(fraction * |pool|)` pool members with the lowest
/// outlier score. The survivors keep their relative order.
pub fn ablate_pool(pool: &[usize], map: &DatasetMap, removal_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&removal_fraction) {
        return Err(Error::usage(format!("removal fraction {removal_fraction} outside [0, 1)")));
    }
    let mut ranked: Vec<&MapEntry> = pool.iter().map(|&i| map.require(i)).collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.outlier_score.total_cmp(&b.outlier_score).then(a.index.cmp(&b.index)));
    let k = (removal_fraction * pool.len() as f64).floor() as usize;
    let removed: std::collections::HashSet<usize> = ranked[..k].iter().map(|e| e.index).collect();
    Ok(pool.iter().copied().filter(|i| !removed.contains(i)).collect())
}

pub fn bucket_histogram(map: &DatasetMap, indices: &[usize]) -> Result<BucketCounts> {
    let mut counts = BucketCounts::default();
    for &i in indices {
        counts.add(map.bucket_of(i)?);
    }
    Ok(counts)
}

//! Synthetic datasets with injected collective outliers, CSV I/O, and
//! index splits.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Provenance of an example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    Learnable,
    /// Features from dedicated clusters, labels uniform at random.
    NoiseCollective,
    /// Identical features within a small group, one distinct label per copy.
    UnderspecifiedCollective,
}

impl Group {
    pub const ALL: [Group; 3] = [
        Group::Learnable,
        Group::NoiseCollective,
        Group::UnderspecifiedCollective,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Learnable => "learnable",
            Group::NoiseCollective => "noise-collective",
            Group::UnderspecifiedCollective => "underspecified-collective",
        }
    }

    pub fn is_outlier(self) -> bool {
        self != Group::Learnable
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Group::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown group tag {s:?}"))
    }
}

/// A labeled feature matrix split into a vision-like and a language-like
/// subspace. Columns `0..vision_dims` are the vision subspace, the remaining
/// columns the language subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    vision_dims: usize,
    labels: Vec<usize>,
    groups: Vec<Group>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        vision: Array2<f64>,
        language: Array2<f64>,
        labels: Vec<usize>,
        groups: Vec<Group>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = vision.nrows();
        if n == 0 {
            return Err(Error::usage("dataset must contain at least one example"));
        }
        if vision.ncols() == 0 || language.ncols() == 0 {
            return Err(Error::usage("both feature subspaces need at least one dimension"));
        }
        if language.nrows() != n || labels.len() != n || groups.len() != n {
            return Err(Error::usage("features, labels and groups disagree on the example count"));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::usage(format!("label {bad} outside [0, {num_classes})")));
        }
        let vision_dims = vision.ncols();
        let features = ndarray::concatenate(ndarray::Axis(1), &[vision.view(), language.view()])
            .expect("row counts checked above");
        Ok(Dataset {
            features,
            vision_dims,
            labels,
            groups,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn vision_dims(&self) -> usize {
        self.vision_dims
    }

    pub fn language_dims(&self) -> usize {
        self.features.ncols() - self.vision_dims
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Concatenated `[vision | language]` features.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn vision(&self) -> ArrayView2<'_, f64> {
        self.features.slice(s![.., ..self.vision_dims])
    }

    pub fn language(&self) -> ArrayView2<'_, f64> {
        self.features.slice(s![.., self.vision_dims..])
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group_count(&self, group: Group) -> usize {
        self.groups.iter().filter(|&&g| g == group).count()
    }

    /// Writes the dataset in the `v*,l*,label,group` CSV layout.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.vision_dims)
            .map(|i| format!("v{i}"))
            .chain((0..self.language_dims()).map(|i| format!("l{i}")))
            .chain(["label".to_string(), "group".to_string()])
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            for x in self.features.row(i) {
                out.push_str(&x.to_string());
                out.push(',');
            }
            out.push_str(&self.labels[i].to_string());
            out.push(',');
            out.push_str(self.groups[i].as_str());
            out.push('\n');
        }
        out
    }
}

fn default_noise_clusters() -> usize {
    2
}

fn default_underspecified_clusters() -> usize {
    2
}

fn default_group_size() -> usize {
    5
}

fn default_center_scale() -> f64 {
    1.0
}

fn default_center_rank() -> Option<usize> {
    Some(2)
}

/// Parameters of the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_examples: usize,
    pub num_classes: usize,
    pub vision_dims: usize,
    pub language_dims: usize,
    /// Per-coordinate standard deviation of every cluster.
    pub cluster_spread: f64,
    pub outlier_fraction_noise: f64,
    pub outlier_fraction_underspecified: f64,
    pub rng_seed: u64,
    /// Number of dedicated clusters hosting the random-label collective.
    #[serde(default = "default_noise_clusters")]
    pub noise_clusters: usize,
    /// Number of dedicated clusters hosting the duplicated-feature groups.
    #[serde(default = "default_underspecified_clusters")]
    pub underspecified_clusters: usize,
    /// Maximum number of copies per duplicated-feature group.
    #[serde(default = "default_group_size")]
    pub underspecified_group_size: usize,
    /// Per-coordinate standard deviation of the cluster centers.
    #[serde(default = "default_center_scale")]
    pub center_scale: f64,
    /// When set, class centers are drawn in a random subspace of this rank,
    /// which makes pairwise class separations uneven.
    #[serde(default = "default_center_rank")]
    pub center_rank: Option<usize>,
}

impl Default for GeneratorConfig {
    /// The standard benchmark: 5000 examples, 10 classes, 30% collective outliers.
    fn default() -> Self {
        GeneratorConfig {
            num_examples: 5000,
            num_classes: 10,
            vision_dims: 32,
            language_dims: 32,
            cluster_spread: 1.2,
            outlier_fraction_noise: 0.15,
            outlier_fraction_underspecified: 0.15,
            rng_seed: 20_210_601,
            noise_clusters: default_noise_clusters(),
            underspecified_clusters: default_underspecified_clusters(),
            underspecified_group_size: default_group_size(),
            center_scale: default_center_scale(),
            center_rank: default_center_rank(),
        }
    }
}

impl GeneratorConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    fn count(&self, fraction: f64) -> usize {
        (fraction * self.num_examples as f64).round() as usize
    }

    pub fn noise_count(&self) -> usize {
        self.count(self.outlier_fraction_noise)
    }

    pub fn underspecified_count(&self) -> usize {
        self.count(self.outlier_fraction_underspecified)
    }

    pub fn validate(&self) -> Result<()> {
        let frac_ok = |f: f64| f.is_finite() && (0.0..=1.0).contains(&f);
        if !frac_ok(self.outlier_fraction_noise) || !frac_ok(self.outlier_fraction_underspecified) {
            return Err(Error::config("outlier fractions must lie in [0, 1]"));
        }
        if self.outlier_fraction_noise + self.outlier_fraction_underspecified >= 1.0 {
            return Err(Error::config("outlier fractions must sum to less than 1"));
        }
        if self.num_examples == 0 || self.num_classes == 0 {
            return Err(Error::config("num_examples and num_classes must be positive"));
        }
        if self.vision_dims == 0 || self.language_dims == 0 {
            return Err(Error::config("both feature subspaces need at least one dimension"));
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread > 0.0) {
            return Err(Error::config("cluster_spread must be positive"));
        }
        if !(self.center_scale.is_finite() && self.center_scale >= 0.0) {
            return Err(Error::config("center_scale must be non-negative"));
        }
        if self.center_rank == Some(0) {
            return Err(Error::config("center_rank must be positive"));
        }
        if self.noise_count() > 0 && self.noise_clusters == 0 {
            return Err(Error::config("noise collective needs at least one cluster"));
        }
        let under = self.underspecified_count();
        if under > 0 {
            if self.underspecified_clusters == 0 {
                return Err(Error::config("underspecified collective needs at least one cluster"));
            }
            if self.underspecified_group_size < 2 {
                return Err(Error::config("underspecified_group_size must be at least 2"));
            }
            if self.underspecified_group_size > self.num_classes {
                return Err(Error::config(
                    "underspecified_group_size cannot exceed num_classes (labels within a group are distinct)",
                ));
            }
            if under < 2 {
                return Err(Error::config("underspecified fraction yields a single example; groups need at least 2"));
            }
        }
        if self.noise_count() + under >= self.num_examples {
            return Err(Error::config("outlier counts leave no learnable examples"));
        }
        Ok(())
    }
}

/// Sizes of the duplicated-feature groups: as few groups as possible with at
/// most `max_size` members each, sizes differing by at most one.
fn group_sizes(total: usize, max_size: usize) -> Vec<usize> {
    if total == 0 {
        return Vec::new();
    }
    let groups = total.div_ceil(max_size);
    let base = total / groups;
    let extra = total % groups;
    (0..groups).map(|g| base + usize::from(g < extra)).collect()
}

/// Generates a synthetic dataset. A pure function of `config`.
pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let dims = config.vision_dims + config.language_dims;
    let c = config.num_classes;
    let mut rng = rng::rng(config.rng_seed);

    let gaussian_rows = |rows: usize, scale: f64, rng: &mut rng::Rng| -> Array2<f64> {
        Array2::from_shape_fn((rows, dims), |_| scale * rng.sample::<f64, _>(StandardNormal))
    };
    let class_centers = match config.center_rank {
        None => gaussian_rows(c, config.center_scale, &mut rng),
        Some(k) => {
            // latent coordinates times a random Gaussian embedding; each
            // coordinate keeps variance center_scale^2
            let latent = Array2::from_shape_fn((c, k), |_| rng.sample::<f64, _>(StandardNormal));
            let embed = Array2::from_shape_fn((k, dims), |_| rng.sample::<f64, _>(StandardNormal));
            latent.dot(&embed) * (config.center_scale / (k as f64).sqrt())
        }
    };
    let noise_centers = gaussian_rows(config.noise_clusters, config.center_scale, &mut rng);
    let under_centers = gaussian_rows(config.underspecified_clusters, config.center_scale, &mut rng);

    let n_noise = config.noise_count();
    let n_under = config.underspecified_count();
    let n_learn = config.num_examples - n_noise - n_under;

    let mut rows: Vec<(Vec<f64>, usize, Group)> = Vec::with_capacity(config.num_examples);
    let spread = config.cluster_spread;
    let sample_around = |center: ArrayView1<f64>, rng: &mut rng::Rng| -> Vec<f64> {
        center
            .iter()
            .map(|&m| m + spread * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };

    for _ in 0..n_learn {
        let y = rng.gen_range(0..c);
        let x = sample_around(class_centers.row(y), &mut rng);
        rows.push((x, y, Group::Learnable));
    }
    for _ in 0..n_noise {
        let k = rng.gen_range(0..config.noise_clusters);
        let x = sample_around(noise_centers.row(k), &mut rng);
        let y = rng.gen_range(0..c);
        rows.push((x, y, Group::NoiseCollective));
    }
    let mut classes: Vec<usize> = (0..c).collect();
    for size in group_sizes(n_under, config.underspecified_group_size) {
        let k = rng.gen_range(0..config.underspecified_clusters);
        let x = sample_around(under_centers.row(k), &mut rng);
        classes.shuffle(&mut rng);
        for &y in &classes[..size] {
            rows.push((x.clone(), y, Group::UnderspecifiedCollective));
        }
    }
    rows.shuffle(&mut rng);

    let n = rows.len();
    let mut features = Array2::<f64>::zeros((n, dims));
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for (i, (x, y, g)) in rows.into_iter().enumerate() {
        features.row_mut(i).assign(&ArrayView1::from(&x));
        labels.push(y);
        groups.push(g);
    }
    Ok(Dataset {
        features,
        vision_dims: config.vision_dims,
        labels,
        groups,
        num_classes: c,
    })
}

/// Loads a dataset from the `v*,l*,label[,group]` CSV layout.
///
/// `num_classes` bounds the labels; when `None` it is inferred as the largest
/// label plus one.
pub fn load_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, num_classes)
}

pub fn parse_csv(text: &str, num_classes: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let vision_dims = names.iter().take_while(|h| h.starts_with('v')).count();
    let language_dims = names[vision_dims..].iter().take_while(|h| h.starts_with('l') && **h != "label").count();
    let header_err = |message: String| Error::Parse { line: 1, message };
    for (i, h) in names[..vision_dims].iter().enumerate() {
        if *h != format!("v{i}") {
            return Err(header_err(format!("expected column v{i}, found {h:?}")));
        }
    }
    for (i, h) in names[vision_dims..vision_dims + language_dims].iter().enumerate() {
        if *h != format!("l{i}") {
            return Err(header_err(format!("expected column l{i}, found {h:?}")));
        }
    }
    if vision_dims == 0 || language_dims == 0 {
        return Err(header_err("header needs at least one v* and one l* column".into()));
    }
    let rest = &names[vision_dims + language_dims..];
    let has_group = match rest {
        ["label"] => false,
        ["label", "group"] => true,
        _ => return Err(header_err(format!("unexpected trailing columns {rest:?}"))),
    };
    let width = names.len();
    let dims = vision_dims + language_dims;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| Error::Parse { line, message };
        if record.len() != width {
            return Err(err(format!("expected {width} fields, found {}", record.len())));
        }
        for field in record.iter().take(dims) {
            let x: f64 = field.trim().parse().map_err(|_| err(format!("invalid number {field:?}")))?;
            if !x.is_finite() {
                return Err(err(format!("non-finite feature {field:?}")));
            }
            values.push(x);
        }
        let label_field = &record[dims];
        let y: usize = label_field
            .trim()
            .parse()
            .map_err(|_| err(format!("invalid label {label_field:?}")))?;
        if let Some(c) = num_classes {
            if y >= c {
                return Err(err(format!("label {y} outside [0, {c})")));
            }
        }
        labels.push(y);
        groups.push(if has_group {
            record[dims + 1].trim().parse::<Group>().map_err(err)?
        } else {
            Group::Learnable
        });
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let c = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let features = Array2::from_shape_vec((labels.len(), dims), values).expect("row widths checked");
    Ok(Dataset {
        features,
        vision_dims,
        labels,
        groups,
        num_classes: c,
    })
}

/// Disjoint labeled seed set and unlabeled pool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPoolSplit {
    pub seed_indices: Vec<usize>,
    pub pool_indices: Vec<usize>,
}

/// Uniform random split of the whole dataset.
pub fn split_seed_pool(dataset: &Dataset, seed_fraction: f64, rng_seed: u64) -> Result<SeedPoolSplit> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    split_indices(&all, seed_fraction, rng_seed)
}

/// Uniform random split of `indices` into `round(seed_fraction * n)` seed
/// members and the rest. Both parts are returned in ascending order.
pub fn split_indices(indices: &[usize], seed_fraction: f64, rng_seed: u64) -> Result<SeedPoolSplit> {
    if !(seed_fraction > 0.0 && seed_fraction < 1.0) {
        return Err(Error::config(format!("seed fraction {seed_fraction} outside (0, 1)")));
    }
    let n = indices.len();
    let n_seed = (seed_fraction * n as f64).round() as usize;
    if n_seed == 0 || n_seed == n {
        return Err(Error::config(format!(
            "seed fraction {seed_fraction} of {n} examples leaves an empty seed set or pool"
        )));
    }
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(&mut rng::rng(rng_seed));
    let mut seed_indices = shuffled[..n_seed].to_vec();
    let mut pool_indices = shuffled[n_seed..].to_vec();
    seed_indices.sort_unstable();
    pool_indices.sort_unstable();
    Ok(SeedPoolSplit {
        seed_indices,
        pool_indices,
    })
}

/// Held-out split of `round(fraction * N)` examples drawn from the learnable
/// group only, stratified by class (largest-remainder allocation). Outliers
/// all stay on the retained side. Returns `(retained, held_out)`, both ascending.
pub fn stratified_holdout(dataset: &Dataset, fraction: f64, rng_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::config(format!("validation fraction {fraction} outside [0, 1)")));
    }
    let total = (fraction * dataset.len() as f64).round() as usize;
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes];
    let mut retained = Vec::new();
    for i in 0..dataset.len() {
        if dataset.groups[i] == Group::Learnable {
            strata[dataset.labels[i]].push(i);
        } else {
            retained.push(i);
        }
    }
    let learnable: usize = strata.iter().map(Vec::len).sum();
    if total >= learnable && total > 0 {
        return Err(Error::config(format!(
            "validation split needs {total} learnable examples but only {learnable} exist"
        )));
    }
    // largest remainder so the per-class quotas sum to `total`
    let mut quota: Vec<usize> = Vec::with_capacity(strata.len());
    let mut rema: Vec<(f64, usize)> = Vec::with_capacity(strata.len());
    for (c, members) in strata.iter().enumerate() {
        let exact = if learnable == 0 { 0.0 } else { total as f64 * members.len() as f64 / learnable as f64 };
        quota.push(exact.floor() as usize);
        rema.push((exact - exact.floor(), c));
    }
    rema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = total - quota.iter().sum::<usize>();
    for &(_, c) in rema.iter().take(short) {
        quota[c] += 1;
    }
    let mut rng = rng::rng(rng_seed);
    let mut held_out = Vec::with_capacity(total);
    for (members, &k) in strata.iter_mut().zip(&quota) {
        members.shuffle(&mut rng);
        let k = k.min(members.len());
        held_out.extend_from_slice(&members[..k]);
        retained.extend_from_slice(&members[k..]);
    }
    retained.sort_unstable();
    held_out.sort_unstable();
    Ok((retained, held_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn small_config(noise: f64, under: f64) -> GeneratorConfig {
        GeneratorConfig {
            num_examples: 1000,
            num_classes: 4,
            vision_dims: 3,
            language_dims: 2,
            outlier_fraction_noise: noise,
            outlier_fraction_underspecified: under,
            underspecified_group_size: 4,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn zero_fractions_give_only_learnable() {
        let d = generate_synthetic(&small_config(0.0, 0.0)).unwrap();
        assert!(d.groups().iter().all(|&g| g == Group::Learnable));
        assert_eq!(d.len(), 1000);
    }

    #[test]
    fn group_counts_follow_config() {
        let d = generate_synthetic(&small_config(0.15, 0.15)).unwrap();
        assert_eq!(d.group_count(Group::NoiseCollective), 150);
        assert_eq!(d.group_count(Group::UnderspecifiedCollective), 150);
        assert_eq!(d.group_count(Group::Learnable), 700);
        assert!(d.labels().iter().all(|&y| y < 4));
        assert_eq!(d.vision().ncols(), 3);
        assert_eq!(d.language().ncols(), 2);
    }

    #[test]
    fn underspecified_groups_share_features_with_distinct_labels() {
        let d = generate_synthetic(&small_config(0.0, 0.2)).unwrap();
        let mut by_point: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
        for i in 0..d.len() {
            if d.groups()[i] == Group::UnderspecifiedCollective {
                let key = d.row(i).iter().map(|x| x.to_bits()).collect();
                by_point.entry(key).or_default().push(d.labels()[i]);
            }
        }
        assert!(!by_point.is_empty());
        for labels in by_point.values() {
            assert!(labels.len() >= 2);
            let mut sorted = labels.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), labels.len(), "labels within a group must differ");
        }
    }

    #[test]
    fn group_sizes_balanced() {
        assert_eq!(group_sizes(6, 5), vec![3, 3]);
        assert_eq!(group_sizes(10, 5), vec![5, 5]);
        assert_eq!(group_sizes(11, 5), vec![4, 4, 3]);
        assert!(group_sizes(0, 5).is_empty());
    }

    #[test]
    fn invalid_fractions_rejected() {
        assert!(matches!(generate_synthetic(&small_config(0.6, 0.4)), Err(Error::Config(_))));
        assert!(matches!(generate_synthetic(&small_config(-0.1, 0.0)), Err(Error::Config(_))));
        let mut cfg = small_config(0.0, 0.1);
        cfg.underspecified_group_size = 9;
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic(&small_config(0.1, 0.1)).unwrap();
        let b = generate_synthetic(&small_config(0.1, 0.1)).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let mut other = small_config(0.1, 0.1);
        other.rng_seed += 1;
        assert_ne!(a, generate_synthetic(&other).unwrap());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = generate_synthetic(&small_config(0.0, 0.0)).unwrap();
        let s = split_seed_pool(&d, 0.10, 3).unwrap();
        assert_eq!(s.seed_indices.len(), 100);
        assert_eq!(s.pool_indices.len(), 900);
        assert_eq!(s, split_seed_pool(&d, 0.10, 3).unwrap());
        let half = split_seed_pool(&d, 0.50, 3).unwrap();
        assert_eq!(half.seed_indices.len(), 500);
        assert_eq!(half.pool_indices.len(), 500);
        let mut all: Vec<usize> = s.seed_indices.iter().chain(&s.pool_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert!(split_seed_pool(&d, 0.0, 3).is_err());
        assert!(split_seed_pool(&d, 1.0, 3).is_err());
    }

    #[test]
    fn holdout_is_learnable_and_class_balanced() {
        let d = generate_synthetic(&small_config(0.15, 0.15)).unwrap();
        let (train, val) = stratified_holdout(&d, 0.2, 1).unwrap();
        assert_eq!(train.len() + val.len(), 1000);
        assert_eq!(val.len(), 200);
        assert!(val.iter().all(|&i| d.groups()[i] == Group::Learnable));
        for c in 0..4 {
            let total = (0..1000).filter(|&i| d.groups()[i] == Group::Learnable && d.labels()[i] == c).count();
            let held = val.iter().filter(|&&i| d.labels()[i] == c).count();
            let expected = 200.0 * total as f64 / 700.0;
            assert!((held as f64 - expected).abs() < 1.0, "class {c}: {held} vs {expected}");
        }
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn csv_parses_three_rows() {
        let text = "v0,l0,label\n0.5,1,0\n-1.25,2,1\n3,4,2\n";
        let d = parse_csv(text, Some(3)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.labels(), &[0, 1, 2]);
        assert_eq!(d.groups(), &[Group::Learnable; 3]);
    }

    #[test]
    fn csv_label_out_of_range_names_line() {
        let text = "v0,l0,label\n0.5,1,0\n0.1,0.2,5\n";
        match parse_csv(text, Some(4)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_dimension_mismatch_is_error() {
        let text = "v0,v1,l0,label\n0.5,1,0\n";
        assert!(matches!(parse_csv(text, None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_csv("v0,label\n1,0\n", None), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_csv("v0,l0,label\n1,x,0\n", None), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let d = generate_synthetic(&small_config(0.1, 0.1)).unwrap();
        let back = parse_csv(&d.to_csv_string(), Some(4)).unwrap();
        assert_eq!(d, back);
    }
}

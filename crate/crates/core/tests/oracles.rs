//! Independent oracles for derived expectations.

use alcart_core::acquisition::{
    coreset_amortized, coreset_greedy, coverage_radius, pca_project, AcquisitionStrategy, StrategyKind,
};
use alcart_core::cartography::{ablate_pool, rank_by_outlier_score, Bucket, DatasetMap, MapEntry, ScoreRule};
use alcart_core::data::{generate_synthetic, Dataset, GeneratorConfig, Group};
use alcart_core::exec::Exec;
use alcart_core::harness::{Benchmark, ExperimentConfig, ExperimentResult, IterationRecord};
use alcart_core::model::{init_model, train, ModelKind, ModelSpec, TrainConfig};
use alcart_core::report::aggregate_curves;
use alcart_core::rng;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues and
/// eigenvectors (as columns), unsorted.
fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), v)
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng::rng(seed);
    Array2::from_shape_fn((rows, cols), |_| r.sample::<f64, _>(StandardNormal))
}

#[test]
fn pca_matches_jacobi_oracle() {
    let x = gaussian(10, 5, 11);
    let m = x.nrows() as f64;
    let mean = x.mean_axis(ndarray::Axis(0)).unwrap();
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (m - 1.0);
    let (vals, vecs) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

    let p = pca_project(x.view(), 3).unwrap();
    for (k, &j) in order.iter().take(3).enumerate() {
        assert!((p.eigenvalues[k] - vals[j]).abs() < 1e-10, "eigenvalue {k}");
        let oracle: Array1<f64> = vecs.column(j).to_owned();
        let got = p.basis.column(k);
        // same direction up to sign
        let dot = oracle.dot(&got);
        assert!((dot.abs() - 1.0).abs() < 1e-9, "column {k}: |dot| = {}", dot.abs());
        let max_entry = got.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!(max_entry > 0.0, "sign rule on column {k}");
    }
}

#[test]
fn amortized_coreset_radius_near_exact() {
    // 200 points in 40 dimensions, defaults for the amortized variant
    let reps = gaussian(200, 40, 5);
    let labeled: Vec<usize> = (0..20).collect();
    let pool: Vec<usize> = (20..200).collect();
    let b = 40;
    let exact = coreset_greedy(reps.view(), &labeled, &pool, b, Exec::Sequential).unwrap();
    let amortized = coreset_amortized(reps.view(), &labeled, &pool, b, 32, 2, Exec::Sequential).unwrap();
    let centers = |picked: &[usize]| labeled.iter().chain(picked).copied().collect::<Vec<_>>();
    let r_exact = coverage_radius(reps.view(), &centers(&exact.indices), &pool);
    let r_amortized = coverage_radius(reps.view(), &centers(&amortized.indices), &pool);
    let ratio = r_amortized / r_exact;
    println!("amortized / exact coverage radius = {ratio:.4}");
    assert!(ratio <= 1.5, "ratio {ratio}");
}

#[test]
fn learnable_class_balance_passes_chi_square() {
    for seed in [1u64, 2, 3, 4, 5] {
        let cfg = GeneratorConfig {
            num_examples: 2000,
            rng_seed: seed,
            ..GeneratorConfig::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        let c = d.num_classes();
        let mut counts = vec![0usize; c];
        for i in 0..d.len() {
            if d.groups()[i] == Group::Learnable {
                counts[d.labels()[i]] += 1;
            }
        }
        let n: usize = counts.iter().sum();
        let expected = n as f64 / c as f64;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((c - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.001, "seed {seed}: chi2 {chi2}, p {p}");
    }
}

fn blob_pair() -> Dataset {
    let mut r = rng::rng(3);
    let n = 200;
    let mut vision = Array2::zeros((n, 2));
    let mut language = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % 2;
        let shift = if y == 0 { -3.0 } else { 3.0 };
        for j in 0..2 {
            vision[[i, j]] = shift + 0.5 * r.sample::<f64, _>(StandardNormal);
            language[[i, j]] = 0.5 * r.sample::<f64, _>(StandardNormal);
        }
        labels.push(y);
    }
    Dataset::new(vision, language, labels, vec![Group::Learnable; n], 2).unwrap()
}

/// Perceptron on the augmented features; converging proves separability.
fn perceptron_separates(d: &Dataset) -> bool {
    let x = d.features();
    let mut w = vec![0.0; x.ncols() + 1];
    for _ in 0..1000 {
        let mut mistakes = 0;
        for i in 0..d.len() {
            let y = if d.labels()[i] == 1 { 1.0 } else { -1.0 };
            let act: f64 = x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[x.ncols()];
            if y * act <= 0.0 {
                mistakes += 1;
                for (j, v) in x.row(i).iter().enumerate() {
                    w[j] += y * v;
                }
                w[x.ncols()] += y;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

#[test]
fn separable_blobs_are_fit() {
    let d = blob_pair();
    assert!(perceptron_separates(&d));
    let all: Vec<usize> = (0..d.len()).collect();
    for kind in [ModelKind::Logreg, ModelKind::Mlp] {
        let spec = ModelSpec {
            kind,
            hidden_dim: 64,
            dropout_rate: 0.2,
            vision_dims: 2,
            language_dims: 2,
            num_classes: 2,
            init_scale: 1.0,
            rng_seed: 9,
        };
        let cfg = TrainConfig {
            rng_seed: 4,
            ..TrainConfig::default_for(kind)
        };
        let out = train(init_model(&spec).unwrap(), &d, &all, &cfg, None).unwrap();
        let acc = out.model.accuracy(&d, &all).unwrap();
        assert!(acc >= 0.99, "{kind:?}: {acc}");
    }
}

#[test]
fn default_training_loss_does_not_increase() {
    let cfg = ExperimentConfig::default();
    let bench = Benchmark::prepare(&cfg).unwrap();
    let spec = cfg.model.spec_for(bench.dataset(), 1);
    let train_cfg = cfg.train.config_for(spec.kind, 2);
    let out = train(init_model(&spec).unwrap(), bench.dataset(), bench.train_indices(), &train_cfg, None).unwrap();
    for (e, w) in out.epoch_losses.windows(2).enumerate() {
        assert!(w[1] <= w[0], "epoch {}: {} -> {}", e + 1, w[0], w[1]);
    }
}

#[test]
fn noise_labels_do_not_generalize() {
    // Every other noise example is held out; the model trains on the rest of
    // the pool and is scored on the held-out half.
    let cfg = ExperimentConfig::default();
    let bench = Benchmark::prepare(&cfg).unwrap();
    let groups = bench.dataset().groups();
    let noise: Vec<usize> = bench
        .train_indices()
        .iter()
        .copied()
        .filter(|&i| groups[i] == Group::NoiseCollective)
        .collect();
    let held: Vec<usize> = noise.iter().copied().step_by(2).collect();
    let fit: Vec<usize> = bench
        .train_indices()
        .iter()
        .copied()
        .filter(|i| held.binary_search(i).is_err())
        .collect();
    let spec = cfg.model.spec_for(bench.dataset(), 1);
    let train_cfg = cfg.train.config_for(spec.kind, 2);
    let out = train(init_model(&spec).unwrap(), bench.dataset(), &fit, &train_cfg, None).unwrap();
    let acc = out.model.accuracy(bench.dataset(), &held).unwrap();
    let chance = 1.0 / bench.dataset().num_classes() as f64;
    println!("held-out noise-collective accuracy {acc:.4} (chance {chance})");
    assert!((acc - chance).abs() <= 0.10, "accuracy {acc}");
}

#[test]
fn zero_outlier_map_has_few_impossible() {
    let mut cfg = ExperimentConfig::default();
    if let alcart_core::harness::DatasetSource::Generator(g) = &mut cfg.dataset {
        g.outlier_fraction_noise = 0.0;
        g.outlier_fraction_underspecified = 0.0;
    }
    let map = Benchmark::prepare(&cfg).unwrap().build_reference_map().unwrap();
    let impossible = map.entries().iter().filter(|e| e.bucket == Bucket::Impossible).count();
    let share = impossible as f64 / map.len() as f64;
    println!("impossible share without outliers {share:.4}");
    assert!(share < 0.05, "{share}");
}

fn entry(index: usize, mu: f64, sigma: f64, group: Group) -> MapEntry {
    MapEntry {
        index,
        mu,
        sigma,
        correctness: mu,
        bucket: Bucket::from_confidence(mu),
        outlier_score: ScoreRule::Product.score(mu, sigma),
        group: Some(group),
    }
}

#[test]
fn ranking_matches_reference_sort() {
    let mut r = rng::rng(21);
    let entries: Vec<MapEntry> = (0..300)
        .map(|i| {
            // coarse values so ties occur
            let mu = f64::from(r.gen_range(0u32..10)) / 10.0;
            let sigma = f64::from(r.gen_range(0u32..5)) / 10.0;
            entry(i * 7 % 307, mu, sigma, Group::Learnable)
        })
        .collect();
    let map = DatasetMap::from_entries(entries.clone()).unwrap();
    let mut oracle: Vec<(f64, usize)> = entries.iter().map(|e| (e.mu * e.sigma, e.index)).collect();
    // insertion sort, lexicographic on (score, index)
    for i in 1..oracle.len() {
        let mut j = i;
        while j > 0 && (oracle[j - 1].0 > oracle[j].0 || (oracle[j - 1].0 == oracle[j].0 && oracle[j - 1].1 > oracle[j].1)) {
            oracle.swap(j - 1, j);
            j -= 1;
        }
    }
    let want: Vec<usize> = oracle.into_iter().map(|(_, i)| i).collect();
    assert_eq!(rank_by_outlier_score(&map), want);
}

#[test]
fn ablation_removes_low_confidence_noise() {
    let mut r = rng::rng(8);
    let mut entries = Vec::new();
    for i in 0..1000 {
        let e = if i % 10 < 3 {
            entry(i, r.gen_range(0.0..0.1), r.gen_range(0.0..0.05), Group::NoiseCollective)
        } else {
            entry(i, r.gen_range(0.3..1.0), r.gen_range(0.05..0.4), Group::Learnable)
        };
        entries.push(e);
    }
    let map = DatasetMap::from_entries(entries).unwrap();
    let pool: Vec<usize> = (0..1000).collect();
    let kept = ablate_pool(&pool, &map, 0.3).unwrap();
    let noise_kept = kept.iter().filter(|&&i| i % 10 < 3).count();
    let removed_share = 1.0 - noise_kept as f64 / 300.0;
    assert!(removed_share >= 0.9, "{removed_share}");
}

fn hand_result(seed: u64, accs: [f64; 3]) -> ExperimentResult {
    ExperimentResult {
        strategy: AcquisitionStrategy::new(StrategyKind::Entropy),
        removal_fraction: 0.25,
        replicate_seed: seed,
        batch_size: 50,
        seed_indices: Vec::new(),
        initial_pool: Vec::new(),
        iterations: accs
            .iter()
            .enumerate()
            .map(|(k, &val_accuracy)| IterationRecord {
                iteration: k,
                labeled_size: 100 + 50 * k,
                val_accuracy,
                acquired: Vec::new(),
                acquired_buckets: None,
                wall_clock_ms: 0.0,
            })
            .collect(),
        config: ExperimentConfig::default(),
    }
}

#[test]
fn aggregation_matches_hand_computation() {
    let results = vec![
        hand_result(3, [0.50, 0.60, 0.70]),
        hand_result(1, [0.40, 0.60, 0.80]),
        hand_result(2, [0.60, 0.60, 0.90]),
    ];
    let curves = aggregate_curves(&results).unwrap();
    assert_eq!(curves.len(), 1);
    let c = &curves[0];
    assert_eq!(c.labeled_sizes(), vec![100, 150, 200]);
    // means 0.5, 0.6, 0.8; population std sqrt(0.02/3), 0, sqrt(0.02/3)
    let want = [(0.5, (0.02f64 / 3.0).sqrt()), (0.6, 0.0), (0.8, (0.02f64 / 3.0).sqrt())];
    for (p, (m, s)) in c.points.iter().zip(want) {
        assert!((p.mean - m).abs() < 1e-12);
        assert!((p.std - s).abs() < 1e-12);
    }
}

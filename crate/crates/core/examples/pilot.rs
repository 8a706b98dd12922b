//! Calibration pilot for the standard benchmark.
//!
//! Usage: cargo run --release --example pilot -- [config.json] [replicates]

use std::time::Instant;

use alcart_core::acquisition::{AcquisitionStrategy, StrategyKind};
use alcart_core::cartography::Bucket;
use alcart_core::data::Group;
use alcart_core::exec::Exec;
use alcart_core::harness::{Benchmark, ExperimentConfig, ModelConfig};
use alcart_core::model::ModelKind;
use alcart_core::report::{aggregate_curves, sample_efficiency};

fn main() -> alcart_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = match args.get(1).filter(|a| a.as_str() != "-") {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => ExperimentConfig::default(),
    };
    let reps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    cfg.replicate_seeds.truncate(reps);
    let exec = Exec::default();
    let t = Instant::now();

    // Logistic regression on full data, learnable validation examples only.
    let mut lr_cfg = cfg.clone();
    lr_cfg.model = ModelConfig { kind: ModelKind::Logreg, ..ModelConfig::default() };
    let lr = Benchmark::prepare(&lr_cfg)?;
    let learn: Vec<usize> = lr.train_indices().iter().copied().filter(|&i| lr.dataset().groups()[i] == Group::Learnable).collect();
    let (_, model) = lr.train_and_evaluate(&learn, 1, 0)?;
    let val_learn: Vec<usize> = lr.val_indices().iter().copied().filter(|&i| lr.dataset().groups()[i] == Group::Learnable).collect();
    let (all_acc, _) = lr.train_and_evaluate(lr.train_indices(), 1, 0)?;
    println!("logreg all-train accuracy {all_acc:.4}");
    println!("logreg learnable-only accuracy {:.4} ({:.1}s)", model.accuracy(lr.dataset(), &val_learn)?, t.elapsed().as_secs_f64());

    let mut bench = Benchmark::prepare(&cfg)?;
    let full = bench.full_data_accuracy(exec)?;
    println!("mlp full-data accuracy {:.4} ({:.1}s)", full, t.elapsed().as_secs_f64());
    let map = bench.ensure_reference_map()?.clone();
    let n = map.len() as f64;
    let imp = map.entries().iter().filter(|e| e.bucket == Bucket::Impossible).count() as f64 / n;
    let noise: Vec<_> = map.entries().iter().filter(|e| e.group == Some(Group::NoiseCollective)).collect();
    let noise_hi = noise.iter().filter(|e| matches!(e.bucket, Bucket::Hard | Bucket::Impossible)).count() as f64 / noise.len() as f64;
    println!("map: impossible share {:.3}, noise in hard+impossible {:.3} ({:.1}s)", imp, noise_hi, t.elapsed().as_secs_f64());
    for g in Group::ALL {
        let es: Vec<_> = map.entries().iter().filter(|e| e.group == Some(g)).collect();
        let mut h = [0usize; 4];
        for e in &es { h[Bucket::ALL.iter().position(|b| *b == e.bucket).unwrap()] += 1; }
        let mu = es.iter().map(|e| e.mu).sum::<f64>() / es.len() as f64;
        let sg = es.iter().map(|e| e.sigma).sum::<f64>() / es.len() as f64;
        let sc = es.iter().map(|e| e.outlier_score).sum::<f64>() / es.len() as f64;
        println!("  {g}: n={} buckets={h:?} mean mu {mu:.3} sigma {sg:.3} score {sc:.4}", es.len());
    }

    let kinds = [StrategyKind::Random, StrategyKind::Entropy, StrategyKind::LeastConfidence, StrategyKind::Bald, StrategyKind::McEntropy, StrategyKind::CoresetFused];
    let fractions: Vec<f64> = std::env::var("FRACTIONS").ok().map(|s| s.split(',').map(|x| x.parse().unwrap()).collect()).unwrap_or(vec![0.0, 0.1, 0.25, 0.5]);
    let target = full * cfg.target_fraction;
    for f in fractions {
        let mut ks: Vec<StrategyKind> = if f == 0.0 { kinds.to_vec() } else { kinds[..5].to_vec() };
        if let Ok(k) = std::env::var("KINDS") { ks = k.split(',').map(|x| x.parse().unwrap()).collect(); }
        let mut specs = Vec::new();
        for k in &ks {
            for &s in &cfg.replicate_seeds {
                specs.push(alcart_core::harness::RunSpec { strategy: AcquisitionStrategy::new(*k), removal_fraction: f, replicate_seed: s });
            }
        }
        let results = bench.run_all(&specs, exec)?;
        let curves = aggregate_curves(&results)?;
        let random = curves.iter().find(|c| c.strategy == StrategyKind::Random).unwrap();
        println!("fraction {f}: target {target:.4} ({:.1}s)", t.elapsed().as_secs_f64());
        for c in &curves {
            let se = sample_efficiency(c, random, target);
            let first: Vec<f64> = results.iter().filter(|r| r.kind() == c.strategy).map(|r| {
                let h = r.iterations[0].acquired_buckets.unwrap();
                h.impossible as f64 / h.total() as f64
            }).collect();
            let pool_imp: Vec<f64> = results.iter().filter(|r| r.kind() == c.strategy).map(|r| {
                r.initial_pool.iter().filter(|&&i| map.bucket_of(i).unwrap() == Bucket::Impossible).count() as f64 / r.initial_pool.len() as f64
            }).collect();
            let per_rep: Vec<String> = results.iter().filter(|r| r.kind() == c.strategy).map(|r| {
                let xy: Vec<(f64,f64)> = r.iterations.iter().map(|i| (i.labeled_size as f64, i.val_accuracy)).collect();
                let rr = results.iter().find(|x| x.kind()==StrategyKind::Random && x.replicate_seed==r.replicate_seed).unwrap();
                let rxy: Vec<(f64,f64)> = rr.iterations.iter().map(|i| (i.labeled_size as f64, i.val_accuracy)).collect();
                format!("{:?}", alcart_core::report::sample_efficiency_xy(&xy, &rxy, target).ratio.map(|v| (v*100.0).round()/100.0))
            }).collect();
            let accs: Vec<String> = c.points.iter().map(|p| format!("{:.3}", p.mean)).collect();
            println!("  {:<17} auc/rand {:.4} SE {:?} per-rep {:?} it1-imp {:?} pool-imp {:.3}\n      {}", c.strategy.name(), c.area() / random.area(), se.ratio, per_rep,
                first.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(), pool_imp[0], accs.join(" "));
        }
    }
    println!("total {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}

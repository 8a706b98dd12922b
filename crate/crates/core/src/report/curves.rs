use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::acquisition::StrategyKind;
use crate::error::{Error, Result};
use crate::harness::ExperimentResult;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub labeled_size: usize,
    pub mean: f64,
    /// Population standard deviation across replicates.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: StrategyKind,
    pub removal_fraction: f64,
    pub replicates: usize,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn labeled_sizes(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.labeled_size).collect()
    }

    /// Trapezoidal area under the mean curve over labeled size.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[0].mean + w[1].mean) * (w[1].labeled_size - w[0].labeled_size) as f64)
            .sum()
    }
}

fn fraction_key(f: f64) -> u64 {
    f.to_bits()
}

/// Pointwise mean and standard deviation over replicates, one curve per
/// (strategy, removal fraction). Curves come back ordered by fraction, then
/// strategy. Replicates of a group must share a labeled-size grid.
pub fn aggregate_curves(results: &[ExperimentResult]) -> Result<Vec<LearningCurve>> {
    let mut groups: BTreeMap<(u64, StrategyKind), Vec<&ExperimentResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry((fraction_key(r.removal_fraction), r.kind()))
            .or_default()
            .push(r);
    }
    let mut ordered: Vec<_> = groups.into_iter().collect();
    ordered.sort_by(|a, b| {
        f64::from_bits(a.0 .0)
            .total_cmp(&f64::from_bits(b.0 .0))
            .then(a.0 .1.cmp(&b.0 .1))
    });

    let mut curves = Vec::with_capacity(ordered.len());
    for ((frac, kind), mut members) in ordered {
        // Replicate order must not matter.
        members.sort_by_key(|r| r.replicate_seed);
        let grid: Vec<usize> = members[0].iterations.iter().map(|i| i.labeled_size).collect();
        for m in &members[1..] {
            let other: Vec<usize> = m.iterations.iter().map(|i| i.labeled_size).collect();
            if other != grid {
                return Err(Error::usage(format!(
                    "replicates of {kind} at removal {} disagree on the labeled-size grid",
                    f64::from_bits(frac)
                )));
            }
        }
        let n = members.len() as f64;
        let points = grid
            .iter()
            .enumerate()
            .map(|(k, &labeled_size)| {
                let accs: Vec<f64> = members.iter().map(|m| m.iterations[k].val_accuracy).collect();
                let mean = accs.iter().sum::<f64>() / n;
                let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
                CurvePoint {
                    labeled_size,
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect();
        curves.push(LearningCurve {
            strategy: kind,
            removal_fraction: f64::from_bits(frac),
            replicates: members.len(),
            points,
        });
    }
    Ok(curves)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEfficiency {
    pub target_accuracy: f64,
    /// Interpolated labeled size at which each curve first reaches the
    /// target; `None` when it never does.
    pub examples_needed_random: Option<f64>,
    pub examples_needed_strategy: Option<f64>,
    /// `random / strategy`; `None` when either side is undefined.
    pub ratio: Option<f64>,
}

/// Smallest labeled size at which the mean curve reaches `target`, by
/// linear interpolation between grid points.
pub fn examples_to_reach(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let first = points.iter().position(|&(_, acc)| acc >= target)?;
    if first == 0 {
        return Some(points[0].0);
    }
    let (x0, y0) = points[first - 1];
    let (x1, y1) = points[first];
    Some(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
}

fn xy(curve: &LearningCurve) -> Vec<(f64, f64)> {
    curve.points.iter().map(|p| (p.labeled_size as f64, p.mean)).collect()
}

pub fn sample_efficiency(strategy: &LearningCurve, random: &LearningCurve, target_accuracy: f64) -> SampleEfficiency {
    sample_efficiency_xy(&xy(strategy), &xy(random), target_accuracy)
}

pub fn sample_efficiency_xy(strategy: &[(f64, f64)], random: &[(f64, f64)], target_accuracy: f64) -> SampleEfficiency {
    let r = examples_to_reach(random, target_accuracy);
    let s = examples_to_reach(strategy, target_accuracy);
    let ratio = match (r, s) {
        (Some(r), Some(s)) if s > 0.0 => Some(r / s),
        _ => None,
    };
    SampleEfficiency {
        target_accuracy,
        examples_needed_random: r,
        examples_needed_strategy: s,
        ratio,
    }
}

/// Default target: `fraction` of the full-data accuracy.
pub fn default_target(full_data_accuracy: f64, fraction: f64) -> f64 {
    full_data_accuracy * fraction
}

/// Sample efficiency of one strategy against random at one removal fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub strategy: StrategyKind,
    pub removal_fraction: f64,
    #[serde(flatten)]
    pub efficiency: SampleEfficiency,
}

/// Pairs every non-random curve with the random curve at the same removal
/// fraction. Fractions without a random curve are skipped.
pub fn efficiency_table(curves: &[LearningCurve], target_accuracy: f64) -> Vec<EfficiencyRow> {
    curves
        .iter()
        .filter(|c| c.strategy != StrategyKind::Random)
        .filter_map(|c| {
            let random = curves.iter().find(|r| {
                r.strategy == StrategyKind::Random && r.removal_fraction.to_bits() == c.removal_fraction.to_bits()
            })?;
            Some(EfficiencyRow {
                strategy: c.strategy,
                removal_fraction: c.removal_fraction,
                efficiency: sample_efficiency(c, random, target_accuracy),
            })
        })
        .collect()
}

pub const EFFICIENCY_CSV_HEADER: &str =
    "strategy,removal_fraction,target_accuracy,examples_needed_random,examples_needed_strategy,ratio";

/// Undefined values are written as empty fields.
pub fn efficiency_csv(rows: &[EfficiencyRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = format!("{EFFICIENCY_CSV_HEADER}\n");
    for r in rows {
        let e = &r.efficiency;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.strategy,
            r.removal_fraction,
            e.target_accuracy,
            opt(e.examples_needed_random),
            opt(e.examples_needed_strategy),
            opt(e.ratio)
        ));
    }
    out
}

//! Uncertainty scores. Higher means a stronger preference to acquire.
//! Entropies are in nats.

use ndarray::{Array1, ArrayView2, Axis};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-6;

pub fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::usage("empty probability vector"));
    }
    if p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::usage("probability entries must be finite and non-negative"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::usage(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

fn entropy_unchecked(p: impl IntoIterator<Item = f64>) -> f64 {
    -p.into_iter().filter(|&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// `1 - max(p)`.
pub fn score_least_confidence(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(1.0 - max)
}

/// Shannon entropy with `0 ln 0 = 0`.
pub fn score_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_unchecked(p.iter().copied()))
}

fn check_passes(passes: ArrayView2<f64>) -> Result<Array1<f64>> {
    if passes.nrows() < 2 {
        return Err(Error::usage("need at least two stochastic passes"));
    }
    for row in passes.rows() {
        check_distribution(row.as_slice().unwrap_or(&row.to_vec()))?;
    }
    Ok(passes.mean_axis(Axis(0)).expect("non-empty"))
}

/// Entropy of the mean of `k` pass distributions (rows).
pub fn score_mc_entropy(passes: ArrayView2<f64>) -> Result<f64> {
    let mean = check_passes(passes)?;
    Ok(entropy_unchecked(mean.iter().copied()))
}

/// Mutual information between prediction and dropout mask:
/// entropy of the mean minus the mean of per-pass entropies.
pub fn score_bald(passes: ArrayView2<f64>) -> Result<f64> {
    let mean = check_passes(passes)?;
    let first = passes.row(0);
    if passes.rows().into_iter().all(|r| r == first) {
        return Ok(0.0);
    }
    let total = entropy_unchecked(mean.iter().copied());
    let expected = passes
        .rows()
        .into_iter()
        .map(|r| entropy_unchecked(r.iter().copied()))
        .sum::<f64>()
        / passes.nrows() as f64;
    Ok((total - expected).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn least_confidence_examples() {
        assert_eq!(score_least_confidence(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((score_least_confidence(&[0.25; 4]).unwrap() - 0.75).abs() < 1e-15);
        assert!((score_least_confidence(&[0.6, 0.3, 0.1]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(score_entropy(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((score_entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((score_entropy(&[0.5, 0.5, 0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bayesian_examples() {
        let split = array![[1.0, 0.0], [0.0, 1.0]];
        assert!((score_mc_entropy(split.view()).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((score_bald(split.view()).unwrap() - 2f64.ln()).abs() < 1e-12);
        let same = array![[0.7, 0.2, 0.1], [0.7, 0.2, 0.1], [0.7, 0.2, 0.1]];
        assert_eq!(score_bald(same.view()).unwrap(), 0.0);
        assert!(
            (score_mc_entropy(same.view()).unwrap() - score_entropy(&[0.7, 0.2, 0.1]).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(score_entropy(&[0.5, 0.6]).is_err());
        assert!(score_least_confidence(&[-0.1, 1.1]).is_err());
        assert!(score_entropy(&[f64::NAN, 1.0]).is_err());
        assert!(score_bald(array![[0.5, 0.5]].view()).is_err());
        assert!(score_mc_entropy(array![[0.5, 0.5], [0.9, 0.9]].view()).is_err());
    }
}

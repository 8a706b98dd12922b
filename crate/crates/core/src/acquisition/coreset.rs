//! Greedy k-center selection (the farthest-first 2-approximation) and its
//! amortized variant with PCA and delayed distance refreshes.

use ndarray::{ArrayView1, ArrayView2, Axis};

use super::pca::pca_project;
use super::AcquisitionBatch;
use crate::error::{Error, Result};
use crate::exec::Exec;

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_indices(reps: ArrayView2<f64>, labeled: &[usize], pool: &[usize], b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::usage("batch size must be at least 1"));
    }
    if pool.is_empty() {
        return Err(Error::usage("pool is empty"));
    }
    let n = reps.nrows();
    if let Some(bad) = labeled.iter().chain(pool).find(|&&i| i >= n) {
        return Err(Error::usage(format!("index {bad} outside representation matrix of {n} rows")));
    }
    Ok(())
}

/// Index (into `pool`) of the largest distance; ties go to the lowest
/// example index.
fn farthest(pool: &[usize], dist: &[f64], taken: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for j in 0..pool.len() {
        if taken[j] {
            continue;
        }
        best = match best {
            None => Some(j),
            Some(b) if dist[j] > dist[b] || (dist[j] == dist[b] && pool[j] < pool[b]) => Some(j),
            keep => keep,
        };
    }
    best
}

/// Shared greedy loop. Distances to the selected centers are folded into the
/// pool's min-distances only every `refresh` selections; in between, picks
/// follow the stale ranking.
fn greedy(
    reps: ArrayView2<f64>,
    labeled: &[usize],
    pool: &[usize],
    b: usize,
    refresh: usize,
    exec: Exec,
) -> AcquisitionBatch {
    let mut pool: Vec<usize> = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let b = b.min(pool.len());

    let mut dist: Vec<f64> = exec.map(&pool, |&p| {
        labeled
            .iter()
            .map(|&l| sq_dist(reps.row(p), reps.row(l)))
            .fold(f64::INFINITY, f64::min)
    });
    let mut taken = vec![false; pool.len()];
    let mut batch = AcquisitionBatch::default();

    if labeled.is_empty() {
        // No centers yet: start from the pool point nearest the centroid.
        let rows = reps.select(Axis(0), &pool);
        let centroid = rows.mean_axis(Axis(0)).expect("pool non-empty");
        let near: Vec<f64> = pool.iter().map(|&p| -sq_dist(reps.row(p), centroid.view())).collect();
        let first = farthest(&pool, &near, &taken).expect("pool non-empty");
        taken[first] = true;
        batch.indices.push(pool[first]);
        batch.scores.push((-near[first]).sqrt());
        let center = reps.row(pool[first]);
        exec.for_each_mut(&mut dist, |j, d| *d = sq_dist(reps.row(pool[j]), center));
    }

    let mut pending: Vec<usize> = Vec::new();
    while batch.indices.len() < b {
        let j = farthest(&pool, &dist, &taken).expect("b <= pool size");
        taken[j] = true;
        batch.indices.push(pool[j]);
        batch.scores.push(dist[j].sqrt());
        pending.push(pool[j]);
        if pending.len() >= refresh && batch.indices.len() < b {
            let centers = std::mem::take(&mut pending);
            exec.for_each_mut(&mut dist, |j, d| {
                for &c in &centers {
                    *d = d.min(sq_dist(reps.row(pool[j]), reps.row(c)));
                }
            });
        }
    }
    batch
}

/// Exact batch-aware greedy k-center: each pick is the pool point farthest
/// from `labeled` plus everything picked so far (Euclidean).
///
/// `reps` rows are indexed by example index. With an empty labeled set the
/// first pick is the pool point nearest the pool centroid.
pub fn coreset_greedy(
    reps: ArrayView2<f64>,
    labeled: &[usize],
    pool: &[usize],
    b: usize,
    exec: Exec,
) -> Result<AcquisitionBatch> {
    check_indices(reps, labeled, pool, b)?;
    Ok(greedy(reps, labeled, pool, b, 1, exec))
}

/// Amortized greedy k-center: representations of `labeled ∪ pool` are
/// projected onto `pca_dims` principal components, and pool min-distances
/// are refreshed only every `refresh_interval` picks.
pub fn coreset_amortized(
    reps: ArrayView2<f64>,
    labeled: &[usize],
    pool: &[usize],
    b: usize,
    pca_dims: usize,
    refresh_interval: usize,
    exec: Exec,
) -> Result<AcquisitionBatch> {
    check_indices(reps, labeled, pool, b)?;
    if refresh_interval == 0 {
        return Err(Error::usage("refresh_interval must be at least 1"));
    }
    let mut fit_rows: Vec<usize> = labeled.iter().chain(pool).copied().collect();
    fit_rows.sort_unstable();
    fit_rows.dedup();
    let projection = pca_project(reps.select(Axis(0), &fit_rows).view(), pca_dims)?;
    let projected = projection.transform(reps);
    Ok(greedy(projected.view(), labeled, pool, b, refresh_interval, exec))
}

/// Largest distance from any point of `pool` to its nearest center in
/// `centers`.
pub fn coverage_radius(reps: ArrayView2<f64>, centers: &[usize], pool: &[usize]) -> f64 {
    pool.iter()
        .map(|&p| {
            centers
                .iter()
                .map(|&c| sq_dist(reps.row(p), reps.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn one_dimensional_example() {
        let reps = array![[0.0], [1.0], [5.0], [6.0]];
        let batch = coreset_greedy(reps.view(), &[0], &[1, 2, 3], 2, Exec::Sequential).unwrap();
        assert_eq!(batch.indices, vec![3, 1]);
        assert_eq!(batch.scores, vec![6.0, 1.0]);
    }

    #[test]
    fn single_pick_is_farthest() {
        let reps = array![[0.0, 0.0], [3.0, 4.0], [1.0, 1.0], [-6.0, 0.0]];
        let batch = coreset_greedy(reps.view(), &[0], &[1, 2, 3], 1, Exec::Sequential).unwrap();
        assert_eq!(batch.indices, vec![3]);
    }

    #[test]
    fn empty_labeled_starts_near_centroid() {
        let reps = array![[0.0], [1.0], [2.0], [10.0]];
        // centroid 3.25: nearest is 2.0, then farthest from it is 10.0.
        let batch = coreset_greedy(reps.view(), &[], &[0, 1, 2, 3], 2, Exec::Sequential).unwrap();
        assert_eq!(batch.indices, vec![2, 3]);
    }

    #[test]
    fn oversized_batch_returns_pool() {
        let reps = array![[0.0], [1.0], [5.0]];
        let batch = coreset_greedy(reps.view(), &[0], &[1, 2], 5, Exec::Sequential).unwrap();
        assert_eq!(batch.indices.len(), 2);
    }

    #[test]
    fn amortized_refresh_one_matches_exact_on_rotated() {
        let reps = Array2::from_shape_fn((30, 4), |(i, j)| ((i * 7 + j * 13) % 17) as f64 * 0.37 - (j as f64));
        let labeled = [0, 1, 2];
        let pool: Vec<usize> = (3..30).collect();
        let amortized = coreset_amortized(reps.view(), &labeled, &pool, 8, 4, 1, Exec::Sequential).unwrap();
        let rows: Vec<usize> = (0..30).collect();
        let proj = pca_project(reps.select(Axis(0), &rows).view(), 4).unwrap();
        let exact = coreset_greedy(proj.projected.view(), &labeled, &pool, 8, Exec::Sequential).unwrap();
        assert_eq!(amortized.indices, exact.indices);
    }

    #[test]
    fn stale_refresh_still_distinct() {
        let reps = Array2::from_shape_fn((40, 3), |(i, j)| ((i * 5 + j * 3) % 11) as f64);
        let pool: Vec<usize> = (1..40).collect();
        let batch = coreset_amortized(reps.view(), &[0], &pool, 20, 2, 7, Exec::Sequential).unwrap();
        let mut sorted = batch.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
        assert!(coreset_amortized(reps.view(), &[0], &pool, 20, 2, 0, Exec::Sequential).is_err());
    }
}

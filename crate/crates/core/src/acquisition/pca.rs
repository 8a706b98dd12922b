use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A fitted principal-component projection.
#[derive(Clone, Debug)]
pub struct PcaProjection {
    pub mean: Array1<f64>,
    /// `D x d`, orthonormal columns in descending eigenvalue order. Each
    /// column's largest-magnitude entry is positive.
    pub basis: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    /// The fitted rows projected onto `basis`.
    pub projected: Array2<f64>,
}

impl PcaProjection {
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        (&x - &self.mean).dot(&self.basis)
    }
}

/// Centers the columns of `matrix` and projects onto the top `dims`
/// eigenvectors of the sample covariance.
pub fn pca_project(matrix: ArrayView2<f64>, dims: usize) -> Result<PcaProjection> {
    let (m, d) = matrix.dim();
    if dims == 0 || dims > d {
        return Err(Error::usage(format!("PCA target dimension {dims} outside [1, {d}]")));
    }
    if m < 2 {
        return Err(Error::usage("PCA needs at least two rows"));
    }
    let mean = matrix.mean_axis(Axis(0)).expect("m >= 2");
    let centered = &matrix - &mean;
    let cov = centered.t().dot(&centered) / (m as f64 - 1.0);

    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut basis = Array2::<f64>::zeros((d, dims));
    let mut eigenvalues = Array1::<f64>::zeros(dims);
    for (col, &k) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..d {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            basis[[i, col]] = sign * v[i];
        }
        eigenvalues[col] = eig.eigenvalues[k];
    }
    let projected = centered.dot(&basis);
    Ok(PcaProjection {
        mean,
        basis,
        eigenvalues,
        projected,
    })
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SupouError};

/// Autocovariance matrices on the lag grid `h = nΔ`, `n = 0, 1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcovEstimate {
    pub lags: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
    /// Number of observations behind the estimate, `None` for an exact curve.
    pub n_obs: Option<usize>,
    pub delta: f64,
}

impl AcovEstimate {
    /// Wraps `matrices[n] = acov(nΔ)`; the lag-0 matrix is symmetrized.
    pub fn new(delta: f64, mut matrices: Vec<DMatrix<f64>>, n_obs: Option<usize>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(SupouError::InvalidArgument(format!("lag spacing must be positive, got {delta}")));
        }
        let Some(first) = matrices.first() else {
            return Err(SupouError::Data("autocovariance needs at least lag 0".into()));
        };
        let d = first.nrows();
        if first.ncols() != d {
            return Err(SupouError::Data("autocovariance matrices must be square".into()));
        }
        for (n, m) in matrices.iter().enumerate() {
            if m.shape() != (d, d) {
                return Err(SupouError::Data(format!("lag {n} has shape {:?}, expected ({d}, {d})", m.shape())));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(SupouError::Data(format!("lag {n} has non-finite entries")));
            }
        }
        let sym = (&matrices[0] + matrices[0].transpose()) * 0.5;
        matrices[0] = sym;
        let lags = (0..matrices.len()).map(|n| n as f64 * delta).collect();
        Ok(Self { lags, matrices, n_obs, delta })
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }
}

/// Sample mean and biased (`1/N`) sample autocovariances of a path stored
/// column-wise (`d × N`), at lags `0..=max_lag`.
pub fn empirical_second_order(
    path: &DMatrix<f64>,
    delta: f64,
    max_lag: usize,
) -> Result<(DVector<f64>, AcovEstimate)> {
    let (d, n) = path.shape();
    if d == 0 {
        return Err(SupouError::Data("path has no coordinates".into()));
    }
    if n <= max_lag + 10 {
        return Err(SupouError::Data(format!("path of length {n} is too short for {max_lag} lags")));
    }
    if path.iter().any(|x| !x.is_finite()) {
        return Err(SupouError::Data("path has non-finite values".into()));
    }
    let mean = path.column_mean();
    let mut centered = path.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let matrices = (0..=max_lag)
        .map(|lag| {
            let lead = centered.columns(lag, n - lag);
            let base = centered.columns(0, n - lag);
            (lead * base.transpose()) / n as f64
        })
        .collect();
    Ok((mean, AcovEstimate::new(delta, matrices, Some(n))?))
}

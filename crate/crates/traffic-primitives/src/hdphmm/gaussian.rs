//! Multivariate Gaussian with a cached Cholesky factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Gaussian density with precomputed factorization for repeated
/// log-density evaluation.
#[derive(Clone)]
pub(crate) struct MvGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
    /// How many jitter escalations the factorization needed; zero for a
    /// cleanly SPD covariance.
    pub jitter_level: usize,
}

impl MvGaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Config(format!(
                "covariance shape {}x{} does not match mean length {dim}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let (chol, jitter_level, cov) = robust_cholesky(cov)?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let log_norm = -0.5 * (dim as f64 * LN_2PI + log_det);
        Ok(Self {
            mean,
            cov,
            chol,
            log_norm,
            jitter_level,
        })
    }

    #[inline]
    pub fn logpdf(&self, y: &DVector<f64>) -> f64 {
        let diff = y - &self.mean;
        // Mahalanobis via one triangular solve: ‖L⁻¹ (y − μ)‖².
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has positive diagonal");
        self.log_norm - 0.5 * w.norm_squared()
    }
}

/// Cholesky with escalating diagonal jitter. Sampled covariances are SPD up
/// to round-off; the jitter only ever absorbs that round-off.
pub(crate) fn robust_cholesky(
    cov: DMatrix<f64>,
) -> Result<(Cholesky<f64, Dyn>, usize, DMatrix<f64>)> {
    let dim = cov.nrows();
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return Ok((ch, 0, cov));
    }
    let scale = cov.diagonal().iter().map(|d| d.abs()).fold(0.0, f64::max).max(1e-300);
    let mut jitter = 1e-12 * scale;
    for level in 1..=8 {
        let mut bumped = cov.clone();
        for i in 0..dim {
            bumped[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(bumped.clone()) {
            return Ok((ch, level, bumped));
        }
        jitter *= 100.0;
    }
    Err(Error::Config(
        "covariance matrix is not positive definite".to_owned(),
    ))
}

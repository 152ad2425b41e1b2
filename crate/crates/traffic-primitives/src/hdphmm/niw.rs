//! Normal-inverse-Wishart prior over Gaussian emission parameters:
//! conjugate posterior updates and joint (μ, Σ) draws.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

use super::gaussian::robust_cholesky;

/// NIW parameters (μ₀, λ₀, ν₀, Ψ₀).
#[derive(Clone)]
pub(crate) struct NiwParams {
    pub mean: DVector<f64>,
    pub scale: f64,
    pub dof: f64,
    pub scale_matrix: DMatrix<f64>,
}

impl NiwParams {
    pub fn validate(&self) -> Result<()> {
        let dim = self.mean.len();
        if self.scale_matrix.nrows() != dim || self.scale_matrix.ncols() != dim {
            return Err(Error::Config(format!(
                "NIW scale matrix must be {dim}x{dim}"
            )));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Config("NIW scale must be positive".to_owned()));
        }
        if !(self.dof > dim as f64 + 1.0) {
            return Err(Error::Config(format!(
                "NIW dof must exceed dim + 1 = {}",
                dim + 1
            )));
        }
        if self.mean.iter().any(|v| !v.is_finite())
            || self.scale_matrix.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Config("NIW parameters must be finite".to_owned()));
        }
        let asym = (&self.scale_matrix - self.scale_matrix.transpose()).abs().max();
        if asym > 1e-9 * (1.0 + self.scale_matrix.abs().max()) {
            return Err(Error::Config("NIW scale matrix must be symmetric".to_owned()));
        }
        if Cholesky::new(self.scale_matrix.clone()).is_none() {
            return Err(Error::Config(
                "NIW scale matrix must be positive definite".to_owned(),
            ));
        }
        Ok(())
    }

    /// Conjugate update given `n` observations with mean `obs_mean` and
    /// centered scatter `scatter`.
    pub fn posterior(&self, n: f64, obs_mean: &DVector<f64>, scatter: &DMatrix<f64>) -> NiwParams {
        debug_assert!(n > 0.0);
        let lambda_n = self.scale + n;
        let dof_n = self.dof + n;
        let mean_n = (&self.mean * self.scale + obs_mean * n) / lambda_n;
        let diff = obs_mean - &self.mean;
        let scale_matrix =
            &self.scale_matrix + scatter + (self.scale * n / lambda_n) * (&diff * diff.transpose());
        NiwParams {
            mean: mean_n,
            scale: lambda_n,
            dof: dof_n,
            scale_matrix,
        }
    }

    /// Joint draw: Σ ~ IW(ν, Ψ), then μ ~ N(μ₀, Σ/λ).
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let cov = sample_inverse_wishart(rng, self.dof, &self.scale_matrix)?;
        let (chol, _, _) = robust_cholesky(cov.clone() / self.scale)?;
        let dim = self.mean.len();
        let z = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let mean = &self.mean + chol.l_dirty().lower_triangle() * z;
        Ok((mean, cov))
    }
}

/// Draws Σ ~ InverseWishart(ν, Ψ) via a Bartlett-decomposed Wishart draw of
/// Σ⁻¹ ~ Wishart(ν, Ψ⁻¹).
pub(crate) fn sample_inverse_wishart(
    rng: &mut ChaCha8Rng,
    dof: f64,
    psi: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let dim = psi.nrows();
    let (psi_chol, _, _) = robust_cholesky(psi.clone())?;
    let psi_inv = psi_chol.inverse();
    let (inv_chol, _, _) = robust_cholesky(psi_inv)?;
    let c = inv_chol.l_dirty().lower_triangle();

    // Bartlett factor: sqrt chi-square on the diagonal, standard normals below.
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let chi_dof = dof - i as f64;
        debug_assert!(chi_dof > 0.0);
        let chi = Gamma::new(chi_dof / 2.0, 2.0)
            .map_err(|e| Error::Config(format!("invalid Wishart dof: {e}")))?;
        a[(i, i)] = chi.sample(rng).max(1e-300).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let b = &c * a;
    let precision = &b * b.transpose();
    let (prec_chol, _, _) = robust_cholesky(precision)?;
    let mut cov = prec_chol.inverse();
    // Symmetrize away round-off.
    let cov_t = cov.transpose();
    cov += cov_t;
    cov *= 0.5;
    Ok(cov)
}

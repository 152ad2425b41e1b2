//! Weak-limit blocked Gibbs sampler for the sticky HDP-HMM.
//!
//! One sweep resamples, in order: emission parameters from their NIW
//! posteriors, auxiliary table counts and sticky overrides, the global
//! state weights, the transition rows, the concentration hyperparameters
//! under their Gamma priors, and finally the whole state sequence by
//! backward filtering / forward sampling. Messages are rescaled every step,
//! so underflow never raises an error.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::error::Result;

use super::gaussian::MvGaussian;
use super::niw::NiwParams;
use super::{GammaPrior, SweepRecord};

pub(crate) struct GibbsSampler {
    pub obs: Vec<DVector<f64>>,
    pub n_states: usize,
    pub rng: ChaCha8Rng,
    pub labels: Vec<usize>,
    pub beta: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    pub emissions: Vec<MvGaussian>,
    pub gamma: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub prior: NiwParams,
    pub gamma_prior: GammaPrior,
    pub alpha_prior: GammaPrior,
    pub resample_kappa: bool,
    /// Sticky-override Beta prior on κ/(α+κ), used only when
    /// `resample_kappa` is set.
    pub rho_prior: (f64, f64),
    /// Subtracted from the standardized-space log joint to express it in
    /// the original data units (the standardization Jacobian).
    pub log_jacobian: f64,
}

impl GibbsSampler {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        obs: Vec<DVector<f64>>,
        n_states: usize,
        prior: NiwParams,
        gamma_prior: GammaPrior,
        alpha_prior: GammaPrior,
        kappa: f64,
        resample_kappa: bool,
        seed: u64,
        log_jacobian: f64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t_len = obs.len();
        let labels: Vec<usize> = (0..t_len).map(|_| rng.random_range(0..n_states)).collect();
        let beta = vec![1.0 / n_states as f64; n_states];
        let pi = vec![vec![1.0 / n_states as f64; n_states]; n_states];
        let mut emissions = Vec::with_capacity(n_states);
        for _ in 0..n_states {
            let (mean, cov) = prior.sample(&mut rng)?;
            emissions.push(MvGaussian::new(mean, cov)?);
        }
        Ok(Self {
            obs,
            n_states,
            rng,
            labels,
            beta,
            pi,
            emissions,
            gamma: 1.0,
            alpha: 1.0,
            kappa,
            prior,
            gamma_prior,
            alpha_prior,
            resample_kappa,
            rho_prior: (10.0, 1.0),
            log_jacobian,
        })
    }

    /// One full Gibbs sweep. Returns the diagnostics for this sweep.
    pub fn sweep(&mut self) -> Result<SweepRecord> {
        self.resample_emissions()?;

        let counts = self.transition_counts();
        let tables = self.sample_table_counts(&counts);
        let (adjusted, total_tables, total_overrides) = self.apply_sticky_overrides(&tables);

        self.resample_beta(&adjusted);
        self.resample_pi(&counts);
        self.resample_gamma(&adjusted);
        self.resample_alpha_kappa(&counts, total_tables, total_overrides);

        self.resample_labels();

        Ok(self.diagnostics())
    }

    fn resample_emissions(&mut self) -> Result<()> {
        let dim = self.obs[0].len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.n_states];
        for (t, &x) in self.labels.iter().enumerate() {
            members[x].push(t);
        }
        for (k, idx) in members.iter().enumerate() {
            let params = if idx.is_empty() {
                self.prior.clone()
            } else {
                let n = idx.len() as f64;
                let mut mean = DVector::<f64>::zeros(dim);
                for &t in idx {
                    mean += &self.obs[t];
                }
                mean /= n;
                let mut scatter = DMatrix::<f64>::zeros(dim, dim);
                for &t in idx {
                    let d = &self.obs[t] - &mean;
                    scatter += &d * d.transpose();
                }
                self.prior.posterior(n, &mean, &scatter)
            };
            let (mean, cov) = params.sample(&mut self.rng)?;
            self.emissions[k] = MvGaussian::new(mean, cov)?;
        }
        Ok(())
    }

    /// n[j][k]: transitions j → k in the current labels.
    fn transition_counts(&self) -> Vec<Vec<usize>> {
        let mut n = vec![vec![0usize; self.n_states]; self.n_states];
        for w in self.labels.windows(2) {
            n[w[0]][w[1]] += 1;
        }
        n
    }

    /// Chinese-restaurant table counts m[j][k] for each transition's
    /// customer count under concentration α β_k + κ δ_{jk}.
    fn sample_table_counts(&mut self, counts: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut m = vec![vec![0usize; self.n_states]; self.n_states];
        for j in 0..self.n_states {
            for k in 0..self.n_states {
                let n = counts[j][k];
                if n == 0 {
                    continue;
                }
                let a = self.alpha * self.beta[k] + if j == k { self.kappa } else { 0.0 };
                let mut tables = 0usize;
                for i in 0..n {
                    let p = if i == 0 { 1.0 } else { a / (a + i as f64) };
                    if self.rng.random::<f64>() < p {
                        tables += 1;
                    }
                }
                m[j][k] = tables;
            }
        }
        m
    }

    /// Splits self-transition tables into genuine HDP tables and sticky
    /// overrides; only the former inform β. Returns the adjusted per-state
    /// table counts m̄_{·k}, the total unadjusted table count, and the total
    /// override count.
    fn apply_sticky_overrides(&mut self, tables: &[Vec<usize>]) -> (Vec<usize>, usize, usize) {
        let rho = if self.alpha + self.kappa > 0.0 {
            self.kappa / (self.alpha + self.kappa)
        } else {
            0.0
        };
        let mut adjusted = vec![0usize; self.n_states];
        let mut total = 0usize;
        let mut overrides = 0usize;
        for j in 0..self.n_states {
            for k in 0..self.n_states {
                let m = tables[j][k];
                total += m;
                if m == 0 {
                    continue;
                }
                if j == k && rho > 0.0 {
                    let denom = rho + self.beta[j] * (1.0 - rho);
                    let p = rho / denom;
                    let mut w = 0usize;
                    for _ in 0..m {
                        if self.rng.random::<f64>() < p {
                            w += 1;
                        }
                    }
                    overrides += w;
                    adjusted[k] += m - w;
                } else {
                    adjusted[k] += m;
                }
            }
        }
        (adjusted, total, overrides)
    }

    fn resample_beta(&mut self, adjusted: &[usize]) {
        let shapes: Vec<f64> = adjusted
            .iter()
            .map(|&m| self.gamma / self.n_states as f64 + m as f64)
            .collect();
        self.beta = sample_dirichlet(&mut self.rng, &shapes);
    }

    fn resample_pi(&mut self, counts: &[Vec<usize>]) {
        for j in 0..self.n_states {
            let shapes: Vec<f64> = (0..self.n_states)
                .map(|k| {
                    self.alpha * self.beta[k]
                        + counts[j][k] as f64
                        + if j == k { self.kappa } else { 0.0 }
                })
                .collect();
            self.pi[j] = sample_dirichlet(&mut self.rng, &shapes);
        }
    }

    /// Escobar–West resampling of the top-level concentration γ given the
    /// adjusted table counts feeding the global Dirichlet.
    fn resample_gamma(&mut self, adjusted: &[usize]) {
        let total: usize = adjusted.iter().sum();
        let used = adjusted.iter().filter(|&&m| m > 0).count();
        if total == 0 || used == 0 {
            return;
        }
        let m = total as f64;
        let k = used as f64;
        let (a, b) = (self.gamma_prior.shape, self.gamma_prior.rate);
        let eta: f64 = sample_beta(&mut self.rng, self.gamma + 1.0, m);
        let odds = (a + k - 1.0) / (m * (b - eta.ln()));
        let shape = if self.rng.random::<f64>() < odds / (1.0 + odds) {
            a + k
        } else {
            a + k - 1.0
        };
        let rate = b - eta.ln();
        self.gamma = sample_gamma(&mut self.rng, shape.max(1e-3), rate);
    }

    /// Auxiliary-variable resampling of the total row concentration α + κ;
    /// κ stays fixed unless `resample_kappa` redistributes the total via a
    /// Beta draw on the override fraction.
    fn resample_alpha_kappa(
        &mut self,
        counts: &[Vec<usize>],
        total_tables: usize,
        total_overrides: usize,
    ) {
        if total_tables == 0 {
            return;
        }
        let concentration = self.alpha + self.kappa;
        let (a, b) = (self.alpha_prior.shape, self.alpha_prior.rate);
        let mut shape = a + total_tables as f64;
        let mut rate = b;
        for row in counts {
            let n_j: usize = row.iter().sum();
            if n_j == 0 {
                continue;
            }
            let r = sample_beta(&mut self.rng, concentration + 1.0, n_j as f64);
            rate -= r.ln();
            let s_odds = n_j as f64 / concentration;
            if self.rng.random::<f64>() < s_odds / (1.0 + s_odds) {
                shape -= 1.0;
            }
        }
        let total = sample_gamma(&mut self.rng, shape.max(1e-3), rate);
        if self.resample_kappa {
            let (c, d) = self.rho_prior;
            let rho = sample_beta(
                &mut self.rng,
                c + total_overrides as f64,
                d + (total_tables - total_overrides) as f64,
            );
            self.kappa = rho * total;
            self.alpha = (1.0 - rho) * total;
        } else {
            self.alpha = (total - self.kappa).max(1e-6);
        }
    }

    /// Blocked state-sequence update: backward messages with per-step
    /// rescaling, then forward categorical sampling.
    fn resample_labels(&mut self) {
        let t_len = self.obs.len();
        let l = self.n_states;

        // Scaled emission likelihoods e[t][k] = exp(log f - rowmax).
        let mut scaled = vec![vec![0.0f64; l]; t_len];
        for t in 0..t_len {
            let mut row_max = f64::NEG_INFINITY;
            let mut logs = vec![0.0f64; l];
            for k in 0..l {
                let lp = self.emissions[k].logpdf(&self.obs[t]);
                logs[k] = lp;
                row_max = row_max.max(lp);
            }
            for k in 0..l {
                scaled[t][k] = if row_max.is_finite() {
                    (logs[k] - row_max).exp()
                } else {
                    1.0
                };
            }
        }

        // Backward messages b[t][k] ∝ p(y_{t+1..} | x_t = k), renormalized
        // every step.
        let mut bmsg = vec![vec![1.0f64; l]; t_len];
        normalize_or_uniform(&mut bmsg[t_len - 1]);
        for t in (1..t_len).rev() {
            let mut row = vec![0.0f64; l];
            for (j, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..l {
                    acc += self.pi[j][k] * scaled[t][k] * bmsg[t][k];
                }
                *out = acc;
            }
            normalize_or_uniform(&mut row);
            bmsg[t - 1] = row;
        }

        // Forward pass.
        let mut weights = vec![0.0f64; l];
        for k in 0..l {
            weights[k] = self.beta[k] * scaled[0][k] * bmsg[0][k];
        }
        self.labels[0] = sample_categorical(&mut self.rng, &weights);
        for t in 1..t_len {
            let prev = self.labels[t - 1];
            for k in 0..l {
                weights[k] = self.pi[prev][k] * scaled[t][k] * bmsg[t][k];
            }
            self.labels[t] = sample_categorical(&mut self.rng, &weights);
        }
    }

    /// Joint log probability of the current labels and observations under
    /// the current parameters, in original data units.
    pub fn log_joint(&self) -> f64 {
        let mut lp = self.beta[self.labels[0]].ln();
        for w in self.labels.windows(2) {
            lp += self.pi[w[0]][w[1]].ln();
        }
        for (t, &x) in self.labels.iter().enumerate() {
            lp += self.emissions[x].logpdf(&self.obs[t]);
        }
        lp - self.log_jacobian
    }

    fn diagnostics(&self) -> SweepRecord {
        let beta_err = (self.beta.iter().sum::<f64>() - 1.0).abs();
        let pi_err = self
            .pi
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let mut occupied = vec![false; self.n_states];
        for &x in &self.labels {
            occupied[x] = true;
        }
        SweepRecord {
            log_joint: self.log_joint(),
            max_simplex_error: beta_err.max(pi_err),
            occupied_states: occupied.iter().filter(|&&o| o).count(),
            change_points: self.labels.windows(2).filter(|w| w[0] != w[1]).count(),
            covariances_spd: self.emissions.iter().all(|e| e.jitter_level == 0),
        }
    }
}

/// Dirichlet draw by normalized Gammas; falls back to uniform if every
/// component underflows to zero.
pub(crate) fn sample_dirichlet(rng: &mut ChaCha8Rng, shapes: &[f64]) -> Vec<f64> {
    let mut draws: Vec<f64> = shapes
        .iter()
        .map(|&s| sample_gamma(rng, s.max(1e-6), 1.0))
        .collect();
    let sum: f64 = draws.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        let u = 1.0 / shapes.len() as f64;
        return vec![u; shapes.len()];
    }
    for d in &mut draws {
        *d /= sum;
    }
    draws
}

fn sample_gamma(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    g.sample(rng)
}

fn sample_beta(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    let d = Beta::new(a, b).expect("positive beta parameters");
    d.sample(rng).clamp(1e-12, 1.0 - 1e-12)
}

fn sample_categorical(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        // Degenerate weights: fall back to the heaviest entry.
        return weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
    }
    let target = rng.random::<f64>() * sum;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= target {
            return i;
        }
    }
    weights.len() - 1
}

fn normalize_or_uniform(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        for v in row.iter_mut() {
            *v /= sum;
        }
    } else {
        let u = 1.0 / row.len() as f64;
        for v in row.iter_mut() {
            *v = u;
        }
    }
}

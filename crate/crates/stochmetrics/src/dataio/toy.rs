//! Synthetic 2D toy corpus: a grid of Gaussian "networks" whose means all
//! sit on the identity line while covariance correlation and scale vary
//! independently, optionally hidden behind a random rotation per network.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::SymPsdMatrix;
use crate::moments::{GaussianCondition, StochasticRep};

/// Parameters of the toy corpus. Defaults produce the 11×9 grid of 99
/// networks in n = 2 with M = 5 conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    /// Number of correlation levels (grid rows).
    pub n_corr: usize,
    /// Number of covariance scales (grid columns).
    pub n_scale: usize,
    /// Conditions per network; means sit at `(m, m)·mean_spacing`.
    pub conditions: usize,
    /// Correlation endpoints, inclusive; must stay inside (−1, 1).
    pub corr_range: (f64, f64),
    /// Scale endpoints, inclusive; levels are log-spaced.
    pub scale_range: (f64, f64),
    /// Spacing of condition means along the identity line.
    pub mean_spacing: f64,
    /// Apply one seeded random rotation per network to means and
    /// covariances.
    pub rotate: bool,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            n_corr: 11,
            n_scale: 9,
            conditions: 5,
            corr_range: (-0.8, 0.8),
            scale_range: (0.1, 1.0),
            mean_spacing: 1.0,
            rotate: false,
            seed: 0,
        }
    }
}

/// Ground-truth parameters of one toy network, in generation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyParams {
    pub id: String,
    pub corr_index: usize,
    pub scale_index: usize,
    /// Covariance correlation ρ.
    pub corr: f64,
    /// Covariance scale s (covariance is `s²·[[1, ρ], [ρ, 1]]`).
    pub scale: f64,
}

impl ToySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_corr < 1 || self.n_scale < 1 || self.conditions < 1 {
            return Err(Error::DimensionTooLarge {
                requested: 0,
                available: 1,
            });
        }
        for rho in [self.corr_range.0, self.corr_range.1] {
            if !(-1.0 < rho && rho < 1.0) {
                return Err(Error::GammaOutOfRange(rho));
            }
        }
        if self.scale_range.0 <= 0.0 || self.scale_range.1 <= 0.0 {
            return Err(Error::GammaOutOfRange(self.scale_range.0.min(self.scale_range.1)));
        }
        Ok(())
    }

    fn correlations(&self) -> Vec<f64> {
        linspace(self.corr_range.0, self.corr_range.1, self.n_corr)
    }

    fn scales(&self) -> Vec<f64> {
        linspace(self.scale_range.0.ln(), self.scale_range.1.ln(), self.n_scale)
            .into_iter()
            .map(f64::exp)
            .collect()
    }

    /// Ground-truth grid in the same order as [`generate_toy`]'s output
    /// (correlation-major).
    pub fn params(&self) -> Vec<ToyParams> {
        let corrs = self.correlations();
        let scales = self.scales();
        let mut out = Vec::with_capacity(self.n_corr * self.n_scale);
        for (c, &rho) in corrs.iter().enumerate() {
            for (s, &scale) in scales.iter().enumerate() {
                out.push(ToyParams {
                    id: format!("toy_c{c:02}_s{s:02}"),
                    corr_index: c,
                    scale_index: s,
                    corr: rho,
                    scale,
                });
            }
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Generates the toy corpus in the order of [`ToySpec::params`].
///
/// Every network shares the same mean layout — conditions spaced along the
/// identity line — and network `(c, s)` gives every condition the covariance
/// `scale_s²·[[1, ρ_c], [ρ_c, 1]]`, positive definite for all |ρ| < 1. With
/// `rotate` set, one rotation drawn per network (uniform angle, seeded)
/// conjugates all of its means and covariances, which leaves shape distances
/// over the orthogonal group unchanged.
pub fn generate_toy(spec: &ToySpec) -> Result<Vec<StochasticRep>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let params = spec.params();
    let mut out = Vec::with_capacity(params.len());
    for p in &params {
        let rotation = if spec.rotate {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Some(DMatrix::from_row_slice(
                2,
                2,
                &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
            ))
        } else {
            None
        };
        let cov = {
            let s2 = p.scale * p.scale;
            let raw = DMatrix::from_row_slice(2, 2, &[s2, s2 * p.corr, s2 * p.corr, s2]);
            match &rotation {
                Some(r) => r * raw * r.transpose(),
                None => raw,
            }
        };
        let cov = SymPsdMatrix::new(cov)?;
        let conds = (0..spec.conditions)
            .map(|m| {
                let base = DVector::from_vec(vec![
                    m as f64 * spec.mean_spacing,
                    m as f64 * spec.mean_spacing,
                ]);
                let mean = match &rotation {
                    Some(r) => r * base,
                    None => base,
                };
                GaussianCondition::new(mean, cov.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(StochasticRep::from_gaussians(p.id.clone(), conds)?);
    }
    Ok(out)
}

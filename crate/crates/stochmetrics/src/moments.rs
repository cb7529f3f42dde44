//! Per-condition moment estimation and the preprocessing maps applied to
//! whole representations: grand-mean centering, covariance shrinkage, and
//! PCA dimension equalization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{sym_psd_sqrt, SymPsdMatrix};

/// Covariance denominator: `1/L` (maximum likelihood) or `1/(L-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovNormalization {
    /// Maximum-likelihood `1/L` normalization.
    #[default]
    Mle,
    /// Unbiased `1/(L-1)` normalization; requires at least two trials.
    Unbiased,
}

/// One condition's raw trials: an L×n matrix of responses.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    samples: DMatrix<f64>,
    condition_id: usize,
}

impl SampleBlock {
    /// Wraps an L×n block of trials; requires `L ≥ 1` and finite entries.
    pub fn new(samples: DMatrix<f64>, condition_id: usize) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::EmptySamples(condition_id));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: format!("sample block for condition {condition_id}"),
            });
        }
        Ok(SampleBlock {
            samples,
            condition_id,
        })
    }

    pub fn trials(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn condition_id(&self) -> usize {
        self.condition_id
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Empirical mean over trials.
    pub fn mean(&self) -> DVector<f64> {
        let l = self.trials() as f64;
        DVector::from_fn(self.dim(), |j, _| self.samples.column(j).sum() / l)
    }
}

/// Gaussian moments of one condition, with the covariance square root cached
/// because every alignment sweep consumes it.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCondition {
    mean: DVector<f64>,
    cov: SymPsdMatrix,
    cov_sqrt: SymPsdMatrix,
}

impl GaussianCondition {
    pub fn new(mean: DVector<f64>, cov: SymPsdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch(mean.len(), cov.dim()));
        }
        let cov_sqrt = sym_psd_sqrt(&cov);
        Ok(GaussianCondition {
            mean,
            cov,
            cov_sqrt,
        })
    }

    /// A point mass: zero covariance.
    pub fn dirac(mean: DVector<f64>) -> Self {
        let n = mean.len();
        GaussianCondition {
            mean,
            cov: SymPsdMatrix::new_unchecked(DMatrix::zeros(n, n)),
            cov_sqrt: SymPsdMatrix::new_unchecked(DMatrix::zeros(n, n)),
        }
    }

    fn with_mean(&self, mean: DVector<f64>) -> Self {
        GaussianCondition {
            mean,
            cov: self.cov.clone(),
            cov_sqrt: self.cov_sqrt.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymPsdMatrix {
        &self.cov
    }

    pub fn cov_sqrt(&self) -> &SymPsdMatrix {
        &self.cov_sqrt
    }
}

/// One condition of a representation, in moment or sample form.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Gaussian(GaussianCondition),
    Samples(SampleBlock),
}

impl Condition {
    pub fn dim(&self) -> usize {
        match self {
            Condition::Gaussian(g) => g.dim(),
            Condition::Samples(s) => s.dim(),
        }
    }

    /// Mean response for this condition (moment field or empirical mean).
    pub fn mean(&self) -> DVector<f64> {
        match self {
            Condition::Gaussian(g) => g.mean().clone(),
            Condition::Samples(s) => s.mean(),
        }
    }
}

/// One network's stochastic representation: an ordered list of per-condition
/// response distributions over a shared activation space ℝⁿ.
///
/// Condition order is the correspondence across networks — entry `m` of every
/// representation responds to the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticRep {
    pub id: String,
    conditions: Vec<Condition>,
    n: usize,
}

impl StochasticRep {
    pub fn new(id: impl Into<String>, conditions: Vec<Condition>) -> Result<Self> {
        let id = id.into();
        let n = match conditions.first() {
            Some(c) => c.dim(),
            None => return Err(Error::ConditionCountMismatch(0, 1)),
        };
        for c in &conditions {
            if c.dim() != n {
                return Err(Error::DimensionMismatch(n, c.dim()));
            }
        }
        Ok(StochasticRep { id, conditions, n })
    }

    pub fn from_gaussians(id: impl Into<String>, conds: Vec<GaussianCondition>) -> Result<Self> {
        Self::new(id, conds.into_iter().map(Condition::Gaussian).collect())
    }

    pub fn from_samples(id: impl Into<String>, blocks: Vec<SampleBlock>) -> Result<Self> {
        Self::new(id, blocks.into_iter().map(Condition::Samples).collect())
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of conditions M.
    pub fn num_conditions(&self) -> usize {
        self.conditions.len()
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    /// Moment-form copy: Gaussian conditions pass through, sample blocks are
    /// converted by [`empirical_moments`] (single-trial blocks become point
    /// masses).
    pub fn to_moment_form(&self) -> Result<StochasticRep> {
        let conds = self
            .conditions
            .iter()
            .map(|c| match c {
                Condition::Gaussian(g) => Ok(g.clone()),
                Condition::Samples(s) => empirical_moments(s, CovNormalization::Mle),
            })
            .collect::<Result<Vec<_>>>()?;
        StochasticRep::from_gaussians(self.id.clone(), conds)
    }

    /// Borrowed moment view when every condition already carries moments.
    pub(crate) fn gaussians(&self) -> Option<Vec<&GaussianCondition>> {
        self.conditions
            .iter()
            .map(|c| match c {
                Condition::Gaussian(g) => Some(g),
                Condition::Samples(_) => None,
            })
            .collect()
    }

    /// Borrowed sample view; errors with the offending index if any condition
    /// holds only moments.
    pub fn sample_blocks(&self) -> Result<Vec<&SampleBlock>> {
        self.conditions
            .iter()
            .enumerate()
            .map(|(m, c)| match c {
                Condition::Samples(s) => Ok(s),
                Condition::Gaussian(_) => Err(Error::NoSamples(m)),
            })
            .collect()
    }
}

/// Empirical mean and covariance of one sample block.
///
/// The covariance uses the requested normalization; the maximum-likelihood
/// form is `(1/L) Σ_ℓ x_ℓ x_ℓᵀ − x̄ x̄ᵀ`, computed here in the numerically
/// equivalent centered form. A single trial yields a point mass under MLE
/// normalization and `TooFewSamples` under the unbiased one.
pub fn empirical_moments(
    block: &SampleBlock,
    normalization: CovNormalization,
) -> Result<GaussianCondition> {
    let l = block.trials();
    let denom = match normalization {
        CovNormalization::Mle => l as f64,
        CovNormalization::Unbiased => {
            if l < 2 {
                return Err(Error::TooFewSamples { needed: 2, have: l });
            }
            (l - 1) as f64
        }
    };
    let mean = block.mean();
    if l == 1 {
        return Ok(GaussianCondition::dirac(mean));
    }
    let mut centered = block.samples().clone();
    for mut row in centered.row_iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v -= mean[j];
        }
    }
    let cov = SymPsdMatrix::new_unchecked(centered.transpose() * &centered / denom);
    GaussianCondition::new(mean, cov)
}

/// Identity target used by the shrinkage estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShrinkageTarget {
    /// `(tr S / n) · I`: shrinkage preserves total variance, making γ
    /// unit-free.
    #[default]
    TraceMatchedIdentity,
    /// Literal identity target `I`.
    RawIdentity,
}

/// How the shrinkage intensity γ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShrinkageSelect {
    /// Fixed γ in [0, 1].
    Fixed(f64),
    /// Pick γ from the grid {0.0, 0.1, …, 1.0} minimizing held-out Gaussian
    /// negative log-likelihood averaged over `splits` random half-splits of
    /// the trials.
    CrossValidated { splits: usize, seed: u64 },
}

/// Shrinkage covariance estimate `γ·c·I + (1−γ)·S` of one sample block.
///
/// `S` is the MLE empirical covariance and `c` is the target scale (see
/// [`ShrinkageTarget`]). Returns the chosen γ alongside the estimate.
pub fn shrinkage_covariance(
    block: &SampleBlock,
    select: ShrinkageSelect,
    target: ShrinkageTarget,
) -> Result<(SymPsdMatrix, f64)> {
    let l = block.trials();
    if l < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: l });
    }
    let s = empirical_moments(block, CovNormalization::Mle)?.cov().clone();
    let gamma = match select {
        ShrinkageSelect::Fixed(g) => {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::GammaOutOfRange(g));
            }
            g
        }
        ShrinkageSelect::CrossValidated { splits, seed } => {
            if l < 4 {
                return Err(Error::TooFewSamples { needed: 4, have: l });
            }
            cross_validate_gamma(block, splits.max(1), seed, target)
        }
    };
    Ok((apply_shrinkage(&s, gamma, target), gamma))
}

fn apply_shrinkage(s: &SymPsdMatrix, gamma: f64, target: ShrinkageTarget) -> SymPsdMatrix {
    let n = s.dim();
    let c = match target {
        ShrinkageTarget::TraceMatchedIdentity => s.trace() / n as f64,
        ShrinkageTarget::RawIdentity => 1.0,
    };
    if gamma == 0.0 {
        return s.clone();
    }
    let mut out = s.matrix() * (1.0 - gamma);
    for i in 0..n {
        out[(i, i)] += gamma * c;
    }
    SymPsdMatrix::new_unchecked(out)
}

fn cross_validate_gamma(
    block: &SampleBlock,
    splits: usize,
    seed: u64,
    target: ShrinkageTarget,
) -> f64 {
    const GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let l = block.trials();
    let train_len = l.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut totals = [0.0f64; GRID.len()];

    for _ in 0..splits {
        let mut idx: Vec<usize> = (0..l).collect();
        for i in (1..l).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let (train_idx, test_idx) = idx.split_at(train_len);
        let train = rows(block.samples(), train_idx);
        let test = rows(block.samples(), test_idx);
        let train_block = SampleBlock::new(train, block.condition_id()).expect("nonempty half");
        let moments = empirical_moments(&train_block, CovNormalization::Mle)
            .expect("train half has >= 2 trials");
        for (gi, &gamma) in GRID.iter().enumerate() {
            let shrunk = apply_shrinkage(moments.cov(), gamma, target);
            totals[gi] += gaussian_nll(&test, moments.mean(), &shrunk);
        }
    }

    let mut best = 0usize;
    for gi in 1..GRID.len() {
        if totals[gi] < totals[best] {
            best = gi;
        }
    }
    // If no split produced a finite score (fully degenerate data), take the
    // most heavily shrunk estimate.
    if !totals[best].is_finite() {
        return 1.0;
    }
    GRID[best]
}

fn rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(idx.len(), m.ncols());
    for (r, &i) in idx.iter().enumerate() {
        out.set_row(r, &m.row(i));
    }
    out
}

/// Average Gaussian negative log-likelihood of `test` rows under N(mean, cov);
/// +∞ when the covariance is not invertible.
fn gaussian_nll(test: &DMatrix<f64>, mean: &DVector<f64>, cov: &SymPsdMatrix) -> f64 {
    let n = cov.dim() as f64;
    let chol = match nalgebra::Cholesky::new(cov.matrix().clone()) {
        Some(c) => c,
        None => return f64::INFINITY,
    };
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let mut total = 0.0;
    for row in test.row_iter() {
        let x = row.transpose() - mean;
        let solved = chol.solve(&x);
        total += 0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det + x.dot(&solved));
    }
    total / test.nrows() as f64
}

/// Subtracts the grand mean `ḡ = (1/M) Σ_m μ_m` from every condition.
///
/// Sample blocks have ḡ subtracted from each trial; Gaussian conditions from
/// their mean. Covariances are untouched, so the map is idempotent.
pub fn center_grand_mean(rep: &StochasticRep) -> StochasticRep {
    let m = rep.num_conditions() as f64;
    let mut grand = DVector::zeros(rep.dim());
    for c in rep.conditions() {
        grand += c.mean();
    }
    grand /= m;

    let conditions = rep
        .conditions()
        .iter()
        .map(|c| match c {
            Condition::Gaussian(g) => Condition::Gaussian(g.with_mean(g.mean() - &grand)),
            Condition::Samples(s) => {
                let mut shifted = s.samples().clone();
                for mut row in shifted.row_iter_mut() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v -= grand[j];
                    }
                }
                Condition::Samples(SampleBlock {
                    samples: shifted,
                    condition_id: s.condition_id(),
                })
            }
        })
        .collect();
    StochasticRep {
        id: rep.id.clone(),
        conditions,
        n: rep.dim(),
    }
}

/// The fitted projection returned by [`pca_reduce`].
#[derive(Debug, Clone)]
pub struct PcaFit {
    /// n_out×n projection matrix; rows are principal axes.
    pub projection: DMatrix<f64>,
    /// All n eigenvalues of the fitted scatter, descending.
    pub eigenvalues: DVector<f64>,
}

impl PcaFit {
    /// Fraction of total scatter captured by the retained axes.
    pub fn explained_variance_ratio(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        if total <= 0.0 {
            return 1.0;
        }
        let kept: f64 = self
            .eigenvalues
            .iter()
            .take(self.projection.nrows())
            .sum();
        kept / total
    }
}

/// Projects a representation onto its top `n_out` principal axes.
///
/// The axes are fit on the row-concatenation of all sample blocks when every
/// condition carries samples, and otherwise on the grand-mean-centered
/// second-moment matrix `Σ_m (μ̃_m μ̃_mᵀ + Σ_m) / M` of the moment view.
/// Means project as `μ ↦ Pμ`, covariances as `Σ ↦ PΣPᵀ`, samples row-wise.
pub fn pca_reduce(rep: &StochasticRep, n_out: usize) -> Result<(StochasticRep, PcaFit)> {
    let n = rep.dim();
    if n_out < 1 || n_out > n {
        return Err(Error::DimensionTooLarge {
            requested: n_out,
            available: n,
        });
    }

    let all_samples = rep
        .conditions()
        .iter()
        .all(|c| matches!(c, Condition::Samples(_)));
    let scatter = if all_samples {
        let blocks = rep.sample_blocks()?;
        let total: usize = blocks.iter().map(|b| b.trials()).sum();
        let mut pooled = DMatrix::zeros(total, n);
        let mut r = 0;
        for b in &blocks {
            pooled.rows_mut(r, b.trials()).copy_from(b.samples());
            r += b.trials();
        }
        let mean = DVector::<f64>::from_fn(n, |j, _| pooled.column(j).sum() / total as f64);
        for mut row in pooled.row_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= mean[j];
            }
        }
        pooled.transpose() * &pooled / total as f64
    } else {
        let moment = rep.to_moment_form()?;
        let centered = center_grand_mean(&moment);
        let m = centered.num_conditions() as f64;
        let mut scatter = DMatrix::zeros(n, n);
        for c in centered.conditions() {
            if let Condition::Gaussian(g) = c {
                scatter += g.mean() * g.mean().transpose() + g.cov().matrix();
            }
        }
        scatter / m
    };

    let eig = nalgebra::SymmetricEigen::new((&scatter + scatter.transpose()) * 0.5);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);

    let mut projection = DMatrix::zeros(n_out, n);
    for (r, &src) in order.iter().take(n_out).enumerate() {
        let mut axis = eig.eigenvectors.column(src).clone_owned();
        // Deterministic sign: largest-magnitude component positive.
        let pivot = axis.iter().cloned().fold(0.0f64, |acc, v| {
            if v.abs() > acc.abs() {
                v
            } else {
                acc
            }
        });
        if pivot < 0.0 {
            axis.neg_mut();
        }
        projection.set_row(r, &axis.transpose());
    }

    let conditions = rep
        .conditions()
        .iter()
        .map(|c| match c {
            Condition::Gaussian(g) => {
                let mean = &projection * g.mean();
                let cov =
                    SymPsdMatrix::new_unchecked(&projection * g.cov().matrix() * projection.transpose());
                GaussianCondition::new(mean, cov).map(Condition::Gaussian)
            }
            Condition::Samples(s) => Ok(Condition::Samples(SampleBlock {
                samples: s.samples() * projection.transpose(),
                condition_id: s.condition_id(),
            })),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok((
        StochasticRep {
            id: rep.id.clone(),
            conditions,
            n: n_out,
        },
        PcaFit {
            projection,
            eigenvalues,
        },
    ))
}

/// Draws `trials` Gaussian samples per condition from a moment-form
/// representation, yielding a sample-form copy. Deterministic given `seed`.
pub fn sample_gaussian_rep(rep: &StochasticRep, trials: usize, seed: u64) -> Result<StochasticRep> {
    if trials == 0 {
        return Err(Error::EmptySamples(0));
    }
    let n = rep.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = rep
        .conditions()
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let g = match c {
                Condition::Gaussian(g) => g,
                Condition::Samples(_) => return Err(Error::NoMoments(m)),
            };
            let z = DMatrix::from_fn(trials, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut samples = z * g.cov_sqrt().matrix();
            for mut row in samples.row_iter_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += g.mean()[j];
                }
            }
            SampleBlock::new(samples, m)
        })
        .collect::<Result<Vec<_>>>()?;
    StochasticRep::from_samples(rep.id.clone(), blocks)
}

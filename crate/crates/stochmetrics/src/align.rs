//! Shared alignment machinery: the nuisance group, its elements, solver
//! options, and the group-constrained least-squares step both estimators
//! build on.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::linalg::{
    procrustes_orthogonal, procrustes_permutation, random_orthogonal, random_permutation,
    OrthogonalMatrix, PermutationMatrix,
};

/// The nuisance group 𝒢 over which representations are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentGroup {
    /// Full orthogonal group O(n) — rotations and reflections.
    Orthogonal,
    /// Permutations of the neuron axes.
    Permutation,
    /// No alignment; distances are computed as-is.
    Identity,
}

/// A concrete element of the nuisance group, acting on column vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Orthogonal(OrthogonalMatrix),
    Permutation(PermutationMatrix),
    Identity(usize),
}

impl GroupElement {
    pub fn identity(group: AlignmentGroup, n: usize) -> Self {
        match group {
            AlignmentGroup::Orthogonal => GroupElement::Orthogonal(OrthogonalMatrix::identity(n)),
            AlignmentGroup::Permutation => GroupElement::Permutation(PermutationMatrix::identity(n)),
            AlignmentGroup::Identity => GroupElement::Identity(n),
        }
    }

    /// Uniformly random element (Haar on O(n); uniform over permutations).
    pub fn random<R: Rng + ?Sized>(group: AlignmentGroup, n: usize, rng: &mut R) -> Self {
        match group {
            AlignmentGroup::Orthogonal => GroupElement::Orthogonal(random_orthogonal(n, rng)),
            AlignmentGroup::Permutation => GroupElement::Permutation(random_permutation(n, rng)),
            AlignmentGroup::Identity => GroupElement::Identity(n),
        }
    }

    /// Dense matrix form (identity included, for diagnostics).
    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            GroupElement::Orthogonal(t) => t.matrix().clone(),
            GroupElement::Permutation(p) => p.to_matrix(),
            GroupElement::Identity(n) => DMatrix::identity(*n, *n),
        }
    }

    /// `T x` on a column vector.
    pub fn apply_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            GroupElement::Orthogonal(t) => t.matrix() * x,
            GroupElement::Permutation(p) => p.apply_vector(x),
            GroupElement::Identity(_) => x.clone(),
        }
    }

    /// `T M` on a matrix whose columns are in activation space.
    pub fn apply_left(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GroupElement::Orthogonal(t) => t.matrix() * m,
            GroupElement::Permutation(p) => {
                let mut out = DMatrix::zeros(m.nrows(), m.ncols());
                for (j, &pj) in p.indices().iter().enumerate() {
                    out.set_row(pj, &m.row(j));
                }
                out
            }
            GroupElement::Identity(_) => m.clone(),
        }
    }

    /// `X Tᵀ` on a matrix with one observation per row.
    pub fn apply_to_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GroupElement::Orthogonal(t) => x * t.matrix().transpose(),
            GroupElement::Permutation(p) => {
                // (X Tᵀ)[:, perm[j]] = X[:, j].
                let mut out = DMatrix::zeros(x.nrows(), x.ncols());
                for (j, &pj) in p.indices().iter().enumerate() {
                    out.set_column(pj, &x.column(j));
                }
                out
            }
            GroupElement::Identity(_) => x.clone(),
        }
    }
}

/// Options shared by the alternating-minimization and IRLS aligners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Maximum alternation / IRLS sweeps.
    pub max_iters: usize,
    /// Convergence threshold on the relative objective decrease.
    pub rel_tol: f64,
    /// Number of initializations: the first is the identity, extras are
    /// uniformly random group elements. The best final objective wins.
    pub n_restarts: usize,
    /// Seed for restarts and any internal subsampling.
    pub seed: u64,
    /// Cross-pair budget per condition for the energy estimator; pairs are
    /// uniformly subsampled (seeded) above this.
    pub max_pairs_per_condition: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions {
            max_iters: 100,
            rel_tol: 1e-8,
            n_restarts: 1,
            seed: 0,
            max_pairs_per_condition: 1_000_000,
        }
    }
}

/// Solves `min_{T ∈ 𝒢} ‖A − B Tᵀ‖_F` for row-stacked systems.
///
/// For the orthogonal group this is a single Procrustes solve; for the
/// permutation group a linear assignment; for the identity group the
/// residual is evaluated directly. Every call solves its subproblem exactly,
/// which is what makes the alternating objectives non-increasing.
pub(crate) fn solve_group_alignment(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    group: AlignmentGroup,
) -> Result<GroupElement> {
    match group {
        AlignmentGroup::Orthogonal => {
            let (t, _) = procrustes_orthogonal(a, b)?;
            Ok(GroupElement::Orthogonal(t))
        }
        AlignmentGroup::Permutation => {
            // ‖A − BΠ‖ is minimized by Π; T = Πᵀ so that B Tᵀ = B Π.
            let (pi, _) = procrustes_permutation(a, b)?;
            Ok(GroupElement::Permutation(pi.inverse()))
        }
        AlignmentGroup::Identity => Ok(GroupElement::Identity(a.ncols())),
    }
}

/// Stable per-pair seed derivation: distances must not depend on evaluation
/// order or worker count, so every (i, j) pair draws from its own stream.
pub(crate) fn derive_seed(seed: u64, i: u64, j: u64) -> u64 {
    // splitmix64 over a fixed mix of the inputs.
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(i.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(j.wrapping_mul(0x94d0_49bb_1331_11eb))
        .wrapping_add(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

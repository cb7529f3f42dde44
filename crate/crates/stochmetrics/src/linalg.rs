//! Dense linear-algebra kernels shared by every metric computation: symmetric
//! PSD square roots, Procrustes solvers over the orthogonal and permutation
//! groups, and classical (Torgerson) multidimensional scaling.
//!
//! Conventions used throughout the crate:
//!
//! * Transformations act on **column vectors**, `x ↦ T x`. A data matrix with
//!   one observation per row is therefore transformed as `X ↦ X Tᵀ`.
//! * All matrices are dense `f64` ([`nalgebra::DMatrix`]); the problems here
//!   are small (tens of dimensions), so direct eigendecompositions and SVDs
//!   are both the fastest and the most predictable choice.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for symmetry checks.
pub const SYMMETRY_RTOL: f64 = 1e-10;

/// Eigenvalues below `-PSD_FLOOR_RTOL * λ_max` are treated as data corruption
/// rather than rounding noise.
pub const PSD_FLOOR_RTOL: f64 = 1e-8;

/// Tolerance on `‖TᵀT − I‖_F` for orthogonality checks.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// A validated symmetric positive-semidefinite matrix.
///
/// Construction checks symmetry to within [`SYMMETRY_RTOL`] (relative
/// Frobenius) and that no eigenvalue falls below `-1e-8 · λ_max`; eigenvalues
/// inside that band are considered rounding noise and are clamped to zero
/// wherever the spectrum is consumed (e.g. [`sym_psd_sqrt`]). The stored
/// entries are the symmetrized input, not an eigen-reconstruction, so exact
/// inputs round-trip exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPsdMatrix {
    data: DMatrix<f64>,
}

impl SymPsdMatrix {
    /// Validates and wraps a symmetric PSD matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch(m.nrows(), m.ncols(), m.ncols(), m.ncols()));
        }
        let scale = m.norm();
        let asym = (&m - m.transpose()).norm();
        if asym > SYMMETRY_RTOL * scale.max(1e-300) && asym > 0.0 {
            return Err(Error::NotSymmetric(asym / scale.max(1e-300)));
        }
        let sym = symmetrize(&m);
        let eigvals = nalgebra::SymmetricEigen::new(sym.clone()).eigenvalues;
        let lam_max = eigvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lam_min = eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
        let floor = -PSD_FLOOR_RTOL * lam_max;
        if lam_min < floor {
            return Err(Error::IndefiniteMatrix {
                eigenvalue: lam_min,
                floor,
            });
        }
        Ok(SymPsdMatrix { data: sym })
    }

    /// Wraps a matrix already known PSD (internal products of validated
    /// factors). Symmetrizes but skips the eigenvalue audit.
    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymPsdMatrix { data: symmetrize(&m) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }
}

/// A validated element of the orthogonal group O(n).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    data: DMatrix<f64>,
}

impl OrthogonalMatrix {
    /// Validates `TᵀT = I` to within [`ORTHOGONALITY_TOL`] (Frobenius).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::ShapeMismatch(m.nrows(), m.ncols(), m.ncols(), m.ncols()));
        }
        let gram = m.transpose() * &m;
        let defect = (&gram - DMatrix::<f64>::identity(m.nrows(), m.ncols())).norm();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal(defect));
        }
        Ok(OrthogonalMatrix { data: m })
    }

    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(
            {
                let gram = m.transpose() * &m;
                (&gram - DMatrix::<f64>::identity(m.nrows(), m.ncols())).norm() < 1e-6
            },
            "matrix is not orthogonal"
        );
        OrthogonalMatrix { data: m }
    }

    pub fn identity(n: usize) -> Self {
        OrthogonalMatrix {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        OrthogonalMatrix {
            data: self.data.transpose(),
        }
    }

    pub fn determinant(&self) -> f64 {
        self.data.determinant()
    }
}

/// A permutation of `{0, .., n-1}` stored as an index array.
///
/// `perm` encodes the matrix `P` with `P[perm[j], j] = 1`, i.e. as an operator
/// on column vectors `(P x)[perm[j]] = x[j]`, and `B P` places column
/// `perm[j]` of `B` at column `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationMatrix {
    perm: Vec<usize>,
}

impl PermutationMatrix {
    /// Validates that `perm` is a bijection of `{0, .., n-1}`.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidPermutation(n));
            }
            seen[p] = true;
        }
        Ok(PermutationMatrix { perm })
    }

    pub fn identity(n: usize) -> Self {
        PermutationMatrix {
            perm: (0..n).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.perm
    }

    /// Index array of the inverse (transpose) permutation.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.perm.len()];
        for (j, &p) in self.perm.iter().enumerate() {
            inv[p] = j;
        }
        PermutationMatrix { perm: inv }
    }

    /// Dense matrix form of the permutation.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut m = DMatrix::zeros(n, n);
        for (j, &p) in self.perm.iter().enumerate() {
            m[(p, j)] = 1.0;
        }
        m
    }

    /// Applies the permutation to a column vector: `y[perm[j]] = x[j]`.
    pub fn apply_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        for (j, &p) in self.perm.iter().enumerate() {
            y[p] = x[j];
        }
        y
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric PSD square root by eigendecomposition with eigenvalue clamping.
///
/// Returns `R` symmetric PSD with `R·R = S` to within `1e-8·‖S‖_F`.
/// Eigenvalues in the noise band `[-1e-8·λ_max, 0)` are clamped to zero;
/// anything below the band was already rejected when `S` was constructed.
pub fn sym_psd_sqrt(s: &SymPsdMatrix) -> SymPsdMatrix {
    let eig = nalgebra::SymmetricEigen::new(s.data.clone());
    let sqrt_vals: DVector<f64> = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let scaled = {
        let mut v = eig.eigenvectors.clone();
        for (c, &sv) in sqrt_vals.iter().enumerate() {
            v.column_mut(c).scale_mut(sv);
        }
        v
    };
    SymPsdMatrix::new_unchecked(&scaled * eig.eigenvectors.transpose())
}

/// Orthogonal Procrustes: minimizes `‖A − B Tᵀ‖_F` over `T ∈ O(n)`.
///
/// Rows of `A` and `B` are observations; `T` acts on column vectors, so the
/// returned `T` maps `B`'s row space onto `A`'s via `b ↦ T b`. With the full
/// SVD `BᵀA = U S Vᵀ`, the minimizer is `Tᵀ = U Vᵀ` and the minimum is global.
/// Reflections are allowed (full O(n), not SO(n)).
///
/// Returns the minimizer and the attained residual `‖A − B Tᵀ‖_F`.
pub fn procrustes_orthogonal(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(OrthogonalMatrix, f64)> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(a.nrows(), a.ncols(), b.nrows(), b.ncols()));
    }
    let cross = b.transpose() * a;
    let svd = cross.svd(true, true);
    let u = svd.u.expect("SVD with u requested");
    let v_t = svd.v_t.expect("SVD with v_t requested");
    let t_transpose = &u * &v_t;
    let t = OrthogonalMatrix::new_unchecked(t_transpose.transpose());
    let residual = (a - b * t_transpose).norm();
    Ok((t, residual))
}

/// Permutation Procrustes: minimizes `‖A − B Π‖_F` over permutation matrices.
///
/// Equivalent to maximizing `trace(Πᵀ BᵀA)`, a linear assignment problem
/// solved exactly by a shortest-augmenting-path Hungarian algorithm in
/// O(n³).
pub fn procrustes_permutation(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(PermutationMatrix, f64)> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(a.nrows(), a.ncols(), b.nrows(), b.ncols()));
    }
    // Column j of A pairs with column perm[j] of B; profit[j][k] = A_j · B_k.
    let profit = a.transpose() * b;
    let cost = profit.map(|p| -p);
    let perm = assignment::solve(&cost);
    let perm = PermutationMatrix { perm };
    let mut residual_sq = 0.0;
    for (j, &p) in perm.indices().iter().enumerate() {
        residual_sq += (a.column(j) - b.column(p)).norm_squared();
    }
    Ok((perm, residual_sq.max(0.0).sqrt()))
}

/// Result of classical multidimensional scaling.
#[derive(Debug, Clone)]
pub struct MdsEmbedding {
    /// K×m coordinates; column `i` is scaled by `√λ_i`.
    pub coords: DMatrix<f64>,
    /// All K eigenvalues of the double-centered Gram matrix, descending.
    pub eigenvalues: DVector<f64>,
    /// How many of the top-m eigenvalues were negative and clamped to zero.
    pub clamped: usize,
}

/// Classical (Torgerson) MDS of a distance matrix into `m` dimensions.
///
/// Double-centers `-½ J D∘D J` with `J = I − 11ᵀ/K`, takes the top-m
/// eigenpairs, and scales eigenvectors by `√λ`. Negative eigenvalues among
/// the top m are clamped to zero (the corresponding coordinate column is
/// zero) and counted in [`MdsEmbedding::clamped`].
pub fn classical_mds(d: &DMatrix<f64>, m: usize) -> Result<MdsEmbedding> {
    let k = d.nrows();
    if d.ncols() != k {
        return Err(Error::ShapeMismatch(d.nrows(), d.ncols(), k, k));
    }
    if m < 1 || m >= k {
        return Err(Error::DimensionTooLarge {
            requested: m,
            available: k.saturating_sub(1),
        });
    }
    let scale = d.amax().max(1.0);
    for i in 0..k {
        for j in (i + 1)..k {
            if (d[(i, j)] - d[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::AsymmetricInput(i, j));
            }
            if d[(i, j)] < -SYMMETRY_RTOL * scale {
                return Err(Error::NegativeEntry(i, j, d[(i, j)]));
            }
        }
        if d[(i, i)].abs() > SYMMETRY_RTOL * scale {
            return Err(Error::NonzeroDiagonal(i, d[(i, i)]));
        }
    }

    let sq = DMatrix::from_fn(k, k, |i, j| {
        let v = 0.5 * (d[(i, j)] + d[(j, i)]);
        v * v
    });
    let row_means: Vec<f64> = (0..k).map(|i| sq.row(i).sum() / k as f64).collect();
    let grand = row_means.iter().sum::<f64>() / k as f64;
    let gram = DMatrix::from_fn(k, k, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });

    let eig = nalgebra::SymmetricEigen::new(symmetrize(&gram));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues = DVector::from_fn(k, |i, _| eig.eigenvalues[order[i]]);
    let mut coords = DMatrix::zeros(k, m);
    let mut clamped = 0;
    for c in 0..m {
        let lam = eigenvalues[c];
        if lam > 0.0 {
            let col = eig.eigenvectors.column(order[c]) * lam.sqrt();
            coords.set_column(c, &col);
        } else {
            clamped += 1;
        }
    }
    Ok(MdsEmbedding {
        coords,
        eigenvalues,
        clamped,
    })
}

/// Haar-distributed random element of O(n): QR of a Gaussian matrix with the
/// R-diagonal sign fix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> OrthogonalMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r_diag: Vec<f64> = (0..n).map(|i| qr.r()[(i, i)]).collect();
    let mut q = qr.q();
    for (c, &r) in r_diag.iter().enumerate() {
        if r < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    OrthogonalMatrix::new_unchecked(q)
}

/// Uniformly random permutation (Fisher–Yates).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PermutationMatrix {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    PermutationMatrix { perm }
}

pub(crate) use assignment::solve as min_cost_assignment;

mod assignment {
    //! Dense linear assignment by the O(n³) shortest-augmenting-path
    //! (Jonker–Volgenant style) Hungarian algorithm.

    use nalgebra::DMatrix;

    /// Returns `sigma` minimizing `Σ_i cost[i, sigma[i]]` over permutations.
    pub fn solve(cost: &DMatrix<f64>) -> Vec<usize> {
        let n = cost.nrows();
        debug_assert_eq!(n, cost.ncols());
        if n == 0 {
            return Vec::new();
        }
        // 1-based potentials; p[j] is the row matched to column j, 0 = free.
        let mut u = vec![0.0f64; n + 1];
        let mut v = vec![0.0f64; n + 1];
        let mut p = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0usize;
            let mut minv = vec![f64::INFINITY; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;
                for j in 1..=n {
                    if !used[j] {
                        let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                        if cur < minv[j] {
                            minv[j] = cur;
                            way[j] = j0;
                        }
                        if minv[j] < delta {
                            delta = minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut sigma = vec![0usize; n];
        for j in 1..=n {
            sigma[p[j] - 1] = j - 1;
        }
        sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> SymPsdMatrix {
        let g = random_matrix(n, n, rng);
        SymPsdMatrix::new(g.transpose() * g).unwrap()
    }

    #[test]
    fn sqrt_diagonal() {
        let s = SymPsdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])))
            .unwrap();
        let r = sym_psd_sqrt(&s);
        assert!((r.matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).norm() < 1e-12);
    }

    #[test]
    fn sqrt_identity() {
        let s = SymPsdMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let r = sym_psd_sqrt(&s);
        assert!((r.matrix() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn sqrt_reconstructs_random_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let s = random_psd(5, &mut rng);
            let r = sym_psd_sqrt(&s);
            let err = (r.matrix() * r.matrix() - s.matrix()).norm() / s.matrix().norm();
            assert!(err < 1e-10, "reconstruction error {err}");
            // The root commutes with its square.
            let comm = (r.matrix() * s.matrix() - s.matrix() * r.matrix()).norm();
            assert!(comm <= 1e-8 * s.matrix().norm() * r.matrix().norm());
        }
    }

    #[test]
    fn psd_rejects_indefinite() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        match SymPsdMatrix::new(m) {
            Err(Error::IndefiniteMatrix { .. }) => {}
            other => panic!("expected IndefiniteMatrix, got {other:?}"),
        }
    }

    #[test]
    fn psd_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        match SymPsdMatrix::new(m) {
            Err(Error::NotSymmetric(_)) => {}
            other => panic!("expected NotSymmetric, got {other:?}"),
        }
    }

    #[test]
    fn psd_clamps_noise_band() {
        // Eigenvalue -1e-12 with lam_max 1.0 sits inside the noise band.
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-12]));
        let s = SymPsdMatrix::new(m).unwrap();
        let r = sym_psd_sqrt(&s);
        assert!(r.matrix()[(1, 1)] >= 0.0);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = 30f64.to_radians();
        let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let b = random_matrix(100, 2, &mut rng);
        // Row convention: rotating every row by R means A = B Rᵀ.
        let a = &b * rot.transpose();
        let (t, residual) = procrustes_orthogonal(&a, &b).unwrap();
        assert!(residual < 1e-10);
        assert!((t.matrix() - &rot).norm() < 1e-10);
    }

    #[test]
    fn procrustes_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = random_matrix(10, 3, &mut rng);
        let (_, residual) = procrustes_orthogonal(&b, &b).unwrap();
        assert!(residual < 1e-10);
    }

    #[test]
    fn procrustes_beats_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(4, 3, &mut rng);
        let b = random_matrix(4, 3, &mut rng);
        let (_, residual) = procrustes_orthogonal(&a, &b).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..1_000_000 {
            let t = random_orthogonal(3, &mut rng);
            let r = (&a - &b * t.matrix().transpose()).norm();
            if r < best {
                best = r;
            }
        }
        assert!(
            residual <= best + 1e-12,
            "solver residual {residual} above sampled minimum {best}"
        );
    }

    #[test]
    fn procrustes_residual_invariant_to_common_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_matrix(6, 4, &mut rng);
        let b = random_matrix(6, 4, &mut rng);
        let (_, r0) = procrustes_orthogonal(&a, &b).unwrap();
        for _ in 0..5 {
            let q = random_orthogonal(4, &mut rng);
            let (_, r1) =
                procrustes_orthogonal(&(&a * q.matrix()), &(&b * q.matrix())).unwrap();
            assert!((r0 - r1).abs() < 1e-9);
        }
    }

    #[test]
    fn permutation_recovers_shuffle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = random_matrix(8, 5, &mut rng);
        let sigma = random_permutation(5, &mut rng);
        // A = B P means column j of A is column sigma[j] of B.
        let mut a = DMatrix::zeros(8, 5);
        for (j, &p) in sigma.indices().iter().enumerate() {
            a.set_column(j, &b.column(p));
        }
        let (pi, residual) = procrustes_permutation(&a, &b).unwrap();
        assert!(residual < 1e-12);
        assert_eq!(pi.indices(), sigma.indices());
    }

    #[test]
    fn permutation_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let b = random_matrix(6, 4, &mut rng);
        let (pi, residual) = procrustes_permutation(&b, &b).unwrap();
        assert!(residual < 1e-12);
        assert_eq!(pi.indices(), PermutationMatrix::identity(4).indices());
    }

    #[test]
    fn permutation_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let a = random_matrix(6, 5, &mut rng);
            let b = random_matrix(6, 5, &mut rng);
            let (_, residual) = procrustes_permutation(&a, &b).unwrap();
            let mut best = f64::INFINITY;
            let mut perm = vec![0usize, 1, 2, 3, 4];
            permute_all(&mut perm, 0, &mut |p| {
                let mut sq = 0.0;
                for (j, &k) in p.iter().enumerate() {
                    sq += (a.column(j) - b.column(k)).norm_squared();
                }
                best = best.min(sq.sqrt());
            });
            assert!((residual - best).abs() < 1e-10);
        }
    }

    fn permute_all(perm: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute_all(perm, k + 1, f);
            perm.swap(k, i);
        }
    }

    fn pairwise_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
        let k = points.nrows();
        DMatrix::from_fn(k, k, |i, j| (points.row(i) - points.row(j)).norm())
    }

    #[test]
    fn mds_recovers_unit_square() {
        let pts = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let d = pairwise_distances(&pts);
        let emb = classical_mds(&d, 2).unwrap();
        let d2 = pairwise_distances(&emb.coords);
        assert!((d - d2).norm() < 1e-10);
        assert_eq!(emb.clamped, 0);
    }

    #[test]
    fn mds_zero_matrix() {
        let d = DMatrix::zeros(5, 5);
        let emb = classical_mds(&d, 2).unwrap();
        assert!(emb.coords.norm() < 1e-14);
    }

    #[test]
    fn mds_reconstructs_random_configuration() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let pts = random_matrix(10, 3, &mut rng);
        let d = pairwise_distances(&pts);
        let emb = classical_mds(&d, 3).unwrap();
        let d2 = pairwise_distances(&emb.coords);
        assert!((d - d2).norm() < 1e-8);
    }

    #[test]
    fn mds_rejects_bad_input() {
        let mut d = DMatrix::zeros(3, 3);
        d[(0, 1)] = 1.0;
        assert!(matches!(classical_mds(&d, 1), Err(Error::AsymmetricInput(0, 1))));

        let mut d = DMatrix::zeros(3, 3);
        d[(1, 1)] = 0.5;
        assert!(matches!(classical_mds(&d, 1), Err(Error::NonzeroDiagonal(1, _))));

        let d = DMatrix::zeros(3, 3);
        assert!(matches!(
            classical_mds(&d, 3),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in [1usize, 2, 5] {
            let q = random_orthogonal(n, &mut rng);
            let defect =
                (q.matrix().transpose() * q.matrix() - DMatrix::<f64>::identity(n, n)).norm();
            assert!(defect < 1e-12);
            assert!((q.determinant().abs() - 1.0).abs() < 1e-10);
        }
    }
}

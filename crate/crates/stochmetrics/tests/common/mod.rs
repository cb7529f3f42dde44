//! Independent oracles shared by the integration suites. Everything here
//! deliberately avoids the crate's alignment and Procrustes code paths: the
//! grid oracles work in closed-form 2×2 algebra on raw `f64` arrays, the
//! Bures oracle uses the trace formulation with its own eigendecompositions,
//! and the repair oracle is a dense active-set QP solver.

#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use stochmetrics::moments::{Condition, StochasticRep};

/// Number of rotation angles in the grid oracles.
pub const GRID_POINTS: usize = 100_000;

struct TrigTable {
    ct: Vec<f64>,
    st: Vec<f64>,
    c2t: Vec<f64>,
    s2t: Vec<f64>,
}

fn trig_table() -> &'static TrigTable {
    static TABLE: OnceLock<TrigTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = TrigTable {
            ct: Vec::with_capacity(GRID_POINTS),
            st: Vec::with_capacity(GRID_POINTS),
            c2t: Vec::with_capacity(GRID_POINTS),
            s2t: Vec::with_capacity(GRID_POINTS),
        };
        for k in 0..GRID_POINTS {
            let theta = std::f64::consts::TAU * k as f64 / GRID_POINTS as f64;
            let (s, c) = theta.sin_cos();
            t.ct.push(c);
            t.st.push(s);
            t.c2t.push(c * c - s * s);
            t.s2t.push(2.0 * s * c);
        }
        t
    })
}

/// 2×2 matrices as row-major `[a, b, c, d]`.
type M2 = [f64; 4];

fn mul2(x: &M2, y: &M2) -> M2 {
    [
        x[0] * y[0] + x[1] * y[2],
        x[0] * y[1] + x[1] * y[3],
        x[2] * y[0] + x[3] * y[2],
        x[2] * y[1] + x[3] * y[3],
    ]
}

fn tr2(x: &M2) -> f64 {
    x[0] + x[3]
}

fn det2(x: &M2) -> f64 {
    x[0] * x[3] - x[1] * x[2]
}

fn rot(theta: f64) -> M2 {
    let (s, c) = theta.sin_cos();
    [c, -s, s, c]
}

fn transpose2(x: &M2) -> M2 {
    [x[0], x[2], x[1], x[3]]
}

/// Per-condition, per-branch coefficients of the objective as a function of
/// the rotation angle:
///   mean(θ)       = mean_const − 2(u·cosθ + v·sinθ)
///   tr(Σa T Σb Tᵀ) = c0 + c2·cos2θ + s2·sin2θ
///   bures²(θ)     = tr_sum − 2·√(tr(…) + 2√(det Σa det Σb))
struct CondCoeffs {
    mean_const: f64,
    u: f64,
    v: f64,
    tr_sum: f64,
    c0: f64,
    c2: f64,
    s2: f64,
    two_sqrt_det: f64,
}

fn coeffs(mu_a: [f64; 2], sig_a: M2, mu_b: [f64; 2], sig_b: M2) -> CondCoeffs {
    let cross = |theta: f64| -> f64 {
        let r = rot(theta);
        tr2(&mul2(&sig_a, &mul2(&r, &mul2(&sig_b, &transpose2(&r)))))
    };
    let f0 = cross(0.0);
    let f_half_pi = cross(std::f64::consts::FRAC_PI_2);
    let f_quarter_pi = cross(std::f64::consts::FRAC_PI_4);
    let c0 = 0.5 * (f0 + f_half_pi);
    let c2 = 0.5 * (f0 - f_half_pi);
    let s2 = f_quarter_pi - c0;
    CondCoeffs {
        mean_const: mu_a[0] * mu_a[0] + mu_a[1] * mu_a[1] + mu_b[0] * mu_b[0] + mu_b[1] * mu_b[1],
        u: mu_a[0] * mu_b[0] + mu_a[1] * mu_b[1],
        v: mu_a[1] * mu_b[0] - mu_a[0] * mu_b[1],
        tr_sum: tr2(&sig_a) + tr2(&sig_b),
        c0,
        c2,
        s2,
        two_sqrt_det: 2.0 * (det2(&sig_a).max(0.0) * det2(&sig_b).max(0.0)).sqrt(),
    }
}

fn moments_2d(rep: &StochasticRep) -> Vec<([f64; 2], M2)> {
    assert_eq!(rep.dim(), 2, "grid oracle is 2D only");
    let moment = rep.to_moment_form().expect("moment form");
    moment
        .conditions()
        .iter()
        .map(|c| {
            let Condition::Gaussian(g) = c else { unreachable!() };
            let m = g.mean();
            let s = g.cov().matrix();
            ([m[0], m[1]], [s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]])
        })
        .collect()
}

/// Brute-force interpolated-Wasserstein shape distance over O(2): evaluates
/// the alignment objective on a `GRID_POINTS` rotation grid for both the
/// rotation and reflection branches, with the per-condition Bures terms in
/// closed 2×2 form (no eigendecomposition, no Procrustes).
pub fn grid_oracle_w2(rep_a: &StochasticRep, rep_b: &StochasticRep, alpha: f64) -> f64 {
    let conds_a = moments_2d(rep_a);
    let conds_b = moments_2d(rep_b);
    assert_eq!(conds_a.len(), conds_b.len());
    let m_count = conds_a.len() as f64;
    let table = trig_table();

    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        let coeff: Vec<CondCoeffs> = conds_a
            .iter()
            .zip(&conds_b)
            .map(|((mu_a, sig_a), (mu_b, sig_b))| {
                if reflect {
                    // T = R(θ)·F with F = diag(1, −1): pre-transform B.
                    let f: M2 = [1.0, 0.0, 0.0, -1.0];
                    let mu = [mu_b[0], -mu_b[1]];
                    let sig = mul2(&f, &mul2(sig_b, &f));
                    coeffs(*mu_a, *sig_a, mu, sig)
                } else {
                    coeffs(*mu_a, *sig_a, *mu_b, *sig_b)
                }
            })
            .collect();
        for k in 0..GRID_POINTS {
            let (ct, st, c2t, s2t) = (table.ct[k], table.st[k], table.c2t[k], table.s2t[k]);
            let mut total = 0.0;
            for c in &coeff {
                if alpha > 0.0 {
                    let mean = c.mean_const - 2.0 * (c.u * ct + c.v * st);
                    total += alpha * mean.max(0.0);
                }
                if alpha < 2.0 {
                    let inner = c.c0 + c.c2 * c2t + c.s2 * s2t + c.two_sqrt_det;
                    let bures_sq = c.tr_sum - 2.0 * inner.max(0.0).sqrt();
                    total += (2.0 - alpha) * bures_sq.max(0.0);
                }
            }
            if total < best {
                best = total;
            }
        }
    }
    (best / m_count).max(0.0).sqrt()
}

/// Brute-force energy alignment objective over O(2): the minimum over the
/// same rotation/reflection grid of the mean cross term
/// `(1/M) Σ_m (1/(L_A L_B)) ΣΣ ‖a − T b‖^q` (all pairs, no subsampling).
pub fn grid_oracle_energy(rep_a: &StochasticRep, rep_b: &StochasticRep, q: f64) -> f64 {
    assert_eq!(rep_a.dim(), 2);
    let blocks_a = rep_a.sample_blocks().expect("sample form");
    let blocks_b = rep_b.sample_blocks().expect("sample form");
    let table = trig_table();

    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        // Per pair: ‖a − R(θ)b‖² = k − 2(u cosθ + v sinθ).
        let mut k_arr = Vec::new();
        let mut u_arr = Vec::new();
        let mut v_arr = Vec::new();
        let mut weights = Vec::new();
        for (ba, bb) in blocks_a.iter().zip(&blocks_b) {
            let w = 1.0 / (blocks_a.len() as f64 * ba.trials() as f64 * bb.trials() as f64);
            for i in 0..ba.trials() {
                let a = [ba.samples()[(i, 0)], ba.samples()[(i, 1)]];
                for j in 0..bb.trials() {
                    let mut b = [bb.samples()[(j, 0)], bb.samples()[(j, 1)]];
                    if reflect {
                        b[1] = -b[1];
                    }
                    k_arr.push(a[0] * a[0] + a[1] * a[1] + b[0] * b[0] + b[1] * b[1]);
                    u_arr.push(a[0] * b[0] + a[1] * b[1]);
                    v_arr.push(a[1] * b[0] - a[0] * b[1]);
                    weights.push(w);
                }
            }
        }
        for idx in 0..GRID_POINTS {
            let (ct, st) = (table.ct[idx], table.st[idx]);
            let mut total = 0.0;
            for p in 0..k_arr.len() {
                let rsq = (k_arr[p] - 2.0 * (u_arr[p] * ct + v_arr[p] * st)).max(0.0);
                let r = rsq.sqrt();
                total += weights[p]
                    * if q == 1.0 {
                        r
                    } else if q == 2.0 {
                        rsq
                    } else {
                        r.powf(q)
                    };
            }
            if total < best {
                best = total;
            }
        }
    }
    best
}

/// Trace formulation of the Bures metric with its own eigendecompositions:
/// `(tr A + tr B − 2 tr[(A^{1/2} B A^{1/2})^{1/2}])^{1/2}`.
pub fn bures_trace_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    fn sqrt_of(m: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5);
        let mut v = eig.eigenvectors.clone();
        for (c, lam) in eig.eigenvalues.iter().enumerate() {
            v.column_mut(c).scale_mut(lam.max(0.0).sqrt());
        }
        &v * eig.eigenvectors.transpose()
    }
    let ra = sqrt_of(a);
    let inner = sqrt_of(&(&ra * b * &ra));
    (a.trace() + b.trace() - 2.0 * inner.trace()).max(0.0).sqrt()
}

/// Dense active-set solver for the repair QP
/// `min ½‖x − d‖² s.t. aᵢᵀx ≥ 0`, with sparse constraint rows given as
/// `(index, coefficient)` lists. Asserts the KKT conditions of its own
/// solution, so a wrong answer fails loudly rather than silently.
pub fn qp_project_oracle(d: &[f64], constraints: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = d.len();
    let dot_row = |row: &[(usize, f64)], x: &[f64]| -> f64 {
        row.iter().map(|&(i, c)| c * x[i]).sum()
    };

    let mut working: Vec<usize> = Vec::new();
    let solve_eq = |working: &[usize]| -> (Vec<f64>, Vec<f64>) {
        // z = d + A_Wᵀ λ with A_W z = 0  ⇒  (A_W A_Wᵀ) λ = −A_W d.
        if working.is_empty() {
            return (d.to_vec(), Vec::new());
        }
        let w = working.len();
        let gram = DMatrix::from_fn(w, w, |i, j| {
            let (ri, rj) = (&constraints[working[i]], &constraints[working[j]]);
            let mut s = 0.0;
            for &(a, ca) in ri {
                for &(b, cb) in rj {
                    if a == b {
                        s += ca * cb;
                    }
                }
            }
            s
        });
        let rhs = DVector::from_fn(w, |i, _| -dot_row(&constraints[working[i]], d));
        let lambda = gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .expect("gram solve");
        let mut z = d.to_vec();
        for (i, &c_idx) in working.iter().enumerate() {
            for &(j, coef) in &constraints[c_idx] {
                z[j] += lambda[i] * coef;
            }
        }
        (z, lambda.iter().copied().collect())
    };

    let tol = 1e-10;
    for _ in 0..10_000 {
        let (z, lambda) = solve_eq(&working);
        if let Some((drop_pos, _)) = lambda
            .iter()
            .enumerate()
            .filter(|(_, l)| **l < -tol)
            .min_by(|a, b| a.1.total_cmp(b.1))
        {
            working.remove(drop_pos);
            continue;
        }
        let mut worst = (usize::MAX, -tol);
        for (c_idx, row) in constraints.iter().enumerate() {
            if working.contains(&c_idx) {
                continue;
            }
            let v = dot_row(row, &z);
            if v < worst.1 {
                worst = (c_idx, v);
            }
        }
        if worst.0 == usize::MAX {
            // KKT: feasibility, dual feasibility, and stationarity.
            for row in constraints {
                assert!(dot_row(row, &z) >= -1e-8, "oracle infeasible");
            }
            let mut recon = d.to_vec();
            for (i, &c_idx) in working.iter().enumerate() {
                for &(j, coef) in &constraints[c_idx] {
                    recon[j] += lambda[i] * coef;
                }
            }
            for (a, b) in recon.iter().zip(&z) {
                assert!((a - b).abs() < 1e-8, "oracle stationarity failed");
            }
            return z;
        }
        working.push(worst.0);
    }
    panic!("qp oracle did not converge in {n}-dim problem");
}

/// Builds the repair constraint rows (nonnegativity plus all directed
/// triangle inequalities) over the upper-triangle vectorization of a K×K
/// matrix.
pub fn repair_constraints(k: usize) -> Vec<Vec<(usize, f64)>> {
    let idx = |i: usize, j: usize| -> usize { i * (2 * k - i - 1) / 2 + (j - i - 1) };
    let mut rows = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            rows.push(vec![(idx(i, j), 1.0)]);
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            for l in (j + 1)..k {
                let (eij, eil, ejl) = (idx(i, j), idx(i, l), idx(j, l));
                rows.push(vec![(eij, 1.0), (ejl, 1.0), (eil, -1.0)]);
                rows.push(vec![(eij, 1.0), (eil, 1.0), (ejl, -1.0)]);
                rows.push(vec![(eil, 1.0), (ejl, 1.0), (eij, -1.0)]);
            }
        }
    }
    rows
}

/// Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    num / (da.sqrt() * db.sqrt()).max(f64::MIN_POSITIVE)
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    pearson(&ranks(a), &ranks(b))
}

/// Closed-form interpolated-Wasserstein distance between two *unrotated* toy
/// networks directly from their generating parameters `(ρ, s)`. The means
/// coincide, so the optimal alignment cost is the Bures distance between the
/// two covariance templates, which in 2×2 closed form is
/// `√(2[s₁² + s₂² − s₁s₂·g])` with
/// `g = √(2(1+ρ₁ρ₂) + 2√((1−ρ₁²)(1−ρ₂²)))`.
pub fn toy_param_distance_alpha1(p1: (f64, f64), p2: (f64, f64)) -> f64 {
    let (r1, s1) = p1;
    let (r2, s2) = p2;
    let g = (2.0 * (1.0 + r1 * r2) + 2.0 * ((1.0 - r1 * r1) * (1.0 - r2 * r2)).sqrt()).sqrt();
    (2.0f64 * (s1 * s1 + s2 * s2 - s1 * s2 * g)).max(0.0).sqrt()
}

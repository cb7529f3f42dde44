//! Energy-distance shape metric on sampled responses: IRLS alignment over
//! the nuisance group followed by the signed distance estimate.
//!
//! The alignment minimizes the cross term
//!
//! ```text
//! f(T) = (1/M) Σ_m (1/(L_A L_B)) Σ_{ℓ,p} ‖a_ℓ^{(m)} − T b_p^{(m)}‖^q ,   0 < q < 2,
//! ```
//!
//! via iteratively reweighted least squares: each sweep solves the weighted
//! group-Procrustes problem `min_T Σ_i w_i ‖y_i − T x_i‖²` with weights
//! `w_i = ‖y_i − T⁽ᵗ⁾x_i‖^{q−2}`, a majorize–minimize scheme whose objective
//! never increases. `q = 2` bypasses IRLS entirely — the weights are constant
//! and one exact solve is optimal. The distance estimate then subtracts the
//! within-distribution terms, and may be slightly negative at finite sample
//! sizes; the signed value is preserved for downstream metric repair.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{derive_seed, AlignOptions, AlignmentGroup, GroupElement};
use crate::error::{Error, Result};
use crate::ground::{row_major, within_half_term, EnergyNormalization};
use crate::linalg::{min_cost_assignment, OrthogonalMatrix, PermutationMatrix};
use crate::moments::{SampleBlock, StochasticRep};

/// Outcome of one IRLS alignment.
#[derive(Debug, Clone)]
pub struct IrlsResult {
    /// Optimal `T ∈ 𝒢` (acts on column vectors).
    pub transform: GroupElement,
    /// Cross-term objective at the returned transform.
    pub objective: f64,
    /// Objective after initialization and after each sweep; non-increasing.
    pub objective_trace: Vec<f64>,
    /// Completed sweeps of the winning restart.
    pub iterations: usize,
    /// Whether the relative decrease fell below `rel_tol` before `max_iters`.
    pub converged: bool,
}

/// Signed energy shape distance with alignment diagnostics.
#[derive(Debug, Clone)]
pub struct EnergyShapeDistance {
    /// `sign(Ê²)·√|Ê²|`; negative values flag a negative squared estimate.
    pub value: f64,
    /// The raw squared estimate `Ê²`.
    pub squared: f64,
    /// Optimal transform from the IRLS stage.
    pub transform: GroupElement,
    /// IRLS objective trace of the winning restart.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Conditions with a single trial, whose within terms are zero.
    pub singleton_conditions: usize,
}

/// Per-condition cross-pair workspace; points are stored row-major.
struct PairBlock {
    /// A-side points (the `y_i` of the weighted least squares).
    ya: Vec<f64>,
    /// B-side points in original coordinates (the `x_i`).
    xb: Vec<f64>,
    /// Subsampled (a_index, b_index) pairs; `None` enumerates all L_A·L_B.
    pairs: Option<Vec<(u32, u32)>>,
    /// Number of pairs contributing for this condition.
    count: usize,
    /// Objective weight of each pair: 1/(M · count).
    base_weight: f64,
}

fn build_pair_blocks(
    blocks_a: &[&SampleBlock],
    blocks_b: &[&SampleBlock],
    opts: &AlignOptions,
) -> Vec<PairBlock> {
    let m_count = blocks_a.len();
    let cap = opts.max_pairs_per_condition.max(1);
    blocks_a
        .iter()
        .zip(blocks_b)
        .enumerate()
        .map(|(m, (ba, bb))| {
            let full = ba.trials() * bb.trials();
            let (pairs, count) = if full > cap {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    opts.seed ^ 0x70c1_7a1e_5eed,
                    m as u64,
                    full as u64,
                ));
                let sampled: Vec<(u32, u32)> = (0..cap)
                    .map(|_| {
                        (
                            rng.random_range(0..ba.trials()) as u32,
                            rng.random_range(0..bb.trials()) as u32,
                        )
                    })
                    .collect();
                (Some(sampled), cap)
            } else {
                (None, full)
            };
            PairBlock {
                ya: row_major(ba.samples()),
                xb: row_major(bb.samples()),
                pairs,
                count,
                base_weight: 1.0 / (m_count as f64 * count as f64),
            }
        })
        .collect()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

#[inline]
fn pow_q(r: f64, q: f64) -> f64 {
    if q == 1.0 {
        r
    } else if q == 2.0 {
        r * r
    } else {
        r.powf(q)
    }
}

/// Applies `T` to row-major points, reusing `dst`.
fn transform_points(t: &GroupElement, src: &[f64], n: usize, dst: &mut Vec<f64>) {
    dst.clear();
    match t {
        GroupElement::Identity(_) => dst.extend_from_slice(src),
        GroupElement::Permutation(p) => {
            let perm = p.indices();
            for chunk in src.chunks_exact(n) {
                let start = dst.len();
                dst.resize(start + n, 0.0);
                for (j, &v) in chunk.iter().enumerate() {
                    dst[start + perm[j]] = v;
                }
            }
        }
        GroupElement::Orthogonal(o) => {
            let m = o.matrix();
            let mut tm = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    tm[i * n + j] = m[(i, j)];
                }
            }
            for chunk in src.chunks_exact(n) {
                for row in tm.chunks_exact(n) {
                    let mut acc = 0.0;
                    for (a, b) in row.iter().zip(chunk) {
                        acc += a * b;
                    }
                    dst.push(acc);
                }
            }
        }
    }
}

/// One fused sweep at a fixed transform: records residuals, accumulates the
/// objective, and builds the weighted cross matrix `G += Σ w x yᵀ` with
/// *unfloored* weights. Returns `(objective, min residual, max residual)`;
/// the caller rebuilds `G` through the exact floored path only when
/// `min ≤ 1e-8·max`, which is the only regime where the floor can bind
/// (the median never exceeds the max).
fn fused_pass(
    block: &PairBlock,
    t: &GroupElement,
    n: usize,
    q: f64,
    residuals: &mut Vec<f64>,
    g: &mut [f64],
    txb: &mut Vec<f64>,
) -> (f64, f64, f64) {
    transform_points(t, &block.xb, n, txb);
    let base = block.base_weight;
    let mut obj = 0.0;
    let mut min_r = f64::INFINITY;
    let mut max_r = 0.0f64;
    let mut per_pair = |y: &[f64], x: &[f64], tx: &[f64]| {
        let r = dist(y, tx);
        residuals.push(r);
        if r < min_r {
            min_r = r;
        }
        if r > max_r {
            max_r = r;
        }
        if r > 0.0 {
            // w = ω·r^{q−2}; the objective term ω·r^q equals w·r².
            let w = if q == 1.0 { base / r } else { base * r.powf(q - 2.0) };
            obj += w * (r * r);
            for (a, &xa) in x.iter().enumerate() {
                let wx = w * xa;
                let row = &mut g[a * n..(a + 1) * n];
                for (gb, &yb) in row.iter_mut().zip(y) {
                    *gb += wx * yb;
                }
            }
        }
    };
    match &block.pairs {
        None => {
            for (yi, y) in block.ya.chunks_exact(n).enumerate() {
                let _ = yi;
                for (xi, tx) in txb.chunks_exact(n).enumerate() {
                    per_pair(y, &block.xb[xi * n..(xi + 1) * n], tx);
                }
            }
        }
        Some(ps) => {
            for &(l, p) in ps {
                per_pair(
                    &block.ya[l as usize * n..(l as usize + 1) * n],
                    &block.xb[p as usize * n..(p as usize + 1) * n],
                    &txb[p as usize * n..(p as usize + 1) * n],
                );
            }
        }
    }
    (obj, min_r, max_r)
}

/// Objective-only sweep at a fixed transform.
fn objective_pass(block: &PairBlock, t: &GroupElement, n: usize, q: f64, txb: &mut Vec<f64>) -> f64 {
    transform_points(t, &block.xb, n, txb);
    let mut obj = 0.0;
    match &block.pairs {
        None => {
            for y in block.ya.chunks_exact(n) {
                for tx in txb.chunks_exact(n) {
                    obj += pow_q(dist(y, tx), q);
                }
            }
        }
        Some(ps) => {
            for &(l, p) in ps {
                obj += pow_q(
                    dist(
                        &block.ya[l as usize * n..(l as usize + 1) * n],
                        &txb[p as usize * n..(p as usize + 1) * n],
                    ),
                    q,
                );
            }
        }
    }
    obj * block.base_weight
}

/// Accumulates the weighted cross matrix `G += Σ_i w_i x_i y_iᵀ` with
/// `w_i = base·max(r_i, ε)^{q−2}`, reading residuals recorded by
/// [`residual_pass`] in the same order.
fn weighted_cross_pass(
    block: &PairBlock,
    n: usize,
    q: f64,
    eps: f64,
    residuals: &[f64],
    offset: usize,
    g: &mut [f64],
) {
    let xb = &block.xb;
    let base = block.base_weight;
    let mut idx = offset;
    let mut accumulate = |y: &[f64], x: &[f64], r: f64| {
        let rc = r.max(eps);
        let w = if q == 1.0 {
            base / rc
        } else {
            base * rc.powf(q - 2.0)
        };
        for (a, &xa) in x.iter().enumerate() {
            let wx = w * xa;
            let row = &mut g[a * n..(a + 1) * n];
            for (gb, &yb) in row.iter_mut().zip(y) {
                *gb += wx * yb;
            }
        }
    };
    match &block.pairs {
        None => {
            for y in block.ya.chunks_exact(n) {
                for x in xb.chunks_exact(n) {
                    accumulate(y, x, residuals[idx]);
                    idx += 1;
                }
            }
        }
        Some(ps) => {
            for &(l, p) in ps {
                let y = &block.ya[l as usize * n..(l as usize + 1) * n];
                let x = &xb[p as usize * n..(p as usize + 1) * n];
                accumulate(y, x, residuals[idx]);
                idx += 1;
            }
        }
    }
}

/// `argmax_{T ∈ 𝒢} tr(T G)`, the weighted least-squares update.
fn solve_from_cross(g: &[f64], n: usize, group: AlignmentGroup) -> GroupElement {
    match group {
        AlignmentGroup::Orthogonal => {
            let gm = DMatrix::from_fn(n, n, |i, j| g[i * n + j]);
            let svd = gm.svd(true, true);
            let u = svd.u.expect("svd u");
            let v_t = svd.v_t.expect("svd v_t");
            GroupElement::Orthogonal(OrthogonalMatrix::new_unchecked(
                v_t.transpose() * u.transpose(),
            ))
        }
        AlignmentGroup::Permutation => {
            // tr(TG) = Σ_k G[k, perm[k]] for T with T[perm[k], k] = 1.
            let cost = DMatrix::from_fn(n, n, |k, j| -g[k * n + j]);
            let perm = min_cost_assignment(&cost);
            GroupElement::Permutation(PermutationMatrix::new(perm).expect("assignment bijection"))
        }
        AlignmentGroup::Identity => GroupElement::Identity(n),
    }
}

/// Full-enumeration energy alignment objective at a fixed transform:
/// `(1/M) Σ_m (1/(L_A L_B)) Σ_{ℓ,p} ‖a_ℓ − T b_p‖^q`.
///
/// Evaluates every cross pair regardless of the subsampling budget; intended
/// for diagnostics and oracle comparisons on modest sample counts.
pub fn energy_objective(
    rep_a: &StochasticRep,
    rep_b: &StochasticRep,
    q: f64,
    t: &GroupElement,
) -> Result<f64> {
    validate_inputs(rep_a, rep_b, q)?;
    let blocks_a = rep_a.sample_blocks()?;
    let blocks_b = rep_b.sample_blocks()?;
    let n = rep_a.dim();
    let mut total = 0.0;
    for (ba, bb) in blocks_a.iter().zip(&blocks_b) {
        let ya = row_major(ba.samples());
        let txb = row_major(&t.apply_to_rows(bb.samples()));
        let mut s = 0.0;
        for y in ya.chunks_exact(n) {
            for x in txb.chunks_exact(n) {
                s += pow_q(dist(y, x), q);
            }
        }
        total += s / (ba.trials() as f64 * bb.trials() as f64);
    }
    Ok(total / blocks_a.len() as f64)
}

fn validate_inputs(rep_a: &StochasticRep, rep_b: &StochasticRep, q: f64) -> Result<()> {
    if !(q > 0.0 && q <= 2.0) {
        return Err(Error::InvalidQ(q));
    }
    if rep_a.dim() != rep_b.dim() {
        return Err(Error::DimensionMismatch(rep_a.dim(), rep_b.dim()));
    }
    if rep_a.num_conditions() != rep_b.num_conditions() {
        return Err(Error::ConditionCountMismatch(
            rep_a.num_conditions(),
            rep_b.num_conditions(),
        ));
    }
    Ok(())
}

/// Aligns two sample-form representations under the energy ground metric.
///
/// For `q ∈ (0, 2)` this runs IRLS with the restart ladder shared with the
/// Wasserstein aligner (identity, then a mean warm start, then random group
/// elements). For `q = 2` the problem is an exact single weighted Procrustes
/// solve. The IRLS weights are floored at `1e-8·median(nonzero residuals)`
/// to keep them finite near exact alignment.
pub fn irls_align(
    rep_a: &StochasticRep,
    rep_b: &StochasticRep,
    q: f64,
    group: AlignmentGroup,
    opts: &AlignOptions,
) -> Result<IrlsResult> {
    validate_inputs(rep_a, rep_b, q)?;
    let blocks_a = rep_a.sample_blocks()?;
    let blocks_b = rep_b.sample_blocks()?;
    let n = rep_a.dim();
    let pair_blocks = build_pair_blocks(&blocks_a, &blocks_b, opts);

    if matches!(group, AlignmentGroup::Identity) {
        let t = GroupElement::Identity(n);
        let objective = objective_at(&pair_blocks, &t, n, q);
        return Ok(IrlsResult {
            transform: t,
            objective,
            objective_trace: vec![objective],
            iterations: 1,
            converged: true,
        });
    }

    if q == 2.0 {
        // Constant weights: one exact solve is globally optimal.
        let mut g = vec![0.0; n * n];
        for block in &pair_blocks {
            constant_weight_cross(block, n, &mut g);
        }
        let t = solve_from_cross(&g, n, group);
        let objective = objective_at(&pair_blocks, &t, n, q);
        return Ok(IrlsResult {
            transform: t,
            objective,
            objective_trace: vec![objective],
            iterations: 1,
            converged: true,
        });
    }

    let total_pairs: usize = pair_blocks.iter().map(|b| b.count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut residuals: Vec<f64> = Vec::with_capacity(total_pairs);
    let mut scratch: Vec<f64> = Vec::with_capacity(total_pairs);
    let mut best: Option<IrlsResult> = None;

    for restart in 0..opts.n_restarts.max(1) {
        let t0 = if restart == 0 {
            GroupElement::identity(group, n)
        } else if restart == 1 {
            mean_warm_start(&blocks_a, &blocks_b, group, n)
                .unwrap_or_else(|| GroupElement::random(group, n, &mut rng))
        } else {
            GroupElement::random(group, n, &mut rng)
        };
        let run = irls_single(
            &pair_blocks,
            t0,
            n,
            q,
            group,
            opts,
            &mut residuals,
            &mut scratch,
        );
        let better = match &best {
            Some(cur) => run.objective < cur.objective,
            None => true,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn constant_weight_cross(block: &PairBlock, n: usize, g: &mut [f64]) {
    let xb = &block.xb;
    let w = block.base_weight;
    let mut add = |y: &[f64], x: &[f64]| {
        for (a, &xa) in x.iter().enumerate() {
            let wx = w * xa;
            let row = &mut g[a * n..(a + 1) * n];
            for (gb, &yb) in row.iter_mut().zip(y) {
                *gb += wx * yb;
            }
        }
    };
    match &block.pairs {
        None => {
            for y in block.ya.chunks_exact(n) {
                for x in xb.chunks_exact(n) {
                    add(y, x);
                }
            }
        }
        Some(ps) => {
            for &(l, p) in ps {
                add(
                    &block.ya[l as usize * n..(l as usize + 1) * n],
                    &xb[p as usize * n..(p as usize + 1) * n],
                );
            }
        }
    }
}

fn objective_at(pair_blocks: &[PairBlock], t: &GroupElement, n: usize, q: f64) -> f64 {
    let mut txb = Vec::new();
    pair_blocks
        .iter()
        .map(|b| objective_pass(b, t, n, q, &mut txb))
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn irls_single(
    pair_blocks: &[PairBlock],
    t0: GroupElement,
    n: usize,
    q: f64,
    group: AlignmentGroup,
    opts: &AlignOptions,
    residuals: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> IrlsResult {
    let mut t = t0;
    let mut trace = Vec::with_capacity(opts.max_iters + 1);
    let mut converged = false;
    let mut iterations = 0;
    let mut txb: Vec<f64> = Vec::new();
    let mut g = vec![0.0; n * n];

    // Objective, residuals, and the optimistically-weighted cross matrix at
    // the initial transform, in one sweep.
    let sweep = |t: &GroupElement,
                 residuals: &mut Vec<f64>,
                 g: &mut Vec<f64>,
                 txb: &mut Vec<f64>|
     -> (f64, f64, f64) {
        residuals.clear();
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut obj = 0.0;
        let mut min_r = f64::INFINITY;
        let mut max_r = 0.0f64;
        for block in pair_blocks {
            let (o, lo, hi) = fused_pass(block, t, n, q, residuals, g, txb);
            obj += o;
            min_r = min_r.min(lo);
            max_r = max_r.max(hi);
        }
        (obj, min_r, max_r)
    };

    let (mut objective, mut min_r, mut max_r) = sweep(&t, residuals, &mut g, &mut txb);
    trace.push(objective);

    for _ in 0..opts.max_iters {
        if max_r == 0.0 {
            // Every pair matches exactly; nothing left to minimize.
            converged = true;
            break;
        }
        if min_r <= 1e-8 * max_r {
            // The Weiszfeld floor may bind: rebuild G with weights floored at
            // 1e-8 times the median nonzero residual.
            scratch.clear();
            scratch.extend(residuals.iter().copied().filter(|r| *r > 0.0));
            let mid = scratch.len() / 2;
            let (_, med, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
            let eps = 1e-8 * *med;
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut offset = 0;
            for block in pair_blocks {
                weighted_cross_pass(block, n, q, eps, residuals, offset, &mut g);
                offset += block.count;
            }
        }
        let t_next = solve_from_cross(&g, n, group);
        let (obj_next, lo, hi) = sweep(&t_next, residuals, &mut g, &mut txb);
        iterations += 1;

        // The surrogate guarantees non-increase; accept and record.
        t = t_next;
        min_r = lo;
        max_r = hi;
        let prev = objective;
        objective = obj_next;
        trace.push(objective);
        if prev - objective <= opts.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    IrlsResult {
        transform: t,
        objective,
        objective_trace: trace,
        iterations,
        converged,
    }
}

fn mean_warm_start(
    blocks_a: &[&SampleBlock],
    blocks_b: &[&SampleBlock],
    group: AlignmentGroup,
    n: usize,
) -> Option<GroupElement> {
    let m_count = blocks_a.len();
    let mut rows_a = DMatrix::zeros(m_count, n);
    let mut rows_b = DMatrix::zeros(m_count, n);
    for m in 0..m_count {
        rows_a.row_mut(m).copy_from(&blocks_a[m].mean().transpose());
        rows_b.row_mut(m).copy_from(&blocks_b[m].mean().transpose());
    }
    if rows_a.norm() == 0.0 && rows_b.norm() == 0.0 {
        return None;
    }
    crate::align::solve_group_alignment(&rows_a, &rows_b, group).ok()
}

/// Signed energy shape distance between two sample-form representations.
///
/// Aligns with [`irls_align`], then estimates
/// `Ê² = (1/M) Σ_m [cross(m; T*) − within_A(m) − within_B(m)]` with the
/// within terms normalized per `normalization` (the U-statistic form
/// `1/(L(L−1))` is the default; the V-statistic form makes the `q = 2`
/// mean-distance identity exact). Returns the signed square root; conditions
/// with one trial contribute zero within terms and are counted in
/// [`EnergyShapeDistance::singleton_conditions`].
pub fn energy_shape_distance(
    rep_a: &StochasticRep,
    rep_b: &StochasticRep,
    q: f64,
    group: AlignmentGroup,
    normalization: EnergyNormalization,
    opts: &AlignOptions,
) -> Result<EnergyShapeDistance> {
    let aligned = irls_align(rep_a, rep_b, q, group, opts)?;
    let (wa, sa) = within_terms(rep_a, q, normalization)?;
    let (wb, sb) = within_terms(rep_b, q, normalization)?;
    let singletons = sa.iter().zip(&sb).filter(|(a, b)| **a || **b).count();
    // The aligner's final objective is the cross term at the returned
    // transform on its own pair budget.
    finish_shape_distance(aligned, wa + wb, singletons)
}

/// Assembles the signed distance from an alignment plus precomputed within
/// terms; lets collection-level callers hoist the per-network within sums
/// out of their pair loops.
pub(crate) fn finish_shape_distance(
    aligned: IrlsResult,
    within_total: f64,
    singleton_conditions: usize,
) -> Result<EnergyShapeDistance> {
    let squared = aligned.objective - within_total;
    Ok(EnergyShapeDistance {
        value: squared.signum() * squared.abs().sqrt(),
        squared,
        transform: aligned.transform,
        objective_trace: aligned.objective_trace,
        iterations: aligned.iterations,
        converged: aligned.converged,
        singleton_conditions,
    })
}

/// Mean within-distribution half term `(1/M) Σ_m w(m)` of one representation,
/// plus a per-condition mask of single-trial conditions (whose terms are
/// zero). Depends only on the representation, so collection-level callers
/// compute it once per network.
pub fn within_terms(
    rep: &StochasticRep,
    q: f64,
    normalization: EnergyNormalization,
) -> Result<(f64, Vec<bool>)> {
    if !(q > 0.0 && q <= 2.0) {
        return Err(Error::InvalidQ(q));
    }
    let blocks = rep.sample_blocks()?;
    let n = rep.dim();
    let mut total = 0.0;
    let mut singletons = Vec::with_capacity(blocks.len());
    for b in &blocks {
        singletons.push(b.trials() < 2);
        total += within_half_term(&row_major(b.samples()), n, q, normalization);
    }
    Ok((total / blocks.len() as f64, singletons))
}

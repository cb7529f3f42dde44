//! Collection-level operations: parallel pairwise distance matrices,
//! quadratic metric repair, MDS embedding with distortion diagnostics, and
//! kNN prediction over the metric space.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::align::{derive_seed, AlignOptions, AlignmentGroup};
use crate::align_energy::{finish_shape_distance, irls_align, within_terms};
use crate::align_wasserstein::align_w2;
use crate::error::{Error, Result};
use crate::ground::{EnergyNormalization, GroundMetricSpec};
use crate::linalg::{classical_mds, MdsEmbedding, SYMMETRY_RTOL};
use crate::moments::StochasticRep;

mod knn;
mod repair;

pub use knn::{knn_predict, KnnReport, KnnTask};
pub use repair::metric_repair;

/// Triangle-inequality audit of a distance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViolationReport {
    /// Largest `d_ik − d_ij − d_jk` over directed triples (0 when metric).
    pub max_triangle_violation: f64,
    /// Directed triples violated beyond the audit tolerance.
    pub triangle_violations: usize,
    /// Strictly negative entries (possible for signed energy estimates).
    pub negative_entries: usize,
}

/// Symmetric K×K matrix of pairwise shape distances with its provenance.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    values: DMatrix<f64>,
    /// Network identifiers, row/column order.
    pub ids: Vec<String>,
    /// Ground metric that produced the entries (absent for re-read files).
    pub metric: Option<GroundMetricSpec>,
    /// Alignment group used (absent for re-read files).
    pub group: Option<AlignmentGroup>,
    /// Whether the entries passed through metric repair.
    pub repaired: bool,
    pub violation_report: ViolationReport,
}

impl DistanceMatrix {
    /// Wraps raw values after validating symmetry and a zero diagonal.
    /// Negative off-diagonal entries are allowed (signed energy estimates);
    /// they are recorded in the violation report.
    pub fn from_values(values: DMatrix<f64>, ids: Vec<String>) -> Result<Self> {
        let k = values.nrows();
        if values.ncols() != k {
            return Err(Error::ShapeMismatch(k, values.ncols(), k, k));
        }
        if ids.len() != k {
            return Err(Error::DimensionMismatch(ids.len(), k));
        }
        let scale = values.amax().max(1.0);
        for i in 0..k {
            if values[(i, i)].abs() > SYMMETRY_RTOL * scale {
                return Err(Error::NonzeroDiagonal(i, values[(i, i)]));
            }
            for j in (i + 1)..k {
                if (values[(i, j)] - values[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                    return Err(Error::AsymmetricInput(i, j));
                }
            }
        }
        let violation_report = audit(&values);
        Ok(DistanceMatrix {
            values,
            ids,
            metric: None,
            group: None,
            repaired: false,
            violation_report,
        })
    }

    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

/// Audits all directed triples; tolerance scales with the largest entry.
pub(crate) fn audit(values: &DMatrix<f64>) -> ViolationReport {
    let k = values.nrows();
    let tol = 1e-12 * values.amax().max(1.0);
    let mut report = ViolationReport::default();
    for i in 0..k {
        for j in (i + 1)..k {
            if values[(i, j)] < -tol {
                report.negative_entries += 1;
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            for l in (j + 1)..k {
                let (dij, dil, djl) = (values[(i, j)], values[(i, l)], values[(j, l)]);
                for viol in [dij - dil - djl, dil - dij - djl, djl - dij - dil] {
                    if viol > report.max_triangle_violation {
                        report.max_triangle_violation = viol;
                    }
                    if viol > tol {
                        report.triangle_violations += 1;
                    }
                }
            }
        }
    }
    report
}

/// Computes all pairwise shape distances for a collection of networks.
///
/// Every upper-triangle pair is solved independently with its own RNG stream
/// derived from `(opts.seed, i, j)`, so the result is bit-identical for any
/// worker count or evaluation order. Energy entries are the signed estimates
/// (possibly negative); run [`metric_repair`] before embedding them.
///
/// Per-pair failures are reported with the offending pair attached.
pub fn distance_matrix(
    reps: &[StochasticRep],
    metric: &GroundMetricSpec,
    group: AlignmentGroup,
    opts: &AlignOptions,
    workers: Option<usize>,
) -> Result<DistanceMatrix> {
    metric.validate()?;
    let k = reps.len();
    if k == 0 {
        return Err(Error::ConditionCountMismatch(0, 1));
    }
    let n = reps[0].dim();
    let m = reps[0].num_conditions();
    for r in reps.iter().skip(1) {
        if r.dim() != n {
            return Err(Error::DimensionMismatch(n, r.dim()));
        }
        if r.num_conditions() != m {
            return Err(Error::ConditionCountMismatch(m, r.num_conditions()));
        }
    }
    let ids: Vec<String> = reps.iter().map(|r| r.id.clone()).collect();

    // Hoist per-network work out of the O(K²) pair loop.
    enum Prepared {
        Wasserstein { alpha: f64, moment: Vec<StochasticRep> },
        Energy { q: f64, within: Vec<f64> },
    }
    let prepared = match *metric {
        GroundMetricSpec::InterpolatedWasserstein { alpha } => Prepared::Wasserstein {
            alpha,
            moment: reps
                .iter()
                .map(|r| r.to_moment_form())
                .collect::<Result<Vec<_>>>()?,
        },
        GroundMetricSpec::Energy { q } => Prepared::Energy {
            q,
            within: reps
                .iter()
                .map(|r| within_terms(r, q, EnergyNormalization::UStat).map(|(w, _)| w))
                .collect::<Result<Vec<_>>>()?,
        },
    };

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();

    let solve_pair = |&(i, j): &(usize, usize)| -> Result<(usize, usize, f64)> {
        let pair_opts = AlignOptions {
            seed: derive_seed(opts.seed, i as u64, j as u64),
            ..*opts
        };
        let value = match &prepared {
            Prepared::Wasserstein { alpha, moment } => {
                align_w2(&moment[i], &moment[j], *alpha, group, &pair_opts).map(|r| r.distance)
            }
            Prepared::Energy { q, within } => {
                irls_align(&reps[i], &reps[j], *q, group, &pair_opts).and_then(|aligned| {
                    finish_shape_distance(aligned, within[i] + within[j], 0).map(|d| d.value)
                })
            }
        };
        match value {
            Ok(v) => Ok((i, j, v)),
            Err(e) => Err(Error::PairFailed {
                i,
                j,
                source: Box::new(e),
            }),
        }
    };

    let computed: Result<Vec<(usize, usize, f64)>> = match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::WorkerPool(e.to_string()))?;
            pool.install(|| pairs.par_iter().map(solve_pair).collect())
        }
        None => pairs.par_iter().map(solve_pair).collect(),
    };

    let mut values = DMatrix::zeros(k, k);
    for (i, j, v) in computed? {
        values[(i, j)] = v;
        values[(j, i)] = v;
    }
    let violation_report = audit(&values);
    Ok(DistanceMatrix {
        values,
        ids,
        metric: Some(*metric),
        group: Some(group),
        repaired: false,
        violation_report,
    })
}

/// Distortion summary percentiles over included pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionPercentiles {
    pub p10: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p90: f64,
}

/// MDS embedding plus per-pair distortion diagnostics.
#[derive(Debug, Clone)]
pub struct MdsAnalysis {
    pub embedding: MdsEmbedding,
    /// `max(Δ, 1/Δ)` with `Δ = d_input/d_embedded`, per included pair in
    /// upper-triangle order.
    pub distortions: Vec<f64>,
    /// Pairs excluded because either distance was zero.
    pub excluded_pairs: usize,
    pub percentiles: DistortionPercentiles,
}

/// Embeds a (repaired or violation-free) distance matrix into `m` dimensions
/// by classical MDS and reports how much each pairwise distance distorts.
pub fn mds_with_distortion(d: &DistanceMatrix, m: usize) -> Result<MdsAnalysis> {
    let k = d.k();
    for i in 0..k {
        for j in (i + 1)..k {
            if d.get(i, j) < 0.0 {
                return Err(Error::NegativeEntry(i, j, d.get(i, j)));
            }
        }
    }
    let embedding = classical_mds(d.values(), m)?;
    let mut distortions = Vec::with_capacity(k * (k - 1) / 2);
    let mut excluded = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            let orig = d.get(i, j);
            let emb = (embedding.coords.row(i) - embedding.coords.row(j)).norm();
            if orig <= 0.0 || emb <= 0.0 {
                excluded += 1;
                continue;
            }
            let ratio = orig / emb;
            distortions.push(ratio.max(1.0 / ratio));
        }
    }
    let percentiles = percentile_summary(&distortions);
    Ok(MdsAnalysis {
        embedding,
        distortions,
        excluded_pairs: excluded,
        percentiles,
    })
}

fn percentile_summary(values: &[f64]) -> DistortionPercentiles {
    if values.is_empty() {
        return DistortionPercentiles {
            p10: 1.0,
            p25: 1.0,
            median: 1.0,
            p75: 1.0,
            p90: 1.0,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |p: f64| -> f64 {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    };
    DistortionPercentiles {
        p10: at(0.10),
        p25: at(0.25),
        median: at(0.50),
        p75: at(0.75),
        p90: at(0.90),
    }
}

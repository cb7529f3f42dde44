//! Nonparametric prediction over the metric space: k-nearest-neighbor
//! classification and regression driven purely by a precomputed distance
//! matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::DistanceMatrix;
use crate::error::{Error, Result};

/// Prediction task and its per-network targets.
#[derive(Debug, Clone)]
pub enum KnnTask {
    /// Majority-vote classification over string labels.
    Classify(Vec<String>),
    /// Neighbor-mean regression over real targets, scored by R².
    Regress(Vec<f64>),
}

impl KnnTask {
    fn len(&self) -> usize {
        match self {
            KnnTask::Classify(v) => v.len(),
            KnnTask::Regress(v) => v.len(),
        }
    }
}

/// Cross-validation and held-out scores of one kNN run.
#[derive(Debug, Clone)]
pub struct KnnReport {
    /// Neighbor count selected by cross-validation.
    pub chosen_k: usize,
    /// Mean CV score per candidate k (accuracy or R²).
    pub cv_scores: Vec<(usize, f64)>,
    /// Score on the held-out networks under `chosen_k`.
    pub held_out_score: f64,
    /// Set when a regression target had zero variance; the score is 0 by
    /// convention in that case.
    pub zero_variance_target: bool,
    /// Indices of the held-out networks (for reporting).
    pub test_indices: Vec<usize>,
}

/// Candidate neighbor counts: odd values up to 25.
const K_GRID: [usize; 13] = [1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25];

/// kNN prediction over a distance matrix.
///
/// Holds out `test_fraction` of the networks (seeded shuffle), selects `k`
/// from the odd grid `{1, 3, …, 25}` by `folds`-fold cross-validation on the
/// rest, and reports the held-out score: accuracy for classification, R²
/// for regression. Neighbor ranking uses only the distance matrix, with ties
/// broken by lower index, so any strictly monotone rescaling of the
/// distances leaves every prediction unchanged.
pub fn knn_predict(
    d: &DistanceMatrix,
    task: &KnnTask,
    folds: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<KnnReport> {
    let k_total = d.k();
    if task.len() != k_total {
        return Err(Error::DimensionMismatch(task.len(), k_total));
    }
    if k_total < 3 {
        // Need at least one held-out network and a two-network train pool.
        return Err(Error::TooFewSamples {
            needed: 3,
            have: k_total,
        });
    }
    if !(0.0..1.0).contains(&test_fraction) || folds < 2 {
        return Err(Error::DimensionTooLarge {
            requested: folds,
            available: k_total,
        });
    }

    let mut order: Vec<usize> = (0..k_total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..k_total).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let test_count = ((k_total as f64 * test_fraction).round() as usize).clamp(1, k_total - 2);
    let (test_idx, train_idx) = order.split_at(test_count);
    let mut test_idx = test_idx.to_vec();
    test_idx.sort_unstable();
    let train_idx = train_idx.to_vec();
    if train_idx.len() < folds {
        return Err(Error::DimensionTooLarge {
            requested: folds,
            available: train_idx.len(),
        });
    }

    // Balanced contiguous folds over the shuffled training order.
    let fold_of: Vec<usize> = (0..train_idx.len()).map(|i| i % folds).collect();

    if let KnnTask::Classify(labels) = task {
        // Every class present in the training set must appear in every
        // training fold complement.
        for f in 0..folds {
            let mut in_fold: Vec<&str> = Vec::new();
            let mut in_rest: Vec<&str> = Vec::new();
            for (pos, &i) in train_idx.iter().enumerate() {
                if fold_of[pos] == f {
                    in_fold.push(labels[i].as_str());
                } else {
                    in_rest.push(labels[i].as_str());
                }
            }
            for label in &in_fold {
                if !in_rest.contains(label) {
                    return Err(Error::DegenerateFold((*label).to_string()));
                }
            }
        }
    }

    let max_pool = train_idx.len() - train_idx.len().div_ceil(folds);
    let grid: Vec<usize> = K_GRID.iter().copied().filter(|&k| k <= max_pool).collect();
    let grid = if grid.is_empty() { vec![1] } else { grid };

    let mut cv_scores = Vec::with_capacity(grid.len());
    for &k in &grid {
        let mut fold_scores = Vec::with_capacity(folds);
        for f in 0..folds {
            let mut pool = Vec::new();
            let mut eval = Vec::new();
            for (pos, &i) in train_idx.iter().enumerate() {
                if fold_of[pos] == f {
                    eval.push(i);
                } else {
                    pool.push(i);
                }
            }
            fold_scores.push(score_subset(d, task, &pool, &eval, k).0);
        }
        let mean = fold_scores.iter().sum::<f64>() / folds as f64;
        cv_scores.push((k, mean));
    }
    let chosen_k = cv_scores
        .iter()
        .fold((grid[0], f64::NEG_INFINITY), |best, &(k, s)| {
            if s > best.1 {
                (k, s)
            } else {
                best
            }
        })
        .0;

    let (held_out_score, zero_variance_target) =
        score_subset(d, task, &train_idx, &test_idx, chosen_k);
    Ok(KnnReport {
        chosen_k,
        cv_scores,
        held_out_score,
        zero_variance_target,
        test_indices: test_idx,
    })
}

/// Predicts every `eval` network from its k nearest neighbors in `pool` and
/// scores the batch. Returns `(score, zero_variance_flag)`.
fn score_subset(
    d: &DistanceMatrix,
    task: &KnnTask,
    pool: &[usize],
    eval: &[usize],
    k: usize,
) -> (f64, bool) {
    let neighbors_of = |target: usize| -> Vec<usize> {
        let mut ranked: Vec<usize> = pool.to_vec();
        ranked.sort_by(|&a, &b| {
            d.get(target, a)
                .total_cmp(&d.get(target, b))
                .then(a.cmp(&b))
        });
        ranked.truncate(k.min(ranked.len()));
        ranked
    };

    match task {
        KnnTask::Classify(labels) => {
            let mut correct = 0usize;
            for &t in eval {
                let neigh = neighbors_of(t);
                // Majority vote; ties go to the class of the nearest
                // neighbor among the tied classes.
                let mut counts: Vec<(&str, usize)> = Vec::new();
                for &nb in &neigh {
                    let lab = labels[nb].as_str();
                    match counts.iter_mut().find(|(l, _)| *l == lab) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((lab, 1)),
                    }
                }
                let top = counts.iter().map(|&(_, c)| c).max().unwrap_or(0);
                let winner = neigh
                    .iter()
                    .map(|&nb| labels[nb].as_str())
                    .find(|lab| counts.iter().any(|&(l, c)| l == *lab && c == top))
                    .unwrap_or_default();
                if winner == labels[t] {
                    correct += 1;
                }
            }
            (correct as f64 / eval.len().max(1) as f64, false)
        }
        KnnTask::Regress(targets) => {
            let predictions: Vec<f64> = eval
                .iter()
                .map(|&t| {
                    let neigh = neighbors_of(t);
                    neigh.iter().map(|&nb| targets[nb]).sum::<f64>() / neigh.len().max(1) as f64
                })
                .collect();
            let truth: Vec<f64> = eval.iter().map(|&t| targets[t]).collect();
            let mean = truth.iter().sum::<f64>() / truth.len().max(1) as f64;
            let ss_tot: f64 = truth.iter().map(|v| (v - mean).powi(2)).sum();
            if ss_tot <= 0.0 {
                return (0.0, true);
            }
            let ss_res: f64 = truth
                .iter()
                .zip(&predictions)
                .map(|(t, p)| (t - p).powi(2))
                .sum();
            (1.0 - ss_res / ss_tot, false)
        }
    }
}

//! Property-based invariants over randomized inputs.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use stochmetrics::dataio::{read_bundle, write_bundle};
use stochmetrics::ground::{energy_distance, EnergyNormalization};
use stochmetrics::linalg::{procrustes_orthogonal, sym_psd_sqrt, SymPsdMatrix};
use stochmetrics::moments::{
    empirical_moments, shrinkage_covariance, Condition, CovNormalization, SampleBlock,
    ShrinkageSelect, ShrinkageTarget, StochasticRep,
};

fn finite_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-10.0f64..10.0, rows * cols)
        .prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        // No persistence: integration-test targets have no src/ to write
        // regression files into.
        failure_persistence: None,
        .. ProptestConfig::default()
    })]

    /// The PSD square root reconstructs its input within tolerance.
    #[test]
    fn psd_sqrt_reconstructs(g in finite_matrix(4, 4)) {
        let s = SymPsdMatrix::new(g.transpose() * &g).unwrap();
        let r = sym_psd_sqrt(&s);
        let err = (r.matrix() * r.matrix() - s.matrix()).norm();
        prop_assert!(err <= 1e-8 * s.matrix().norm().max(1e-12));
    }

    /// The Procrustes residual never exceeds the identity-transform residual
    /// and is invariant under a joint right-rotation of both inputs.
    #[test]
    fn procrustes_residual_is_optimal_and_invariant(
        a in finite_matrix(6, 3),
        b in finite_matrix(6, 3),
        g in finite_matrix(3, 3),
    ) {
        let (_, residual) = procrustes_orthogonal(&a, &b).unwrap();
        prop_assert!(residual <= (&a - &b).norm() + 1e-12);

        // Build an orthogonal Q from the random matrix via its SVD factors.
        let svd = g.svd(true, true);
        let q = svd.u.unwrap() * svd.v_t.unwrap();
        let (_, rotated) = procrustes_orthogonal(&(&a * &q), &(&b * &q)).unwrap();
        prop_assert!((residual - rotated).abs() <= 1e-9 * residual.max(1.0));
    }

    /// Shrinkage preserves the trace for every gamma on the grid.
    #[test]
    fn shrinkage_preserves_trace(
        raw in finite_matrix(8, 3),
        gamma in 0.0f64..=1.0,
    ) {
        let block = SampleBlock::new(raw, 0).unwrap();
        let s = empirical_moments(&block, CovNormalization::Mle).unwrap();
        let (shrunk, _) = shrinkage_covariance(
            &block,
            ShrinkageSelect::Fixed(gamma),
            ShrinkageTarget::TraceMatchedIdentity,
        )
        .unwrap();
        prop_assert!((shrunk.trace() - s.cov().trace()).abs() <= 1e-10 * s.cov().trace().max(1.0));
    }

    /// Energy distance is symmetric and zero-on-equal under VStat.
    #[test]
    fn energy_distance_symmetry(
        x in finite_matrix(7, 2),
        y in finite_matrix(5, 2),
    ) {
        let bx = SampleBlock::new(x, 0).unwrap();
        let by = SampleBlock::new(y, 0).unwrap();
        let dxy = energy_distance(&bx, &by, 1.0, EnergyNormalization::UStat).unwrap();
        let dyx = energy_distance(&by, &bx, 1.0, EnergyNormalization::UStat).unwrap();
        prop_assert!((dxy - dyx).abs() <= 1e-10 * dxy.abs().max(1.0));
    }

    /// Bundle serialization round-trips samples bit-exactly.
    #[test]
    fn bundle_round_trip(raw in finite_matrix(5, 3)) {
        let rep = StochasticRep::from_samples(
            "prop",
            vec![SampleBlock::new(raw, 0).unwrap()],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&rep, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        let (Condition::Samples(sa), Condition::Samples(sb)) =
            (&rep.conditions()[0], &back.conditions()[0])
        else {
            return Err(TestCaseError::fail("form changed"));
        };
        prop_assert_eq!(sa.samples(), sb.samples());
    }

    /// Grand-mean centering leaves per-condition mean sums at zero and is
    /// idempotent to within rounding (the recomputed grand mean of centered
    /// data is at the ulp scale, not exactly zero).
    #[test]
    fn centering_idempotent(raw in finite_matrix(12, 2)) {
        let scale = raw.amax().max(1.0);
        let blocks: Vec<SampleBlock> = (0..3)
            .map(|m| SampleBlock::new(raw.rows(m * 4, 4).clone_owned(), m).unwrap())
            .collect();
        let rep = StochasticRep::from_samples("c", blocks).unwrap();
        let centered = stochmetrics::moments::center_grand_mean(&rep);
        let sum: DVector<f64> = centered
            .conditions()
            .iter()
            .fold(DVector::zeros(2), |acc, c| acc + c.mean());
        prop_assert!(sum.norm() <= 1e-12 * scale);
        let again = stochmetrics::moments::center_grand_mean(&centered);
        for (a, b) in centered.conditions().iter().zip(again.conditions()) {
            let (Condition::Samples(sa), Condition::Samples(sb)) = (a, b) else {
                return Err(TestCaseError::fail("form changed"));
            };
            prop_assert!((sa.samples() - sb.samples()).amax() <= 1e-12 * scale);
        }
    }
}

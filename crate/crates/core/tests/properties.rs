use asif_core::balance::{mahalanobis, smd_vector};
use asif_core::inference::{invert_ci_on_draws, Estimator, Grid, PValueCurve};
use asif_core::{standardize, Assignment, Caps, Covariates, Design, DesignSpec, MatchedDataset};
use proptest::prelude::*;

fn matrix(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), k)
}

/// Columns plus a treated set with both arms non-empty.
fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>)> {
    (6usize..24, 1usize..4).prop_flat_map(|(n, k)| {
        (matrix(n, k), prop::collection::vec(any::<bool>(), n)).prop_map(move |(x, mut w)| {
            w[0] = true;
            w[n - 1] = false;
            (x, w)
        })
    })
}

fn spread(cols: &[Vec<f64>]) -> bool {
    cols.iter().all(|c| {
        let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        hi - lo > 1e-3
    })
}

fn dataset(cols: Vec<Vec<f64>>, w: Vec<bool>) -> MatchedDataset {
    let k = cols.len();
    let x = Covariates::from_columns(cols).unwrap();
    MatchedDataset::new(x, MatchedDataset::default_names(k), Assignment::new(w)).unwrap()
}

fn close(a: &Covariates, b: &Covariates, tol: f64) -> bool {
    (0..a.n_rows()).all(|i| (0..a.n_cols()).all(|k| (a.get(i, k) - b.get(i, k)).abs() <= tol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardize_is_idempotent((cols, _) in instance()) {
        prop_assume!(spread(&cols));
        let (z, _) = standardize(&Covariates::from_columns(cols).unwrap()).unwrap();
        let (zz, scales) = standardize(&z).unwrap();
        prop_assert!(close(&z, &zz, 1e-9));
        for s in scales {
            prop_assert!(s.mean.abs() < 1e-9 && (s.sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_ignores_positive_affine_maps((cols, _) in instance(), a in 0.1..10.0f64, b in -10.0..10.0f64) {
        prop_assume!(spread(&cols));
        let moved: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|v| a * v + b).collect()).collect();
        let (z1, _) = standardize(&Covariates::from_columns(cols).unwrap()).unwrap();
        let (z2, _) = standardize(&Covariates::from_columns(moved).unwrap()).unwrap();
        prop_assert!(close(&z1, &z2, 1e-8));
    }

    #[test]
    fn mahalanobis_is_affine_invariant((cols, w) in instance(), scale in prop::collection::vec(0.2..5.0f64, 3), shift in prop::collection::vec(-5.0..5.0f64, 3), mix in -0.9..0.9f64) {
        prop_assume!(spread(&cols));
        let k = cols.len();
        // x'_j = scale_j (x_j + mix x_{j+1}) + shift_j: triangular, hence invertible
        let moved: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                (0..cols[0].len())
                    .map(|i| scale[j] * (cols[j][i] + if j + 1 < k { mix * cols[j + 1][i] } else { 0.0 }) + shift[j])
                    .collect()
            })
            .collect();
        let d1 = dataset(cols, w.clone());
        let d2 = dataset(moved, w.clone());
        let w = Assignment::new(w);
        let (m1, m2) = (mahalanobis(&d1, &w).unwrap(), mahalanobis(&d2, &w).unwrap());
        prop_assert!((m1 - m2).abs() <= 1e-8 * m1.abs().max(1e-6), "{m1} vs {m2}");
    }

    #[test]
    fn label_swap_negates_smd_and_keeps_mahalanobis((cols, w) in instance()) {
        let d = dataset(cols, w.clone());
        let w = Assignment::new(w);
        let s = smd_vector(&d, &w).unwrap();
        let t = smd_vector(&d, &w.complement()).unwrap();
        prop_assert!(s.iter().zip(&t).all(|(a, b)| *a == -*b));
        prop_assert_eq!(mahalanobis(&d, &w).unwrap(), mahalanobis(&d, &w.complement()).unwrap());
    }

    #[test]
    fn tighter_caps_shrink_the_support(cols in matrix(8, 2), tight in 0.05..0.8f64, extra in 0.0..1.0f64) {
        prop_assume!(spread(&cols));
        let x = Covariates::from_columns(cols).unwrap();
        let w = Assignment::from_treated(8, &[0, 1, 2, 3]);
        let d = MatchedDataset::from_raw(&x, MatchedDataset::default_names(2), w).unwrap();
        let support = |cap: f64| Design::new(&DesignSpec::constrained(Caps::Uniform(cap)), &d).unwrap().enumerate_support(100).unwrap();
        let small = support(tight);
        let large = support(tight + extra);
        prop_assert!(small.iter().all(|a| large.contains(a)));
    }
}

fn analysis_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, u64)> {
    (prop::collection::vec(-3.0..3.0f64, 12), prop::collection::vec(-4.0..4.0f64, 12), any::<u64>())
}

fn analysis_dataset(x: Vec<f64>, y: Vec<f64>) -> MatchedDataset {
    let w = Assignment::from_treated(12, &[0, 2, 4, 6, 8, 10]);
    MatchedDataset::new(Covariates::from_columns(vec![x]).unwrap(), MatchedDataset::default_names(1), w)
        .unwrap()
        .with_outcome(y)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn p_values_shift_with_the_outcome((x, y, seed) in analysis_case(), c in -5i32..5, tau in -6.0..6.0f64) {
        let d = analysis_dataset(x.clone(), y.clone());
        let shifted: Vec<f64> = y.iter().enumerate().map(|(i, v)| if i % 2 == 0 { v + c as f64 } else { *v }).collect();
        let d2 = analysis_dataset(x, shifted);
        let draws = Design::new(&DesignSpec::complete(), &d).unwrap().draw_set(200, seed).unwrap();
        let p1 = PValueCurve::new(&d, &draws, Estimator::MeanDiff).unwrap().p_value(tau);
        let p2 = PValueCurve::new(&d2, &draws, Estimator::MeanDiff).unwrap().p_value(tau + c as f64);
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn interval_is_the_accepted_set((x, y, seed) in analysis_case()) {
        let d = analysis_dataset(x, y);
        let spec = DesignSpec::complete();
        let draws = Design::new(&spec, &d).unwrap().draw_set(200, seed).unwrap();
        let grid = Grid::new(-12.0, 12.0, 0.05).unwrap();
        let r = invert_ci_on_draws(&d, &spec, &draws, Estimator::MeanDiff, 0.1, grid).unwrap();
        let curve = PValueCurve::new(&d, &draws, Estimator::MeanDiff).unwrap();
        prop_assume!(r.diagnostics.nonempty_acceptance_region);
        for tau in grid.points() {
            let inside = tau >= r.ci_low && tau <= r.ci_high;
            if r.diagnostics.contiguous {
                prop_assert_eq!(inside, curve.p_value(tau) > 0.1, "tau {}", tau);
            } else if !inside {
                prop_assert!(curve.p_value(tau) <= 0.1);
            }
        }
    }

    #[test]
    fn smaller_alpha_gives_wider_intervals((x, y, seed) in analysis_case()) {
        let d = analysis_dataset(x, y);
        let spec = DesignSpec::complete();
        let draws = Design::new(&spec, &d).unwrap().draw_set(200, seed).unwrap();
        let grid = Grid::new(-12.0, 12.0, 0.05).unwrap();
        let wide = invert_ci_on_draws(&d, &spec, &draws, Estimator::MeanDiff, 0.05, grid).unwrap();
        let narrow = invert_ci_on_draws(&d, &spec, &draws, Estimator::MeanDiff, 0.2, grid).unwrap();
        prop_assume!(narrow.diagnostics.nonempty_acceptance_region);
        prop_assert!(wide.ci_low <= narrow.ci_low && narrow.ci_high <= wide.ci_high);
    }
}

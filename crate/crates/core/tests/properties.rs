//! Property-based checks of algebraic and structural invariants that must
//! hold for arbitrary inputs, not just hand-picked examples.

use ndarray::Array2;
use proptest::prelude::*;

use tevim::crossfit::{make_folds, run_algorithm, AlgorithmConfig};
use tevim::data::{drop_columns, CovariateSubset, Dataset, Mode};
use tevim::estimands::{subset_cate_variance, tevim, tevim_unscaled};
use tevim::simulation::generate_dgp;
use tevim::stats;

/// Aligned quadruple (pseudo, cate, subset-cate, mean-cate) of one length.
fn estimator_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (4usize..24).prop_flat_map(|n| {
        let vals = || prop::collection::vec(-20.0..20.0f64, n);
        (vals(), vals(), vals(), vals())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shares_are_scale_equivariant((phi, tau, tau_s, tau_p) in estimator_inputs(),
                                    c in prop_oneof![-8.0..-0.25f64, 0.25..8.0f64]) {
        let theta_s = tevim_unscaled(&phi, &tau, &tau_s);
        let theta_p = tevim_unscaled(&phi, &tau, &tau_p);
        prop_assume!(theta_p.abs() > 1e-3);

        let scale = |v: &[f64]| v.iter().map(|x| c * x).collect::<Vec<f64>>();
        let (phi_c, tau_c, tau_s_c, tau_p_c) =
            (scale(&phi), scale(&tau), scale(&tau_s), scale(&tau_p));

        // The unscaled estimate picks up a factor c^2 ...
        let theta_s_c = tevim_unscaled(&phi_c, &tau_c, &tau_s_c);
        let budget = 1e-9 * (1.0 + theta_s.abs()) * c * c;
        prop_assert!((theta_s_c - c * c * theta_s).abs() <= budget,
                     "theta {theta_s} scaled to {theta_s_c} with c = {c}");

        // ... while the share and its standard error are unchanged.
        let s = CovariateSubset::new(&[1], 2).unwrap();
        let z = stats::Z_95;
        let before = tevim(&s, &phi, &tau, &tau_s, &tau_p, z).unwrap();
        let after = tevim(&s, &phi_c, &tau_c, &tau_s_c, &tau_p_c, z).unwrap();
        prop_assert!((after.value - before.value).abs() <= 1e-9 * (1.0 + before.value.abs()),
                     "share moved from {} to {}", before.value, after.value);
        prop_assert!((after.se - before.se).abs() <= 1e-9 * (1.0 + before.se),
                     "standard error moved from {} to {}", before.se, after.se);
    }

    #[test]
    fn explained_plus_lost_variance_is_the_effect_variance(
        (phi, tau, tau_s, tau_p) in estimator_inputs()) {
        // var-hat(tau_s) + theta-hat_s telescopes to theta-hat_p regardless
        // of the inputs; the subset-cate values cancel exactly.
        let z = stats::Z_95;
        let explained = subset_cate_variance(&phi, &tau_s, &tau_p, z).unwrap().value;
        let lost = tevim_unscaled(&phi, &tau, &tau_s);
        let total = tevim_unscaled(&phi, &tau, &tau_p);
        let scale = phi.iter().chain(&tau).chain(&tau_s).chain(&tau_p)
            .fold(1.0f64, |m, &v| m.max(v.abs()));
        prop_assert!((explained + lost - total).abs() <= 1e-10 * scale * scale,
                     "{explained} + {lost} != {total}");
    }

    #[test]
    fn share_inference_outputs_are_well_formed(
        (phi, tau, tau_s, tau_p) in estimator_inputs()) {
        let theta_p = tevim_unscaled(&phi, &tau, &tau_p);
        prop_assume!(theta_p != 0.0);
        let s = CovariateSubset::new(&[2], 3).unwrap();
        let est = tevim(&s, &phi, &tau, &tau_s, &tau_p, stats::Z_95).unwrap();
        prop_assert!(est.se >= 0.0);
        prop_assert!(est.ci_raw.0 <= est.value && est.value <= est.ci_raw.1);
        prop_assert!((0.0..=1.0).contains(&est.ci_truncated.0));
        prop_assert!((0.0..=1.0).contains(&est.ci_truncated.1));
        prop_assert!(est.ci_truncated.0 <= est.ci_truncated.1);
        prop_assert!((0.0..=1.0).contains(&est.p_value));
        prop_assert_eq!(est.ci_truncated.0, est.ci_raw.0.clamp(0.0, 1.0));
        prop_assert_eq!(est.ci_truncated.1, est.ci_raw.1.clamp(0.0, 1.0));
    }

    #[test]
    fn dropping_nothing_first_changes_no_columns(rows in 1usize..12, p in 1usize..6,
                                                 pick in any::<u64>(), seed in any::<u64>()) {
        // drop(drop(X, {}), s) == drop(X, s), column by column, bitwise.
        let mut state = seed;
        let mut next = move || {
            // splitmix-style generator keeps the test free of rand state
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64
        };
        let x = Array2::from_shape_fn((rows, p), |_| next() * 10.0 - 5.0);
        let indices: Vec<usize> = (1..=p).filter(|i| pick >> (i - 1) & 1 == 1).collect();
        prop_assume!(!indices.is_empty());
        let s = CovariateSubset::new(&indices, p).unwrap();
        let none = CovariateSubset::empty(p);

        let direct = drop_columns(x.view(), &s);
        let staged = drop_columns(drop_columns(x.view(), &none).view(), &s);
        prop_assert_eq!(direct.shape(), staged.shape());
        for (a, b) in direct.iter().zip(staged.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn fold_assignments_partition_rows_and_stratify_arms(
        controls in 8usize..40, treated in 8usize..40, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(k <= controls && k <= treated);
        let n = controls + treated;
        let outcome: Vec<f64> = (0..n).map(|i| i as f64 * 0.25 - 3.0).collect();
        let treatment: Vec<f64> =
            (0..n).map(|i| if i < controls { 0.0 } else { 1.0 }).collect();
        let covariates = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64 * 0.1);
        let data = Dataset::new(outcome, treatment, covariates,
                                vec!["x1".into(), "x2".into()], Mode::Binary).unwrap();

        let folds = make_folds(&data, k, seed).unwrap();
        prop_assert_eq!(folds.k(), k);
        prop_assert_eq!(folds.n(), n);

        // Partition: every row lands in exactly one fold, and in/ex sets are
        // complements.
        let mut seen = vec![false; n];
        for f in 0..k {
            for row in folds.rows_in(f) {
                prop_assert!(!seen[row], "row {row} assigned twice");
                seen[row] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        for f in 0..k {
            let mut joined = folds.rows_in(f);
            joined.extend(folds.rows_excluding(f));
            joined.sort_unstable();
            prop_assert_eq!(joined, (0..n).collect::<Vec<_>>());
        }

        // Arm stratification: per fold, each arm's count is within one of an
        // even split.
        for f in 0..k {
            let rows = folds.rows_in(f);
            let treated_in = rows.iter().filter(|&&r| r >= controls).count();
            let control_in = rows.len() - treated_in;
            prop_assert!(control_in >= controls / k && control_in <= controls / k + 1,
                         "fold {f} holds {control_in} of {controls} control rows");
            prop_assert!(treated_in >= treated / k && treated_in <= treated / k + 1,
                         "fold {f} holds {treated_in} of {treated} treated rows");
        }

        // Determinism in the seed.
        prop_assert_eq!(&folds, &make_folds(&data, k, seed).unwrap());
    }

    #[test]
    fn csv_round_trip_is_bit_exact(n_each in 3usize..10, seed in any::<u64>()) {
        // Shortest round-trip float formatting must reproduce every payload
        // bit, including awkward magnitudes.
        let n = 2 * n_each;
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        };
        let mut gnarly = move || {
            let u = next();
            match u % 5 {
                0 => (u as f64 / u64::MAX as f64 - 0.5) * 2e-300,
                1 => (u as f64 / u64::MAX as f64 - 0.5) * 2e12,
                2 => (u as f64 / u64::MAX as f64 - 0.5) * 2.0,
                3 => (u % 1000) as f64,
                _ => (u as f64 / u64::MAX as f64 - 0.5) / 3.0,
            }
        };
        let outcome: Vec<f64> = (0..n).map(|_| gnarly()).collect();
        let treatment: Vec<f64> =
            (0..n).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let covariates = Array2::from_shape_fn((n, 3), |_| gnarly());
        let data = Dataset::new(outcome, treatment, covariates,
                                vec!["c1".into(), "c2".into(), "c3".into()],
                                Mode::Binary).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.csv");
        data.write_csv(&path, "y", "a").unwrap();
        let schema = tevim::data::CsvSchema {
            outcome: "y".into(),
            treatment: "a".into(),
            covariates: vec!["c1".into(), "c2".into(), "c3".into()],
            mode: Mode::Binary,
        };
        let back = Dataset::<f64>::from_csv(&path, &schema).unwrap();

        prop_assert_eq!(back.n(), data.n());
        for i in 0..n {
            prop_assert_eq!(back.outcome()[i].to_bits(), data.outcome()[i].to_bits());
            prop_assert_eq!(back.treatment()[i].to_bits(), data.treatment()[i].to_bits());
            for j in 0..3 {
                prop_assert_eq!(back.covariates()[[i, j]].to_bits(),
                                data.covariates()[[i, j]].to_bits());
            }
        }
    }
}

#[test]
fn extra_subsets_leave_shared_inputs_untouched() {
    // Every subset is scored against the same pseudo-outcome and effect
    // vectors: requesting more subsets must not perturb them or each other.
    let sample = generate_dgp::<f64>(120, 6).unwrap();
    let s1 = CovariateSubset::new(&[1], 2).unwrap();
    let s2 = CovariateSubset::new(&[2], 2).unwrap();

    let mut narrow = AlgorithmConfig::new("2B".parse().unwrap(), 3, 44);
    narrow.subsets = vec![s1.clone()];
    let mut wide = narrow.clone();
    wide.subsets = vec![s1.clone(), s2];

    let narrow_run = run_algorithm(&sample.data, &narrow).unwrap();
    let wide_run = run_algorithm(&sample.data, &wide).unwrap();

    assert_eq!(narrow_run.pseudo, wide_run.pseudo);
    assert_eq!(narrow_run.cate, wide_run.cate);
    assert_eq!(narrow_run.mean_cate, wide_run.mean_cate);
    assert_eq!(narrow_run.subset_cates[&s1], wide_run.subset_cates[&s1]);
}

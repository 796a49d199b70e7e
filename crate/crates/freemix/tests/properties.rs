//! Randomized invariants over the public API.

use freemix::classical::{classical_moment, classical_sum};
use freemix::density::{density_from_spectrum, mix_densities, SmoothingSpec};
use freemix::free::{nfold_root_residual, nfold_roots};
use freemix::{DensityCurve, GridSpec, Spectrum};
use proptest::prelude::*;

fn small_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0..4.0f64, 2..9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_text_roundtrip(vals in small_values()) {
        let s = Spectrum::from_eigenvalues(vals).unwrap();
        let back = Spectrum::parse(&s.to_text()).unwrap();
        prop_assert_eq!(s.len(), back.len());
        for (a, b) in s.atoms().iter().zip(back.atoms()) {
            prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_sum_moments_match_binomial(v1 in small_values(), v2 in small_values()) {
        let s1 = Spectrum::from_eigenvalues(v1).unwrap();
        let s2 = Spectrum::from_eigenvalues(v2).unwrap();
        let sum = classical_sum(&s1, &s2, false);
        for k in 1..=4u32 {
            let direct = sum.moment(k);
            let binom = classical_moment(&s1, &s2, k);
            prop_assert!((direct - binom).abs() <= 1e-9 * (1.0 + binom.abs()));
        }
    }

    #[test]
    fn root_count_pairs_and_residuals(vals in small_values(), folds in 2..=5u32, z in -5.0..5.0f64) {
        let s = Spectrum::from_eigenvalues(vals).unwrap();
        let Ok(roots) = nfold_roots(&s, z, folds) else {
            return Ok(()); // pole collision: nothing to check
        };
        prop_assert_eq!(roots.len(), s.len());
        let mut complex = 0;
        for &w in &roots {
            prop_assert!(nfold_root_residual(&s, z, folds, w) <= 1e-8);
            if w.im.abs() > 1e-9 * (1.0 + w.norm()) {
                complex += 1;
            }
        }
        prop_assert!(complex <= 2);
    }

    #[test]
    fn kde_and_mixture_integrate_to_one(vals in small_values(), p in -0.5..1.5f64) {
        let s = Spectrum::from_eigenvalues(vals.clone()).unwrap();
        let grid = GridSpec::default_for(&[&s]).unwrap();
        let a = density_from_spectrum(&s, &grid, &SmoothingSpec::default()).unwrap();
        let shifted = s.shift(0.1);
        let b = density_from_spectrum(&shifted, &grid, &SmoothingSpec::default());
        let Ok(b) = b else { return Ok(()) }; // shifted atoms may leave the grid
        prop_assert!((a.integral() - 1.0).abs() < 1e-6);
        let mixed = mix_densities(p, &a, &b).unwrap();
        prop_assert!((mixed.curve.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn curve_csv_roundtrip(vals in prop::collection::vec(0.0..2.0f64, 3..20)) {
        let n = vals.len();
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.25).collect();
        let curve = DensityCurve::new(xs, vals).unwrap();
        let back = DensityCurve::from_csv(&curve.to_csv()).unwrap();
        prop_assert_eq!(curve.xs(), back.xs());
        prop_assert_eq!(curve.values(), back.values());
    }
}

use proptest::prelude::*;
use semres_core::harness::{parse_wide_csv, run_stats};
use semres_core::metrics::{chi2_survival, friedman, ln_gamma, mean_ranks};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma as statrs_ln_gamma;

#[test]
fn chi2_survival_matches_statrs() {
    for df in [1usize, 2, 3, 5, 8, 9, 19, 50] {
        let dist = ChiSquared::new(df as f64).unwrap();
        for x in [0.01, 0.5, 1.0, 2.5, 7.0, 15.0, 40.0, 120.0] {
            let ours = chi2_survival(x, df).unwrap();
            let reference = dist.sf(x);
            assert!(
                (ours - reference).abs() < 1e-10 * reference.max(1e-300).max(1.0) || (ours - reference).abs() < 1e-13,
                "df {df} x {x}: {ours} vs {reference}"
            );
        }
    }
}

#[test]
fn reference_f1_block_friedman() {
    let m = parse_wide_csv(include_str!("data/reference_f1_matrix.csv")).unwrap();
    assert_eq!((m.datasets.len(), m.methods.len()), (20, 10));
    let report = run_stats(&m).unwrap();
    assert!(report.significant);
    assert!(report.p_value < 1e-6);
    assert!((report.critical_difference - 3.029).abs() < 0.01);
    let table = mean_ranks(&m.values, true).unwrap();
    let fr = friedman(&table).unwrap();
    let dist = ChiSquared::new(9.0).unwrap();
    assert!((fr.p_value - dist.sf(fr.chi2)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ln_gamma_matches_statrs(x in 0.05f64..150.0) {
        let (a, b) = (ln_gamma(x), statrs_ln_gamma(x));
        prop_assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn mean_ranks_sum_to_triangular_number(values in prop::collection::vec(prop::collection::vec(0u8..5, 4), 2..8)) {
        let v: Vec<Vec<f64>> = values.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect();
        let table = mean_ranks(&v, true).unwrap();
        let total: f64 = table.mean_ranks.iter().sum();
        prop_assert!((total - 10.0).abs() < 1e-12);
        let p = friedman(&table).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

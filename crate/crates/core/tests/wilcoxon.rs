mod common;

use dualtask_core::stats::{
    aggregate, did_records, signed_rank_counts, test_did, wilcoxon_one_sided, Contrast, Grouping, StatsError,
    TestMode,
};
use dualtask_core::{Construction, Plausibility, Task};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Reference {
    d: Vec<f64>,
    n_effective: usize,
    statistic: f64,
    mode: String,
    p_one_sided: f64,
}

fn references() -> Vec<Reference> {
    let text = include_str!("data/wilcoxon_reference.json");
    serde_json::from_str(text).unwrap()
}

#[test]
fn matches_reference_vectors() {
    let refs = references();
    assert!(refs.len() >= 50);
    let mut exact = 0;
    for (i, r) in refs.iter().enumerate() {
        let res = wilcoxon_one_sided(&r.d).unwrap();
        assert_eq!(res.n_effective, r.n_effective, "vector {i}");
        assert!((res.statistic_w - r.statistic).abs() < 1e-9, "vector {i}");
        let (mode, tol) = match r.mode.as_str() {
            "exact" => (TestMode::Exact, 1e-9),
            _ => (TestMode::NormalApprox, 1e-6),
        };
        if mode == TestMode::Exact {
            exact += 1;
        }
        assert_eq!(res.mode, mode, "vector {i}");
        assert!(
            (res.p_one_sided - r.p_one_sided).abs() <= tol,
            "vector {i}: {} vs {}",
            res.p_one_sided,
            r.p_one_sided
        );
    }
    assert!(exact >= 20);
}

#[test]
fn exact_and_normal_agree_at_forty() {
    // tie-free, so exact applies; compare with the normal formula directly
    let d: Vec<f64> = (1..=40).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
    let res = wilcoxon_one_sided(&d).unwrap();
    assert_eq!(res.mode, TestMode::Exact);
    let n = 40.0f64;
    let mu = n * (n + 1.0) / 4.0;
    let sigma = (n * (n + 1.0) * (2.0 * n + 1.0) / 24.0).sqrt();
    let z = (res.statistic_w - mu - 0.5) / sigma;
    let approx = 0.5 * erfc(z / std::f64::consts::SQRT_2);
    assert!((res.p_one_sided - approx).abs() < 0.01, "{} {}", res.p_one_sided, approx);
}

fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    // Chebyshev fit, relative error below 1.2e-7
    let t = 1.0 / (1.0 + 0.5 * x);
    t * (-x * x - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp()
}

#[test]
fn exact_distribution_is_normalized() {
    for n in 1..50usize {
        let counts = signed_rank_counts(n);
        assert_eq!(counts.len(), n * (n + 1) / 2 + 1);
        let total: u128 = counts.iter().map(|&c| c as u128).sum();
        assert_eq!(total, 1u128 << n, "n={n}");
        // symmetric around n(n+1)/4
        let m = counts.len() - 1;
        assert!((0..=m).all(|w| counts[w] == counts[m - w]));
    }
}

#[test]
fn all_positive_gives_minimal_p() {
    let res = wilcoxon_one_sided(&[0.5; 20]).unwrap();
    // ties force the normal approximation; distinct values give exact 2^-n
    assert!(res.p_one_sided < 1e-3);
    let d: Vec<f64> = (1..=20).map(|i| 0.5 + i as f64 * 1e-3).collect();
    let res = wilcoxon_one_sided(&d).unwrap();
    assert_eq!(res.mode, TestMode::Exact);
    assert!((res.p_one_sided - 2f64.powi(-20)).abs() < 1e-15);
    assert!(res.significant);
    assert_eq!(res.stars(), "***");
}

#[test]
fn zeros_and_empties() {
    let res = wilcoxon_one_sided(&[0.0, 0.0, 1e-12]).unwrap();
    assert!(res.all_zero);
    assert_eq!(res.p_one_sided, 1.0);
    assert!(!res.significant);
    assert!(matches!(wilcoxon_one_sided(&[]), Err(StatsError::EmptyInput)));
    assert!(matches!(wilcoxon_one_sided(&[f64::NAN]), Err(StatsError::NonFinite(_))));
}

#[test]
fn symmetric_differences_are_not_significant() {
    let d: Vec<f64> = (1..=15).flat_map(|i| [i as f64 / 10.0, -(i as f64) / 10.0]).collect();
    let res = wilcoxon_one_sided(&d).unwrap();
    assert!(res.p_one_sided > 0.4 && res.p_one_sided < 0.6, "{}", res.p_one_sided);
    assert!(!res.significant);
}

#[test]
fn star_thresholds() {
    use dualtask_core::stats::stars;
    assert_eq!(stars(0.0009), "***");
    assert_eq!(stars(0.001), "**");
    assert_eq!(stars(0.009), "**");
    assert_eq!(stars(0.01), "*");
    assert_eq!(stars(0.049), "*");
    assert_eq!(stars(0.05), "");
}

proptest! {
    #[test]
    fn invariant_under_positive_scaling(
        d in prop::collection::vec(-50i32..50, 5..70),
        scale in prop::sample::select(vec![0.01f64, 0.5, 3.0, 1000.0]),
    ) {
        let base: Vec<f64> = d.iter().map(|&x| f64::from(x)).collect();
        prop_assume!(base.iter().any(|&x| x != 0.0));
        let scaled: Vec<f64> = base.iter().map(|x| x * scale).collect();
        let a = wilcoxon_one_sided(&base).unwrap();
        let b = wilcoxon_one_sided(&scaled).unwrap();
        prop_assert_eq!(a.mode, b.mode);
        prop_assert!((a.p_one_sided - b.p_one_sided).abs() < 1e-12);
        prop_assert!((a.statistic_w - b.statistic_w).abs() < 1e-9);
    }

    #[test]
    fn p_is_a_probability(d in prop::collection::vec(-1.0f64..1.0, 1..80)) {
        let r = wilcoxon_one_sided(&d).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_one_sided));
        let n = r.n_effective as f64;
        prop_assert!(r.statistic_w >= 0.0 && r.statistic_w <= n * (n + 1.0) / 2.0);
    }

    #[test]
    fn permutation_invariant(mut d in prop::collection::vec(-5i32..5, 2..40), seed in any::<u64>()) {
        let a = wilcoxon_one_sided(&d.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
        let len = d.len();
        d.rotate_left((seed as usize) % len);
        d.reverse();
        let b = wilcoxon_one_sided(&d.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
        prop_assert_eq!(a.ok(), b.ok());
    }
}

fn did_trials(n_items: u32, dual_impl_correct: bool) -> Vec<dualtask_core::TrialRecord> {
    let mut out = Vec::new();
    for i in 1..=n_items {
        for task in Task::ALL {
            for p in Plausibility::ALL {
                let ok = !(task == Task::Dual && p == Plausibility::Implausible) || dual_impl_correct;
                out.push(common::trial("m", task, i, Construction::Transitive, p, Some(ok), (2, 2)));
            }
        }
    }
    out
}

#[test]
fn aggregate_computes_difference_in_differences() {
    let table = aggregate(&did_trials(3, false), &Grouping::default());
    assert_eq!(table.rows.len(), 3);
    for r in &table.rows {
        assert_eq!(r.delta[&Task::Single], 0.0);
        assert_eq!(r.delta[&Task::Dual], 1.0);
        assert_eq!(r.d_ds, Some(1.0));
        assert_eq!(r.d_dn, Some(1.0));
        assert!(r.missing.is_empty());
    }
}

#[test]
fn aggregate_fractional_cells() {
    // Dual/Implausible 2 of 5 correct, everything else all correct
    let mut trials = Vec::new();
    for task in Task::ALL {
        for p in Plausibility::ALL {
            for k in 0..5 {
                let ok = !(task == Task::Dual && p == Plausibility::Implausible) || k < 2;
                trials.push(common::trial("m", task, 1, Construction::Passive, p, Some(ok), (1, 1)));
            }
        }
    }
    let table = aggregate(&trials, &Grouping::default());
    let r = &table.rows[0];
    assert!((r.delta[&Task::Dual] - 0.6).abs() < 1e-12);
    assert!((r.d_ds.unwrap() - 0.6).abs() < 1e-12);
    assert!((r.d_dn.unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn missing_cells_are_reported() {
    let trials: Vec<_> = did_trials(2, true)
        .into_iter()
        .filter(|t| !(t.task == Task::Noisy && t.sentence_ref.item_id == 2))
        .collect();
    let table = aggregate(&trials, &Grouping::default());
    let r2 = table.rows.iter().find(|r| r.item.item_id == 2).unwrap();
    assert_eq!(r2.d_dn, None);
    assert_eq!(r2.missing.len(), 2);
    assert_eq!(table.d_vector(Contrast::DN).len(), 1);
    assert_eq!(table.d_vector(Contrast::DS).len(), 2);
}

#[test]
fn did_tests_on_aggregated_table() {
    let table = aggregate(&did_trials(20, false), &Grouping::default());
    let tests = test_did(&table);
    let ds = tests.ds.as_ref().unwrap();
    assert_eq!(ds.n_effective, 20);
    assert!(ds.p_one_sided < 1e-3);
    let recs = did_records(&table);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].stars, "***");

    let null = aggregate(&did_trials(20, true), &Grouping::default());
    let recs = did_records(&null);
    assert_eq!(recs[0].flag.as_deref(), Some("all_zero"));
    assert_eq!(recs[0].p, Some(1.0));

    let empty = aggregate(&[], &Grouping::default());
    assert!(matches!(test_did(&empty).ds, Err(StatsError::InsufficientData(Contrast::DS))));
}

#[test]
fn aggregate_ignores_trial_order() {
    let mut trials = did_trials(6, false);
    let a = aggregate(&trials, &Grouping::default());
    trials.reverse();
    trials.swap(3, 17);
    assert_eq!(a, aggregate(&trials, &Grouping::default()));
}

#[test]
fn five_increasing_differences() {
    let res = wilcoxon_one_sided(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!(res.mode, TestMode::Exact);
    assert_eq!(res.statistic_w, 15.0);
    assert_eq!(res.p_one_sided, 1.0 / 32.0);
}

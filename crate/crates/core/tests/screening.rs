mod common;

use std::collections::BTreeSet;

use common::{trial, with_condition};
use dualtask_core::arith::ArithCondition;
use dualtask_core::screen::{
    admit_subject, drop_trials, screen_all, screen_arith, screen_constructions, DropReason, ScreenConfig,
};
use dualtask_core::{Construction, Plausibility, Task, TrialRecord};
use proptest::prelude::*;

/// `correct` of 100 single-task trials in the cell are right.
fn single_cell(subject: &str, c: Construction, p: Plausibility, correct: usize) -> Vec<TrialRecord> {
    (0..100)
        .map(|i| trial(subject, Task::Single, i + 1, c, p, Some((i as usize) < correct), (0, 0)))
        .collect()
}

/// 50 dual trials with two problems each; `correct` of the 100 problems right.
fn dual_cell(subject: &str, cond: ArithCondition, correct: usize) -> Vec<TrialRecord> {
    (0..50usize)
        .map(|i| {
            let ok = correct.saturating_sub(2 * i).min(2);
            let t = trial(subject, Task::Dual, i as u32 + 1, Construction::Transitive, Plausibility::Plausible, Some(true), (2, ok));
            with_condition(t, cond)
        })
        .collect()
}

fn subject(si: usize, arith: usize) -> Vec<TrialRecord> {
    let mut t = single_cell("s", Construction::Transitive, Plausibility::Implausible, si);
    t.extend(single_cell("s", Construction::Transitive, Plausibility::Plausible, 100));
    t.extend(dual_cell("s", ArithCondition::ONE_DIGIT_TWO_ADDENDS, arith));
    t
}

fn admitted(si: usize, arith: usize) -> bool {
    admit_subject(&subject(si, arith), &ScreenConfig::default()).unwrap().admitted
}

#[test]
fn admission_thresholds_are_inclusive() {
    assert!(admitted(70, 80));
    assert!(admitted(71, 81));
    assert!(!admitted(69, 95));
    assert!(!admitted(95, 79));
    let adm = admit_subject(&subject(69, 95), &ScreenConfig::default()).unwrap();
    assert_eq!(adm.reasons.len(), 1);
    assert!(adm.reasons[0].contains("Single/Implausible"));
    let adm = admit_subject(&subject(95, 79), &ScreenConfig::default()).unwrap();
    assert!(adm.reasons[0].contains("arithmetic"));
}

#[test]
fn admission_needs_both_cells() {
    let only_single = single_cell("s", Construction::Transitive, Plausibility::Implausible, 100);
    assert!(admit_subject(&only_single, &ScreenConfig::default()).is_err());
    let only_dual = dual_cell("s", ArithCondition::ONE_DIGIT_TWO_ADDENDS, 100);
    assert!(admit_subject(&only_dual, &ScreenConfig::default()).is_err());
}

#[test]
fn unparseable_counts_against_admission() {
    let mut t = subject(70, 100);
    // turn one correct single/implausible trial into an unparseable one
    let idx = t
        .iter()
        .position(|x| x.task == Task::Single && x.comp_correct == Some(true) && x.sentence_ref.plausibility == Plausibility::Implausible)
        .unwrap();
    t[idx] = trial("s", Task::Single, 1, Construction::Transitive, Plausibility::Implausible, None, (0, 0));
    assert!(!admit_subject(&t, &ScreenConfig::default()).unwrap().admitted);
}

fn construction_subject(plausible: usize, implausible: usize) -> Vec<TrialRecord> {
    let mut t = Vec::new();
    t.extend(single_cell("s", Construction::Transitive, Plausibility::Plausible, 100));
    t.extend(single_cell("s", Construction::Transitive, Plausibility::Implausible, 100));
    t.extend(single_cell("s", Construction::Dative, Plausibility::Plausible, plausible));
    t.extend(single_cell("s", Construction::Dative, Plausibility::Implausible, implausible));
    t
}

fn dative_excluded(plausible: usize, implausible: usize) -> bool {
    screen_constructions(&construction_subject(plausible, implausible), &ScreenConfig::default())
        .unwrap()
        .excluded
        .contains(&Construction::Dative)
}

#[test]
fn construction_threshold_is_inclusive_on_either_cell() {
    assert!(!dative_excluded(80, 80));
    assert!(!dative_excluded(81, 100));
    assert!(dative_excluded(95, 79));
    assert!(dative_excluded(79, 95));
    assert!(!dative_excluded(100, 100));
}

#[test]
fn double_object_constructions_excluded() {
    let mut t = Vec::new();
    for c in Construction::ALL {
        for p in Plausibility::ALL {
            let acc = match (c, p) {
                (Construction::DoubleObject, Plausibility::Implausible) => 50,
                (Construction::BenDoubleObject, Plausibility::Plausible) => 60,
                _ => 95,
            };
            t.extend(single_cell("s", c, p, acc));
        }
    }
    let screen = screen_constructions(&t, &ScreenConfig::default()).unwrap();
    let expected: BTreeSet<_> = [Construction::DoubleObject, Construction::BenDoubleObject].into();
    assert_eq!(screen.excluded, expected);
    assert!((screen.accuracies[&Construction::DoubleObject].implausible - 0.5).abs() < 1e-12);
}

#[test]
fn arith_condition_threshold_is_strict() {
    let c = ArithCondition::new(3, 2).unwrap();
    let cfg = ScreenConfig::default();
    let (rates, excluded) = screen_arith(&dual_cell("s", c, 60), &cfg);
    assert!((rates[&c] - 0.40).abs() < 1e-12);
    assert!(excluded.is_empty());
    assert!(screen_arith(&dual_cell("s", c, 59), &cfg).1.contains(&c));
    assert!(!screen_arith(&dual_cell("s", c, 61), &cfg).1.contains(&c));
    let hard = ArithCondition::new(30, 3).unwrap();
    assert!(screen_arith(&dual_cell("s", hard, 4), &cfg).1.contains(&hard));
}

#[test]
fn trial_level_drops() {
    let wrong_dual = trial("s", Task::Dual, 1, Construction::Transitive, Plausibility::Plausible, Some(true), (2, 1));
    let mut noisy = trial("s", Task::Noisy, 1, Construction::Transitive, Plausibility::Plausible, Some(true), (0, 0));
    noisy.all_arith_correct = true;
    let unparseable = trial("s", Task::Single, 2, Construction::Transitive, Plausibility::Plausible, None, (0, 0));
    let fine = trial("s", Task::Dual, 3, Construction::Transitive, Plausibility::Plausible, Some(false), (2, 2));
    let (kept, dropped) = drop_trials(vec![wrong_dual, noisy.clone(), unparseable, fine.clone()]);
    assert_eq!(kept, vec![noisy, fine]);
    assert_eq!(dropped[&DropReason::ArithWrong], 1);
    assert_eq!(dropped[&DropReason::Unparseable], 1);
}

#[test]
fn rejected_subject_loses_all_trials() {
    let t = subject(60, 100);
    let n = t.len();
    let (kept, reports) = screen_all(t, &ScreenConfig::default());
    assert!(kept.is_empty());
    assert!(!reports[0].subject_admitted);
    assert_eq!(reports[0].dropped[&DropReason::NotAdmitted], n);
}

#[derive(Debug, Clone)]
struct CellSpec {
    correct_rate: f64,
    unparseable_rate: f64,
}

fn arb_cell() -> impl Strategy<Value = CellSpec> {
    (0.6f64..1.0, prop_oneof![Just(0.0), 0.0f64..0.1]).prop_map(|(correct_rate, unparseable_rate)| CellSpec {
        correct_rate,
        unparseable_rate,
    })
}

/// A random subject over a few constructions and all three tasks. Every
/// construction carries a fully correct dual 1dig.2add. trial, so an
/// admitted subject keeps at least one after screening.
fn arb_subject(name: &'static str) -> impl Strategy<Value = Vec<TrialRecord>> {
    (
        prop::collection::vec(arb_cell(), 3 * 2 * 3),
        prop::collection::vec(prop_oneof![8 => Just(2usize), 1 => Just(1), 1 => Just(0)], 3 * 2 * 6),
        any::<u64>(),
    )
        .prop_map(move |(cells, arith, seed)| {
            let cs = [Construction::Transitive, Construction::Passive, Construction::BenFor];
            let conds = [ArithCondition::ONE_DIGIT_TWO_ADDENDS, ArithCondition::new(10, 3).unwrap()];
            let mut out = Vec::new();
            let mut k = seed;
            let mut next = || {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (k >> 11) as f64 / (1u64 << 53) as f64
            };
            let mut ai = 0;
            for (ci, &c) in cs.iter().enumerate() {
                for (pi, p) in Plausibility::ALL.into_iter().enumerate() {
                    for (ti, task) in Task::ALL.into_iter().enumerate() {
                        let spec = &cells[(ci * 2 + pi) * 3 + ti];
                        for item in 1..=6u32 {
                            let comp = if next() < spec.unparseable_rate {
                                None
                            } else {
                                Some(next() < spec.correct_rate)
                            };
                            let cond = conds[(item % 2) as usize];
                            let arith = if task == Task::Dual {
                                let ok = arith[ai % arith.len()];
                                ai += 1;
                                (2, if item == 2 { 2 } else { ok })
                            } else {
                                (0, 0)
                            };
                            let comp = if task == Task::Dual && item == 2 { Some(true) } else { comp };
                            let t = trial(name, task, item, c, p, comp, arith);
                            out.push(if task.has_arithmetic() { with_condition(t, cond) } else { t });
                        }
                    }
                }
            }
            out
        })
}

#[test]
fn generator_covers_both_outcomes() {
    use proptest::strategy::ValueTree;
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let strat = arb_subject("g");
    let (mut admitted, mut rejected, mut partial) = (0, 0, 0);
    for _ in 0..300 {
        let t = strat.new_tree(&mut runner).unwrap().current();
        let (_, r) = screen_all(t, &ScreenConfig::default());
        if r[0].subject_admitted {
            admitted += 1;
            if !r[0].excluded_constructions.is_empty() || !r[0].excluded_arith_conditions.is_empty() {
                partial += 1;
            }
        } else {
            rejected += 1;
        }
    }
    assert!(admitted > 30 && rejected > 30 && partial > 10, "{admitted} {rejected} {partial}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn counts_reconcile(a in arb_subject("a"), b in arb_subject("b")) {
        let mut all = a;
        all.extend(b);
        let n = all.len();
        let (kept, reports) = screen_all(all, &ScreenConfig::default());
        prop_assert_eq!(reports.len(), 2);
        let total: usize = reports.iter().map(|r| r.retained + r.dropped_total()).sum();
        prop_assert_eq!(total, n);
        prop_assert_eq!(kept.len(), reports.iter().map(|r| r.retained).sum::<usize>());
        for r in &reports {
            prop_assert_eq!(r.input_trials, r.retained + r.dropped_total());
        }
    }

    #[test]
    fn screening_is_idempotent(a in arb_subject("a"), b in arb_subject("b")) {
        let mut all = a;
        all.extend(b);
        let cfg = ScreenConfig::default();
        let (once, _) = screen_all(all, &cfg);
        let (twice, reports) = screen_all(once.clone(), &cfg);
        prop_assert_eq!(&once, &twice);
        for r in reports.iter().filter(|r| r.input_trials > 0) {
            prop_assert_eq!(r.dropped_total(), 0);
        }
    }

    #[test]
    fn retained_trials_keep_input_order(a in arb_subject("a"), b in arb_subject("b")) {
        let mut all = Vec::new();
        for (x, y) in a.into_iter().zip(b) {
            all.push(x);
            all.push(y);
        }
        let (kept, _) = screen_all(all.clone(), &ScreenConfig::default());
        let mut it = all.iter();
        for k in &kept {
            prop_assert!(it.any(|x| x == k));
        }
    }
}

//! Subject admission and data screening ahead of the contrast analysis.
//!
//! Order per subject: admission, construction screening, arithmetic-type
//! screening, then trial-level drops. Unparseable responses count as
//! incorrect wherever an accuracy is computed for a screening decision.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::ArithCondition;
use crate::score::{ParsedAnswer, TrialRecord};
use crate::types::{Construction, Plausibility, Task};

/// Slack for comparing computed fractions against decimal thresholds.
const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreenError {
    #[error("no trials in cell {0}")]
    InsufficientData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    /// Minimum single-task accuracy on implausible items (inclusive).
    pub min_single_implausible: f64,
    /// Minimum dual-task 1dig.2add. arithmetic accuracy (inclusive).
    pub min_dual_arith: f64,
    /// Minimum single-task accuracy per construction cell (inclusive).
    pub min_construction: f64,
    /// Maximum arithmetic incorrect rate per condition (exceeding excludes).
    pub max_arith_incorrect: f64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            min_single_implausible: 0.70,
            min_dual_arith: 0.80,
            min_construction: 0.80,
            max_arith_incorrect: 0.40,
        }
    }
}

fn correct(t: &TrialRecord) -> bool {
    t.comp_correct == Some(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub admitted: bool,
    pub reasons: Vec<String>,
    pub single_implausible_accuracy: Option<f64>,
    pub dual_arith_accuracy: Option<f64>,
}

pub fn single_implausible_accuracy(trials: &[TrialRecord]) -> Option<f64> {
    let cell: Vec<&TrialRecord> = trials
        .iter()
        .filter(|t| t.task == Task::Single && t.sentence_ref.plausibility == Plausibility::Implausible)
        .collect();
    (!cell.is_empty())
        .then(|| cell.iter().filter(|t| correct(t)).count() as f64 / cell.len() as f64)
}

/// Fraction of individual identifier-bearing problems answered correctly.
pub fn arith_accuracy(trials: &[TrialRecord], condition: ArithCondition) -> Option<f64> {
    let (right, total) = trials
        .iter()
        .filter(|t| t.task == Task::Dual && t.condition == Some(condition))
        .fold((0usize, 0usize), |(r, n), t| {
            (r + t.arith_correct_count(), n + t.arith_problem_count())
        });
    (total > 0).then(|| right as f64 / total as f64)
}

pub fn admit_subject(trials: &[TrialRecord], cfg: &ScreenConfig) -> Result<Admission, ScreenError> {
    let comp = single_implausible_accuracy(trials)
        .ok_or_else(|| ScreenError::InsufficientData("Single/Implausible".into()))?;
    let arith = arith_accuracy(trials, ArithCondition::ONE_DIGIT_TWO_ADDENDS)
        .ok_or_else(|| ScreenError::InsufficientData("Dual/1dig.2add. arithmetic".into()))?;
    let mut reasons = Vec::new();
    if comp + EPS < cfg.min_single_implausible {
        reasons.push(format!(
            "Single/Implausible accuracy {comp:.4} below {:.2}",
            cfg.min_single_implausible
        ));
    }
    if arith + EPS < cfg.min_dual_arith {
        reasons.push(format!(
            "Dual arithmetic accuracy (1dig.2add.) {arith:.4} below {:.2}",
            cfg.min_dual_arith
        ));
    }
    Ok(Admission {
        admitted: reasons.is_empty(),
        reasons,
        single_implausible_accuracy: Some(comp),
        dual_arith_accuracy: Some(arith),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionCells {
    pub plausible: f64,
    pub implausible: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionScreen {
    pub accuracies: BTreeMap<Construction, ConstructionCells>,
    pub excluded: BTreeSet<Construction>,
}

/// Excludes a construction when either plausibility cell falls below the
/// single-task threshold; both cells are needed for the contrast.
pub fn screen_constructions(
    trials: &[TrialRecord],
    cfg: &ScreenConfig,
) -> Result<ConstructionScreen, ScreenError> {
    let mut tallies: BTreeMap<(Construction, Plausibility), (usize, usize)> = BTreeMap::new();
    let present: BTreeSet<Construction> =
        trials.iter().map(|t| t.sentence_ref.construction).collect();
    for t in trials.iter().filter(|t| t.task == Task::Single) {
        let e = tallies
            .entry((t.sentence_ref.construction, t.sentence_ref.plausibility))
            .or_default();
        e.0 += usize::from(correct(t));
        e.1 += 1;
    }
    let mut out = ConstructionScreen {
        accuracies: BTreeMap::new(),
        excluded: BTreeSet::new(),
    };
    for c in present {
        let cell = |p: Plausibility| -> Result<f64, ScreenError> {
            match tallies.get(&(c, p)) {
                Some(&(k, n)) if n > 0 => Ok(k as f64 / n as f64),
                _ => Err(ScreenError::InsufficientData(format!("Single/{c}/{p}"))),
            }
        };
        let cells = ConstructionCells {
            plausible: cell(Plausibility::Plausible)?,
            implausible: cell(Plausibility::Implausible)?,
        };
        if cells.plausible + EPS < cfg.min_construction || cells.implausible + EPS < cfg.min_construction {
            out.excluded.insert(c);
        }
        out.accuracies.insert(c, cells);
    }
    Ok(out)
}

/// Incorrect-problem rate per condition, with the conditions that exceed
/// the threshold.
pub fn screen_arith(
    trials: &[TrialRecord],
    cfg: &ScreenConfig,
) -> (BTreeMap<ArithCondition, f64>, BTreeSet<ArithCondition>) {
    let mut tallies: BTreeMap<ArithCondition, (usize, usize)> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.task == Task::Dual) {
        if let Some(c) = t.condition {
            let e = tallies.entry(c).or_default();
            e.0 += t.arith_problem_count() - t.arith_correct_count();
            e.1 += t.arith_problem_count();
        }
    }
    let rates: BTreeMap<ArithCondition, f64> = tallies
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(c, (wrong, n))| (c, wrong as f64 / n as f64))
        .collect();
    let excluded = rates
        .iter()
        .filter(|(_, &r)| r > cfg.max_arith_incorrect + EPS)
        .map(|(&c, _)| c)
        .collect();
    (rates, excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NotAdmitted,
    ExcludedConstruction,
    ExcludedArithCondition,
    ArithWrong,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub subject_id: String,
    pub input_trials: usize,
    pub admission: Option<Admission>,
    pub subject_admitted: bool,
    pub excluded_constructions: BTreeMap<Construction, ConstructionCells>,
    pub arith_incorrect_rates: BTreeMap<ArithCondition, f64>,
    pub excluded_arith_conditions: BTreeSet<ArithCondition>,
    pub dropped: BTreeMap<DropReason, usize>,
    pub retained: usize,
}

impl FilterReport {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

fn trial_drop_reason(t: &TrialRecord) -> Option<DropReason> {
    if t.task == Task::Dual && !t.all_arith_correct {
        Some(DropReason::ArithWrong)
    } else if t.parsed_answer == ParsedAnswer::Unparseable {
        Some(DropReason::Unparseable)
    } else {
        None
    }
}

/// Trial-level drops: dual trials with any wrong sum, and any trial
/// whose answer could not be extracted.
pub fn drop_trials(trials: Vec<TrialRecord>) -> (Vec<TrialRecord>, BTreeMap<DropReason, usize>) {
    let mut dropped: BTreeMap<DropReason, usize> = BTreeMap::new();
    let retained = trials
        .into_iter()
        .filter(|t| match trial_drop_reason(t) {
            Some(r) => {
                *dropped.entry(r).or_default() += 1;
                false
            }
            None => true,
        })
        .collect();
    (retained, dropped)
}

/// Screening decisions for one subject: a keep flag per input trial.
fn screen_mask(subject_id: &str, trials: &[TrialRecord], cfg: &ScreenConfig) -> (Vec<bool>, FilterReport) {
    let mut report = FilterReport {
        subject_id: subject_id.to_string(),
        input_trials: trials.len(),
        admission: None,
        subject_admitted: false,
        excluded_constructions: BTreeMap::new(),
        arith_incorrect_rates: BTreeMap::new(),
        excluded_arith_conditions: BTreeSet::new(),
        dropped: BTreeMap::new(),
        retained: 0,
    };
    let reject = |mut report: FilterReport| {
        if !trials.is_empty() {
            report.dropped.insert(DropReason::NotAdmitted, trials.len());
        }
        (vec![false; trials.len()], report)
    };

    match admit_subject(trials, cfg) {
        Ok(adm) => {
            report.subject_admitted = adm.admitted;
            report.admission = Some(adm);
        }
        Err(e) => {
            report.admission = Some(Admission {
                admitted: false,
                reasons: vec![e.to_string()],
                single_implausible_accuracy: single_implausible_accuracy(trials),
                dual_arith_accuracy: arith_accuracy(trials, ArithCondition::ONE_DIGIT_TWO_ADDENDS),
            });
        }
    }
    if !report.subject_admitted {
        return reject(report);
    }

    let constructions = match screen_constructions(trials, cfg) {
        Ok(c) => c,
        Err(e) => {
            report.subject_admitted = false;
            if let Some(a) = report.admission.as_mut() {
                a.admitted = false;
                a.reasons.push(e.to_string());
            }
            return reject(report);
        }
    };
    let (rates, excluded_arith) = screen_arith(trials, cfg);

    let mut keep = Vec::with_capacity(trials.len());
    for t in trials {
        let reason = if constructions.excluded.contains(&t.sentence_ref.construction) {
            Some(DropReason::ExcludedConstruction)
        } else if t.condition.is_some_and(|c| excluded_arith.contains(&c)) {
            Some(DropReason::ExcludedArithCondition)
        } else {
            trial_drop_reason(t)
        };
        if let Some(r) = reason {
            *report.dropped.entry(r).or_default() += 1;
        }
        keep.push(reason.is_none());
    }
    report.excluded_constructions = constructions
        .accuracies
        .into_iter()
        .filter(|(c, _)| constructions.excluded.contains(c))
        .collect();
    report.arith_incorrect_rates = rates;
    report.excluded_arith_conditions = excluded_arith;
    report.retained = keep.iter().filter(|&&k| k).count();
    (keep, report)
}

/// Full screening for one subject's trials.
pub fn screen_subject(
    subject_id: &str,
    trials: Vec<TrialRecord>,
    cfg: &ScreenConfig,
) -> (Vec<TrialRecord>, FilterReport) {
    let (keep, report) = screen_mask(subject_id, &trials, cfg);
    let retained = trials
        .into_iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then_some(t))
        .collect();
    (retained, report)
}

/// Screens each subject independently; retained trials keep input order.
pub fn screen_all(trials: Vec<TrialRecord>, cfg: &ScreenConfig) -> (Vec<TrialRecord>, Vec<FilterReport>) {
    let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        by_subject.entry(t.subject_id.as_str()).or_default().push(i);
    }
    let mut keep = vec![false; trials.len()];
    let mut reports = Vec::with_capacity(by_subject.len());
    for (subject, idx) in by_subject {
        let group: Vec<TrialRecord> = idx.iter().map(|&i| trials[i].clone()).collect();
        let (mask, report) = screen_mask(subject, &group, cfg);
        for (&i, k) in idx.iter().zip(mask) {
            keep[i] = k;
        }
        reports.push(report);
    }
    let retained = trials
        .into_iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then_some(t))
        .collect();
    (retained, reports)
}

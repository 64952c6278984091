//! Per-item plausibility contrasts, difference-in-differences, and the
//! one-sided Wilcoxon signed-rank test.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::arith::ArithCondition;
use crate::score::TrialRecord;
use crate::types::{Construction, ItemKey, Plausibility, Task};

pub const ALPHA: f64 = 0.05;

/// Exact null distribution is used below this many nonzero differences.
pub const EXACT_LIMIT: usize = 50;

/// Magnitudes closer than this (relative) are treated as tied, and values
/// this close to zero as zero. Differences of mean accuracies pick up
/// rounding noise that would otherwise split genuine ties.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no differences to test")]
    EmptyInput,
    #[error("non-finite difference {0}")]
    NonFinite(f64),
    #[error("no items have every cell needed for {0}")]
    InsufficientData(Contrast),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_input: usize,
    pub n_effective: usize,
    pub statistic_w: f64,
    pub mode: TestMode,
    pub p_one_sided: f64,
    pub alpha: f64,
    pub significant: bool,
    /// Set when every difference was zero; the test is then undefined.
    pub all_zero: bool,
}

impl WilcoxonResult {
    pub fn stars(&self) -> &'static str {
        stars(self.p_one_sided)
    }
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Average ranks of `values` (1-based) and the sizes of tie groups.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && same_magnitude(values[order[j + 1]], values[order[i]]) {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn same_magnitude(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Number of sign assignments giving each positive-rank sum, for ranks
/// `1..=n`. Index `w` holds the count for `W = w`.
pub fn signed_rank_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for r in 1..=n {
        let top = r * (r + 1) / 2;
        for w in (r..=top).rev() {
            counts[w] += counts[w - r];
        }
    }
    counts
}

/// `P(W >= w)` under the null for `n` untied ranks.
fn exact_upper_tail(n: usize, w: usize) -> f64 {
    let counts = signed_rank_counts(n);
    if w >= counts.len() {
        return 0.0;
    }
    let tail: u64 = counts[w..].iter().sum();
    tail as f64 / 2f64.powi(n as i32)
}

/// One-sided signed-rank test of `median(d) <= 0` against `median(d) > 0`.
///
/// Zeros are dropped. With fewer than 50 nonzero values and no tied
/// magnitudes the exact null distribution is used; otherwise the normal
/// approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_one_sided(d: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if d.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if let Some(&bad) = d.iter().find(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite(bad));
    }
    let nonzero: Vec<f64> = d.iter().copied().filter(|x| x.abs() > TIE_TOL).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_input: d.len(),
            n_effective: 0,
            statistic_w: 0.0,
            mode: TestMode::Exact,
            p_one_sided: 1.0,
            alpha: ALPHA,
            significant: false,
            all_zero: true,
        });
    }
    let mags: Vec<f64> = nonzero.iter().map(|x| x.abs()).collect();
    let (ranks, ties) = average_ranks(&mags);
    let w: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(x, _)| **x > 0.0)
        .map(|(_, r)| r)
        .sum();

    let (mode, p) = if n < EXACT_LIMIT && ties.is_empty() {
        // ranks are integers here, so W is too
        (TestMode::Exact, exact_upper_tail(n, w.round() as usize))
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = (w - mean - 0.5) / var.sqrt();
            Normal::standard().sf(z)
        };
        (TestMode::NormalApprox, p)
    };
    let p = p.clamp(0.0, 1.0);
    Ok(WilcoxonResult {
        n_input: d.len(),
        n_effective: n,
        statistic_w: w,
        mode,
        p_one_sided: p,
        alpha: ALPHA,
        significant: p < ALPHA,
        all_zero: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Contrast {
    /// Dual minus Single.
    DS,
    /// Dual minus Noisy.
    DN,
}

impl std::fmt::Display for Contrast {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Contrast::DS => "D_DS",
            Contrast::DN => "D_DN",
        })
    }
}

/// Which trials enter a contrast table.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    /// Restrict to these constructions (all when `None`).
    pub constructions: Option<BTreeSet<Construction>>,
    /// Restrict noisy/dual trials to these conditions; single-task trials
    /// carry no condition and always enter as the baseline.
    pub arith: Option<BTreeSet<ArithCondition>>,
    /// Pair by item id alone, pooling an item's constructions.
    pub pool_constructions: bool,
}

impl Grouping {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        match &self.constructions {
            Some(cs) => parts.push(cs.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("+")),
            None => parts.push("all constructions".into()),
        }
        if let Some(a) = &self.arith {
            parts.push(a.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("+"));
        }
        if self.pool_constructions {
            parts.push("pooled".into());
        }
        parts.join(" / ")
    }

    fn admits(&self, t: &TrialRecord) -> bool {
        let c_ok = self
            .constructions
            .as_ref()
            .is_none_or(|cs| cs.contains(&t.sentence_ref.construction));
        let a_ok = match (&self.arith, t.condition) {
            (Some(allowed), Some(c)) => allowed.contains(&c),
            _ => true,
        };
        c_ok && a_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub task: Task,
    pub plausibility: Plausibility,
    pub mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub item: ItemKey,
    pub cells: Vec<CellMean>,
    pub delta: BTreeMap<Task, f64>,
    pub d_ds: Option<f64>,
    pub d_dn: Option<f64>,
    /// Cells absent for this item, as `Task/Plausibility`.
    pub missing: Vec<String>,
}

impl ContrastRow {
    pub fn p_hat(&self, task: Task, p: Plausibility) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.task == task && c.plausibility == p)
            .map(|c| c.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastTable {
    pub grouping: Grouping,
    pub rows: Vec<ContrastRow>,
}

impl ContrastTable {
    pub fn d_vector(&self, contrast: Contrast) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| match contrast {
                Contrast::DS => r.d_ds,
                Contrast::DN => r.d_dn,
            })
            .collect()
    }
}

/// Mean comprehension accuracy per item × task × plausibility, then the
/// within-task plausibility contrast and both difference-in-differences.
/// Trials without a defined correctness flag are ignored.
pub fn aggregate(trials: &[TrialRecord], grouping: &Grouping) -> ContrastTable {
    let mut tallies: BTreeMap<ItemKey, BTreeMap<(Task, Plausibility), (usize, usize)>> =
        BTreeMap::new();
    for t in trials.iter().filter(|t| grouping.admits(t)) {
        let Some(ok) = t.comp_correct else { continue };
        let mut key = t.sentence_ref.item_key();
        if grouping.pool_constructions {
            key.construction = None;
        }
        let e = tallies
            .entry(key)
            .or_default()
            .entry((t.task, t.sentence_ref.plausibility))
            .or_default();
        e.0 += usize::from(ok);
        e.1 += 1;
    }

    let rows = tallies
        .into_iter()
        .map(|(item, cells)| {
            let mut row = ContrastRow {
                item,
                cells: Vec::new(),
                delta: BTreeMap::new(),
                d_ds: None,
                d_dn: None,
                missing: Vec::new(),
            };
            for task in Task::ALL {
                for p in Plausibility::ALL {
                    match cells.get(&(task, p)) {
                        Some(&(k, n)) => row.cells.push(CellMean {
                            task,
                            plausibility: p,
                            mean: k as f64 / n as f64,
                            n,
                        }),
                        None => row.missing.push(format!("{task}/{p}")),
                    }
                }
                if let (Some(pl), Some(im)) = (
                    row.p_hat(task, Plausibility::Plausible),
                    row.p_hat(task, Plausibility::Implausible),
                ) {
                    row.delta.insert(task, pl - im);
                }
            }
            let dual = row.delta.get(&Task::Dual).copied();
            row.d_ds = dual.zip(row.delta.get(&Task::Single).copied()).map(|(d, s)| d - s);
            row.d_dn = dual.zip(row.delta.get(&Task::Noisy).copied()).map(|(d, n)| d - n);
            row
        })
        .collect();
    ContrastTable {
        grouping: grouping.clone(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidTests {
    pub ds: Result<WilcoxonResult, StatsError>,
    pub dn: Result<WilcoxonResult, StatsError>,
}

impl DidTests {
    pub fn get(&self, c: Contrast) -> &Result<WilcoxonResult, StatsError> {
        match c {
            Contrast::DS => &self.ds,
            Contrast::DN => &self.dn,
        }
    }
}

pub fn test_did(table: &ContrastTable) -> DidTests {
    let run = |c: Contrast| {
        let d = table.d_vector(c);
        if d.is_empty() {
            Err(StatsError::InsufficientData(c))
        } else {
            wilcoxon_one_sided(&d)
        }
    };
    DidTests {
        ds: run(Contrast::DS),
        dn: run(Contrast::DN),
    }
}

/// Serialized test outcome, one per grouping × contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub grouping: String,
    pub contrast: Contrast,
    pub n: usize,
    pub n_effective: usize,
    pub w: Option<f64>,
    pub mode: Option<TestMode>,
    pub p: Option<f64>,
    pub significant: bool,
    pub stars: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl StatsRecord {
    pub fn from_outcome(grouping: &str, contrast: Contrast, n: usize, res: &Result<WilcoxonResult, StatsError>) -> Self {
        match res {
            Ok(r) => StatsRecord {
                grouping: grouping.to_string(),
                contrast,
                n: r.n_input,
                n_effective: r.n_effective,
                w: Some(r.statistic_w),
                mode: Some(r.mode),
                p: Some(r.p_one_sided),
                significant: r.significant,
                stars: r.stars().to_string(),
                flag: r.all_zero.then(|| "all_zero".to_string()),
            },
            Err(e) => StatsRecord {
                grouping: grouping.to_string(),
                contrast,
                n,
                n_effective: 0,
                w: None,
                mode: None,
                p: None,
                significant: false,
                stars: String::new(),
                flag: Some(e.to_string()),
            },
        }
    }
}

pub fn did_records(table: &ContrastTable) -> Vec<StatsRecord> {
    let tests = test_did(table);
    let label = table.grouping.label();
    [Contrast::DS, Contrast::DN]
        .into_iter()
        .map(|c| StatsRecord::from_outcome(&label, c, table.d_vector(c).len(), tests.get(c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_sum_to_power_of_two() {
        for n in 0..=20 {
            let total: u64 = signed_rank_counts(n).iter().sum();
            assert_eq!(total, 1u64 << n);
        }
        assert_eq!(signed_rank_counts(3), vec![1, 1, 1, 2, 1, 1, 1]);
    }

    #[test]
    fn all_positive_five() {
        let r = wilcoxon_one_sided(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(r.statistic_w, 15.0);
        assert_eq!(r.mode, TestMode::Exact);
        assert_eq!(r.p_one_sided, 1.0 / 32.0);
        assert!(r.significant);
    }

    #[test]
    fn all_negative_gives_one() {
        let r = wilcoxon_one_sided(&[-1.0, -2.0, -3.0]).unwrap();
        assert_eq!(r.statistic_w, 0.0);
        assert_eq!(r.p_one_sided, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn all_zero_flagged() {
        let r = wilcoxon_one_sided(&[0.0, 0.0, 0.0]).unwrap();
        assert!(r.all_zero);
        assert_eq!(r.n_effective, 0);
        assert_eq!(r.p_one_sided, 1.0);
        assert!(!r.significant);
        assert_eq!(wilcoxon_one_sided(&[]), Err(StatsError::EmptyInput));
        assert!(wilcoxon_one_sided(&[f64::NAN]).is_err());
    }

    #[test]
    fn rounding_noise_still_ties() {
        let a = 0.1 + 0.2;
        let (ranks, ties) = average_ranks(&[a, 0.3, 0.5]);
        assert_eq!(ranks, vec![1.5, 1.5, 3.0]);
        assert_eq!(ties, vec![2]);
        let r = wilcoxon_one_sided(&[1e-17, 1.0]).unwrap();
        assert_eq!(r.n_effective, 1);
    }

    #[test]
    fn stars_thresholds() {
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.0099), "**");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.049), "*");
        assert_eq!(stars(0.05), "");
    }
}

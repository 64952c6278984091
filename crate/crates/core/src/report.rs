//! Summary tables: accuracy by facets, arithmetic accuracy, the
//! implausible-item error profile, and their CSV/JSON/markdown emitters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::TrialRecord;
use crate::stats::StatsRecord;
use crate::types::{Answer, ItemKey, Plausibility, Task};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown facet `{0}`")]
    UnknownFacet(String),
    #[error("malformed table: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Subject,
    Construction,
    /// Gold answer.
    Answer,
    Arith,
    Task,
    Plausibility,
}

impl Facet {
    pub fn name(self) -> &'static str {
        match self {
            Facet::Subject => "subject",
            Facet::Construction => "construction",
            Facet::Answer => "answer",
            Facet::Arith => "arith",
            Facet::Task => "task",
            Facet::Plausibility => "plausibility",
        }
    }

    fn value(self, t: &TrialRecord) -> String {
        match self {
            Facet::Subject => t.subject_id.clone(),
            Facet::Construction => t.sentence_ref.construction.to_string(),
            Facet::Answer => t.gold_answer.to_string(),
            Facet::Arith => t
                .condition
                .map(|c| c.to_string())
                .unwrap_or_else(|| "none".into()),
            Facet::Task => t.task.to_string(),
            Facet::Plausibility => t.sentence_ref.plausibility.to_string(),
        }
    }
}

impl FromStr for Facet {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subject" => Ok(Facet::Subject),
            "construction" => Ok(Facet::Construction),
            "answer" => Ok(Facet::Answer),
            "arith" => Ok(Facet::Arith),
            "task" => Ok(Facet::Task),
            "plausibility" => Ok(Facet::Plausibility),
            other => Err(ReportError::UnknownFacet(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub key: Vec<String>,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub name: String,
    pub facets: Vec<Facet>,
    pub rows: Vec<AccuracyRow>,
    /// Facet combinations of observed values that have no trials.
    pub empty_cells: Vec<Vec<String>>,
    /// How SDs were computed.
    pub sd_convention: String,
}

pub const SD_CONVENTION: &str = "trial-level population SD of 0/1 outcomes, sqrt(p(1-p))";

/// Mean and population SD of 0/1 outcomes.
pub fn bernoulli_summary(correct: usize, n: usize) -> (f64, f64) {
    let p = correct as f64 / n as f64;
    (p, (p * (1.0 - p)).max(0.0).sqrt())
}

/// Mean comprehension accuracy per facet cell, over trials whose answer
/// was parsed.
pub fn accuracy_table(name: &str, trials: &[TrialRecord], facets: &[Facet]) -> AccuracyTable {
    let mut cells: BTreeMap<Vec<String>, (usize, usize)> = BTreeMap::new();
    let mut seen: Vec<BTreeSet<String>> = vec![BTreeSet::new(); facets.len()];
    for t in trials {
        let Some(ok) = t.comp_correct else { continue };
        let key: Vec<String> = facets.iter().map(|f| f.value(t)).collect();
        for (s, v) in seen.iter_mut().zip(&key) {
            s.insert(v.clone());
        }
        let e = cells.entry(key).or_default();
        e.0 += usize::from(ok);
        e.1 += 1;
    }
    let rows = cells
        .iter()
        .map(|(key, &(k, n))| {
            let (mean, sd) = bernoulli_summary(k, n);
            AccuracyRow {
                key: key.clone(),
                mean,
                sd,
                n,
            }
        })
        .collect();

    let mut empty_cells = Vec::new();
    let mut combo: Vec<Vec<String>> = vec![Vec::new()];
    for values in &seen {
        combo = combo
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    if !cells.is_empty() {
        for c in combo {
            if !cells.contains_key(&c) {
                empty_cells.push(c);
            }
        }
    }
    AccuracyTable {
        name: name.to_string(),
        facets: facets.to_vec(),
        rows,
        empty_cells,
        sd_convention: SD_CONVENTION.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArithRow {
    pub subject: String,
    pub condition: String,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Accuracy over individual identifier-bearing problems per subject and
/// condition. Cells with no problems are absent.
pub fn arith_accuracy_table(trials: &[TrialRecord]) -> Vec<ArithRow> {
    let mut cells: BTreeMap<(String, crate::arith::ArithCondition), (usize, usize)> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.task == Task::Dual) {
        let Some(c) = t.condition else { continue };
        if t.arith_problem_count() == 0 {
            continue;
        }
        let e = cells.entry((t.subject_id.clone(), c)).or_default();
        e.0 += t.arith_correct_count();
        e.1 += t.arith_problem_count();
    }
    cells
        .into_iter()
        .map(|((subject, c), (k, n))| {
            let (mean, sd) = bernoulli_summary(k, n);
            ArithRow {
                subject,
                condition: c.to_string(),
                mean,
                sd,
                n,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub value: String,
    pub flagged: usize,
    pub total: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub by_construction: Vec<ProfileRow>,
    pub by_arith: Vec<ProfileRow>,
    pub by_answer: Vec<ProfileRow>,
    /// Item units skipped for lacking a task cell.
    pub skipped: usize,
}

impl ErrorProfile {
    /// Construction values ordered from highest to lowest proportion.
    pub fn construction_ranking(&self) -> Vec<String> {
        let mut rows = self.by_construction.clone();
        rows.sort_by(|a, b| b.proportion.total_cmp(&a.proportion).then(a.value.cmp(&b.value)));
        rows.into_iter().map(|r| r.value).collect()
    }
}

/// Majority vote over a cell's outcomes; a tie counts as incorrect.
fn majority_correct(k: usize, n: usize) -> bool {
    2 * k > n
}

/// Proportion of implausible items answered correctly in the single and
/// noisy tasks but incorrectly in the dual task.
pub fn implausible_error_profile(trials: &[TrialRecord]) -> ErrorProfile {
    type Tally = (usize, usize);
    #[derive(Default)]
    struct Unit {
        answer: Option<Answer>,
        single: Tally,
        noisy: Tally,
        dual: Tally,
        noisy_by: BTreeMap<String, Tally>,
        dual_by: BTreeMap<String, Tally>,
    }
    let mut units: BTreeMap<ItemKey, Unit> = BTreeMap::new();
    for t in trials {
        if t.sentence_ref.plausibility != Plausibility::Implausible {
            continue;
        }
        let Some(ok) = t.comp_correct else { continue };
        let u = units.entry(t.sentence_ref.item_key()).or_default();
        u.answer = Some(t.gold_answer);
        let bump = |tally: &mut Tally| {
            tally.0 += usize::from(ok);
            tally.1 += 1;
        };
        let cond = t.condition.map(|c| c.to_string()).unwrap_or_default();
        match t.task {
            Task::Single => bump(&mut u.single),
            Task::Noisy => {
                bump(&mut u.noisy);
                bump(u.noisy_by.entry(cond).or_default());
            }
            Task::Dual => {
                bump(&mut u.dual);
                bump(u.dual_by.entry(cond).or_default());
            }
        }
    }

    let mut by_construction: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut by_answer: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut by_arith: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut skipped = 0;
    let flag = |s: Tally, n: Tally, d: Tally| {
        majority_correct(s.0, s.1) && majority_correct(n.0, n.1) && !majority_correct(d.0, d.1)
    };
    for (key, u) in &units {
        if u.single.1 == 0 || u.noisy.1 == 0 || u.dual.1 == 0 {
            skipped += 1;
            continue;
        }
        let f = usize::from(flag(u.single, u.noisy, u.dual));
        let construction = key.construction.map(|c| c.to_string()).unwrap_or_default();
        for (map, value) in [
            (&mut by_construction, construction),
            (&mut by_answer, u.answer.map(|a| a.to_string()).unwrap_or_default()),
        ] {
            let e = map.entry(value).or_default();
            e.0 += f;
            e.1 += 1;
        }
        for (cond, &dual) in &u.dual_by {
            let Some(&noisy) = u.noisy_by.get(cond) else {
                skipped += 1;
                continue;
            };
            let e = by_arith.entry(cond.clone()).or_default();
            e.0 += usize::from(flag(u.single, noisy, dual));
            e.1 += 1;
        }
    }
    let rows = |m: BTreeMap<String, (usize, usize)>| {
        m.into_iter()
            .map(|(value, (flagged, total))| ProfileRow {
                value,
                flagged,
                total,
                proportion: flagged as f64 / total as f64,
            })
            .collect()
    };
    ErrorProfile {
        by_construction: rows(by_construction),
        by_arith: rows(by_arith),
        by_answer: rows(by_answer),
        skipped,
    }
}

/// Everything one analysis run emits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub accuracy: Vec<AccuracyTable>,
    pub arith: Vec<ArithRow>,
    pub error_profile: Option<ErrorProfile>,
    pub stats: Vec<StatsRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// Four decimals, or scientific notation below 1e-4.
pub fn format_p(p: f64) -> String {
    if p > 0.0 && p < 1e-4 {
        format!("{p:.1e}")
    } else {
        format!("{p:.4}")
    }
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

impl AccuracyTable {
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = self.facets.iter().map(|f| f.name().to_string()).collect();
        h.extend(["mean", "sd", "n"].map(String::from));
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), ReportError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = r.key.clone();
            rec.extend([r.mean.to_string(), r.sd.to_string(), r.n.to_string()]);
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a table written by [`AccuracyTable::write_csv`].
    pub fn read_csv<R: std::io::Read>(name: &str, r: R) -> Result<Self, ReportError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 3 {
            return Err(ReportError::Malformed("too few columns".into()));
        }
        let facets = header
            .iter()
            .take(header.len() - 3)
            .map(Facet::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        let k = facets.len();
        let bad = |e: String| ReportError::Malformed(e);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(AccuracyRow {
                key: rec.iter().take(k).map(String::from).collect(),
                mean: rec[k].parse().map_err(|e| bad(format!("{e}")))?,
                sd: rec[k + 1].parse().map_err(|e| bad(format!("{e}")))?,
                n: rec[k + 2].parse().map_err(|e| bad(format!("{e}")))?,
            });
        }
        Ok(AccuracyTable {
            name: name.to_string(),
            facets,
            rows,
            empty_cells: Vec::new(),
            sd_convention: SD_CONVENTION.to_string(),
        })
    }

    pub fn to_markdown(&self) -> String {
        let header = self.header();
        let mut s = format!("### {}\n\n| {} |\n|{}\n", self.name, header.join(" | "), "---|".repeat(header.len()));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                r.key.join(" | "),
                fmt2(r.mean),
                fmt2(r.sd),
                r.n
            );
        }
        s
    }
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("# Results\n");
        for t in &self.accuracy {
            s.push('\n');
            s.push_str(&t.to_markdown());
        }
        s.push_str("\n### Arithmetic accuracy\n\n| subject | condition | mean | sd | n |\n|---|---|---|---|---|\n");
        for r in &self.arith {
            let _ = writeln!(s, "| {} | {} | {} | {} | {} |", r.subject, r.condition, fmt2(r.mean), fmt2(r.sd), r.n);
        }
        if let Some(p) = &self.error_profile {
            s.push_str("\n### Implausible items correct in Single and Noisy but wrong in Dual\n");
            for (title, rows) in [
                ("construction", &p.by_construction),
                ("arith", &p.by_arith),
                ("answer", &p.by_answer),
            ] {
                let _ = write!(s, "\n| {title} | flagged | total | proportion |\n|---|---|---|---|\n");
                for r in rows {
                    let _ = writeln!(s, "| {} | {} | {} | {} |", r.value, r.flagged, r.total, fmt2(r.proportion));
                }
            }
        }
        s.push_str("\n### Difference-in-differences (one-sided Wilcoxon signed-rank)\n\n| grouping | contrast | n | W | mode | p | sig |\n|---|---|---|---|---|---|---|\n");
        for r in &self.stats {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} |",
                r.grouping,
                r.contrast,
                r.n_effective,
                r.w.map(|w| w.to_string()).unwrap_or_else(|| "-".into()),
                match r.mode {
                    Some(crate::stats::TestMode::Exact) => "exact",
                    Some(crate::stats::TestMode::NormalApprox) => "normal",
                    None => "-",
                },
                r.p.map(format_p).unwrap_or_else(|| "-".into()),
                if r.stars.is_empty() { "n.s." } else { &r.stars }
            );
        }
        s.push_str("\n*p < 0.05. **p < 0.01. ***p < 0.001.\n");
        s
    }

    /// Writes the report under `dir`; returns the files written.
    pub fn emit(&self, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, ReportError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        match format {
            ReportFormat::Json => {
                let path = dir.join("report.json");
                std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
                written.push(path);
            }
            ReportFormat::Markdown => {
                let path = dir.join("report.md");
                std::fs::write(&path, self.to_markdown())?;
                written.push(path);
            }
            ReportFormat::Csv => {
                for t in &self.accuracy {
                    let path = dir.join(format!("accuracy_{}.csv", slug(&t.name)));
                    t.write_csv(std::fs::File::create(&path)?)?;
                    written.push(path);
                }
                let path = dir.join("arith_accuracy.csv");
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["subject", "condition", "mean", "sd", "n"])?;
                for r in &self.arith {
                    w.write_record([r.subject.clone(), r.condition.clone(), r.mean.to_string(), r.sd.to_string(), r.n.to_string()])?;
                }
                w.flush()?;
                written.push(path);
                let path = dir.join("stats.csv");
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["grouping", "contrast", "n", "n_effective", "w", "mode", "p", "significant", "stars", "flag"])?;
                for r in &self.stats {
                    w.write_record([
                        r.grouping.clone(),
                        r.contrast.to_string(),
                        r.n.to_string(),
                        r.n_effective.to_string(),
                        r.w.map(|x| x.to_string()).unwrap_or_default(),
                        r.mode.map(|m| format!("{m:?}")).unwrap_or_default(),
                        r.p.map(|x| x.to_string()).unwrap_or_default(),
                        r.significant.to_string(),
                        r.stars.clone(),
                        r.flag.clone().unwrap_or_default(),
                    ])?;
                }
                w.flush()?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

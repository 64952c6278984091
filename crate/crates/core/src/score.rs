//! Response parsing and per-trial scoring.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::arith::{answers_match, normalize_number, ArithCondition};
use crate::interleave::{AnswerKey, Identifier};
use crate::types::{Answer, SentenceRef, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParsedAnswer {
    Yes,
    No,
    Unparseable,
}

impl ParsedAnswer {
    pub fn answer(self) -> Option<Answer> {
        match self {
            ParsedAnswer::Yes => Some(Answer::Yes),
            ParsedAnswer::No => Some(Answer::No),
            ParsedAnswer::Unparseable => None,
        }
    }
}

impl From<Answer> for ParsedAnswer {
    fn from(a: Answer) -> Self {
        match a {
            Answer::Yes => ParsedAnswer::Yes,
            Answer::No => ParsedAnswer::No,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    Model,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArithResult {
    pub candidate: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub answer: ParsedAnswer,
    pub arith: BTreeMap<Identifier, ArithResult>,
}

/// One administered trial. Shared schema for model runs and human sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject_id: String,
    pub subject_kind: SubjectKind,
    pub task: Task,
    pub condition: Option<ArithCondition>,
    pub sentence_ref: SentenceRef,
    pub gold_answer: Answer,
    pub parsed_answer: ParsedAnswer,
    /// `None` iff the answer could not be parsed.
    pub comp_correct: Option<bool>,
    #[serde(default)]
    pub arith_results: BTreeMap<Identifier, ArithResult>,
    pub all_arith_correct: bool,
    pub raw_response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list_id: Option<u32>,
}

impl TrialRecord {
    pub fn arith_problem_count(&self) -> usize {
        self.arith_results.len()
    }

    pub fn arith_correct_count(&self) -> usize {
        self.arith_results.values().filter(|r| r.correct).count()
    }
}

fn answer_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\W*answer\W*[:\-]\W*(yes|no)\b").unwrap())
}

fn yes_no_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap())
}

fn assignment_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // grouped digits (1,234,567 or 1 234 567) or a plain run
    RE.get_or_init(|| Regex::new(r"\bx(\d+)\s*(?:=|:)\s*(\d{1,3}(?:[, ]\d{3})+\b|\d+)").unwrap())
}

fn to_answer(word: &str) -> ParsedAnswer {
    if word.eq_ignore_ascii_case("yes") {
        ParsedAnswer::Yes
    } else {
        ParsedAnswer::No
    }
}

/// Extracts the comprehension answer and the arithmetic candidates.
///
/// The answer comes from the last line shaped like `Answer: Yes`; if no
/// such line exists, from the last standalone yes/no anywhere in the text.
/// Each identifier's candidate is the number after the last `x<id> =`.
pub fn parse_response(raw: &str, answer_key: &AnswerKey) -> ParsedResponse {
    let from_answer_line = raw
        .lines()
        .rev()
        .filter(|l| !l.trim().is_empty())
        .find_map(|l| answer_line_re().captures(l))
        .map(|c| to_answer(&c[1]));
    let answer = from_answer_line
        .or_else(|| {
            yes_no_re()
                .find_iter(raw)
                .last()
                .map(|m| to_answer(m.as_str()))
        })
        .unwrap_or(ParsedAnswer::Unparseable);

    let mut last: BTreeMap<Identifier, &str> = BTreeMap::new();
    for c in assignment_re().captures_iter(raw) {
        if let (Ok(id), Some(v)) = (c[1].parse::<u64>(), c.get(2)) {
            last.insert(Identifier(id), v.as_str());
        }
    }
    let arith = answer_key
        .iter()
        .map(|(&id, gold)| {
            let candidate = last.get(&id).copied().unwrap_or_default().to_string();
            let candidate = normalize_number(&candidate).unwrap_or(candidate);
            let correct = answers_match(gold, &candidate);
            (id, ArithResult { candidate, correct })
        })
        .collect();

    ParsedResponse { answer, arith }
}

/// What is known about a trial before its response is scored.
#[derive(Debug, Clone)]
pub struct TrialMeta {
    pub subject_id: String,
    pub subject_kind: SubjectKind,
    pub task: Task,
    pub condition: Option<ArithCondition>,
    pub sentence_ref: SentenceRef,
    pub gold_answer: Answer,
    pub list_id: Option<u32>,
}

/// Fills correctness flags. Arithmetic is only judged in the dual task;
/// noisy-task subjects are told to ignore it, so nothing is owed there.
pub fn score_trial(meta: TrialMeta, parsed: ParsedResponse, raw_response: String) -> TrialRecord {
    let comp_correct = parsed.answer.answer().map(|a| a == meta.gold_answer);
    let arith_results = if meta.task == Task::Dual {
        parsed.arith
    } else {
        BTreeMap::new()
    };
    let all_arith_correct = arith_results.values().all(|r| r.correct);
    TrialRecord {
        subject_id: meta.subject_id,
        subject_kind: meta.subject_kind,
        task: meta.task,
        condition: meta.condition,
        sentence_ref: meta.sentence_ref,
        gold_answer: meta.gold_answer,
        parsed_answer: parsed.answer,
        comp_correct,
        arith_results,
        all_arith_correct,
        raw_response,
        list_id: meta.list_id,
    }
}

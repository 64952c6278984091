//! Weaves arithmetic tokens into a sentence, one token per word gap.
//!
//! Problems are streamed as `operand + operand [+ operand] = x<id>`. Each
//! of the `W - 1` gaps between words takes the next token of the current
//! problem; when a problem runs out a fresh one starts. Nothing follows the
//! final word, so a problem still open at that point is abandoned and its
//! identifier is never issued.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::arith::{gen_problem, ArithCondition, ArithProblem};
use crate::corpus::SentenceItem;
use crate::types::SentenceRef;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterleaveError {
    #[error("sentence {0} has no words")]
    EmptySentence(SentenceRef),
    #[error("identifier counter must start at 1 or above")]
    BadCounter,
}

/// Answer slot label `x<N>`. Orders numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identifier(pub u64);

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

impl FromStr for Identifier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('x')
            .filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|n| n.parse::<u64>().ok())
            .filter(|&n| n > 0)
            .map(Identifier)
            .ok_or_else(|| format!("`{s}` is not an identifier"))
    }
}

impl Serialize for Identifier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Identifier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Operand,
    Plus,
    Equals,
    Identifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimToken {
    pub kind: TokenKind,
    pub text: String,
}

impl StimToken {
    fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        StimToken {
            kind,
            text: text.into(),
        }
    }
}

pub type AnswerKey = BTreeMap<Identifier, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub tokens: Vec<StimToken>,
    pub answer_key: AnswerKey,
    pub sentence_ref: SentenceRef,
    /// `None` for the single task.
    pub condition: Option<ArithCondition>,
    pub truncated_tail: bool,
}

/// A problem's remaining tokens, identifier last.
enum Pending {
    Operand(String),
    Plus,
    Equals,
    Identifier(String),
}

fn problem_stream(problem: ArithProblem) -> Vec<Pending> {
    let mut out = Vec::with_capacity(problem.condition.tokens_per_problem());
    for (i, op) in problem.operands.into_iter().enumerate() {
        if i > 0 {
            out.push(Pending::Plus);
        }
        out.push(Pending::Operand(op));
    }
    out.push(Pending::Equals);
    out.push(Pending::Identifier(problem.gold_sum));
    out.reverse();
    out
}

/// Builds a stimulus drawing problems from `next_problem`. Returns the
/// stimulus and the identifier counter to use for the next one.
pub fn build_stimulus_with<F>(
    item: &SentenceItem,
    condition: Option<ArithCondition>,
    id_counter: u64,
    mut next_problem: F,
) -> Result<(Stimulus, u64), InterleaveError>
where
    F: FnMut(ArithCondition) -> ArithProblem,
{
    if item.words.is_empty() {
        return Err(InterleaveError::EmptySentence(item.sentence_ref()));
    }
    if id_counter == 0 {
        return Err(InterleaveError::BadCounter);
    }
    let mut tokens = Vec::with_capacity(item.words.len() * 2);
    let mut answer_key = AnswerKey::new();
    let mut next_id = id_counter;
    let mut pending: Vec<Pending> = Vec::new();

    let last = item.words.len() - 1;
    for (i, word) in item.words.iter().enumerate() {
        tokens.push(StimToken::new(TokenKind::Word, word.clone()));
        let Some(cond) = condition else { continue };
        if i == last {
            break;
        }
        if pending.is_empty() {
            pending = problem_stream(next_problem(cond));
        }
        let tok = match pending.pop().expect("non-empty stream") {
            Pending::Operand(op) => StimToken::new(TokenKind::Operand, op),
            Pending::Plus => StimToken::new(TokenKind::Plus, "+"),
            Pending::Equals => StimToken::new(TokenKind::Equals, "="),
            Pending::Identifier(sum) => {
                let id = Identifier(next_id);
                next_id += 1;
                answer_key.insert(id, sum);
                StimToken::new(TokenKind::Identifier, id.to_string())
            }
        };
        tokens.push(tok);
    }

    let stimulus = Stimulus {
        tokens,
        answer_key,
        sentence_ref: item.sentence_ref(),
        condition,
        truncated_tail: !pending.is_empty(),
    };
    Ok((stimulus, next_id))
}

/// Builds a stimulus with problems drawn from `rng`.
pub fn build_stimulus<R: Rng + ?Sized>(
    item: &SentenceItem,
    condition: Option<ArithCondition>,
    id_counter: u64,
    rng: &mut R,
) -> Result<(Stimulus, u64), InterleaveError> {
    build_stimulus_with(item, condition, id_counter, |c| gen_problem(c, rng))
}

pub fn render(stimulus: &Stimulus) -> String {
    let mut out = String::new();
    for (i, tok) in stimulus.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&tok.text);
    }
    out
}

pub fn strip_arith(stimulus: &Stimulus) -> Vec<String> {
    stimulus
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.text.clone())
        .collect()
}

/// Checks the token-layout invariants; returns a description of the first
/// violation found.
pub fn check_grammar(stimulus: &Stimulus) -> Result<(), String> {
    let tokens = &stimulus.tokens;
    if tokens.first().map(|t| t.kind) != Some(TokenKind::Word) {
        return Err("stimulus must open with a word".into());
    }
    if tokens.last().map(|t| t.kind) != Some(TokenKind::Word) {
        return Err("stimulus must end with a word".into());
    }
    for pair in tokens.windows(2) {
        if pair[0].kind != TokenKind::Word && pair[1].kind != TokenKind::Word {
            return Err(format!(
                "two arithmetic tokens adjacent: `{}` `{}`",
                pair[0].text, pair[1].text
            ));
        }
    }
    let arith: Vec<&StimToken> = tokens.iter().filter(|t| t.kind != TokenKind::Word).collect();
    let Some(cond) = stimulus.condition else {
        return if arith.is_empty() {
            Ok(())
        } else {
            Err("single-task stimulus carries arithmetic".into())
        };
    };

    // Expected cyclic pattern: Operand (Plus Operand)^(a-1) Equals Identifier
    let mut pattern = vec![TokenKind::Operand];
    for _ in 1..cond.addends() {
        pattern.push(TokenKind::Plus);
        pattern.push(TokenKind::Operand);
    }
    pattern.push(TokenKind::Equals);
    pattern.push(TokenKind::Identifier);

    let mut prev_id: Option<u64> = None;
    let mut ids_seen = 0usize;
    for (k, tok) in arith.iter().enumerate() {
        let want = pattern[k % pattern.len()];
        if tok.kind != want {
            return Err(format!("token {k} `{}` should be {want:?}", tok.text));
        }
        match tok.kind {
            TokenKind::Operand => {
                let d = cond.digits() as usize;
                let ok = tok.text.len() == d
                    && tok.text.bytes().all(|b| b.is_ascii_digit())
                    && !tok.text.starts_with('0');
                if !ok {
                    return Err(format!("operand `{}` is not {d} digits", tok.text));
                }
            }
            TokenKind::Identifier => {
                let id: Identifier = tok.text.parse()?;
                if prev_id.is_some_and(|p| id.0 <= p) {
                    return Err(format!("identifier {id} not increasing"));
                }
                if !stimulus.answer_key.contains_key(&id) {
                    return Err(format!("identifier {id} missing from answer key"));
                }
                prev_id = Some(id.0);
                ids_seen += 1;
            }
            _ => {}
        }
    }
    if ids_seen != stimulus.answer_key.len() {
        return Err("answer key lists identifiers absent from tokens".into());
    }
    let open = arith.len() % pattern.len() != 0;
    if open != stimulus.truncated_tail {
        return Err("truncated_tail flag disagrees with tokens".into());
    }
    Ok(())
}

/// Persisted form of a stimulus, one per JSONL line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusRecord {
    pub sentence_ref: SentenceRef,
    pub condition: Option<ArithCondition>,
    pub rendered: String,
    pub tokens: Vec<StimToken>,
    pub answer_key: AnswerKey,
    pub truncated_tail: bool,
}

impl From<&Stimulus> for StimulusRecord {
    fn from(s: &Stimulus) -> Self {
        StimulusRecord {
            sentence_ref: s.sentence_ref,
            condition: s.condition,
            rendered: render(s),
            tokens: s.tokens.clone(),
            answer_key: s.answer_key.clone(),
            truncated_tail: s.truncated_tail,
        }
    }
}

impl From<StimulusRecord> for Stimulus {
    fn from(r: StimulusRecord) -> Self {
        Stimulus {
            tokens: r.tokens,
            answer_key: r.answer_key,
            sentence_ref: r.sentence_ref,
            condition: r.condition,
            truncated_tail: r.truncated_tail,
        }
    }
}

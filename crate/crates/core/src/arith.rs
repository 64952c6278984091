//! Addition problems embedded in stimuli.
//!
//! Operands and sums are kept as decimal digit strings. 30-digit operands
//! exceed every native integer width, so the sum is computed column by
//! column and nothing here ever touches floating point.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const DIGIT_LENGTHS: [u8; 5] = [1, 3, 5, 10, 30];
pub const ADDEND_COUNTS: [u8; 2] = [2, 3];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArithError {
    #[error("unsupported arithmetic condition {digits} digits x {addends} addends")]
    InvalidCondition { digits: u8, addends: u8 },
    #[error("cannot parse arithmetic condition `{0}`")]
    BadLabel(String),
    #[error("expected {expected} operands, got {got}")]
    OperandCount { expected: usize, got: usize },
    #[error("operand `{operand}` is not a {digits}-digit number without leading zero")]
    BadOperand { operand: String, digits: u8 },
}

/// Digit length and addend count of a problem type, written `1dig.2add.`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArithCondition {
    digits: u8,
    addends: u8,
}

impl ArithCondition {
    pub fn new(digits: u8, addends: u8) -> Result<Self, ArithError> {
        if DIGIT_LENGTHS.contains(&digits) && ADDEND_COUNTS.contains(&addends) {
            Ok(ArithCondition { digits, addends })
        } else {
            Err(ArithError::InvalidCondition { digits, addends })
        }
    }

    /// The human experiment and admission check both use this one.
    pub const ONE_DIGIT_TWO_ADDENDS: ArithCondition = ArithCondition {
        digits: 1,
        addends: 2,
    };

    /// All ten conditions, ordered by digit length then addends.
    pub fn all() -> Vec<ArithCondition> {
        DIGIT_LENGTHS
            .iter()
            .flat_map(|&d| {
                ADDEND_COUNTS.iter().map(move |&a| ArithCondition {
                    digits: d,
                    addends: a,
                })
            })
            .collect()
    }

    pub fn digits(self) -> u8 {
        self.digits
    }

    pub fn addends(self) -> u8 {
        self.addends
    }

    /// Tokens one problem occupies: operands, plus signs, `=` and identifier.
    pub fn tokens_per_problem(self) -> usize {
        2 * self.addends as usize + 1
    }
}

impl fmt::Display for ArithCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}dig.{}add.", self.digits, self.addends)
    }
}

impl FromStr for ArithCondition {
    type Err = ArithError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ArithError::BadLabel(s.to_string());
        let t = s.trim().trim_end_matches('.');
        let (d, rest) = t.split_once("dig.").ok_or_else(bad)?;
        let a = rest.strip_suffix("add").ok_or_else(bad)?;
        let digits = d.parse::<u8>().map_err(|_| bad())?;
        let addends = a.parse::<u8>().map_err(|_| bad())?;
        ArithCondition::new(digits, addends)
    }
}

impl Serialize for ArithCondition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArithCondition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArithProblem {
    pub operands: Vec<String>,
    pub condition: ArithCondition,
    pub gold_sum: String,
}

impl ArithProblem {
    /// Builds a problem from given operands, checking digit lengths.
    pub fn from_operands<S: AsRef<str>>(
        condition: ArithCondition,
        operands: &[S],
    ) -> Result<Self, ArithError> {
        if operands.len() != condition.addends as usize {
            return Err(ArithError::OperandCount {
                expected: condition.addends as usize,
                got: operands.len(),
            });
        }
        let operands: Vec<String> = operands.iter().map(|s| s.as_ref().to_string()).collect();
        for op in &operands {
            if !is_operand(op, condition.digits) {
                return Err(ArithError::BadOperand {
                    operand: op.clone(),
                    digits: condition.digits,
                });
            }
        }
        let gold_sum = sum_decimal(&operands);
        Ok(ArithProblem {
            operands,
            condition,
            gold_sum,
        })
    }
}

fn is_operand(s: &str, digits: u8) -> bool {
    s.len() == digits as usize
        && s.bytes().all(|b| b.is_ascii_digit())
        && !s.starts_with('0')
}

/// Draws a problem with operands uniform over the d-digit range
/// `[10^(d-1), 10^d - 1]`.
pub fn gen_problem<R: Rng + ?Sized>(condition: ArithCondition, rng: &mut R) -> ArithProblem {
    let operands: Vec<String> = (0..condition.addends)
        .map(|_| {
            let mut s = String::with_capacity(condition.digits as usize);
            s.push(char::from(b'0' + rng.random_range(1..=9u8)));
            for _ in 1..condition.digits {
                s.push(char::from(b'0' + rng.random_range(0..=9u8)));
            }
            s
        })
        .collect();
    let gold_sum = sum_decimal(&operands);
    ArithProblem {
        operands,
        condition,
        gold_sum,
    }
}

/// Schoolbook addition of non-negative decimal strings.
pub fn sum_decimal<S: AsRef<str>>(terms: &[S]) -> String {
    let width = terms.iter().map(|t| t.as_ref().len()).max().unwrap_or(0);
    let mut out: Vec<u8> = Vec::with_capacity(width + 2);
    let mut carry = 0u32;
    for col in 0..width {
        let mut column = carry;
        for t in terms {
            let bytes = t.as_ref().as_bytes();
            if col < bytes.len() {
                column += u32::from(bytes[bytes.len() - 1 - col] - b'0');
            }
        }
        out.push(b'0' + (column % 10) as u8);
        carry = column / 10;
    }
    while carry > 0 {
        out.push(b'0' + (carry % 10) as u8);
        carry /= 10;
    }
    while out.len() > 1 && out.last() == Some(&b'0') {
        out.pop();
    }
    if out.is_empty() {
        out.push(b'0');
    }
    out.reverse();
    String::from_utf8(out).expect("ascii digits")
}

/// Canonical digit string for a candidate answer, or `None` if it is not
/// a plain non-negative integer once whitespace, comma grouping and
/// leading zeros are removed.
pub fn normalize_number(candidate: &str) -> Option<String> {
    let digits: String = candidate
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .collect();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let trimmed = digits.trim_start_matches('0');
    Some(if trimmed.is_empty() {
        "0".to_string()
    } else {
        trimmed.to_string()
    })
}

/// Compares a candidate string against a gold sum.
pub fn answers_match(gold: &str, candidate: &str) -> bool {
    match (normalize_number(gold), normalize_number(candidate)) {
        (Some(g), Some(c)) => g == c,
        _ => false,
    }
}

pub fn check_answer(problem: &ArithProblem, candidate: &str) -> bool {
    answers_match(&problem.gold_sum, candidate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cond(d: u8, a: u8) -> ArithCondition {
        ArithCondition::new(d, a).unwrap()
    }

    #[test]
    fn exactly_ten_conditions() {
        let all = ArithCondition::all();
        assert_eq!(all.len(), 10);
        assert!(ArithCondition::new(2, 2).is_err());
        assert!(ArithCondition::new(1, 4).is_err());
    }

    #[test]
    fn condition_labels_round_trip() {
        for c in ArithCondition::all() {
            assert_eq!(c.to_string().parse::<ArithCondition>().unwrap(), c);
        }
        assert_eq!("30dig.3add".parse::<ArithCondition>().unwrap(), cond(30, 3));
        assert!("3dig".parse::<ArithCondition>().is_err());
    }

    #[test]
    fn sums_from_stimulus_operands() {
        let p = ArithProblem::from_operands(cond(1, 2), &["5", "6"]).unwrap();
        assert_eq!(p.gold_sum, "11");
        let p = ArithProblem::from_operands(cond(3, 3), &["212", "260", "341"]).unwrap();
        assert_eq!(p.gold_sum, "813");
    }

    #[test]
    fn rejects_malformed_operands() {
        assert!(ArithProblem::from_operands(cond(3, 2), &["012", "100"]).is_err());
        assert!(ArithProblem::from_operands(cond(3, 2), &["1000", "100"]).is_err());
        assert!(ArithProblem::from_operands(cond(3, 2), &["100"]).is_err());
        assert!(ArithProblem::from_operands(cond(1, 2), &["0", "1"]).is_err());
    }

    #[test]
    fn same_seed_same_problem() {
        for c in ArithCondition::all() {
            let a = gen_problem(c, &mut ChaCha8Rng::seed_from_u64(9));
            let b = gen_problem(c, &mut ChaCha8Rng::seed_from_u64(9));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn answer_normalization() {
        assert!(answers_match("11", " 11 "));
        assert!(answers_match("11", "011"));
        assert!(answers_match("1234567", "1,234,567"));
        assert!(answers_match("1234567", "1 234 567"));
        assert!(!answers_match("813", "814"));
        assert!(!answers_match("11", ""));
        assert!(!answers_match("11", "eleven"));
        assert!(!answers_match("11", "-11"));
        assert!(answers_match("0", "000"));
    }

    #[test]
    fn carries_propagate() {
        assert_eq!(sum_decimal(&["999", "1"]), "1000");
        assert_eq!(sum_decimal(&["9", "9", "9"]), "27");
        assert_eq!(sum_decimal::<&str>(&[]), "0");
    }
}

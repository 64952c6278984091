//! Deterministic in-process stand-in for a language model.
//!
//! Each response depends only on the policy and the prompt text, so runs
//! are reproducible regardless of batch order or parallelism.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use dualtask_core::arith::{sum_decimal, ArithCondition};
use dualtask_core::{Answer, Plausibility, RenderedPrompt, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::ClientError;

/// A task × plausibility cell, written `Dual/Implausible`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub task: Task,
    pub plausibility: Plausibility,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.task, self.plausibility)
    }
}

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (t, p) = s
            .split_once('/')
            .ok_or_else(|| format!("expected `Task/Plausibility`, got `{s}`"))?;
        Ok(Cell {
            task: t.trim().parse().map_err(|e| format!("{e}"))?,
            plausibility: p.trim().parse().map_err(|e| format!("{e}"))?,
        })
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockPolicy {
    /// Probability that any one sum is answered wrong.
    pub arith_error_rate: f64,
    /// Per-condition overrides of `arith_error_rate`.
    pub arith_error_by_condition: BTreeMap<ArithCondition, f64>,
    /// Comprehension accuracy for cells not listed in `comp_accuracy`.
    pub default_accuracy: f64,
    pub comp_accuracy: BTreeMap<Cell, f64>,
    /// How errors split between the answers: 0.5 spreads them evenly, 1.0
    /// puts them all on gold-No items (answering Yes).
    pub yes_bias: f64,
    pub seed: u64,
}

impl Default for MockPolicy {
    fn default() -> Self {
        MockPolicy {
            arith_error_rate: 0.0,
            arith_error_by_condition: BTreeMap::new(),
            default_accuracy: 0.9,
            comp_accuracy: BTreeMap::new(),
            yes_bias: 0.5,
            seed: 0,
        }
    }
}

impl MockPolicy {
    /// Every cell at `accuracy`, no arithmetic errors.
    pub fn uniform(accuracy: f64, seed: u64) -> Self {
        MockPolicy {
            default_accuracy: accuracy,
            seed,
            ..MockPolicy::default()
        }
    }

    pub fn with_cell(mut self, task: Task, plausibility: Plausibility, accuracy: f64) -> Self {
        self.comp_accuracy.insert(Cell { task, plausibility }, accuracy);
        self
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        let probs = [
            ("arith_error_rate".to_string(), self.arith_error_rate),
            ("default_accuracy".to_string(), self.default_accuracy),
            ("yes_bias".to_string(), self.yes_bias),
        ]
        .into_iter()
        .chain(self.comp_accuracy.iter().map(|(c, &p)| (format!("comp_accuracy {c}"), p)))
        .chain(self.arith_error_by_condition.iter().map(|(c, &p)| (format!("arith_error {c}"), p)));
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ClientError::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }

    pub fn accuracy(&self, task: Task, plausibility: Plausibility) -> f64 {
        self.comp_accuracy
            .get(&Cell { task, plausibility })
            .copied()
            .unwrap_or(self.default_accuracy)
    }

    pub fn arith_error(&self, condition: Option<ArithCondition>) -> f64 {
        condition
            .and_then(|c| self.arith_error_by_condition.get(&c).copied())
            .unwrap_or(self.arith_error_rate)
    }

    fn error_probability(&self, acc: f64, gold: Answer) -> f64 {
        let share = match gold {
            Answer::No => self.yes_bias,
            Answer::Yes => 1.0 - self.yes_bias,
        };
        (2.0 * (1.0 - acc) * share).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    policy: MockPolicy,
}

impl MockBackend {
    pub fn new(policy: MockPolicy) -> Result<Self, ClientError> {
        policy.validate()?;
        Ok(MockBackend { policy })
    }

    pub fn policy(&self) -> &MockPolicy {
        &self.policy
    }

    fn rng_for(&self, prompt: &RenderedPrompt) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.policy.seed.to_le_bytes());
        h.update(prompt.system_text.as_bytes());
        h.update([0]);
        h.update(prompt.user_text.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    /// Answers in the format the templates ask for: one `x<id> = <sum>`
    /// line per identifier in the dual task, then `Answer: Yes|No`.
    pub fn respond(&self, prompt: &RenderedPrompt) -> Result<String, ClientError> {
        let gold = prompt
            .gold_answer
            .ok_or_else(|| ClientError::InvalidConfig("mock backend needs prompts with gold answers".into()))?;
        let mut rng = self.rng_for(prompt);
        let acc = self.policy.accuracy(prompt.task, prompt.sentence_ref.plausibility);
        let wrong = rng.random::<f64>() < self.policy.error_probability(acc, gold);
        let answer = if wrong { gold.flip() } else { gold };

        let mut out = String::new();
        if prompt.task == Task::Dual {
            let rate = self.policy.arith_error(prompt.condition);
            for (id, sum) in &prompt.answer_key {
                let value = if rng.random::<f64>() < rate {
                    sum_decimal(&[sum.as_str(), "1"])
                } else {
                    sum.clone()
                };
                out.push_str(&format!("{id} = {value}\n"));
            }
        }
        out.push_str(&format!("Answer: {answer}"));
        Ok(out)
    }
}

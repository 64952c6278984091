//! Task prompts: instructions and four worked examples go in the system
//! message, the stimulus and question go in the user message.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::ArithCondition;
use crate::corpus::{split_words, SentenceItem};
use crate::interleave::{build_stimulus, render, AnswerKey, Stimulus};
use crate::types::{Answer, Construction, Plausibility, SentenceRef, Task};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{task} template cannot present a stimulus with condition {condition:?}")]
    TaskConditionMismatch {
        task: Task,
        condition: Option<ArithCondition>,
    },
    #[error("{task} template few-shot set must cover plausible/implausible x yes/no once each")]
    FewShotCoverage { task: Task },
    #[error("template stored under `{slot}` declares task {declared}")]
    WrongSlot { slot: Task, declared: Task },
    #[error("few-shot example `{sentence}` overlaps test item {item}")]
    Leakage { sentence: String, item: SentenceRef },
    #[error("cannot read templates: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse templates: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    /// Corpus item the example was taken from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<u32>,
    pub plausibility: Plausibility,
    /// Plain sentence, used for the leakage check.
    pub sentence: String,
    /// What the model is shown; carries arithmetic for noisy and dual.
    pub stimulus: String,
    pub question: String,
    /// Worked `x<id> = <sum>` lines (dual only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arithmetic: Vec<String>,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task: Task,
    pub instructions: String,
    pub answer_format: String,
    pub fewshot: Vec<FewShotExample>,
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<(), PromptError> {
        let cells: BTreeSet<(Plausibility, Answer)> =
            self.fewshot.iter().map(|e| (e.plausibility, e.answer)).collect();
        if self.fewshot.len() != 4 || cells.len() != 4 {
            return Err(PromptError::FewShotCoverage { task: self.task });
        }
        Ok(())
    }

    pub fn system_text(&self) -> String {
        let mut s = String::new();
        s.push_str(self.instructions.trim_end());
        s.push_str("\n\n");
        s.push_str(self.answer_format.trim_end());
        s.push_str("\n\nExamples:\n");
        for ex in &self.fewshot {
            s.push_str("\nSentence: ");
            s.push_str(&ex.stimulus);
            s.push_str("\nQuestion: ");
            s.push_str(&ex.question);
            s.push('\n');
            for line in &ex.arithmetic {
                s.push_str(line);
                s.push('\n');
            }
            s.push_str("Answer: ");
            s.push_str(ex.answer.as_str());
            s.push('\n');
        }
        s
    }
}

/// One template per task, stored as TOML with `[single]`, `[noisy]` and
/// `[dual]` tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub single: PromptTemplate,
    pub noisy: PromptTemplate,
    pub dual: PromptTemplate,
}

impl TemplateSet {
    pub fn get(&self, task: Task) -> &PromptTemplate {
        match task {
            Task::Single => &self.single,
            Task::Noisy => &self.noisy,
            Task::Dual => &self.dual,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        for task in Task::ALL {
            let t = self.get(task);
            if t.task != task {
                return Err(PromptError::WrongSlot {
                    slot: task,
                    declared: t.task,
                });
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, PromptError> {
        let set: TemplateSet = toml::from_str(text).map_err(|e| PromptError::Parse(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("templates serialize")
    }

    /// Rejects few-shot examples drawn from, or identical to, a test item.
    pub fn check_leakage<'a>(
        &self,
        items: impl IntoIterator<Item = &'a SentenceItem>,
    ) -> Result<(), PromptError> {
        let examples: Vec<&FewShotExample> = Task::ALL
            .iter()
            .flat_map(|&t| self.get(t).fewshot.iter())
            .collect();
        for item in items {
            let sentence = item.sentence();
            for ex in &examples {
                if ex.item_id == Some(item.item_id) || ex.sentence == sentence {
                    return Err(PromptError::Leakage {
                        sentence: ex.sentence.clone(),
                        item: item.sentence_ref(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub task: Task,
    pub sentence_ref: SentenceRef,
    pub condition: Option<ArithCondition>,
    pub system_text: String,
    pub user_text: String,
    /// Not sent to the backend; carried for scoring.
    pub answer_key: AnswerKey,
    /// Not sent to the backend; lets the mock backend emulate accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<Answer>,
}

pub fn build_prompt(
    template: &PromptTemplate,
    stimulus: &Stimulus,
    question: &str,
) -> Result<RenderedPrompt, PromptError> {
    if template.task.has_arithmetic() != stimulus.condition.is_some() {
        return Err(PromptError::TaskConditionMismatch {
            task: template.task,
            condition: stimulus.condition,
        });
    }
    Ok(RenderedPrompt {
        task: template.task,
        sentence_ref: stimulus.sentence_ref,
        condition: stimulus.condition,
        system_text: template.system_text(),
        user_text: format!("{}\n{}", render(stimulus), question),
        answer_key: stimulus.answer_key.clone(),
        gold_answer: None,
    })
}

const SINGLE_INSTRUCTIONS: &str = "You will read a sentence and then answer a question about it. \
Answer the question according to what the sentence says.";

const NOISY_INSTRUCTIONS: &str = "You will read a sentence and then answer a question about it. \
Arithmetic problems have been inserted between the words of the sentence. \
Ignore the arithmetic problems; do not solve them. \
Answer the question according to what the sentence says.";

const DUAL_INSTRUCTIONS: &str = "You will read a sentence and then answer a question about it. \
Arithmetic problems have been inserted between the words of the sentence, one token at a time. \
Each problem ends with \"=\" followed by an identifier such as x1. \
Solve every problem that is followed by an identifier, \
then answer the question according to what the sentence says.";

const COMPREHENSION_FORMAT: &str = "Reply with exactly one line: \"Answer: Yes\" or \"Answer: No\".";

const DUAL_FORMAT: &str = "Reply with one line per identifier, in order, in the form \
\"x<id> = <number>\". Then write a final line: \"Answer: Yes\" or \"Answer: No\".";

const EXAMPLE_SENTENCES: [(&str, &str, Plausibility, Answer); 4] = [
    (
        "The gardener watered the roses and the baker sold the bread after the mayor opened the market.",
        "Did the gardener water the roses?",
        Plausibility::Plausible,
        Answer::Yes,
    ),
    (
        "The nurse helped the patient and the pilot greeted the crew after the clerk filed the report.",
        "Did the patient help the nurse?",
        Plausibility::Plausible,
        Answer::No,
    ),
    (
        "The letter wrote the poet and the driver parked the van after the singer thanked the fans.",
        "Did the letter write the poet?",
        Plausibility::Implausible,
        Answer::Yes,
    ),
    (
        "The bone chased the dog and the waiter served the soup after the coach praised the team.",
        "Did the dog chase the bone?",
        Plausibility::Implausible,
        Answer::No,
    ),
];

fn default_examples(task: Task) -> Vec<FewShotExample> {
    // Fixed seed so the shipped defaults never change between builds.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut next_id = 1;
    EXAMPLE_SENTENCES
        .iter()
        .map(|&(sentence, question, plausibility, answer)| {
            let item = SentenceItem {
                item_id: 1,
                construction: Construction::Transitive,
                plausibility,
                words: split_words(sentence).expect("well-formed example"),
                question: question.into(),
                gold_answer: answer,
            };
            let condition = task
                .has_arithmetic()
                .then_some(ArithCondition::ONE_DIGIT_TWO_ADDENDS);
            let (stim, next) =
                build_stimulus(&item, condition, next_id, &mut rng).expect("non-empty example");
            next_id = next;
            let arithmetic = if task == Task::Dual {
                stim.answer_key
                    .iter()
                    .map(|(id, sum)| format!("{id} = {sum}"))
                    .collect()
            } else {
                Vec::new()
            };
            FewShotExample {
                item_id: None,
                plausibility,
                sentence: sentence.into(),
                stimulus: render(&stim),
                question: question.into(),
                arithmetic,
                answer,
            }
        })
        .collect()
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            single: PromptTemplate {
                task: Task::Single,
                instructions: SINGLE_INSTRUCTIONS.into(),
                answer_format: COMPREHENSION_FORMAT.into(),
                fewshot: default_examples(Task::Single),
            },
            noisy: PromptTemplate {
                task: Task::Noisy,
                instructions: NOISY_INSTRUCTIONS.into(),
                answer_format: COMPREHENSION_FORMAT.into(),
                fewshot: default_examples(Task::Noisy),
            },
            dual: PromptTemplate {
                task: Task::Dual,
                instructions: DUAL_INSTRUCTIONS.into(),
                answer_format: DUAL_FORMAT.into(),
                fewshot: default_examples(Task::Dual),
            },
        }
    }
}

//! Latin-square presentation lists for the browser experiment.
//!
//! A list definition names, for every list, which corpus sentence is shown
//! under which task. Materializing it builds the stimuli (1dig.2add. only)
//! and produces the JSON the runner fetches.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::ArithCondition;
use crate::corpus::Corpus;
use crate::interleave::{build_stimulus, InterleaveError, StimulusRecord};
use crate::types::{Answer, Construction, ItemKey, Plausibility, SentenceRef, Task};

pub const DEFAULT_LIST_COUNT: u32 = 12;
pub const PRACTICE_TRIALS: usize = 4;

#[derive(Debug, Error)]
pub enum ListError {
    #[error("list {list_id} shows item {item} more than once")]
    RepeatedItem { list_id: u32, item: ItemKey },
    #[error("sentence {0} is not in the corpus")]
    UnknownSentence(SentenceRef),
    #[error("expected {expected} practice trials, found {found}")]
    PracticeCount { expected: usize, found: usize },
    #[error("list ids must be unique and start at 1")]
    BadListIds,
    #[error("no items to distribute")]
    NoItems,
    #[error(transparent)]
    Interleave(#[from] InterleaveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListEntry {
    pub item_id: u32,
    pub construction: Construction,
    pub plausibility: Plausibility,
    pub task: Task,
}

impl ListEntry {
    fn sentence_ref(&self) -> SentenceRef {
        SentenceRef {
            item_id: self.item_id,
            construction: self.construction,
            plausibility: self.plausibility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListSpec {
    pub list_id: u32,
    pub trials: Vec<ListEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListDefinition {
    pub lists: Vec<ListSpec>,
    pub practice: Vec<ListEntry>,
}

/// Task × plausibility cells rotated across lists.
pub fn default_cells() -> Vec<(Task, Plausibility)> {
    Task::ALL
        .iter()
        .flat_map(|&t| Plausibility::ALL.iter().map(move |&p| (t, p)))
        .collect()
}

/// Rotates `cells` over `items`: in list `l`, item `i` gets cell
/// `(i + l) mod cells.len()`.
pub fn latin_square(
    items: &[(u32, Construction)],
    cells: &[(Task, Plausibility)],
    n_lists: u32,
    practice: Vec<ListEntry>,
) -> Result<ListDefinition, ListError> {
    if items.is_empty() || cells.is_empty() {
        return Err(ListError::NoItems);
    }
    let lists = (0..n_lists)
        .map(|l| ListSpec {
            list_id: l + 1,
            trials: items
                .iter()
                .enumerate()
                .map(|(i, &(item_id, construction))| {
                    let (task, plausibility) = cells[(i + l as usize) % cells.len()];
                    ListEntry {
                        item_id,
                        construction,
                        plausibility,
                        task,
                    }
                })
                .collect(),
        })
        .collect();
    Ok(ListDefinition { lists, practice })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListTrial {
    pub sentence_ref: SentenceRef,
    pub task: Task,
    pub condition: Option<ArithCondition>,
    pub question: String,
    pub gold_answer: Answer,
    pub stimulus: StimulusRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentList {
    pub list_id: u32,
    pub practice: Vec<ListTrial>,
    pub trials: Vec<ListTrial>,
}

impl ListDefinition {
    pub fn validate(&self) -> Result<(), ListError> {
        let ids: BTreeSet<u32> = self.lists.iter().map(|l| l.list_id).collect();
        let expected: BTreeSet<u32> = (1..=self.lists.len() as u32).collect();
        if ids != expected {
            return Err(ListError::BadListIds);
        }
        if self.practice.len() != PRACTICE_TRIALS {
            return Err(ListError::PracticeCount {
                expected: PRACTICE_TRIALS,
                found: self.practice.len(),
            });
        }
        for l in &self.lists {
            let mut seen = BTreeSet::new();
            for e in &l.trials {
                let key = e.sentence_ref().item_key();
                if !seen.insert(key) {
                    return Err(ListError::RepeatedItem {
                        list_id: l.list_id,
                        item: key,
                    });
                }
            }
        }
        Ok(())
    }

    /// Builds stimuli for every list. Identifiers restart at `id_start` in
    /// each list so participants see `x1, x2, ...` in order.
    pub fn materialize(&self, corpus: &Corpus, seed: u64, id_start: u64) -> Result<Vec<ExperimentList>, ListError> {
        self.validate()?;
        let build = |entries: &[ListEntry], rng: &mut ChaCha8Rng, next: &mut u64| {
            entries
                .iter()
                .map(|e| {
                    let item = corpus
                        .get(&e.sentence_ref())
                        .ok_or(ListError::UnknownSentence(e.sentence_ref()))?;
                    let condition = e
                        .task
                        .has_arithmetic()
                        .then_some(ArithCondition::ONE_DIGIT_TWO_ADDENDS);
                    let (stim, n) = build_stimulus(item, condition, *next, rng)?;
                    *next = n;
                    Ok(ListTrial {
                        sentence_ref: e.sentence_ref(),
                        task: e.task,
                        condition,
                        question: item.question.clone(),
                        gold_answer: item.gold_answer,
                        stimulus: StimulusRecord::from(&stim),
                    })
                })
                .collect::<Result<Vec<_>, ListError>>()
        };
        self.lists
            .iter()
            .map(|l| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(l.list_id).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut next = id_start;
                let practice = build(&self.practice, &mut rng, &mut next)?;
                let mut next = id_start;
                let trials = build(&l.trials, &mut rng, &mut next)?;
                Ok(ExperimentList {
                    list_id: l.list_id,
                    practice,
                    trials,
                })
            })
            .collect()
    }
}

/// Round-robin list assignment for the `counter`-th participant (from 0).
pub fn assign_list(counter: u64, n_lists: u32) -> u32 {
    (counter % u64::from(n_lists.max(1))) as u32 + 1
}

#![allow(dead_code)]

use std::collections::BTreeMap;

use dualtask_core::arith::ArithCondition;
use dualtask_core::interleave::Identifier;
use dualtask_core::score::{ArithResult, ParsedAnswer, SubjectKind};
use dualtask_core::{Answer, Construction, Plausibility, SentenceRef, Task, TrialRecord};

/// A scored trial with the given outcome. `arith` is `(problems, correct)`.
pub fn trial(
    subject: &str,
    task: Task,
    item_id: u32,
    construction: Construction,
    plausibility: Plausibility,
    comp: Option<bool>,
    arith: (usize, usize),
) -> TrialRecord {
    let gold = Answer::Yes;
    let parsed_answer = match comp {
        Some(true) => ParsedAnswer::Yes,
        Some(false) => ParsedAnswer::No,
        None => ParsedAnswer::Unparseable,
    };
    let condition = task
        .has_arithmetic()
        .then_some(ArithCondition::ONE_DIGIT_TWO_ADDENDS);
    let mut arith_results = BTreeMap::new();
    if task == Task::Dual {
        for i in 0..arith.0 {
            arith_results.insert(
                Identifier(i as u64 + 1),
                ArithResult {
                    candidate: "0".into(),
                    correct: i < arith.1,
                },
            );
        }
    }
    let all_arith_correct = arith_results.values().all(|r| r.correct);
    TrialRecord {
        subject_id: subject.into(),
        subject_kind: SubjectKind::Model,
        task,
        condition,
        sentence_ref: SentenceRef {
            item_id,
            construction,
            plausibility,
        },
        gold_answer: gold,
        parsed_answer,
        comp_correct: comp,
        arith_results,
        all_arith_correct,
        raw_response: String::new(),
        list_id: None,
    }
}

pub fn with_condition(mut t: TrialRecord, c: ArithCondition) -> TrialRecord {
    t.condition = Some(c);
    t
}

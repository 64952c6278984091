//! Assembles the trials of one model run and scores its responses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::ArithCondition;
use crate::corpus::Corpus;
use crate::interleave::{build_stimulus, InterleaveError, Stimulus};
use crate::prompt::{build_prompt, PromptError, RenderedPrompt, TemplateSet};
use crate::score::{parse_response, score_trial, SubjectKind, TrialMeta, TrialRecord};
use crate::types::Task;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Interleave(#[from] InterleaveError),
    #[error("run needs at least one task")]
    NoTasks,
    #[error("noisy and dual tasks need at least one arithmetic condition")]
    NoConditions,
    #[error("prompt for {0} carries no gold answer")]
    MissingGold(crate::types::SentenceRef),
    #[error("{responses} responses for {prompts} prompts")]
    LengthMismatch { prompts: usize, responses: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// First identifier issued in the run.
    pub id_start: u64,
    pub tasks: Vec<Task>,
    pub conditions: Vec<ArithCondition>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            id_start: 1,
            tasks: Task::ALL.to_vec(),
            conditions: ArithCondition::all(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunPlan {
    pub stimuli: Vec<Stimulus>,
    pub prompts: Vec<RenderedPrompt>,
    /// Identifier the next stimulus would receive.
    pub next_id: u64,
}

/// Builds every prompt of a run. Per item: one single-task trial, then for
/// each condition one stimulus shared by the noisy and dual trials.
/// Identifiers increase across the whole run in this order.
pub fn plan_run(corpus: &Corpus, templates: &TemplateSet, cfg: &RunConfig) -> Result<RunPlan, RunError> {
    if cfg.tasks.is_empty() {
        return Err(RunError::NoTasks);
    }
    let wants_arith = cfg.tasks.iter().any(|t| t.has_arithmetic());
    if wants_arith && cfg.conditions.is_empty() {
        return Err(RunError::NoConditions);
    }
    templates.validate()?;
    templates.check_leakage(corpus.items())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_id = cfg.id_start;
    let mut stimuli = Vec::new();
    let mut prompts = Vec::new();
    let push = |prompts: &mut Vec<RenderedPrompt>, task: Task, stim: &Stimulus, item: &crate::corpus::SentenceItem| -> Result<(), RunError> {
        let mut p = build_prompt(templates.get(task), stim, &item.question)?;
        p.gold_answer = Some(item.gold_answer);
        prompts.push(p);
        Ok(())
    };

    for item in corpus.items() {
        if cfg.tasks.contains(&Task::Single) {
            let (stim, next) = build_stimulus(item, None, next_id, &mut rng)?;
            next_id = next;
            push(&mut prompts, Task::Single, &stim, item)?;
            stimuli.push(stim);
        }
        if !wants_arith {
            continue;
        }
        for &cond in &cfg.conditions {
            let (stim, next) = build_stimulus(item, Some(cond), next_id, &mut rng)?;
            next_id = next;
            for task in [Task::Noisy, Task::Dual] {
                if cfg.tasks.contains(&task) {
                    push(&mut prompts, task, &stim, item)?;
                }
            }
            stimuli.push(stim);
        }
    }
    Ok(RunPlan {
        stimuli,
        prompts,
        next_id,
    })
}

/// Scores responses against their prompts. A failed request is scored as
/// an empty response, which parses as unparseable.
pub fn score_run<E>(
    subject_id: &str,
    prompts: &[RenderedPrompt],
    responses: &[Result<String, E>],
) -> Result<Vec<TrialRecord>, RunError> {
    if prompts.len() != responses.len() {
        return Err(RunError::LengthMismatch {
            prompts: prompts.len(),
            responses: responses.len(),
        });
    }
    prompts
        .iter()
        .zip(responses)
        .map(|(p, r)| {
            let gold_answer = p.gold_answer.ok_or(RunError::MissingGold(p.sentence_ref))?;
            let raw = r.as_ref().map(String::as_str).unwrap_or("");
            let meta = TrialMeta {
                subject_id: subject_id.to_string(),
                subject_kind: SubjectKind::Model,
                task: p.task,
                condition: p.condition,
                sentence_ref: p.sentence_ref,
                gold_answer,
                list_id: None,
            };
            Ok(score_trial(meta, parse_response(raw, &p.answer_key), raw.to_string()))
        })
        .collect()
}

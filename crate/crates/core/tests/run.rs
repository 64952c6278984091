use dualtask_core::arith::ArithCondition;
use dualtask_core::interleave::{check_grammar, render};
use dualtask_core::run::{plan_run, score_run, RunConfig, RunError};
use dualtask_core::score::ParsedAnswer;
use dualtask_core::synth::synthetic_corpus;
use dualtask_core::{Construction, Task, TemplateSet};

#[test]
fn plan_covers_every_task_and_condition() {
    let corpus = synthetic_corpus(4, &[Construction::Transitive, Construction::Dative]);
    let plan = plan_run(&corpus, &TemplateSet::default(), &RunConfig::default()).unwrap();
    // per item: one single trial plus noisy and dual for ten conditions
    assert_eq!(plan.prompts.len(), corpus.len() * 21);
    assert_eq!(plan.stimuli.len(), corpus.len() * 11);
    for s in &plan.stimuli {
        check_grammar(s).unwrap();
    }
    let ids: Vec<u64> = plan.stimuli.iter().flat_map(|s| s.answer_key.keys().map(|i| i.0)).collect();
    assert!(ids.windows(2).all(|w| w[1] == w[0] + 1));
    assert_eq!(plan.next_id, ids.last().unwrap() + 1);
    // noisy and dual share the stimulus
    let noisy = plan.prompts.iter().find(|p| p.task == Task::Noisy).unwrap();
    let dual = plan.prompts.iter().find(|p| p.task == Task::Dual).unwrap();
    assert_eq!(noisy.user_text, dual.user_text);
    assert_ne!(noisy.system_text, dual.system_text);
    assert!(noisy.user_text.starts_with(&render(&plan.stimuli[1])));
}

#[test]
fn plan_is_deterministic_in_seed() {
    let corpus = synthetic_corpus(3, &[Construction::Passive]);
    let cfg = RunConfig {
        seed: 9,
        ..RunConfig::default()
    };
    let a = plan_run(&corpus, &TemplateSet::default(), &cfg).unwrap();
    let b = plan_run(&corpus, &TemplateSet::default(), &cfg).unwrap();
    assert_eq!(a.prompts, b.prompts);
    let c = plan_run(&corpus, &TemplateSet::default(), &RunConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(a.prompts, c.prompts);
}

#[test]
fn restricted_plans() {
    let corpus = synthetic_corpus(2, &[Construction::Passive]);
    let cfg = RunConfig {
        tasks: vec![Task::Dual],
        conditions: vec![ArithCondition::ONE_DIGIT_TWO_ADDENDS],
        id_start: 5633,
        ..RunConfig::default()
    };
    let plan = plan_run(&corpus, &TemplateSet::default(), &cfg).unwrap();
    assert_eq!(plan.prompts.len(), corpus.len());
    assert!(plan.prompts[0].user_text.contains("x5633"));
    let none = RunConfig {
        tasks: vec![],
        ..RunConfig::default()
    };
    assert!(matches!(plan_run(&corpus, &TemplateSet::default(), &none), Err(RunError::NoTasks)));
    let no_conds = RunConfig {
        conditions: vec![],
        ..RunConfig::default()
    };
    assert!(matches!(
        plan_run(&corpus, &TemplateSet::default(), &no_conds),
        Err(RunError::NoConditions)
    ));
}

#[test]
fn failed_requests_score_as_unparseable() {
    let corpus = synthetic_corpus(1, &[Construction::Passive]);
    let cfg = RunConfig {
        tasks: vec![Task::Single, Task::Dual],
        conditions: vec![ArithCondition::ONE_DIGIT_TWO_ADDENDS],
        ..RunConfig::default()
    };
    let plan = plan_run(&corpus, &TemplateSet::default(), &cfg).unwrap();
    let responses: Vec<Result<String, String>> = plan
        .prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 {
                return Err("backend down".to_string());
            }
            let mut text: String = p.answer_key.iter().map(|(id, sum)| format!("{id} = {sum}\n")).collect();
            text.push_str(&format!("Answer: {}", p.gold_answer.unwrap()));
            Ok(text)
        })
        .collect();
    let trials = score_run("mock", &plan.prompts, &responses).unwrap();
    assert_eq!(trials[0].parsed_answer, ParsedAnswer::Unparseable);
    assert_eq!(trials[0].comp_correct, None);
    for t in &trials[1..] {
        assert_eq!(t.comp_correct, Some(true));
        assert!(t.all_arith_correct);
    }
    assert!(matches!(
        score_run("mock", &plan.prompts, &responses[1..]),
        Err(RunError::LengthMismatch { .. })
    ));
}

//! Synthetic corpora with the full factorial shape, for demos and tests.
//! The sentences are templated filler, not linguistic stimuli.

use crate::corpus::{Corpus, CorpusMetadata, SentenceItem};
use crate::types::{Answer, Construction, Plausibility};

const AGENTS: [&str; 16] = [
    "bartender", "teacher", "farmer", "doctor", "sailor", "painter", "lawyer", "miner",
    "tailor", "butcher", "plumber", "jockey", "surgeon", "drummer", "grocer", "ranger",
];
const PATIENTS: [&str; 10] = [
    "cocktail", "lesson", "tractor", "bandage", "anchor", "canvas", "contract", "lantern", "jacket",
    "sausage",
];
const VERBS: [(&str, &str); 8] = [
    ("blended", "blend"),
    ("prepared", "prepare"),
    ("repaired", "repair"),
    ("cleaned", "clean"),
    ("lifted", "lift"),
    ("carried", "carry"),
    ("checked", "check"),
    ("moved", "move"),
];
const FILLER: [&str; 12] = [
    "authorities", "organist", "infantryman", "pollster", "intruder", "neurologist", "hippie",
    "cashier", "referee", "janitor", "senator", "librarian",
];
const FILLER_VERBS: [&str; 6] = ["agitated", "saluted", "cited", "baffled", "greeted", "praised"];

/// Builds a corpus of `n_items` items per construction, both plausibility
/// levels, with gold answers alternating so the corpus is balanced.
pub fn synthetic_corpus(n_items: u32, constructions: &[Construction]) -> Corpus {
    let mut items = Vec::new();
    for &c in constructions {
        for id in 1..=n_items {
            let k = id as usize + 7 * c as usize;
            let agent = AGENTS[k % AGENTS.len()];
            let patient = PATIENTS[(k / AGENTS.len() + k) % PATIENTS.len()];
            let (verb, base) = VERBS[(k / 3) % VERBS.len()];
            let f1 = FILLER[k % FILLER.len()];
            let f2 = FILLER[(k + 5) % FILLER.len()];
            let f3 = FILLER[(k + 9) % FILLER.len()];
            let v1 = FILLER_VERBS[k % FILLER_VERBS.len()];
            let v2 = FILLER_VERBS[(k + 3) % FILLER_VERBS.len()];
            for p in Plausibility::ALL {
                let (subj, obj) = match p {
                    Plausibility::Plausible => (agent, patient),
                    Plausibility::Implausible => (patient, agent),
                };
                let sentence = format!(
                    "The {subj} {verb} the {obj} and the {f1} {v1} the {f2} after the item{id} {v2} the {f3}."
                );
                let words = sentence.split(' ').map(str::to_string).collect();
                // literal reading decides the gold answer
                let ask_literal = (id + p as u32) % 2 == 0;
                let (question, gold_answer) = if ask_literal {
                    (format!("Did the {subj} {base} the {obj}?"), Answer::Yes)
                } else {
                    (format!("Did the {obj} {base} the {subj}?"), Answer::No)
                };
                items.push(SentenceItem {
                    item_id: id,
                    construction: c,
                    plausibility: p,
                    words,
                    question,
                    gold_answer,
                });
            }
        }
    }
    Corpus::new(
        items,
        CorpusMetadata {
            source: "synthetic".into(),
            version: "1".into(),
        },
    )
    .expect("synthetic corpus satisfies invariants")
}

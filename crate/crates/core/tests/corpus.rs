use std::collections::BTreeSet;

use dualtask_core::corpus::{convert_records, filter_items, load_corpus, CorpusError, CorpusFormat, CorpusMetadata};
use dualtask_core::synth::synthetic_corpus;
use dualtask_core::{Answer, Construction, Plausibility, SentenceItem};

#[test]
fn full_design_round_trips_in_both_formats() {
    let corpus = synthetic_corpus(160, &Construction::ALL);
    assert_eq!(corpus.len(), 2560);
    let dir = tempfile::tempdir().unwrap();
    for (name, fmt) in [("items.csv", CorpusFormat::Csv), ("items.jsonl", CorpusFormat::Jsonl)] {
        let path = dir.path().join(name);
        corpus.save(&path, fmt).unwrap();
        assert_eq!(CorpusFormat::from_path(&path), fmt);
        let back = load_corpus(&path, fmt).unwrap();
        assert_eq!(back.items(), corpus.items());
    }
}

#[test]
fn selection_counts() {
    let corpus = synthetic_corpus(160, &Construction::ALL);
    let one: BTreeSet<_> = [Construction::Transitive].into();
    let both: BTreeSet<_> = Plausibility::ALL.into_iter().collect();
    let impl_only: BTreeSet<_> = [Plausibility::Implausible].into();
    assert_eq!(filter_items(&corpus, &one, &both).unwrap().len(), 320);
    let sub = filter_items(&corpus, &one, &impl_only).unwrap();
    assert_eq!(sub.len(), 160);
    assert!(sub.items().iter().all(|i| i.plausibility == Plausibility::Implausible));
    assert!(matches!(
        filter_items(&corpus, &BTreeSet::new(), &both),
        Err(CorpusError::EmptySelection)
    ));
    let absent = synthetic_corpus(3, &[Construction::Dative]);
    assert!(matches!(filter_items(&absent, &one, &both), Err(CorpusError::EmptySelection)));
}

#[test]
fn answers_are_balanced() {
    let corpus = synthetic_corpus(160, &Construction::ALL);
    let yes = corpus.items().iter().filter(|i| i.gold_answer == Answer::Yes).count();
    assert_eq!(yes * 2, corpus.len());
}

fn meta() -> CorpusMetadata {
    CorpusMetadata {
        source: "t".into(),
        version: "0".into(),
    }
}

#[test]
fn invalid_corpora_are_rejected() {
    let base = synthetic_corpus(2, &[Construction::Passive]);
    let mut dup = base.items().to_vec();
    dup.push(dup[0].clone());
    assert!(matches!(
        dualtask_core::Corpus::new(dup, meta()),
        Err(CorpusError::DuplicateKey(_))
    ));

    let unpaired: Vec<SentenceItem> = base.items()[..3].to_vec();
    assert!(dualtask_core::Corpus::new(unpaired, meta()).is_err());

    let mut skewed = base.items().to_vec();
    for it in &mut skewed {
        it.gold_answer = Answer::Yes;
    }
    assert!(matches!(
        dualtask_core::Corpus::new(skewed, meta()),
        Err(CorpusError::UnbalancedAnswers { .. })
    ));
}

#[test]
fn malformed_csv_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(
        &path,
        "item_id,construction,plausibility,sentence,question,gold_answer\n1,Transitive,Plausible,The cat slept.,Did it?,Maybe\n",
    )
    .unwrap();
    assert!(load_corpus(&path, CorpusFormat::Csv).is_err());
    let missing = dir.path().join("missing.csv");
    std::fs::write(&missing, "item_id,construction\n1,Transitive\n").unwrap();
    assert!(load_corpus(&missing, CorpusFormat::Csv).is_err());
}

#[test]
fn external_rows_map_through_the_hook() {
    let rows = vec![
        ("1", "Exp.Subj.", "P", "The man feared the dog.", "Did the man fear the dog?", "Y"),
        ("1", "Exp.Subj.", "I", "The dog feared the man.", "Did the man fear the dog?", "N"),
    ];
    let corpus = convert_records(rows, meta(), |(id, c, p, s, q, a)| {
        Some(SentenceItem {
            item_id: id.parse().ok()?,
            construction: c.parse().ok()?,
            plausibility: if p == "P" { Plausibility::Plausible } else { Plausibility::Implausible },
            words: s.split(' ').map(String::from).collect(),
            question: q.into(),
            gold_answer: if a == "Y" { Answer::Yes } else { Answer::No },
        })
    })
    .unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus.items()[0].construction, Construction::ExpSubj);
}

//! Sentence–question corpora in the plausibility × construction × item design.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Answer, Construction, Plausibility, SentenceRef};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {record}: missing or empty field `{field}`")]
    MissingField { record: usize, field: &'static str },
    #[error("record {record}: {message}")]
    Malformed { record: usize, message: String },
    #[error("duplicate entry {0}")]
    DuplicateKey(SentenceRef),
    #[error("gold answers are unbalanced: {yes} Yes vs {no} No")]
    UnbalancedAnswers { yes: usize, no: usize },
    #[error("item {item_id}/{construction} lacks its {missing} variant")]
    UnpairedPlausibility {
        item_id: u32,
        construction: Construction,
        missing: Plausibility,
    },
    #[error("no items match the selection")]
    EmptySelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(format!("unknown corpus format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceItem {
    pub item_id: u32,
    pub construction: Construction,
    pub plausibility: Plausibility,
    pub words: Vec<String>,
    pub question: String,
    pub gold_answer: Answer,
}

impl SentenceItem {
    pub fn sentence_ref(&self) -> SentenceRef {
        SentenceRef {
            item_id: self.item_id,
            construction: self.construction,
            plausibility: self.plausibility,
        }
    }

    pub fn sentence(&self) -> String {
        self.words.join(" ")
    }
}

/// Splits on single spaces; punctuation stays attached to its word.
pub fn split_words(sentence: &str) -> Option<Vec<String>> {
    if sentence.is_empty() {
        return None;
    }
    let words: Vec<String> = sentence.split(' ').map(str::to_string).collect();
    let ok = words
        .iter()
        .all(|w| !w.is_empty() && !w.chars().any(char::is_whitespace));
    ok.then_some(words)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub source: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    items: Vec<SentenceItem>,
    metadata: CorpusMetadata,
}

/// On-disk record shape shared by CSV and JSONL.
#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    item_id: Option<String>,
    construction: Option<String>,
    plausibility: Option<String>,
    sentence: Option<String>,
    question: Option<String>,
    gold_answer: Option<String>,
}

impl RawRecord {
    fn from_item(item: &SentenceItem) -> Self {
        RawRecord {
            item_id: Some(item.item_id.to_string()),
            construction: Some(item.construction.to_string()),
            plausibility: Some(item.plausibility.to_string()),
            sentence: Some(item.sentence()),
            question: Some(item.question.clone()),
            gold_answer: Some(item.gold_answer.to_string()),
        }
    }

    fn into_item(self, record: usize) -> Result<SentenceItem, CorpusError> {
        fn field(
            v: Option<String>,
            record: usize,
            name: &'static str,
        ) -> Result<String, CorpusError> {
            match v {
                Some(s) if !s.trim().is_empty() => Ok(s),
                _ => Err(CorpusError::MissingField {
                    record,
                    field: name,
                }),
            }
        }
        let malformed = |message: String| CorpusError::Malformed { record, message };

        let item_id = field(self.item_id, record, "item_id")?;
        let item_id: u32 = item_id
            .trim()
            .parse()
            .ok()
            .filter(|&id| id >= 1)
            .ok_or_else(|| malformed(format!("item_id `{item_id}` is not a positive integer")))?;
        let construction = field(self.construction, record, "construction")?
            .parse::<Construction>()
            .map_err(|e| malformed(e.to_string()))?;
        let plausibility = field(self.plausibility, record, "plausibility")?
            .parse::<Plausibility>()
            .map_err(|e| malformed(e.to_string()))?;
        let sentence = field(self.sentence, record, "sentence")?;
        let words = split_words(&sentence)
            .ok_or_else(|| malformed(format!("sentence `{sentence}` has irregular spacing")))?;
        let question = field(self.question, record, "question")?;
        let gold_answer = field(self.gold_answer, record, "gold_answer")?
            .parse::<Answer>()
            .map_err(|e| malformed(e.to_string()))?;
        Ok(SentenceItem {
            item_id,
            construction,
            plausibility,
            words,
            question,
            gold_answer,
        })
    }
}

impl Corpus {
    /// Validates the full-corpus invariants: non-empty, unique keys,
    /// paired plausibility variants and balanced gold answers.
    pub fn new(items: Vec<SentenceItem>, metadata: CorpusMetadata) -> Result<Self, CorpusError> {
        if items.is_empty() {
            return Err(CorpusError::MissingField {
                record: 0,
                field: "item_id",
            });
        }
        check_keys(&items)?;
        check_pairing(&items)?;
        let yes = items.iter().filter(|i| i.gold_answer == Answer::Yes).count();
        let no = items.len() - yes;
        if yes != no {
            return Err(CorpusError::UnbalancedAnswers { yes, no });
        }
        Ok(Corpus { items, metadata })
    }

    pub fn items(&self) -> &[SentenceItem] {
        &self.items
    }

    pub fn metadata(&self) -> &CorpusMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, key: &SentenceRef) -> Option<&SentenceItem> {
        self.items.iter().find(|i| i.sentence_ref() == *key)
    }

    pub fn constructions(&self) -> BTreeSet<Construction> {
        self.items.iter().map(|i| i.construction).collect()
    }

    pub fn save(&self, path: &Path, format: CorpusFormat) -> Result<(), CorpusError> {
        let file = BufWriter::new(File::create(path)?);
        match format {
            CorpusFormat::Csv => {
                let mut w = csv::Writer::from_writer(file);
                for item in &self.items {
                    w.serialize(RawRecord::from_item(item))
                        .map_err(|e| CorpusError::Io(e.into()))?;
                }
                w.flush()?;
            }
            CorpusFormat::Jsonl => {
                let mut w = file;
                for item in &self.items {
                    serde_json::to_writer(&mut w, &RawRecord::from_item(item))
                        .map_err(|e| CorpusError::Io(e.into()))?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn check_keys(items: &[SentenceItem]) -> Result<(), CorpusError> {
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        if !seen.insert(item.sentence_ref()) {
            return Err(CorpusError::DuplicateKey(item.sentence_ref()));
        }
    }
    Ok(())
}

fn check_pairing(items: &[SentenceItem]) -> Result<(), CorpusError> {
    let mut cells: BTreeMap<(u32, Construction), BTreeSet<Plausibility>> = BTreeMap::new();
    for item in items {
        cells
            .entry((item.item_id, item.construction))
            .or_default()
            .insert(item.plausibility);
    }
    for ((item_id, construction), levels) in cells {
        if let Some(&missing) = Plausibility::ALL.iter().find(|p| !levels.contains(p)) {
            return Err(CorpusError::UnpairedPlausibility {
                item_id,
                construction,
                missing,
            });
        }
    }
    Ok(())
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let raws: Vec<RawRecord> = match format {
        CorpusFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::None)
                .from_reader(BufReader::new(File::open(path)?));
            let mut out = Vec::new();
            for (i, rec) in reader.deserialize::<RawRecord>().enumerate() {
                out.push(rec.map_err(|e| CorpusError::Malformed {
                    record: i + 1,
                    message: e.to_string(),
                })?);
            }
            out
        }
        CorpusFormat::Jsonl => {
            let mut out = Vec::new();
            for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let v: serde_json::Value =
                    serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                        record: i + 1,
                        message: e.to_string(),
                    })?;
                out.push(raw_from_json(&v));
            }
            out
        }
    };
    let items = raws
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_item(i + 1))
        .collect::<Result<Vec<_>, _>>()?;
    let source = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    Corpus::new(
        items,
        CorpusMetadata {
            source,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    )
}

// JSONL writers may emit item_id as a number.
fn raw_from_json(v: &serde_json::Value) -> RawRecord {
    let get = |k: &str| -> Option<String> {
        match v.get(k)? {
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Null => None,
            other => Some(other.to_string()),
        }
    };
    RawRecord {
        item_id: get("item_id"),
        construction: get("construction"),
        plausibility: get("plausibility"),
        sentence: get("sentence"),
        question: get("question"),
        gold_answer: get("gold_answer"),
    }
}

/// Sub-corpus restricted to the given constructions and plausibility levels.
pub fn filter_items(
    corpus: &Corpus,
    constructions: &BTreeSet<Construction>,
    plausibilities: &BTreeSet<Plausibility>,
) -> Result<Corpus, CorpusError> {
    if constructions.is_empty() || plausibilities.is_empty() {
        return Err(CorpusError::EmptySelection);
    }
    let items: Vec<SentenceItem> = corpus
        .items
        .iter()
        .filter(|i| constructions.contains(&i.construction) && plausibilities.contains(&i.plausibility))
        .cloned()
        .collect();
    if items.is_empty() {
        return Err(CorpusError::EmptySelection);
    }
    if plausibilities.len() == Plausibility::ALL.len() {
        check_pairing(&items)?;
    }
    Ok(Corpus {
        items,
        metadata: corpus.metadata.clone(),
    })
}

/// Hook for mapping an external corpus (e.g. one distributed as a
/// spreadsheet with its own column names) onto [`SentenceItem`]s. Callers
/// provide the per-row mapping; the result is validated like any other
/// corpus.
pub fn convert_records<T, F>(
    rows: impl IntoIterator<Item = T>,
    metadata: CorpusMetadata,
    mut map: F,
) -> Result<Corpus, CorpusError>
where
    F: FnMut(T) -> Option<SentenceItem>,
{
    let items = rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            map(row).ok_or(CorpusError::Malformed {
                record: i + 1,
                message: "row could not be mapped".into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Corpus::new(items, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: u32, c: Construction, p: Plausibility, gold: Answer) -> SentenceItem {
        SentenceItem {
            item_id: id,
            construction: c,
            plausibility: p,
            words: split_words("The chef sent the gift to the friend.").unwrap(),
            question: "Did the chef send the gift?".into(),
            gold_answer: gold,
        }
    }

    fn meta() -> CorpusMetadata {
        CorpusMetadata {
            source: "t".into(),
            version: "0".into(),
        }
    }

    #[test]
    fn word_split_keeps_punctuation() {
        let w = split_words("The cocktail blended the bartender.").unwrap();
        assert_eq!(w.last().unwrap(), "bartender.");
        assert!(split_words("two  spaces").is_none());
        assert!(split_words("tab\there").is_none());
        assert!(split_words("").is_none());
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            Corpus::new(vec![], meta()),
            Err(CorpusError::MissingField { .. })
        ));
    }

    #[test]
    fn duplicate_rejected() {
        let items = vec![
            item(7, Construction::Transitive, Plausibility::Plausible, Answer::Yes),
            item(7, Construction::Transitive, Plausibility::Plausible, Answer::No),
        ];
        assert!(matches!(
            Corpus::new(items, meta()),
            Err(CorpusError::DuplicateKey(_))
        ));
    }

    #[test]
    fn unpaired_rejected() {
        let items = vec![
            item(1, Construction::Transitive, Plausibility::Plausible, Answer::Yes),
            item(2, Construction::Transitive, Plausibility::Plausible, Answer::No),
        ];
        assert!(matches!(
            Corpus::new(items, meta()),
            Err(CorpusError::UnpairedPlausibility { item_id: 1, .. })
        ));
    }

    #[test]
    fn unbalanced_rejected() {
        let items = vec![
            item(1, Construction::Transitive, Plausibility::Plausible, Answer::Yes),
            item(1, Construction::Transitive, Plausibility::Implausible, Answer::Yes),
        ];
        assert!(matches!(
            Corpus::new(items, meta()),
            Err(CorpusError::UnbalancedAnswers { yes: 2, no: 0 })
        ));
    }

    #[test]
    fn filter_rejects_empty_sets() {
        let items = vec![
            item(1, Construction::Transitive, Plausibility::Plausible, Answer::Yes),
            item(1, Construction::Transitive, Plausibility::Implausible, Answer::No),
        ];
        let c = Corpus::new(items, meta()).unwrap();
        let all_p: BTreeSet<_> = Plausibility::ALL.into_iter().collect();
        assert!(matches!(
            filter_items(&c, &BTreeSet::new(), &all_p),
            Err(CorpusError::EmptySelection)
        ));
        let passive: BTreeSet<_> = [Construction::Passive].into_iter().collect();
        assert!(matches!(
            filter_items(&c, &passive, &all_p),
            Err(CorpusError::EmptySelection)
        ));
    }
}

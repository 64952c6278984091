//! Shared experimental factors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub value: String,
}

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown {} `{}`", self.kind, self.value)
    }
}

impl std::error::Error for UnknownLabel {}

/// Syntactic frame of the premise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Construction {
    Transitive,
    Passive,
    Dative,
    ExpSubj,
    ExpObj,
    BenFor,
    DoubleObject,
    BenDoubleObject,
}

impl Construction {
    pub const ALL: [Construction; 8] = [
        Construction::Transitive,
        Construction::Passive,
        Construction::Dative,
        Construction::ExpSubj,
        Construction::ExpObj,
        Construction::BenFor,
        Construction::DoubleObject,
        Construction::BenDoubleObject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Construction::Transitive => "Transitive",
            Construction::Passive => "Passive",
            Construction::Dative => "Dative",
            Construction::ExpSubj => "ExpSubj",
            Construction::ExpObj => "ExpObj",
            Construction::BenFor => "BenFor",
            Construction::DoubleObject => "DoubleObject",
            Construction::BenDoubleObject => "BenDoubleObject",
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Construction {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let found = match key.as_str() {
            "transitive" => Construction::Transitive,
            "passive" => Construction::Passive,
            "dative" => Construction::Dative,
            "expsubj" | "experiencersubject" => Construction::ExpSubj,
            "expobj" | "experiencerobject" => Construction::ExpObj,
            "benfor" | "benefactivefor" => Construction::BenFor,
            "doubleobject" => Construction::DoubleObject,
            "bendoubleobject" | "benefactivedoubleobject" => Construction::BenDoubleObject,
            _ => {
                return Err(UnknownLabel {
                    kind: "construction",
                    value: s.to_string(),
                })
            }
        };
        Ok(found)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Plausibility {
    Plausible,
    Implausible,
}

impl Plausibility {
    pub const ALL: [Plausibility; 2] = [Plausibility::Plausible, Plausibility::Implausible];

    pub fn as_str(self) -> &'static str {
        match self {
            Plausibility::Plausible => "Plausible",
            Plausibility::Implausible => "Implausible",
        }
    }
}

impl fmt::Display for Plausibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Plausibility {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plausible" => Ok(Plausibility::Plausible),
            "implausible" => Ok(Plausibility::Implausible),
            _ => Err(UnknownLabel {
                kind: "plausibility",
                value: s.to_string(),
            }),
        }
    }
}

/// Gold or given answer to a comprehension question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Yes => "Yes",
            Answer::No => "No",
        }
    }

    pub fn flip(self) -> Answer {
        match self {
            Answer::Yes => Answer::No,
            Answer::No => Answer::Yes,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Answer {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Answer::Yes),
            "no" => Ok(Answer::No),
            _ => Err(UnknownLabel {
                kind: "answer",
                value: s.to_string(),
            }),
        }
    }
}

/// The three administered tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Single,
    Noisy,
    Dual,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Single, Task::Noisy, Task::Dual];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Single => "Single",
            Task::Noisy => "Noisy",
            Task::Dual => "Dual",
        }
    }

    /// Whether stimuli for this task carry embedded arithmetic.
    pub fn has_arithmetic(self) -> bool {
        !matches!(self, Task::Single)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" => Ok(Task::Single),
            "noisy" => Ok(Task::Noisy),
            "dual" => Ok(Task::Dual),
            _ => Err(UnknownLabel {
                kind: "task",
                value: s.to_string(),
            }),
        }
    }
}

/// Points at one corpus entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub item_id: u32,
    pub construction: Construction,
    pub plausibility: Plausibility,
}

impl SentenceRef {
    /// The (item, construction) pair that Wilcoxon tests pair over.
    pub fn item_key(&self) -> ItemKey {
        ItemKey {
            item_id: self.item_id,
            construction: Some(self.construction),
        }
    }
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.item_id, self.construction, self.plausibility)
    }
}

/// Unit of pairing in the contrast table. `construction` is `None` when
/// variants of an item are pooled across constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemKey {
    pub item_id: u32,
    pub construction: Option<Construction>,
}

impl fmt::Display for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.construction {
            Some(c) => write!(f, "{}/{}", self.item_id, c),
            None => write!(f, "{}", self.item_id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_loosely() {
        assert_eq!("Exp.Subj.".parse::<Construction>().unwrap(), Construction::ExpSubj);
        assert_eq!("Ben.For".parse::<Construction>().unwrap(), Construction::BenFor);
        assert_eq!("double_object".parse::<Construction>().unwrap(), Construction::DoubleObject);
        assert_eq!(" YES ".parse::<Answer>().unwrap(), Answer::Yes);
        assert!("maybe".parse::<Answer>().is_err());
        for c in Construction::ALL {
            assert_eq!(c.as_str().parse::<Construction>().unwrap(), c);
        }
    }
}

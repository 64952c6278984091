//! Dual-task sentence comprehension experiments.
//!
//! Sentences from a plausibility × construction corpus are interleaved with
//! addition problems, presented under three tasks (plain reading, reading
//! while ignoring arithmetic, reading while solving it), scored, screened,
//! and compared with per-item difference-in-differences contrasts tested by
//! one-sided Wilcoxon signed-rank tests.

pub mod arith;
pub mod corpus;
pub mod interleave;
pub mod jsonl;
pub mod lists;
pub mod prompt;
pub mod report;
pub mod run;
pub mod score;
pub mod screen;
pub mod stats;
pub mod synth;
pub mod types;

pub use arith::{ArithCondition, ArithProblem};
pub use corpus::{Corpus, SentenceItem};
pub use interleave::{Identifier, Stimulus};
pub use prompt::{RenderedPrompt, TemplateSet};
pub use score::TrialRecord;
pub use types::{Answer, Construction, ItemKey, Plausibility, SentenceRef, Task};

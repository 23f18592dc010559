//! Corpus handling: documents, moderation, stratified splitting, keyword
//! profiling and the editing prompts used to produce machine text.

mod document;
mod moderation;
mod policy;
mod profile;
mod prompts;
mod split;

pub use document::{normalize_whitespace, word_count, Document, Domain, Label, SourceKind};
pub use moderation::{
    count_keyword, find_keyword, moderate, moderate_human, moderate_machine, truncate_to_sentence,
    RejectRule, Rejection, Verdict,
};
pub use policy::ModerationPolicy;
pub use profile::keyword_profile;
pub use prompts::{build_polish_prompt, template};
pub use split::{split_train_test, CorpusSplit};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error("class {class:?} has {count} document(s); at least 2 are needed to split")]
    ClassTooSmall { class: String, count: usize },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("unknown source kind {0:?} (expected arxiv, gutenberg or wiki)")]
    UnknownSourceKind(String),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
}

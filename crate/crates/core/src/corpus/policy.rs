use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Quality and identifier filters for the human and machine splits.
///
/// Symbol limits are maxima: a text is rejected when a symbol occurs more
/// often than its limit, so a limit of `0` bans the symbol outright.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModerationPolicy {
    /// Minimum number of whitespace-delimited words.
    pub min_tokens: usize,
    /// Word budget before sentence-safe truncation of machine text.
    pub max_tokens: usize,
    pub human_keywords: Vec<String>,
    pub machine_keywords: Vec<String>,
    /// Phrases that introduce an edited answer ("The revised content is: ...").
    /// Scanned in order; the first one followed by a colon wins.
    pub generation_identifiers: Vec<String>,
    pub human_symbol_limits: BTreeMap<String, usize>,
    pub machine_symbol_limits: BTreeMap<String, usize>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn limits(items: &[(&str, usize)]) -> BTreeMap<String, usize> {
    items.iter().map(|(s, n)| (s.to_string(), *n)).collect()
}

impl Default for ModerationPolicy {
    fn default() -> Self {
        ModerationPolicy {
            min_tokens: 50,
            max_tokens: 2048,
            human_keywords: strings(&[
                "ISBN",
                "PMID",
                "doi",
                "vol.",
                "p.",
                "https:",
                "http:",
                "References",
                "External links",
            ]),
            machine_keywords: strings(&[
                "book editor",
                "clarity",
                "revisions",
                "I apologize",
                "I am sorry",
                "Unfortunately",
                "complex language",
                "revised content",
                "revised version",
                "language model",
                "accuracy of",
                "project gutenberg",
                "reliable information",
                "ISBN",
                "PMID",
                "doi:",
                "Sure,",
                "Retrieved from",
                "Category",
                "http",
                "As an editor",
                "As an expert",
            ]),
            generation_identifiers: strings(&[
                "revised book",
                "revised content",
                "revised version",
                "title",
                "after editing",
                "revised section",
            ]),
            human_symbol_limits: limits(&[
                ("\n---", 0),
                ("\n===", 0),
                ("**", 0),
                ("##", 0),
                ("$", 500),
                ("&", 150),
                ("\\", 1000),
            ]),
            machine_symbol_limits: limits(&[
                ("&", 50),
                ("$", 50),
                ("====", 0),
                ("---", 0),
                ("**", 0),
                ("##", 0),
            ]),
        }
    }
}

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Provenance of a text: written by a person, or produced by a named generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Label {
    Human,
    Generator(String),
}

impl Label {
    pub const HUMAN: &'static str = "human";
    pub const MACHINE: &'static str = "machine";

    pub fn generator(name: impl Into<String>) -> Self {
        Label::from(name.into())
    }

    pub fn is_human(&self) -> bool {
        matches!(self, Label::Human)
    }

    pub fn as_str(&self) -> &str {
        match self {
            Label::Human => Self::HUMAN,
            Label::Generator(name) => name,
        }
    }

    /// Collapses generator names to `"machine"`.
    pub fn binary(&self) -> &'static str {
        if self.is_human() {
            Self::HUMAN
        } else {
            Self::MACHINE
        }
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        if s == Self::HUMAN {
            Label::Human
        } else {
            Label::Generator(s)
        }
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::from(s.to_string())
    }
}

impl From<Label> for String {
    fn from(l: Label) -> Self {
        match l {
            Label::Human => Label::HUMAN.to_string(),
            Label::Generator(name) => name,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "STEM", alias = "stem")]
    Stem,
    #[serde(alias = "humanities", alias = "Humanity")]
    Humanities,
    #[serde(alias = "Social Science", alias = "social_science")]
    SocialScience,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Stem => "STEM",
            Domain::Humanities => "Humanities",
            Domain::SocialScience => "SocialScience",
        }
    }
}

impl FromStr for Domain {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace([' ', '_'], "").as_str() {
            "stem" => Ok(Domain::Stem),
            "humanities" | "humanity" => Ok(Domain::Humanities),
            "socialscience" => Ok(Domain::SocialScience),
            _ => Err(CorpusError::UnknownDomain(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Wiki,
    Arxiv,
    Gutenberg,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::Arxiv, SourceKind::Gutenberg, SourceKind::Wiki];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceKind::Wiki => "wiki",
            SourceKind::Arxiv => "arxiv",
            SourceKind::Gutenberg => "gutenberg",
        }
    }
}

impl FromStr for SourceKind {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wiki" | "wikipedia" => Ok(SourceKind::Wiki),
            "arxiv" => Ok(SourceKind::Arxiv),
            "gutenberg" | "gutendex" => Ok(SourceKind::Gutenberg),
            _ => Err(CorpusError::UnknownSourceKind(s.to_string())),
        }
    }
}

/// One text sample and its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub subfield: String,
    #[serde(rename = "source", default, skip_serializing_if = "Option::is_none")]
    pub source_kind: Option<SourceKind>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<Label>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            label: label.into(),
            domain: None,
            subfield: String::new(),
            source_kind: None,
        }
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_subfield(mut self, subfield: impl Into<String>) -> Self {
        self.subfield = subfield.into();
        self
    }

    pub fn with_source(mut self, source: SourceKind) -> Self {
        self.source_kind = Some(source);
        self
    }

    pub fn word_count(&self) -> usize {
        word_count(&self.text)
    }
}

/// Number of whitespace-delimited words.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Collapses runs of horizontal whitespace to one space, trims each line,
/// normalizes line endings and squeezes blank-line runs to a single blank line.
/// Line structure survives so line-anchored format symbols still match.
pub fn normalize_whitespace(text: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    for raw in text.lines() {
        let line = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        if line.is_empty() && lines.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        lines.push(line);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

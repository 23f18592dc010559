use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use super::document::word_count;
use super::{Document, ModerationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectRule {
    MinTokens,
    Keyword,
    FormatSymbol,
    NoSentenceBoundary,
}

impl RejectRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectRule::MinTokens => "min_tokens",
            RejectRule::Keyword => "keyword",
            RejectRule::FormatSymbol => "format_symbol",
            RejectRule::NoSentenceBoundary => "no_sentence_boundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub rule: RejectRule,
    pub detail: String,
}

impl Rejection {
    fn new(rule: RejectRule, detail: impl Into<String>) -> Self {
        Rejection { rule, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Keep(Document),
    Reject(Rejection),
}

impl Verdict {
    pub fn is_keep(&self) -> bool {
        matches!(self, Verdict::Keep(_))
    }

    pub fn kept(self) -> Option<Document> {
        match self {
            Verdict::Keep(d) => Some(d),
            Verdict::Reject(_) => None,
        }
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            Verdict::Keep(_) => None,
            Verdict::Reject(r) => Some(r),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offset of the first match of `keyword` in `text`.
///
/// Matching ignores ASCII case. Word boundaries are enforced only at the
/// keyword's alphanumeric edges, so `"ISBN"` matches as a whole word while
/// `"doi:"` still matches `"doi:10.1"` and `"p."` does not match inside `"help."`.
pub fn find_keyword(text: &str, keyword: &str) -> Option<usize> {
    find_keyword_from(text, keyword, 0)
}

fn find_keyword_from(text: &str, keyword: &str, from: usize) -> Option<usize> {
    let needle = keyword.as_bytes();
    if needle.is_empty() || needle.len() > text.len() {
        return None;
    }
    let hay = text.as_bytes();
    let first = keyword.chars().next()?;
    let last = keyword.chars().next_back()?;
    let mut i = from;
    while i + needle.len() <= hay.len() {
        if text.is_char_boundary(i) && hay[i..i + needle.len()].eq_ignore_ascii_case(needle) {
            let end = i + needle.len();
            let before_ok = !is_word_char(first)
                || text[..i].chars().next_back().is_none_or(|c| !is_word_char(c));
            let after_ok = !is_word_char(last)
                || !text.is_char_boundary(end)
                || text[end..].chars().next().is_none_or(|c| !is_word_char(c));
            if before_ok && after_ok && text.is_char_boundary(end) {
                return Some(i);
            }
        }
        i += 1;
    }
    None
}

/// Non-overlapping occurrences of `keyword` under the [`find_keyword`] rules.
pub fn count_keyword(text: &str, keyword: &str) -> u64 {
    let mut count = 0;
    let mut from = 0;
    while let Some(pos) = find_keyword_from(text, keyword, from) {
        count += 1;
        from = pos + keyword.len();
    }
    count
}

fn first_keyword<'a>(text: &str, keywords: &'a [String]) -> Option<&'a str> {
    keywords
        .iter()
        .map(String::as_str)
        .find(|kw| find_keyword(text, kw).is_some())
}

fn symbol_violation(text: &str, limits: &BTreeMap<String, usize>) -> Option<Rejection> {
    limits.iter().find_map(|(symbol, &max)| {
        let count = text.matches(symbol.as_str()).count();
        (count > max).then(|| {
            Rejection::new(
                RejectRule::FormatSymbol,
                format!("{:?} occurs {count} times (limit {max})", symbol),
            )
        })
    })
}

fn too_short(text: &str, policy: &ModerationPolicy) -> Option<Rejection> {
    let n = word_count(text);
    (n < policy.min_tokens).then(|| {
        Rejection::new(
            RejectRule::MinTokens,
            format!("{n} words (minimum {})", policy.min_tokens),
        )
    })
}

/// Filters for human-written text: minimum length, identifier keywords and
/// format-symbol limits, checked in that order.
pub fn moderate_human(doc: &Document, policy: &ModerationPolicy) -> Verdict {
    if let Some(r) = too_short(&doc.text, policy) {
        return Verdict::Reject(r);
    }
    if let Some(kw) = first_keyword(&doc.text, &policy.human_keywords) {
        return Verdict::Reject(Rejection::new(RejectRule::Keyword, kw));
    }
    if let Some(r) = symbol_violation(&doc.text, &policy.human_symbol_limits) {
        return Verdict::Reject(r);
    }
    Verdict::Keep(doc.clone())
}

/// Removes "<identifier> ...:" preambles until none remain.
fn strip_identifiers<'t>(mut text: &'t str, identifiers: &[String]) -> &'t str {
    'outer: loop {
        for ident in identifiers {
            if let Some(pos) = find_keyword(text, ident) {
                let after = pos + ident.len();
                if let Some(colon) = text[after..].find(':') {
                    text = text[after + colon + 1..].trim_start();
                    continue 'outer;
                }
            }
        }
        return text;
    }
}

/// Filters for generated text.
///
/// 1. reject below the minimum word count;
/// 2. strip generation-identifier preambles up to the nearest following colon
///    (repeated until none remain) and re-check the length;
/// 3. reject on any machine-split keyword;
/// 4. reject on format-symbol limits.
///
/// Kept documents are returned with the stripped text. Applying the filter to
/// its own output is a no-op.
pub fn moderate_machine(doc: &Document, policy: &ModerationPolicy) -> Verdict {
    if let Some(r) = too_short(&doc.text, policy) {
        return Verdict::Reject(r);
    }
    let body = strip_identifiers(&doc.text, &policy.generation_identifiers);
    if body.len() != doc.text.len() {
        if let Some(mut r) = too_short(body, policy) {
            r.detail.push_str(" after identifier stripping");
            return Verdict::Reject(r);
        }
    }
    if let Some(kw) = first_keyword(body, &policy.machine_keywords) {
        return Verdict::Reject(Rejection::new(RejectRule::Keyword, kw));
    }
    if let Some(r) = symbol_violation(body, &policy.machine_symbol_limits) {
        return Verdict::Reject(r);
    }
    let mut kept = doc.clone();
    if body.len() != doc.text.len() {
        kept.text = body.to_string();
    }
    Verdict::Keep(kept)
}

/// Cuts `text` to its first `max_tokens` words, then drops everything after
/// the last period. Fails when the kept prefix contains no period.
pub fn truncate_to_sentence(text: &str, max_tokens: usize) -> Result<String, Rejection> {
    let mut end = 0;
    for word in text.split_whitespace().take(max_tokens) {
        end = word.as_ptr() as usize - text.as_ptr() as usize + word.len();
    }
    match text[..end].rfind('.') {
        Some(p) => Ok(text[..=p].to_string()),
        None => Err(Rejection::new(
            RejectRule::NoSentenceBoundary,
            format!("no period within the first {max_tokens} words"),
        )),
    }
}

/// Full moderation for one document, dispatched on its label. Machine text is
/// truncated to `policy.max_tokens` words at a sentence boundary first.
pub fn moderate(doc: &Document, policy: &ModerationPolicy) -> Verdict {
    if doc.label.is_human() {
        return moderate_human(doc, policy);
    }
    let truncated = match truncate_to_sentence(&doc.text, policy.max_tokens) {
        Ok(t) => t,
        Err(r) => return Verdict::Reject(r),
    };
    if truncated.len() == doc.text.len() {
        moderate_machine(doc, policy)
    } else {
        let mut d = doc.clone();
        d.text = truncated;
        moderate_machine(&d, policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("word{i}")).collect::<Vec<_>>().join(" ")
    }

    fn human(text: &str) -> Document {
        Document::new("h", text, "human")
    }

    fn machine(text: &str) -> Document {
        Document::new("m", text, "gen")
    }

    #[test]
    fn human_length_boundary() {
        let p = ModerationPolicy::default();
        let v = moderate_human(&human(&words(49)), &p);
        assert_eq!(v.rejection().unwrap().rule, RejectRule::MinTokens);
        assert!(moderate_human(&human(&words(50)), &p).is_keep());
    }

    #[test]
    fn human_keyword_rejects() {
        let p = ModerationPolicy::default();
        let text = format!("{} ISBN 978-3-16", words(60));
        let v = moderate_human(&human(&text), &p);
        let r = v.rejection().unwrap();
        assert_eq!((r.rule, r.detail.as_str()), (RejectRule::Keyword, "ISBN"));
    }

    #[test]
    fn keyword_matching_respects_word_edges() {
        assert!(find_keyword("see the isbn here", "ISBN").is_some());
        assert!(find_keyword("ISBNs are", "ISBN").is_none());
        assert!(find_keyword("doi:10.1/x", "doi:").is_some());
        assert!(find_keyword("I need help.", "p.").is_none());
        assert!(find_keyword("see p. 12", "p.").is_some());
        assert!(find_keyword("to measure, we", "Sure,").is_none());
        assert!(find_keyword("Sure, here", "Sure,").is_some());
        assert_eq!(count_keyword("Enhance, enhance; ENHANCE enhanced", "enhance"), 3);
    }

    #[test]
    fn keyword_matching_handles_multibyte_text() {
        assert!(find_keyword("café isbn", "ISBN").is_some());
        assert!(find_keyword("éisbn", "ISBN").is_none());
        assert_eq!(count_keyword("ünïcödé", "x"), 0);
    }

    #[test]
    fn strips_generation_identifier() {
        let p = ModerationPolicy::default();
        let body = words(60);
        let v = moderate_machine(&machine(&format!("The revised content is: {body}")), &p);
        assert_eq!(v.kept().unwrap().text, body);
    }

    #[test]
    fn identifier_without_colon_is_left_alone() {
        let p = ModerationPolicy::default();
        let text = format!("The title of this work {}", words(60));
        assert_eq!(moderate_machine(&machine(&text), &p).kept().unwrap().text, text);
    }

    #[test]
    fn machine_keyword_and_symbols() {
        let p = ModerationPolicy::default();
        let v = moderate_machine(&machine(&format!("As an editor, {}", words(60))), &p);
        assert_eq!(v.rejection().unwrap().rule, RejectRule::Keyword);
        let v = moderate_machine(&machine(&format!("{} **bold**", words(60))), &p);
        assert_eq!(v.rejection().unwrap().rule, RejectRule::FormatSymbol);
        let amp50 = format!("{} {}", words(60), "&".repeat(50));
        assert!(moderate_machine(&machine(&amp50), &p).is_keep());
        let amp51 = format!("{} {}", words(60), "&".repeat(51));
        assert!(!moderate_machine(&machine(&amp51), &p).is_keep());
    }

    #[test]
    fn stripping_below_minimum_rejects() {
        let p = ModerationPolicy::default();
        let text = format!("{} revised version: {}", words(30), words(30));
        let v = moderate_machine(&machine(&text), &p);
        assert_eq!(v.rejection().unwrap().rule, RejectRule::MinTokens);
    }

    #[test]
    fn truncation_back_traces_to_period() {
        assert_eq!(truncate_to_sentence("A b. C d e", 4).unwrap(), "A b.");
        assert_eq!(truncate_to_sentence("One two. Three.", 10).unwrap(), "One two. Three.");
        let r = truncate_to_sentence("no periods here", 3).unwrap_err();
        assert_eq!(r.rule, RejectRule::NoSentenceBoundary);
        assert!(truncate_to_sentence("anything.", 0).is_err());
    }

    #[test]
    fn moderate_dispatches_and_truncates_machine_text() {
        let p = ModerationPolicy { max_tokens: 55, ..ModerationPolicy::default() };
        let text = format!("{}. trailing words without end", words(52));
        let kept = moderate(&machine(&text), &p).kept().unwrap();
        assert!(kept.text.ends_with('.'));
        assert_eq!(kept.word_count(), 52);
    }
}

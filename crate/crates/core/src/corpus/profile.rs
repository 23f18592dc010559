use alloc::collections::BTreeMap;
use alloc::string::String;

use super::{count_keyword, Document};

/// Case-insensitive whole-word counts of each keyword summed over `corpus`.
/// Every keyword appears in the result, with zero when absent.
pub fn keyword_profile(corpus: &[Document], keywords: &[String]) -> BTreeMap<String, u64> {
    keywords
        .iter()
        .map(|kw| {
            let n = corpus.iter().map(|d| count_keyword(&d.text, kw)).sum();
            (kw.clone(), n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    fn kws(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn counts_whole_words() {
        let docs = vec![Document::new("1", "significant Significant enhance enhanced", "gen")];
        let p = keyword_profile(&docs, &kws(&["significant", "enhance", "delve"]));
        assert_eq!(p["significant"], 2);
        assert_eq!(p["enhance"], 1);
        assert_eq!(p["delve"], 0);
    }

    #[test]
    fn empty_corpus_is_all_zero() {
        let p = keyword_profile(&[], &kws(&["a", "b"]));
        assert_eq!(p.values().sum::<u64>(), 0);
        assert_eq!(p.len(), 2);
    }
}

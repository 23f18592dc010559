use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Document};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub test: Vec<Document>,
    pub seed: u64,
    pub ratio: f64,
}

/// Seeded stratified split. Each label contributes `floor(ratio * n)` documents
/// to `train` and the rest to `test`; both sides are shuffled afterwards.
pub fn split_train_test(corpus: &[Document], ratio: f64, seed: u64) -> Result<CorpusSplit, CorpusError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let mut by_class: BTreeMap<&str, Vec<&Document>> = BTreeMap::new();
    for doc in corpus {
        by_class.entry(doc.label.as_str()).or_default().push(doc);
    }
    let mut rng = seed::derived_rng(seed, "split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut docs) in by_class {
        if docs.len() < 2 {
            return Err(CorpusError::ClassTooSmall { class: class.to_string(), count: docs.len() });
        }
        docs.shuffle(&mut rng);
        let n_train = crate::math::floor(ratio * docs.len() as f64 + 1e-9) as usize;
        let (a, b) = docs.split_at(n_train);
        train.extend(a.iter().map(|d| (*d).clone()));
        test.extend(b.iter().map(|d| (*d).clone()));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(CorpusSplit { train, test, seed, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn corpus(human: usize, machine: usize) -> Vec<Document> {
        (0..human)
            .map(|i| Document::new(format!("h{i}"), "x", "human"))
            .chain((0..machine).map(|i| Document::new(format!("m{i}"), "y", "gen")))
            .collect()
    }

    #[test]
    fn stratified_counts() {
        let s = split_train_test(&corpus(50, 50), 0.8, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
        let h = s.train.iter().filter(|d| d.label.is_human()).count();
        assert_eq!(h, 40);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let c = corpus(30, 20);
        assert_eq!(split_train_test(&c, 0.8, 7).unwrap(), split_train_test(&c, 0.8, 7).unwrap());
        assert_ne!(split_train_test(&c, 0.8, 7).unwrap().train, split_train_test(&c, 0.8, 8).unwrap().train);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(split_train_test(&corpus(5, 5), 1.0, 0), Err(CorpusError::InvalidRatio(1.0)));
        assert!(split_train_test(&corpus(5, 5), 0.0, 0).is_err());
        let err = split_train_test(&corpus(5, 1), 0.5, 0).unwrap_err();
        assert!(matches!(err, CorpusError::ClassTooSmall { ref class, count: 1 } if class == "gen"));
    }
}

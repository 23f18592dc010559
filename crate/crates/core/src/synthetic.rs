//! Seeded synthetic corpora with known structure, for protocol tests and
//! desk-scale reproductions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::corpus::Document;
use crate::seed::{self, Rng};

/// Documents plus a reference text for fitting the unigram backend. Every word
/// of every document occurs in the reference text.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub reference_text: String,
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn repeat_into(out: &mut Vec<String>, vocab: &[String], times: usize) {
    for _ in 0..times {
        out.extend(vocab.iter().cloned());
    }
}

fn sample_doc(rng: &mut Rng, vocab: &[String], len: usize) -> String {
    (0..len).map(|_| vocab.choose(rng).expect("non-empty vocabulary").as_str()).collect::<Vec<_>>().join(" ")
}

/// Human and machine documents over disjoint vocabularies. Machine words are
/// five times as frequent as human words in the reference text, so their
/// log-likelihood is higher.
pub fn disjoint_vocabulary(per_class: usize, doc_len: usize, seed: u64) -> SyntheticCorpus {
    let human = words("hw", 40);
    let machine = words("mw", 40);
    let mut rng = seed::derived_rng(seed, "disjoint");
    let mut documents = Vec::with_capacity(2 * per_class);
    for i in 0..per_class {
        documents.push(Document::new(format!("h{i}"), sample_doc(&mut rng, &human, doc_len), "human"));
        documents.push(Document::new(format!("m{i}"), sample_doc(&mut rng, &machine, doc_len), "gen"));
    }
    let mut reference = Vec::new();
    repeat_into(&mut reference, &human, 1);
    repeat_into(&mut reference, &machine, 5);
    SyntheticCorpus { documents, reference_text: reference.join(" ") }
}

/// Both classes draw from one Zipf-like vocabulary. Human text mixes in
/// uniform draws (lower likelihood); machine text over-uses a small random set
/// of marker words. The likelihood shift separates the classes only partly
/// while the markers are easy for a bag-of-words model.
pub fn overlapping_vocabulary(per_class: usize, doc_len: usize, seed: u64) -> SyntheticCorpus {
    const V: usize = 200;
    let vocab = words("w", V);
    let mut reference = Vec::new();
    // Word i occurs ceil(40 / (i + 1)) times.
    let counts: Vec<usize> = (0..V).map(|i| 40usize.div_ceil(i + 1)).collect();
    for (w, &c) in vocab.iter().zip(&counts) {
        for _ in 0..c {
            reference.push(w.clone());
        }
    }
    let mut rng = seed::derived_rng(seed, "overlap");
    let mut markers: Vec<String> = vocab.clone();
    markers.shuffle(&mut rng);
    markers.truncate(12);

    let mut documents = Vec::with_capacity(2 * per_class);
    for i in 0..per_class {
        let human: Vec<&str> = (0..doc_len)
            .map(|_| {
                if rng.random_bool(0.35) {
                    vocab.choose(&mut rng).unwrap().as_str()
                } else {
                    reference.choose(&mut rng).unwrap().as_str()
                }
            })
            .collect();
        documents.push(Document::new(format!("h{i}"), human.join(" "), "human"));
        let machine: Vec<&str> = (0..doc_len)
            .map(|_| {
                if rng.random_bool(0.25) {
                    markers.choose(&mut rng).unwrap().as_str()
                } else {
                    reference.choose(&mut rng).unwrap().as_str()
                }
            })
            .collect();
        documents.push(Document::new(format!("m{i}"), machine.join(" "), "gen"));
    }
    SyntheticCorpus { documents, reference_text: reference.join(" ") }
}

/// Two domains whose likelihood scales differ. Reference counts per word:
/// domain `a` human 1 and machine 8, domain `b` human 8 and machine 60, and
/// shared filler words 3. Each document is about 70% class words and 30%
/// filler. The machine text of `a` and the human text of `b` have the same
/// likelihood profile, so a threshold calibrated on one domain fails on the
/// other while the pooled data still favors the larger domain's threshold.
pub fn shifted_domains(per_class_a: usize, per_class_b: usize, doc_len: usize, seed: u64) -> (BTreeMap<String, Vec<Document>>, String) {
    let tiers = [("ah", 1usize), ("am", 8), ("bh", 8), ("bm", 60)];
    let vocab: Vec<Vec<String>> = tiers.iter().map(|(p, _)| words(p, 30)).collect();
    let filler = words("cw", 30);
    let mut reference = Vec::new();
    for (v, (_, count)) in vocab.iter().zip(&tiers) {
        repeat_into(&mut reference, v, *count);
    }
    repeat_into(&mut reference, &filler, 3);

    let mut rng = seed::derived_rng(seed, "shifted");
    let mut make = |domain: &str, human: &[String], machine: &[String], n: usize| {
        let mut docs = Vec::with_capacity(2 * n);
        for i in 0..n {
            for (label, class_vocab) in [("human", human), ("gen", machine)] {
                let text: Vec<&str> = (0..doc_len)
                    .map(|_| {
                        let pool = if rng.random_bool(0.3) { &filler[..] } else { class_vocab };
                        pool.choose(&mut rng).unwrap().as_str()
                    })
                    .collect();
                docs.push(Document::new(format!("{domain}-{label}-{i}"), text.join(" "), label));
            }
        }
        docs
    };
    let mut corpora = BTreeMap::new();
    corpora.insert("a".into(), make("a", &vocab[0], &vocab[1], per_class_a));
    corpora.insert("b".into(), make("b", &vocab[2], &vocab[3], per_class_b));
    (corpora, reference.join(" "))
}

/// Labels used by [`gaussian_attribution`]: `human`, then `gen1` .. `gen{k-1}`.
pub fn attribution_labels(classes: usize) -> Vec<String> {
    (0..classes).map(|i| if i == 0 { "human".into() } else { format!("gen{i}") }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub classes: usize,
    pub per_class: usize,
    pub vocab: usize,
    pub doc_len: usize,
    /// Word-index standard deviation around each class center.
    pub spread: f64,
    /// Centers, one per class, as fractions of the vocabulary.
    pub centers: Vec<f64>,
}

impl Default for GaussianSpec {
    fn default() -> Self {
        GaussianSpec {
            classes: 6,
            per_class: 300,
            vocab: 600,
            doc_len: 40,
            spread: 60.0,
            // The last class sits close to class 3 so a naive update drifts.
            centers: alloc::vec![0.08, 0.25, 0.42, 0.59, 0.92, 0.66],
        }
    }
}

/// Attribution corpus where class `c` draws word indices from a normal
/// distribution around its center.
pub fn gaussian_attribution(spec: &GaussianSpec, seed: u64) -> Vec<Document> {
    let labels = attribution_labels(spec.classes);
    let vocab = words("v", spec.vocab);
    let mut rng = seed::derived_rng(seed, "gaussian");
    let mut docs = Vec::with_capacity(spec.classes * spec.per_class);
    for (c, label) in labels.iter().enumerate() {
        let center = spec.centers.get(c).copied().unwrap_or((c as f64 + 0.5) / spec.classes as f64) * spec.vocab as f64;
        let dist = Normal::new(center, spec.spread).expect("positive spread");
        for i in 0..spec.per_class {
            let text: Vec<&str> = (0..spec.doc_len)
                .map(|_| {
                    let x = crate::math::floor(dist.sample(&mut rng) + 0.5);
                    vocab[x.clamp(0.0, (spec.vocab - 1) as f64) as usize].as_str()
                })
                .collect();
            docs.push(Document::new(format!("{label}-{i}"), text.join(" "), label.as_str()));
        }
    }
    docs
}

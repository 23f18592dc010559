use mgtbench_core::corpus::{moderate, Document, ModerationPolicy, Verdict};
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    label: String,
    parts: Vec<(String, usize)>,
    #[serde(default)]
    policy: Option<serde_json::Value>,
    verdict: String,
    rule: Option<String>,
    detail: Option<String>,
    output: Option<Vec<(String, usize)>>,
}

fn assemble(parts: &[(String, usize)]) -> String {
    parts.iter().map(|(s, n)| s.repeat(*n)).collect()
}

#[test]
fn golden_cases() {
    let cases: Vec<Case> = include_str!("data/moderation_golden.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(cases.len(), 30);
    for case in cases {
        let policy: ModerationPolicy = match &case.policy {
            Some(v) => serde_json::from_value(v.clone()).unwrap(),
            None => ModerationPolicy::default(),
        };
        let doc = Document::new(case.name.clone(), assemble(&case.parts), case.label.as_str());
        match moderate(&doc, &policy) {
            Verdict::Keep(kept) => {
                assert_eq!(case.verdict, "keep", "{} was kept", case.name);
                let expected = assemble(case.output.as_deref().expect("keep cases list their output"));
                assert_eq!(kept.text, expected, "{}", case.name);
                // Moderation is idempotent on its own output.
                assert_eq!(moderate(&kept, &policy), Verdict::Keep(kept.clone()), "{}", case.name);
            }
            Verdict::Reject(r) => {
                assert_eq!(case.verdict, "reject", "{} was rejected: {r:?}", case.name);
                assert_eq!(Some(r.rule.as_str()), case.rule.as_deref(), "{}", case.name);
                assert_eq!(Some(r.detail.as_str()), case.detail.as_deref(), "{}", case.name);
            }
        }
    }
}

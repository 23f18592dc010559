//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mgtbench::pipeline::{moderate_corpus, SplitMode};
use mgtbench_core::bench::{run_cil, run_few_shot, run_in_distribution, run_transfer, Axis, Env, ExperimentConfig, Registry};
use mgtbench_core::continual::{cil_update, CILState, ExemplarStore, Technique};
use mgtbench_core::corpus::{moderate, Document, ModerationPolicy, Verdict};
use mgtbench_core::decision::{calibrate_threshold, Direction};
use mgtbench_core::detectors::{gltr_features, Backends, MetricDetector, MetricOptions};
use mgtbench_core::metrics::Task;
use mgtbench_core::neural::{train_supervised, Distillation, EncoderSpec, LabeledText, NeuralClassifier, TrainConfig};
use mgtbench_core::scorer::{ScorerBackend, TokenScores, UnigramBackend};
use mgtbench_core::synthetic::{disjoint_vocabulary, gaussian_attribution, overlapping_vocabulary, shifted_domains, GaussianSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    check((got - want).abs() <= tol, || format!("{name}: got {got}, want {want} ± {tol}"))
}

fn within(name: &str, t: Instant, limit_s: f64) -> Result<f64, String> {
    let s = t.elapsed().as_secs_f64();
    check(s < limit_s, || format!("{name} took {s:.1}s, limit {limit_s}s"))?;
    Ok(s)
}

fn detector_math() -> Outcome {
    let t = Instant::now();
    let b = UnigramBackend::from_text("a a b").unwrap();
    let one = Backends::single(&b);
    let run = |d: MetricDetector, text: &str| d.compute(&one, text, MetricOptions::default()).map(|f| f.values).map_err(|e| e.to_string());
    let (pa, pb) = (0.6f64, 0.4f64);
    let h = -(pa * pa.ln() + pb * pb.ln());
    const TOL: f64 = 1e-6;

    let ll = run(MetricDetector::LL, "a b")?[0];
    close("LL exact", ll, (pa.ln() + pb.ln()) / 2.0, TOL)?;
    close("LL printed", ll, -0.7136, 5e-5)?;
    close("Rank", run(MetricDetector::Rank, "a b")?[0], 1.5, TOL)?;
    close("LogRank", run(MetricDetector::LogRank, "a b")?[0], 2f64.ln() / 2.0, TOL)?;
    close("LRR", run(MetricDetector::LRR, "a b")?[0], -(pa.ln() + pb.ln()) / 2f64.ln(), TOL)?;
    let s = TokenScores::new(vec!["x".into(), "y".into()], vec![-1.0, -1.0], vec![3, 3], vec![0.0, 0.0]).unwrap();
    let lrr = mgtbench_core::detectors::lrr_score(&s).map_err(|e| e.to_string())?;
    close("LRR exact", lrr, 1.0 / 3f64.ln(), TOL)?;
    close("LRR printed", lrr, 0.9102, 5e-5)?;
    close("Entropy", run(MetricDetector::Entropy, "a b a")?[0], h, TOL)?;
    let g = run(MetricDetector::GLTR, "a b")?;
    check(g == [1.0, 0.0, 0.0, 0.0], || format!("GLTR {g:?}"))?;

    let fdg = run(MetricDetector::FastDetectGPT, "a")?[0];
    let var = pa * pa.ln().powi(2) + pb * pb.ln().powi(2) - h * h;
    close("Fast-DetectGPT exact", fdg, (pa.ln() + h) / var.sqrt(), TOL)?;
    close("Fast-DetectGPT printed", fdg, 0.818, 2e-3)?;
    let bino = run(MetricDetector::Binoculars, "a")?[0];
    close("Binoculars exact", bino, -pa.ln() / h, TOL)?;
    close("Binoculars printed", bino, 0.759, 5e-4)?;
    let secs = within("detector suite", t, 5.0)?;
    Ok(format!("8 detectors match closed forms within 1e-6 ({secs:.3}s)"))
}

fn brute_force_f1(scores: &[f64], machine: &[bool]) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![f64::NEG_INFINITY, f64::INFINITY];
    candidates.extend(sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let mut best = 0.0f64;
    for &t in &candidates {
        for higher in [true, false] {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for (&s, &m) in scores.iter().zip(machine) {
                let pred = if higher { s > t } else { s < t };
                match (pred, m) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    _ => {}
                }
            }
            let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
            best = best.max(f1);
        }
    }
    best
}

fn calibration_optimality() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cases = 0;
    while cases < 200 {
        let n = rng.random_range(2..=50);
        let coarse = rng.random_bool(0.5);
        let scores: Vec<f64> =
            (0..n).map(|_| if coarse { rng.random_range(0..6) as f64 } else { rng.random_range(-3.0..3.0) }).collect();
        let machine: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if machine.iter().all(|&m| m) || machine.iter().all(|&m| !m) {
            continue;
        }
        let rule = calibrate_threshold("x", &scores, &machine, None).map_err(|e| e.to_string())?;
        let oracle = brute_force_f1(&scores, &machine);
        check(rule.train_f1 == oracle, || format!("case {cases}: calibrated {} vs brute force {oracle}", rule.train_f1))?;
        let applied = brute_force_f1(
            &scores.iter().map(|&s| if rule.apply(s) { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
            &machine,
        );
        check(applied >= rule.train_f1, || format!("case {cases}: rule does not reproduce its F1"))?;
        let fixed = calibrate_threshold("x", &scores, &machine, Some(Direction::HigherIsMachine)).map_err(|e| e.to_string())?;
        check(fixed.train_f1 <= rule.train_f1, || format!("case {cases}: fixed direction beats free search"))?;
        cases += 1;
    }
    let secs = within("calibration", t, 10.0)?;
    Ok(format!("200 cases equal the brute-force optimum ({secs:.2}s)"))
}

fn normalization_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..1000 {
        let n = rng.random_range(1..200);
        let ranks: Vec<u32> = (0..n).map(|_| rng.random_range(1..20_000)).collect();
        let s = TokenScores::new((0..n).map(|j| format!("t{j}")).collect(), vec![-1.0; n], ranks, vec![0.0; n]).unwrap();
        let f = gltr_features(&s).map_err(|e| e.to_string())?;
        let total: f64 = f.values.iter().sum();
        close(&format!("GLTR sequence {i}"), total, 1.0, 1e-12)?;
    }
    for i in 0..200 {
        let words: Vec<String> = (0..rng.random_range(1..60)).map(|_| format!("w{}", rng.random_range(0..40))).collect();
        let b = UnigramBackend::from_text(&words.join(" ")).unwrap();
        let ctx: Vec<String> = words.iter().take(3).cloned().collect();
        let d = b.next_token_distribution(&ctx).map_err(|e| e.to_string())?;
        close(&format!("distribution {i}"), d.probs().iter().sum(), 1.0, 1e-9)?;
    }
    Ok("1000 GLTR vectors sum to 1; 200 distributions sum to 1 ± 1e-9".into())
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let spec = EncoderSpec { buckets: 8, hidden: 3, hash_seed: 5, init_scale: 0.8 };
    let mut worst = 0.0f64;
    for instance in 0..100u64 {
        let k = rng.random_range(2..5);
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let mut model = NeuralClassifier::new(spec, classes.clone(), instance).unwrap();
        for i in 0..model.num_parameters() {
            model.set_parameter(i, rng.random_range(-1.0..1.0));
        }
        let data: Vec<LabeledText> = (0..rng.random_range(1..6))
            .map(|_| {
                let text: Vec<String> = (0..rng.random_range(1..8)).map(|_| format!("t{}", rng.random_range(0..12))).collect();
                LabeledText::new(text.join(" "), classes[rng.random_range(0..k)].clone())
            })
            .collect();
        let weights: Option<Vec<f64>> = (instance % 3 == 1).then(|| (0..k).map(|_| rng.random_range(0.2..2.0)).collect());
        let teacher = (instance % 2 == 0 && k > 2).then(|| {
            let mut t = NeuralClassifier::new(spec, classes[..k - 1].to_vec(), instance + 1000).unwrap();
            for i in 0..t.num_parameters() {
                t.set_parameter(i, rng.random_range(-1.0..1.0));
            }
            t
        });
        let distill = || teacher.as_ref().map(|t| Distillation { teacher: t, lambda: 0.7, temperature: 2.0 });
        let loss = |m: &NeuralClassifier| m.loss_and_gradient(&data, weights.as_deref(), distill()).unwrap();
        let analytic = loss(&model).1;
        let h = 1e-5;
        let mut numeric = vec![0.0; model.num_parameters()];
        for (i, g) in numeric.iter_mut().enumerate() {
            let x = model.parameter(i);
            model.set_parameter(i, x + h);
            let up = loss(&model).0;
            model.set_parameter(i, x - h);
            let down = loss(&model).0;
            model.set_parameter(i, x);
            *g = (up - down) / (2.0 * h);
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic) + norm(&numeric);
        let err = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
        worst = worst.max(err);
        check(err <= 1e-4, || format!("instance {instance}: relative error {err:e}"))?;
    }
    Ok(format!("100 instances, worst relative error {worst:.1e}"))
}

#[derive(serde::Deserialize)]
struct GoldenCase {
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

fn moderation_golden() -> Outcome {
    let assemble = |parts: &[(String, usize)]| parts.iter().map(|(s, n)| s.repeat(*n)).collect::<String>();
    let cases: Vec<GoldenCase> = include_str!("../../core/tests/data/moderation_golden.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    check(cases.len() == 30, || format!("{} golden cases", cases.len()))?;
    for c in &cases {
        let policy: ModerationPolicy = match &c.policy {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| e.to_string())?,
            None => ModerationPolicy::default(),
        };
        let doc = Document::new(c.name.clone(), assemble(&c.parts), c.label.as_str());
        let via_pipeline = moderate_corpus(std::slice::from_ref(&doc), &policy, SplitMode::Auto);
        match moderate(&doc, &policy) {
            Verdict::Keep(kept) => {
                check(c.verdict == "keep", || format!("{}: kept, expected reject", c.name))?;
                let want = assemble(c.output.as_deref().unwrap_or_default());
                check(kept.text == want, || format!("{}: output differs", c.name))?;
                check(via_pipeline.kept == [kept.clone()], || format!("{}: pipeline disagrees", c.name))?;
                check(moderate(&kept, &policy) == Verdict::Keep(kept.clone()), || format!("{}: not idempotent", c.name))?;
            }
            Verdict::Reject(r) => {
                check(c.verdict == "reject", || format!("{}: rejected ({r:?}), expected keep", c.name))?;
                check(Some(r.rule.as_str()) == c.rule.as_deref(), || format!("{}: rule {}", c.name, r.rule.as_str()))?;
                check(Some(r.detail.as_str()) == c.detail.as_deref(), || format!("{}: detail {:?}", c.name, r.detail))?;
                check(via_pipeline.rejected == [(c.name.clone(), r.clone())], || format!("{}: pipeline disagrees", c.name))?;
            }
        }
    }
    Ok("30 golden cases reproduce exactly".into())
}

fn in_distribution() -> Outcome {
    let t = Instant::now();
    let r = Registry::standard();
    let cfg = ExperimentConfig::desk();
    let disjoint = disjoint_vocabulary(500, 60, 1);
    let b = UnigramBackend::from_text(&disjoint.reference_text).unwrap();
    let env = Env::new(Backends::single(&b));
    let mut f1 = BTreeMap::new();
    for d in ["LL", "Supervised"] {
        let rep = run_in_distribution(&r, d, &disjoint.documents, &cfg, &env).map_err(|e| e.to_string())?;
        check(rep.f1 >= 0.99, || format!("disjoint {d}: F1 {}", rep.f1))?;
        f1.insert(format!("disjoint {d}"), rep.f1);
    }
    let overlap = overlapping_vocabulary(500, 60, 1);
    let b = UnigramBackend::from_text(&overlap.reference_text).unwrap();
    let env = Env::new(Backends::single(&b));
    let ll = run_in_distribution(&r, "LL", &overlap.documents, &cfg, &env).map_err(|e| e.to_string())?.f1;
    let sup = run_in_distribution(&r, "Supervised", &overlap.documents, &cfg, &env).map_err(|e| e.to_string())?.f1;
    check(sup > ll, || format!("overlap: supervised {sup} vs LL {ll}"))?;
    let secs = within("in-distribution", t, 120.0)?;
    Ok(format!(
        "disjoint LL {:.3} / Supervised {:.3}; overlap Supervised {sup:.3} > LL {ll:.3} ({secs:.1}s)",
        f1["disjoint LL"], f1["disjoint Supervised"]
    ))
}

fn transfer_and_few_shot() -> Outcome {
    let (corpora, reference) = shifted_domains(50, 500, 60, 1);
    let b = UnigramBackend::from_text(&reference).unwrap();
    let env = Env::new(Backends::single(&b));
    let r = Registry::standard();
    let cfg = ExperimentConfig::desk();
    let m = run_transfer(&r, "LL", &corpora, Axis::Domain, &cfg, &env).map_err(|e| e.to_string())?;
    let f1 = m.f1_grid();
    for s in 0..2 {
        for t in 0..2 {
            if s != t {
                let diag = f1[s][s].min(f1[t][t]);
                check(f1[s][t] <= diag - 0.05, || format!("cell {s}->{t}: {} vs diagonal {diag}", f1[s][t]))?;
            }
        }
    }
    let in_dist = m.cell("b", "b").unwrap().f1;
    let k = corpora["b"].iter().filter(|d| d.label.is_human()).count() * 4 / 5;
    let few = run_few_shot(&r, "LL", &corpora["a"], &corpora["b"], k, &cfg, &env).map_err(|e| e.to_string())?.f1;
    check((in_dist - few).abs() <= 0.02, || format!("few-shot {few} vs in-distribution {in_dist}"))?;
    Ok(format!("F1 grid {f1:.3?}; few-shot k={k} {few:.3} vs in-distribution {in_dist:.3}"))
}

fn class_incremental() -> Outcome {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::desk();
    cfg.task = Task::Attribution;
    let docs = gaussian_attribution(&GaussianSpec::default(), 1);
    let run = run_cil(&docs, &["gen5".to_string()], &Technique::ALL, &cfg).map_err(|e| e.to_string())?;
    let normal = run.update(Technique::Normal).unwrap();
    let drop = run.base.old_macro_f1 - normal.old_macro_f1;
    check(drop >= 0.10, || format!("(a) forgetting {drop:.3} < 0.10"))?;
    for tech in [Technique::ICaRL, Technique::BiC, Technique::Combine] {
        let gain = run.update(tech).unwrap().report.macro_f1 - normal.report.macro_f1;
        check(gain >= 0.05, || format!("(b) {tech} gains {gain:.3} over Normal"))?;
    }
    let best = run.updates.iter().map(|u| u.report.macro_f1).fold(f64::MIN, f64::max);
    check(run.joint.report.macro_f1 > best, || format!("(c) joint {} vs best update {best}", run.joint.report.macro_f1))?;
    check(run.base.head_dim == 5 && normal.head_dim == 6, || "head dimensions".into())?;

    let data: Vec<LabeledText> = gaussian_attribution(&GaussianSpec { per_class: 120, ..GaussianSpec::default() }, 5)
        .iter()
        .map(|d| LabeledText::new(d.text.clone(), d.label.as_str()))
        .collect();
    let (old, new): (Vec<_>, Vec<_>) = data.into_iter().partition(|d| d.label != "gen5");
    let base_cfg = TrainConfig { learning_rate: cfg.cil.base_learning_rate, batch_size: cfg.cil.batch_size, epochs: 1, ..TrainConfig::default() };
    let model = train_supervised(&old, &base_cfg, cfg.encoder).map_err(|e| e.to_string())?;
    let state = CILState::new(model.clone(), ExemplarStore::build(&model, &old, 20, cfg.cil.strategy, 1).map_err(|e| e.to_string())?);
    cfg.cil.lwf.lambda = 0.0;
    let a = cil_update(&state, &new, Technique::Normal, &cfg.cil).map_err(|e| e.to_string())?;
    let b = cil_update(&state, &new, Technique::LwF, &cfg.cil).map_err(|e| e.to_string())?;
    check(a.model == b.model && a.last_log == b.last_log, || "(d) LwF with lambda 0 differs from Normal".into())?;
    let secs = within("CIL suite", t, 300.0)?;
    let f = |tech| run.update(tech).unwrap().report.macro_f1;
    Ok(format!(
        "old-class drop {drop:.3}; macro-F1 normal {:.3} icarl {:.3} bic {:.3} combine {:.3} joint {:.3}; lambda-0 LwF identical ({secs:.1}s)",
        normal.report.macro_f1,
        f(Technique::ICaRL),
        f(Technique::BiC),
        f(Technique::Combine),
        run.joint.report.macro_f1
    ))
}

fn write_jsonl(path: &Path, docs: &[Document]) {
    let text: String = docs.iter().map(|d| serde_json::to_string(d).unwrap() + "\n").collect();
    std::fs::write(path, text).unwrap();
}

/// One full CLI pipeline in `dir`; returns every output file's bytes.
fn pipeline_run(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let (corpora, reference) = shifted_domains(30, 60, 40, 3);
    std::fs::write(dir.join("ref.txt"), &reference).unwrap();
    write_jsonl(&dir.join("a.jsonl"), &corpora["a"]);
    write_jsonl(&dir.join("b.jsonl"), &corpora["b"]);
    write_jsonl(&dir.join("cil.jsonl"), &gaussian_attribution(&GaussianSpec { per_class: 60, ..GaussianSpec::default() }, 2));
    std::fs::write(dir.join("desk.toml"), "preset = \"desk\"\n[experiment]\nseed = 99\n").unwrap();

    let steps: &[&[&str]] = &[
        &["ingest", "b.jsonl", "-o", "out/ingested.jsonl"],
        &["moderate", "out/ingested.jsonl", "--split", "human", "-o", "out/moderated.jsonl", "--rejections", "out/rejected.csv"],
        &["split", "out/ingested.jsonl", "--train", "out/train.jsonl", "--test", "out/test.jsonl"],
        &["score", "out/test.jsonl", "--features", "out/features.csv", "--cache", "cache", "--jobs", "3"],
        &["calibrate", "out/train.jsonl", "--detector", "LL", "-o", "out/ll.json"],
        &["eval", "b.jsonl", "--detector", "LL", "-o", "out/eval_ll.json"],
        &["eval", "b.jsonl", "--detector", "Supervised", "-o", "out/eval_sup.json"],
        &["eval", "b.jsonl", "--detector", "GLTR", "--decision", "logistic", "-o", "out/eval_gltr.json"],
        &["transfer", "a=a.jsonl", "b=b.jsonl", "--axis", "domain", "--detector", "LL", "-o", "out/transfer.json"],
        &["fewshot", "--source", "a.jsonl", "--target", "b.jsonl", "--k", "10", "--detector", "LL", "-o", "out/fewshot.json"],
        &["cil", "cil.jsonl", "--new", "gen5", "-o", "out/cil.json", "--manifest", "out/manifest.json"],
        &["report", "out/transfer.json", "--format", "csv", "-o", "out/transfer.csv"],
    ];
    for step in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_mgtbench"))
            .current_dir(dir)
            .args(["--config", "desk.toml", "--backend", "unigram:ref.txt"])
            .args(*step)
            .output()
            .map_err(|e| e.to_string())?;
        check(out.status.success(), || format!("{step:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    }
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir.join("out")).unwrap() {
        let p = entry.unwrap().path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = pipeline_run(d1.path())?;
    let b = pipeline_run(d2.path())?;
    check(a.keys().eq(b.keys()), || "different output files".into())?;
    for (name, bytes) in &a {
        check(&b[name] == bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} output files byte-identical across two CLI pipeline runs", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("detector math oracles", detector_math),
        ("threshold calibration optimality", calibration_optimality),
        ("GLTR and distribution normalization", normalization_invariants),
        ("classifier gradient check", gradient_check),
        ("moderation golden file", moderation_golden),
        ("in-distribution sanity", in_distribution),
        ("transfer degradation and few-shot recovery", transfer_and_few_shot),
        ("class-incremental suite", class_incremental),
        ("pipeline determinism", determinism),
    ];
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), outcome)) in criteria.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

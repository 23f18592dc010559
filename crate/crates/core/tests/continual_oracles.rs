use mgtbench_core::bench::{run_cil, ExperimentConfig};
use mgtbench_core::continual::{
    bic_correct, cil_update, expand_head, fit_bic_logits, herding, lwf_loss, weighted_ce, BiasCorrection, CILState,
    ExemplarStore, LwFConfig, Technique,
};
use mgtbench_core::math;
use mgtbench_core::metrics::Task;
use mgtbench_core::neural::{train_supervised, Distillation, EncoderSpec, LabeledText, NeuralClassifier, TrainConfig};
use mgtbench_core::synthetic::{gaussian_attribution, GaussianSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..8);
    (0..n).map(|_| format!("t{}", rng.random_range(0..12))).collect::<Vec<_>>().join(" ")
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = EncoderSpec { buckets: 8, hidden: 3, hash_seed: 5, init_scale: 0.8 };
    for instance in 0..100 {
        let k = rng.random_range(2..5);
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let mut model = NeuralClassifier::new(spec, classes.clone(), instance).unwrap();
        for i in 0..model.num_parameters() {
            model.set_parameter(i, rng.random_range(-1.0..1.0));
        }
        let data: Vec<LabeledText> =
            (0..rng.random_range(1..6)).map(|_| LabeledText::new(random_text(&mut rng), classes[rng.random_range(0..k)].clone())).collect();
        let weights: Option<Vec<f64>> = (instance % 3 == 1).then(|| (0..k).map(|_| rng.random_range(0.2..2.0)).collect());
        let teacher = (instance % 2 == 0 && k > 2).then(|| {
            let mut t = NeuralClassifier::new(spec, classes[..k - 1].to_vec(), instance + 1000).unwrap();
            for i in 0..t.num_parameters() {
                t.set_parameter(i, rng.random_range(-1.0..1.0));
            }
            t
        });
        let distill = || teacher.as_ref().map(|t| Distillation { teacher: t, lambda: 0.7, temperature: 2.0 });

        let (_, analytic) = model.loss_and_gradient(&data, weights.as_deref(), distill()).unwrap();
        let h = 1e-5;
        let mut numeric = vec![0.0; model.num_parameters()];
        for (i, g) in numeric.iter_mut().enumerate() {
            let x = model.parameter(i);
            model.set_parameter(i, x + h);
            let (up, _) = model.loss_and_gradient(&data, weights.as_deref(), distill()).unwrap();
            model.set_parameter(i, x - h);
            let (down, _) = model.loss_and_gradient(&data, weights.as_deref(), distill()).unwrap();
            model.set_parameter(i, x);
            *g = (up - down) / (2.0 * h);
        }
        let err = rel_error(&analytic, &numeric);
        assert!(err <= 1e-4, "instance {instance}: relative error {err}");
    }
}

#[test]
fn lwf_two_class_closed_form() {
    let cfg = LwFConfig { lambda: 1.0, temperature: 1.0 };
    let new = [0.0, 1.0, 10.0];
    let old = [1.0, 0.0];
    let ce = -(10.0 - (1f64.exp() + 10f64.exp() + 1.0f64).ln());
    let p = [1f64.exp() / (1f64.exp() + 1.0), 1.0 / (1f64.exp() + 1.0)];
    let q = [1.0 / (1f64.exp() + 1.0), 1f64.exp() / (1f64.exp() + 1.0)];
    let kl = p[0] * (p[0] / q[0]).ln() + p[1] * (p[1] / q[1]).ln();
    assert!((lwf_loss(&new, &old, 2, &cfg).unwrap() - (ce + kl)).abs() < 1e-12);
    let zero = LwFConfig { lambda: 0.0, temperature: 2.0 };
    assert_eq!(lwf_loss(&new, &old, 2, &zero).unwrap(), -math::log_softmax(&new)[2]);
    assert!(lwf_loss(&[1.0, 0.0, 3.0], &old, 2, &cfg).unwrap() - -math::log_softmax(&[1.0, 0.0, 3.0])[2] < 1e-12);
}

#[test]
fn weighted_ce_examples() {
    let z = [0.3, -0.2];
    let ce = -math::log_softmax(&z)[0];
    assert!((weighted_ce(&z, 0, &[5, 5]).unwrap() - ce).abs() < 1e-15);
    assert!((weighted_ce(&z, 0, &[1, 3]).unwrap() - 2.0 * ce).abs() < 1e-12);
    assert_eq!(weighted_ce(&z, 1, &[2, 6]).unwrap(), weighted_ce(&z, 1, &[1, 3]).unwrap());
}

fn greedy_herding(x: &[Vec<f64>], budget: usize) -> Vec<usize> {
    let d = x[0].len();
    let mu: Vec<f64> = (0..d).map(|j| x.iter().map(|v| v[j]).sum::<f64>() / x.len() as f64).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut sum = vec![0.0; d];
    while chosen.len() < budget.min(x.len()) {
        let m = (chosen.len() + 1) as f64;
        let best = (0..x.len())
            .filter(|i| !chosen.contains(i))
            .min_by(|&a, &b| {
                let dist = |i: usize| (0..d).map(|j| (mu[j] - (sum[j] + x[i][j]) / m).powi(2)).sum::<f64>();
                dist(a).total_cmp(&dist(b))
            })
            .unwrap();
        for j in 0..d {
            sum[j] += x[best][j];
        }
        chosen.push(best);
    }
    chosen
}

#[test]
fn herding_matches_brute_force_and_extends_prefixes() {
    assert_eq!(herding(&[vec![0.0], vec![1.0], vec![2.0]], 1), vec![1]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let n = rng.random_range(1..25);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let greedy = greedy_herding(&x, n);
        for b in 1..n {
            assert_eq!(herding(&x, b), greedy[..b]);
        }
        assert_eq!(herding(&x, n + 10), (0..n).collect::<Vec<_>>());
    }
}

fn ce(logits: &[Vec<f64>], targets: &[usize], bc: &BiasCorrection) -> f64 {
    logits.iter().zip(targets).map(|(z, &t)| -math::log_softmax(&bic_correct(z, bc).unwrap())[t]).sum::<f64>() / targets.len() as f64
}

fn grid_best(logits: &[Vec<f64>], targets: &[usize], old_n: usize) -> BiasCorrection {
    let mut best = (f64::INFINITY, BiasCorrection { alpha: 1.0, beta: 0.0, old_n });
    for a in 0..=100 {
        for b in 0..=400 {
            let bc = BiasCorrection { alpha: 0.5 + a as f64 * 0.01, beta: -4.0 + b as f64 * 0.02, old_n };
            let v = ce(logits, targets, &bc);
            if v < best.0 {
                best = (v, bc);
            }
        }
    }
    best.1
}

fn symmetric_set(shift: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let ln3 = 3f64.ln();
    // Three new-class and one old-class example at [0, ln 3]; the reverse at
    // [0, -ln 3]. Without a shift the identity correction is optimal.
    let mut logits = vec![vec![0.0, ln3 + shift]; 4];
    logits.extend(vec![vec![0.0, -ln3 + shift]; 4]);
    (logits, vec![1, 1, 1, 0, 0, 0, 0, 1])
}

#[test]
fn bias_correction_on_unbiased_validation() {
    let (logits, targets) = symmetric_set(0.0);
    let fitted = fit_bic_logits(&logits, &targets, 1).unwrap();
    let identity = BiasCorrection { alpha: 1.0, beta: 0.0, old_n: 1 };
    assert!((ce(&logits, &targets, &fitted) - ce(&logits, &targets, &identity)).abs() <= 1e-6);
    let grid = grid_best(&logits, &targets, 1);
    assert!((grid.alpha - 1.0).abs() <= 0.01 && grid.beta.abs() <= 0.02);
    assert_eq!(fit_bic_logits(&logits, &targets, 1).unwrap(), fitted);
}

#[test]
fn bias_correction_removes_inflation() {
    let c = 2.5;
    let (logits, targets) = symmetric_set(c);
    let fitted = fit_bic_logits(&logits, &targets, 1).unwrap();
    let grid = grid_best(&logits, &targets, 1);
    assert!(ce(&logits, &targets, &fitted) <= ce(&logits, &targets, &grid) + 1e-9);
    assert!((grid.beta + c * grid.alpha).abs() <= 0.03, "{grid:?}");
    assert!((fitted.beta + c * fitted.alpha).abs() <= 0.03, "{fitted:?}");
    assert!((fitted.alpha - grid.alpha).abs() <= 0.01 && (fitted.beta - grid.beta).abs() <= 0.03);
}

#[test]
fn expanded_head_keeps_old_logits() {
    let spec = EncoderSpec { buckets: 64, hidden: 4, hash_seed: 0, init_scale: 1.0 };
    let data: Vec<LabeledText> = (0..5).flat_map(|c| (0..4).map(move |i| LabeledText::new(format!("c{c} x{i}"), format!("gen{c}")))).collect();
    let model = train_supervised(&data, &TrainConfig { learning_rate: 0.5, ..TrainConfig::default() }, spec).unwrap();
    let six = expand_head(&model, "gen5").unwrap();
    let seven = expand_head(&six, "gen6").unwrap();
    assert_eq!(seven.classes[5..], ["gen5".to_string(), "gen6".to_string()]);
    for d in &data {
        let z = model.predict_logits(&d.text);
        let z7 = seven.predict_logits(&d.text);
        assert_eq!(z7[..5], z[..]);
        assert_eq!(z7[5..], [0.0, 0.0]);
    }
    assert!(expand_head(&model, "gen0").is_err());
}

fn desk_attribution() -> (Vec<LabeledText>, Vec<LabeledText>, ExperimentConfig) {
    let docs = gaussian_attribution(&GaussianSpec { per_class: 120, ..GaussianSpec::default() }, 5);
    let data: Vec<LabeledText> = docs.iter().map(|d| LabeledText::new(d.text.clone(), d.label.as_str())).collect();
    let (old, new): (Vec<_>, Vec<_>) = data.into_iter().partition(|d| d.label != "gen5");
    let mut cfg = ExperimentConfig::desk();
    cfg.task = Task::Attribution;
    (old, new, cfg)
}

#[test]
fn lwf_without_distillation_is_normal() {
    let (old, new, mut cfg) = desk_attribution();
    let base_cfg = TrainConfig { learning_rate: cfg.cil.base_learning_rate, batch_size: cfg.cil.batch_size, epochs: 1, ..TrainConfig::default() };
    let model = train_supervised(&old, &base_cfg, cfg.encoder).unwrap();
    let state = CILState::new(model.clone(), ExemplarStore::build(&model, &old, 20, cfg.cil.strategy, 1).unwrap());
    cfg.cil.lwf.lambda = 0.0;
    let normal = cil_update(&state, &new, Technique::Normal, &cfg.cil).unwrap();
    let lwf = cil_update(&state, &new, Technique::LwF, &cfg.cil).unwrap();
    assert_eq!(normal.model, lwf.model);
    assert_eq!(normal.last_log, lwf.last_log);
    assert_eq!(normal.stage, 1);
    assert_eq!(normal.classes().len(), 6);
    for technique in Technique::ALL {
        let s = cil_update(&state, &new, technique, &cfg.cil).unwrap();
        assert!(s.exemplars.counts().values().all(|&n| n <= 20));
    }
}

#[test]
fn icarl_with_unbounded_memory_matches_joint_training() {
    let mut cfg = ExperimentConfig::desk();
    cfg.task = Task::Attribution;
    cfg.cil.budget_per_class = 10_000;
    // Single corpora vary by a couple of points; compare the mean over five.
    let gaps: Vec<f64> = (1..=5)
        .map(|seed| {
            let docs = gaussian_attribution(&GaussianSpec::default(), seed);
            let run = run_cil(&docs, &["gen5".to_string()], &[Technique::ICaRL], &cfg).unwrap();
            run.joint.report.macro_f1 - run.updates[0].report.macro_f1
        })
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(mean.abs() <= 0.02, "{gaps:?}");
}

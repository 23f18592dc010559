use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DecisionError, Direction};

/// A calibrated scalar rule. Scores equal to the threshold map to human.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub detector: String,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub direction: Direction,
    pub train_f1: f64,
}

impl ThresholdRule {
    /// `true` when `score` is classified as machine text.
    pub fn apply(&self, score: f64) -> bool {
        match self.direction {
            Direction::HigherIsMachine => score > self.threshold,
            Direction::LowerIsMachine => score < self.threshold,
        }
    }
}

/// Machine-class F1, `2TP / (2TP + FP + FN)`, zero when there are no true positives.
pub fn binary_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Searches `-inf`, the midpoints between consecutive distinct scores and
/// `+inf` for the threshold maximizing machine-class F1 on the given data.
///
/// With `direction == None` both orientations are searched. Ties prefer the
/// smaller threshold, then `HigherIsMachine`. `machine[i]` marks machine text.
pub fn calibrate_threshold(
    detector: &str,
    scores: &[f64],
    machine: &[bool],
    direction: Option<Direction>,
) -> Result<ThresholdRule, DecisionError> {
    if scores.len() != machine.len() {
        return Err(DecisionError::LengthMismatch { scores: scores.len(), labels: machine.len() });
    }
    if let Some(row) = scores.iter().position(|s| s.is_nan()) {
        return Err(DecisionError::NonFinite { row });
    }
    let total_machine = machine.iter().filter(|&&m| m).count();
    if total_machine == 0 || total_machine == machine.len() {
        return Err(DecisionError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // prefix[k] = machine count among the k smallest scores.
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    prefix.push(0usize);
    for &i in &order {
        prefix.push(prefix.last().unwrap() + usize::from(machine[i]));
    }

    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    for w in sorted.windows(2) {
        if w[0] != w[1] {
            candidates.push(w[0] + (w[1] - w[0]) / 2.0);
        }
    }
    candidates.push(f64::INFINITY);

    let n = sorted.len();
    let directions: &[Direction] = match direction {
        Some(Direction::HigherIsMachine) => &[Direction::HigherIsMachine],
        Some(Direction::LowerIsMachine) => &[Direction::LowerIsMachine],
        None => &[Direction::HigherIsMachine, Direction::LowerIsMachine],
    };
    let mut best: Option<(f64, Direction, f64)> = None;
    for &t in &candidates {
        for &dir in directions {
            let (tp, predicted) = match dir {
                Direction::HigherIsMachine => {
                    let k = sorted.partition_point(|&s| s <= t);
                    (total_machine - prefix[k], n - k)
                }
                Direction::LowerIsMachine => {
                    let k = sorted.partition_point(|&s| s < t);
                    (prefix[k], k)
                }
            };
            let f1 = binary_f1(tp, predicted - tp, total_machine - tp);
            if best.is_none_or(|(_, _, b)| f1 > b) {
                best = Some((t, dir, f1));
            }
        }
    }
    let (threshold, direction, train_f1) = best.expect("candidate list is never empty");
    Ok(ThresholdRule { detector: detector.into(), threshold, direction, train_f1 })
}

/// JSON has no infinities, so they are written as the strings `"inf"` and `"-inf"`.
mod extended_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\" / \"-inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                    "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_midpoint() {
        let r = calibrate_threshold("LL", &[0.9, 0.8, 0.1, 0.2], &[true, true, false, false], None).unwrap();
        assert_eq!(r.direction, Direction::HigherIsMachine);
        assert!((r.threshold - 0.5).abs() < 1e-15);
        assert_eq!(r.train_f1, 1.0);
    }

    #[test]
    fn identical_scores_label_everything_machine() {
        let r = calibrate_threshold("LL", &[1.0, 1.0], &[true, false], None).unwrap();
        assert!((r.train_f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.threshold, f64::NEG_INFINITY);
        assert!(r.apply(1.0));
    }

    #[test]
    fn inverted_data_selects_lower() {
        let r = calibrate_threshold("Rank", &[0.1, 0.2, 0.9, 0.8], &[true, true, false, false], None).unwrap();
        assert_eq!(r.direction, Direction::LowerIsMachine);
        assert_eq!(r.train_f1, 1.0);
    }

    #[test]
    fn fixed_direction_is_respected() {
        let r = calibrate_threshold("x", &[0.1, 0.9], &[true, false], Some(Direction::HigherIsMachine)).unwrap();
        assert_eq!(r.direction, Direction::HigherIsMachine);
        assert!(r.train_f1 < 1.0);
    }

    #[test]
    fn equality_maps_to_human() {
        let rule = ThresholdRule { detector: "LL".into(), threshold: 0.5, direction: Direction::HigherIsMachine, train_f1: 1.0 };
        assert!(rule.apply(0.9));
        assert!(!rule.apply(0.1));
        assert!(!rule.apply(0.5));
    }

    #[test]
    fn errors() {
        assert_eq!(calibrate_threshold("x", &[1.0], &[true, false], None), Err(DecisionError::LengthMismatch { scores: 1, labels: 2 }));
        assert_eq!(calibrate_threshold("x", &[1.0, 2.0], &[true, true], None), Err(DecisionError::SingleClass));
        assert!(calibrate_threshold("x", &[f64::NAN, 2.0], &[true, false], None).is_err());
    }

    #[test]
    fn infinite_thresholds_round_trip_through_json() {
        let rule = ThresholdRule { detector: "LL".into(), threshold: f64::NEG_INFINITY, direction: Direction::LowerIsMachine, train_f1: 0.5 };
        let json = serde_json::to_string(&rule).unwrap();
        assert!(json.contains("\"-inf\""));
        let back: ThresholdRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rule);
        let finite = ThresholdRule { threshold: 0.25, ..rule };
        let back: ThresholdRule = serde_json::from_str(&serde_json::to_string(&finite).unwrap()).unwrap();
        assert_eq!(back, finite);
    }
}

//! TOML configuration: a preset, experiment overrides, moderation policy
//! overrides and an optional declarative run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mgtbench_core::bench::ExperimentConfig;
use mgtbench_core::corpus::ModerationPolicy;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{io, Error, Result};

/// Starting point that file overrides are applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Full-scale hyperparameters.
    #[default]
    Full,
    /// Learning rates scaled for the bag-of-words reference classifier.
    Desk,
    /// Full-scale hyperparameters with a fixed 2.5e-7 CIL update rate.
    FullSlow,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            "full-slow" => Ok(Preset::FullSlow),
            other => Err(format!("unknown preset {other:?} (expected full, desk or full-slow)")),
        }
    }
}

impl Preset {
    pub fn experiment(self) -> ExperimentConfig {
        match self {
            Preset::Full => ExperimentConfig::default(),
            Preset::Desk => ExperimentConfig::desk(),
            Preset::FullSlow => {
                ExperimentConfig { cil: mgtbench_core::continual::CilConfig::slow_update(), ..ExperimentConfig::default() }
            }
        }
    }
}

/// A protocol described entirely in the config file. Relative paths resolve
/// against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub protocol: String,
    #[serde(default)]
    pub detector: Option<String>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub backend2: Option<String>,
    #[serde(default)]
    pub axis: Option<String>,
    /// Named corpora for transfer, or the single corpus under any name.
    #[serde(default)]
    pub corpora: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub source: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<PathBuf>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub new_classes: Vec<String>,
    #[serde(default)]
    pub techniques: Vec<String>,
    /// Results directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub preset: Preset,
    pub experiment: ExperimentConfig,
    pub policy: ModerationPolicy,
    pub run: Option<RunSpec>,
    /// Directory of the config file, for resolving relative paths.
    pub base_dir: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            preset: Preset::default(),
            experiment: ExperimentConfig::default(),
            policy: ModerationPolicy::default(),
            run: None,
            base_dir: PathBuf::from("."),
        }
    }
}

impl Settings {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Sets the root seed for every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.experiment.seed = seed;
        self.experiment.cil.seed = seed;
    }
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Fields whose values are open-ended maps rather than fixed structs.
const OPEN_MAPS: [&str; 2] = ["human_symbol_limits", "machine_symbol_limits"];

fn check_keys(base: &Value, overrides: &Value, path: &str) -> Result<()> {
    let (Value::Object(b), Value::Object(o)) = (base, overrides) else {
        return Ok(());
    };
    for (k, v) in o {
        let here = format!("{path}.{k}");
        match b.get(k) {
            None => return Err(Error::Config(format!("unknown key {here}"))),
            Some(_) if OPEN_MAPS.contains(&k.as_str()) => {}
            Some(inner) => check_keys(inner, v, &here)?,
        }
    }
    Ok(())
}

fn overlay<T: Serialize + DeserializeOwned>(base: &T, overrides: Option<toml::Value>, section: &str) -> Result<T> {
    let Some(o) = overrides else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let mut v = serde_json::to_value(base)?;
    let o = serde_json::to_value(o)?;
    check_keys(&v, &o, section)?;
    merge(&mut v, o);
    serde_json::from_value(v).map_err(|e| Error::Config(format!("[{section}]: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<Preset>,
    experiment: Option<toml::Value>,
    policy: Option<toml::Value>,
    run: Option<RunSpec>,
}

/// Parses configuration text. `preset` (from the command line) wins over the
/// file's own preset.
pub fn parse(text: &str, preset: Option<Preset>, base_dir: &Path) -> Result<Settings> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let preset = preset.or(file.preset).unwrap_or_default();
    Ok(Settings {
        preset,
        experiment: overlay(&preset.experiment(), file.experiment, "experiment")?,
        policy: overlay(&ModerationPolicy::default(), file.policy, "policy")?,
        run: file.run,
        base_dir: base_dir.to_path_buf(),
    })
}

pub fn load(path: Option<&Path>, preset: Option<Preset>) -> Result<Settings> {
    match path {
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            parse(&io::read_to_string(p)?, preset, dir).map_err(|e| match e {
                Error::Config(m) => Error::Parse { path: p.to_path_buf(), message: m },
                other => other,
            })
        }
        None => Ok(Settings { preset: preset.unwrap_or_default(), experiment: preset.unwrap_or_default().experiment(), ..Settings::default() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mgtbench_core::bench::DecisionMode;

    #[test]
    fn overrides_merge_into_preset() {
        let text = r#"
preset = "desk"
[experiment]
seed = 9
decision = "svm"
[experiment.caps]
test = 50
[policy]
min_tokens = 10
"#;
        let s = parse(text, None, Path::new("/cfg")).unwrap();
        assert_eq!(s.experiment.seed, 9);
        assert_eq!(s.experiment.decision, DecisionMode::Svm);
        assert_eq!(s.experiment.caps.test, 50);
        assert_eq!(s.experiment.caps.supervised_train, 10_000);
        assert_eq!(s.experiment.neural.learning_rate, ExperimentConfig::desk().neural.learning_rate);
        assert_eq!(s.policy.min_tokens, 10);
        assert_eq!(s.policy.max_tokens, 2048);
        assert_eq!(s.resolve(Path::new("a.jsonl")), PathBuf::from("/cfg/a.jsonl"));
    }

    #[test]
    fn command_line_preset_wins() {
        let s = parse("preset = \"desk\"", Some(Preset::Full), Path::new(".")).unwrap();
        assert_eq!(s.experiment, ExperimentConfig::default());
        assert_eq!(load(None, Some(Preset::FullSlow)).unwrap().experiment.cil.update_lr(), 2.5e-7);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(parse("[experiment]\nsede = 1", None, Path::new(".")).is_err());
        assert!(parse("colour = 1", None, Path::new(".")).is_err());
        let e = parse("[experiment.caps]\ntset = 1", None, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("experiment.caps.tset"), "{e}");
        let s = parse("[policy.human_symbol_limits]\n\"#\" = 3", None, Path::new(".")).unwrap();
        assert_eq!(s.policy.human_symbol_limits["#"], 3);
    }

    #[test]
    fn run_section() {
        let s = parse("[run]\nprotocol = \"transfer\"\ndetector = \"LL\"\ncorpora = { a = \"a.jsonl\", b = \"b.jsonl\" }", None, Path::new(".")).unwrap();
        let run = s.run.unwrap();
        assert_eq!(run.corpora.len(), 2);
        assert_eq!(run.protocol, "transfer");
    }
}

//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data or
//! contract error.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mgtbench_core::bench::{self, DecisionMode, Registry};
use mgtbench_core::corpus::{build_polish_prompt, split_train_test, template, SourceKind};
use mgtbench_core::detectors::{MetricDetector, MetricOptions};
use mgtbench_core::metrics::Task;

use crate::config::{self, Preset, Settings};
use crate::ingest::FieldMap;
use crate::pipeline::{self, LoadedBackends, SplitMode};
use crate::report::{write_json, Format, Results};
use crate::{io, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "mgtbench", version, about = "Machine-generated text detection benchmark")]
#[command(arg_required_else_help = true, propagate_version = true)]
pub struct Cli {
    /// Root seed; every seeded step derives its own stream from it.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// TOML config file with [experiment], [policy] and [run] sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Hyperparameter preset the config file is applied to.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<Preset>,
    /// Scorer backend: unigram:<path> or http://<host>[:port].
    #[arg(long, global = true, value_name = "SPEC")]
    pub backend: Option<String>,
    /// Second backend for paired detectors (observer / sampling model).
    #[arg(long, global = true, value_name = "SPEC")]
    pub backend2: Option<String>,
    /// Score cache directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache: Option<PathBuf>,
    /// Worker threads for batch scoring.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize a JSONL corpus.
    Ingest {
        /// Input file.
        input: PathBuf,
        /// Remap a document attribute to a record field, e.g. text=body.
        #[arg(long = "map", value_name = "ATTR=FIELD")]
        map: Vec<String>,
        /// Drop invalid lines (reported on stderr) instead of failing.
        #[arg(long)]
        skip_invalid: bool,
        /// Output JSONL (stdout when omitted).
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Apply the moderation rules; rejected ids go to a CSV log.
    Moderate {
        /// Input file.
        input: PathBuf,
        /// Rule set to apply.
        #[arg(long, value_enum, default_value_t = SplitMode::Auto)]
        split: SplitMode,
        /// Cleaned JSONL (stdout when omitted).
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
        /// Rejection CSV (stderr when omitted).
        #[arg(long, value_name = "PATH")]
        rejections: Option<PathBuf>,
    },
    /// Seeded stratified train/test split.
    Split {
        /// Input file.
        input: PathBuf,
        /// Training split output.
        #[arg(long, value_name = "PATH")]
        train: PathBuf,
        /// Test split output.
        #[arg(long, value_name = "PATH")]
        test: PathBuf,
        /// Training fraction per class (config value when omitted).
        #[arg(long, value_name = "R")]
        ratio: Option<f64>,
    },
    /// Score a corpus through the backend, filling the cache.
    Score {
        /// Input file.
        input: PathBuf,
        /// Comma-separated metric detectors (all when omitted).
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        detectors: Vec<String>,
        /// Feature CSV (stdout when omitted).
        #[arg(long, value_name = "PATH")]
        features: Option<PathBuf>,
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Fit a metric detector's decision rule and write it as JSON.
    Calibrate {
        /// Input file.
        input: PathBuf,
        /// Detector name (see the registry: LL, Rank, LogRank, LRR, Entropy, GLTR, FastDetectGPT, Binoculars, Supervised).
        #[arg(long)]
        detector: String,
        #[command(flatten)]
        exp: ExpArgs,
        /// Output JSON (stdout when omitted).
        #[arg(short, long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// In-distribution evaluation.
    Eval {
        /// Input file.
        input: PathBuf,
        /// Detector name (see the registry: LL, Rank, LogRank, LRR, Entropy, GLTR, FastDetectGPT, Binoculars, Supervised).
        #[arg(long)]
        detector: String,
        #[command(flatten)]
        exp: ExpArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Cross-corpus transfer matrix.
    Transfer {
        /// Corpora as name=path (or a path named by its file stem).
        #[arg(required = true, value_name = "CORPUS")]
        corpora: Vec<String>,
        /// Shift axis the corpora differ along.
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Detector name (see the registry: LL, Rank, LogRank, LRR, Entropy, GLTR, FastDetectGPT, Binoculars, Supervised).
        #[arg(long)]
        detector: String,
        #[command(flatten)]
        exp: ExpArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Transfer with k target samples per class added to training.
    Fewshot {
        /// Source corpus (training side).
        #[arg(long, value_name = "PATH")]
        source: PathBuf,
        /// Target corpus (evaluation side).
        #[arg(long, value_name = "PATH")]
        target: PathBuf,
        /// Target training samples per class.
        #[arg(long)]
        k: usize,
        /// Detector name (see the registry: LL, Rank, LogRank, LRR, Entropy, GLTR, FastDetectGPT, Binoculars, Supervised).
        #[arg(long)]
        detector: String,
        #[command(flatten)]
        exp: ExpArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Class-incremental attribution benchmark.
    Cil {
        /// Input file.
        input: PathBuf,
        /// Class added in the update stage (repeatable).
        #[arg(long = "new", required = true, value_name = "LABEL")]
        new_classes: Vec<String>,
        /// Comma-separated techniques (all when omitted).
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        techniques: Vec<String>,
        /// Also write the run manifest here.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Re-emit a saved result file.
    Report {
        /// Input file.
        input: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print the editing prompt templates, or one filled with text.
    Prompts {
        /// Source kind: arxiv, gutenberg or wiki (all when omitted).
        #[arg(long, value_name = "KIND")]
        source: Option<String>,
        /// File whose content fills the template ("-" for stdin).
        #[arg(long, value_name = "PATH", requires = "source")]
        text: Option<PathBuf>,
    },
    /// Execute the [run] section of --config into a results directory.
    Run {
        /// Results directory (the [run] output when omitted).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExpArgs {
    /// Decision rule for metric detectors.
    #[arg(long, value_enum)]
    pub decision: Option<DecisionArg>,
    /// Binary detection or generator attribution.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Drop the context-free first token from metric scores.
    #[arg(long)]
    pub skip_first_token: bool,
    /// Search both threshold orientations instead of the detector's own.
    #[arg(long)]
    pub auto_orient: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (stdout when omitted).
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DecisionArg {
    Threshold,
    Logistic,
    Svm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Binary,
    Attribution,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    Domain,
    Llm,
}

impl ExpArgs {
    fn apply(&self, settings: &mut Settings) {
        let e = &mut settings.experiment;
        if let Some(d) = self.decision {
            e.decision = match d {
                DecisionArg::Threshold => DecisionMode::Threshold,
                DecisionArg::Logistic => DecisionMode::Logistic,
                DecisionArg::Svm => DecisionMode::Svm,
            };
        }
        if let Some(t) = self.task {
            e.task = match t {
                TaskArg::Binary => Task::Binary,
                TaskArg::Attribution => Task::Attribution,
            };
        }
        e.skip_first_token |= self.skip_first_token;
        e.auto_orient |= self.auto_orient;
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn emit(results: &Results, out: &OutArgs) -> Result<()> {
    results.write(output(out.output.as_deref())?, out.format)
}

impl Cli {
    fn settings(&self) -> Result<Settings> {
        let mut s = config::load(self.config.as_deref(), self.preset)?;
        if let Some(seed) = self.seed {
            s.set_seed(seed);
        }
        Ok(s)
    }

    fn backends(&self, settings: &Settings, default_cache: Option<&Path>) -> Result<LoadedBackends> {
        let run = settings.run.as_ref();
        let primary = self.backend.as_deref().or(run.and_then(|r| r.backend.as_deref()));
        let secondary = self.backend2.as_deref().or(run.and_then(|r| r.backend2.as_deref()));
        // Command-line specs are relative to the working directory, config specs to the config file.
        let base = if self.backend.is_some() { Path::new(".") } else { settings.base_dir.as_path() };
        LoadedBackends::open(primary, secondary, self.cache.as_deref().or(default_cache), base)
    }

    /// Runs the parsed command.
    pub fn execute(&self) -> Result<()> {
        let mut settings = self.settings()?;
        let registry = Registry::standard();
        match &self.command {
            Command::Ingest { input, map, skip_invalid, output: out } => {
                let mut fields = FieldMap::default();
                for m in map {
                    fields.set(m).map_err(Error::Config)?;
                }
                let ingested = io::ingest_file(input, &fields)?;
                if !ingested.errors.is_empty() {
                    if !skip_invalid {
                        return Err(Error::Ingest { path: input.clone(), errors: ingested.errors });
                    }
                    for e in &ingested.errors {
                        eprintln!("{}: {e}", input.display());
                    }
                }
                io::write_jsonl(output(out.as_deref())?, &ingested.documents)
            }
            Command::Moderate { input, split, output: out, rejections } => {
                let docs = io::read_corpus(input)?;
                let m = pipeline::moderate_corpus(&docs, &settings.policy, *split);
                io::write_jsonl(output(out.as_deref())?, &m.kept)?;
                match rejections {
                    Some(p) => io::write_rejections(io::create(p)?, &m.rejected),
                    None => io::write_rejections(std::io::stderr().lock(), &m.rejected),
                }
            }
            Command::Split { input, train, test, ratio } => {
                let docs = io::read_corpus(input)?;
                let split = split_train_test(&docs, ratio.unwrap_or(settings.experiment.split_ratio), settings.experiment.seed)?;
                io::write_corpus(train, &split.train)?;
                io::write_corpus(test, &split.test)
            }
            Command::Score { input, detectors, features, exp } => {
                exp.apply(&mut settings);
                let docs = io::read_corpus(input)?;
                let metrics: Vec<MetricDetector> = if detectors.is_empty() {
                    MetricDetector::ALL.to_vec()
                } else {
                    detectors.iter().map(|d| pipeline::metric_by_name(d)).collect::<Result<_>>()?
                };
                let backends = self.backends(&settings, Some(Path::new(".mgtbench-cache")))?;
                let options = MetricOptions { skip_first_token: settings.experiment.skip_first_token };
                let rows = pipeline::score_corpus(&docs, &backends, &metrics, options, self.jobs)?;
                io::write_features(output(features.as_deref())?, &rows)?;
                if let Some(c) = &backends.cache {
                    eprintln!("cache {}: {} hits, {} misses", c.dir().display(), c.hits(), c.misses());
                }
                Ok(())
            }
            Command::Calibrate { input, detector, exp, output: out } => {
                exp.apply(&mut settings);
                let docs = io::read_corpus(input)?;
                let backends = self.backends(&settings, None)?;
                let fitted = pipeline::calibrate(&docs, pipeline::metric_by_name(detector)?, &settings.experiment, &backends.env())?;
                write_json(output(out.as_deref())?, &fitted)
            }
            Command::Eval { input, detector, exp, out } => {
                exp.apply(&mut settings);
                let docs = io::read_corpus(input)?;
                let backends = self.backends(&settings, None)?;
                let report = bench::run_in_distribution(&registry, detector, &docs, &settings.experiment, &backends.env())?;
                emit(&Results::Eval(report), out)
            }
            Command::Transfer { corpora, axis, detector, exp, out } => {
                exp.apply(&mut settings);
                let named: Vec<(String, PathBuf)> = corpora.iter().map(|c| pipeline::parse_named_path(c)).collect();
                let corpora = pipeline::read_named_corpora(named.iter().map(|(n, p)| (n.clone(), p.as_path())))?;
                let axis = match axis {
                    AxisArg::Domain => bench::Axis::Domain,
                    AxisArg::Llm => bench::Axis::Llm,
                };
                let backends = self.backends(&settings, None)?;
                let matrix = bench::run_transfer(&registry, detector, &corpora, axis, &settings.experiment, &backends.env())?;
                emit(&Results::Matrix(matrix), out)
            }
            Command::Fewshot { source, target, k, detector, exp, out } => {
                exp.apply(&mut settings);
                let (source, target) = (io::read_corpus(source)?, io::read_corpus(target)?);
                let backends = self.backends(&settings, None)?;
                let report = bench::run_few_shot(&registry, detector, &source, &target, *k, &settings.experiment, &backends.env())?;
                emit(&Results::Eval(report), out)
            }
            Command::Cil { input, new_classes, techniques, manifest, out } => {
                let docs = io::read_corpus(input)?;
                let techniques = pipeline::parse_techniques(techniques)?;
                let run = bench::run_cil(&docs, new_classes, &techniques, &settings.experiment)?;
                if let Some(p) = manifest {
                    write_json(io::create(p)?, &run.manifest)?;
                }
                emit(&Results::Cil(run), out)
            }
            Command::Report { input, out } => {
                let results: Results = io::read_json(input)?;
                emit(&results, out)
            }
            Command::Prompts { source, text } => {
                let kinds = match source {
                    Some(s) => vec![s.parse::<SourceKind>()?],
                    None => SourceKind::ALL.to_vec(),
                };
                let mut w = output(None)?;
                let write = |w: &mut Box<dyn Write>, s: &str| w.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e));
                match text {
                    Some(path) => {
                        let body = if path.as_os_str() == "-" {
                            let mut s = String::new();
                            std::io::stdin().read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
                            s
                        } else {
                            io::read_to_string(path)?
                        };
                        write(&mut w, &build_polish_prompt(kinds[0], body.trim_end()))?;
                    }
                    None => {
                        for (i, kind) in kinds.iter().enumerate() {
                            if kinds.len() > 1 {
                                write(&mut w, &format!("{}== {} ==\n", if i > 0 { "\n" } else { "" }, kind.as_str()))?;
                            }
                            write(&mut w, template(*kind))?;
                        }
                    }
                }
                w.flush().map_err(|e| Error::io("<stdout>", e))
            }
            Command::Run { out } => {
                let spec = settings.run.as_ref().ok_or_else(|| Error::Config("--config with a [run] section is required".into()))?;
                let dir = match (out, &spec.output) {
                    (Some(d), _) => d.clone(),
                    (None, Some(d)) => settings.resolve(d),
                    (None, None) => return Err(Error::Config("no results directory: pass --out or set [run] output".into())),
                };
                let backends = self.backends(&settings, None)?;
                let results = pipeline::execute(&settings, &registry, &backends)?;
                pipeline::write_results_dir(&dir, &settings, &results)
            }
        }
    }
}

/// Parses `args` and runs the command, mapping failures to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match cli.execute() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn main() -> ExitCode {
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn every_flag_is_documented() {
        let cmd = Cli::command();
        let mut undocumented = Vec::new();
        for sub in std::iter::once(&cmd).chain(cmd.get_subcommands()) {
            for arg in sub.get_arguments() {
                let builtin = matches!(arg.get_id().as_str(), "help" | "version");
                if !builtin && arg.get_help().is_none() && arg.get_long().is_some() && !arg.is_positional() {
                    undocumented.push(format!("{} --{}", sub.get_name(), arg.get_long().unwrap()));
                }
            }
        }
        assert!(undocumented.is_empty(), "{undocumented:?}");
    }

    #[test]
    fn seed_is_global() {
        let cli = Cli::try_parse_from(["mgtbench", "eval", "c.jsonl", "--detector", "LL", "--seed", "7"]).unwrap();
        assert_eq!(cli.seed, Some(7));
        assert!(Cli::try_parse_from(["mgtbench", "eval", "--bogus"]).is_err());
    }
}

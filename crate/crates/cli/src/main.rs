//! `osir`: prepare KDD'99-format data, train the calibrated and the open set
//! recognizers, evaluate them, and run the scaled-down desk experiment.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use osir::artifact::ModelArtifact;
use osir::eval::{check_identities, emit_report, read_report, EvaluationReport};
use osir::ingest::Taxonomy;
use osir::openset::Family;
use osir::pipeline::{self, Prepared, RunConfig};
use osir::preprocess::ScalingMode;
use osir::synth::{self, CorpusConfig};
use osir::Execution;

const CONFIG_ECHO: &str = "effective_config.toml";

#[derive(Parser, Debug)]
#[command(name = "osir", version, about)]
struct Cli {
    /// TOML run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (1 forces the sequential code path).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Deduplicate, downsample, filter, encode and scale the raw files.
    Prepare(PrepareArgs),
    /// Train model artifacts on a prepared directory.
    Train(TrainArgs),
    /// Score the prepared test set and write the report.
    Evaluate(EvaluateArgs),
    /// Withhold known classes, train on a capped sample and compare.
    DeskExperiment(DeskArgs),
    /// Re-check the internal identities of a written report.
    SelfCheck(SelfCheckArgs),
    /// Write a synthetic KDD'99-format corpus.
    GenerateCorpus(CorpusArgs),
}

#[derive(Args, Debug)]
struct PrepareArgs {
    /// Directory holding `kddcup.data` and `corrected`.
    #[arg(long, env = "OSIR_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Exploit-to-metatype table; the built-in one is used otherwise.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    downsample_factor: Option<usize>,
    #[arg(long)]
    min_class_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fit the scaler on training and test data together.
    #[arg(long)]
    scale_with_test: bool,
}

#[derive(Args, Debug, Clone)]
struct SvmArgs {
    /// Select C and gamma by cross-validated grid search.
    #[arg(long)]
    grid_search: bool,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    tail_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Platt,
    Wsvm,
    Both,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    prepared: Option<PathBuf>,
    /// Directory receiving `platt.json` / `wsvm.json`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Both)]
    family: FamilyArg,
    #[arg(long)]
    max_per_class: Option<usize>,
    #[command(flatten)]
    svm: SvmArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    prepared: Option<PathBuf>,
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Comma-separated rejection thresholds.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    weight_steps: Option<usize>,
    /// Also write per-record predictions.
    #[arg(long)]
    predictions: bool,
    /// Include per-class probabilities in the prediction records.
    #[arg(long)]
    per_class: bool,
}

#[derive(Args, Debug)]
struct DeskArgs {
    #[arg(long)]
    prepared: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Comma-separated classes to withhold from training.
    #[arg(long, value_delimiter = ',')]
    withheld: Option<Vec<String>>,
    #[arg(long)]
    max_per_class: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[command(flatten)]
    svm: SvmArgs,
}

#[derive(Args, Debug)]
struct SelfCheckArgs {
    /// Directory holding a written report.
    report: PathBuf,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Multiplier on every class count.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn require(value: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing {what} (pass it as a flag or in the config file)"),
    }
}

fn echo_config(dir: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(CONFIG_ECHO);
    let text = toml::to_string_pretty(config).context("serializing the effective configuration")?;
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn execution(threads: Option<usize>) -> Result<Execution> {
    if threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(match threads {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    })
}

fn apply_svm(config: &mut RunConfig, args: &SvmArgs) {
    let t = &mut config.train;
    t.svm.grid_search |= args.grid_search;
    if let Some(c) = args.c {
        t.svm.c = c;
    }
    if let Some(g) = args.gamma {
        t.svm.gamma = g;
    }
    if let Some(f) = args.folds {
        t.svm.folds = f;
    }
    if args.tail_size.is_some() {
        t.calibration.tail_size = args.tail_size;
    }
    if let Some(s) = args.seed {
        t.seed = s;
    }
}

fn model_path(dir: &Path, family: Family) -> PathBuf {
    dir.join(format!("{family}.json"))
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
        bail!("thresholds must lie in [0, 1]");
    }
    Ok(())
}

fn write_report(dir: &Path, report: &EvaluationReport) -> Result<()> {
    emit_report(report, dir)?;
    print!("{}", report.summary());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(cli.config.as_deref())?;
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    let exec = execution(config.threads)?;
    match cli.command {
        Command::Prepare(a) => {
            let p = &mut config.preprocess;
            if let Some(v) = a.downsample_factor {
                p.downsample_factor = v;
            }
            if let Some(v) = a.min_class_count {
                p.min_class_count = v;
            }
            if let Some(v) = a.seed {
                p.seed = v;
            }
            if a.scale_with_test {
                p.scaling = ScalingMode::TrainAndTest;
            }
            let paths = &mut config.paths;
            if let Some(dir) = &a.data_dir {
                paths.train = Some(dir.join(synth::TRAIN_FILE));
                paths.test = Some(dir.join(synth::TEST_FILE));
            }
            paths.train = a.train.or(paths.train.take());
            paths.test = a.test.or(paths.test.take());
            paths.taxonomy = a.taxonomy.or(paths.taxonomy.take());
            paths.prepared = a.out.or(paths.prepared.take());
            let train = require(config.paths.train.clone(), "training file (--train or --data-dir)")?;
            let test = require(config.paths.test.clone(), "test file (--test or --data-dir)")?;
            let out = require(config.paths.prepared.clone(), "output directory (--out)")?;
            let taxonomy = match &config.paths.taxonomy {
                Some(t) => {
                    let text = fs::read_to_string(t).with_context(|| format!("reading {}", t.display()))?;
                    Taxonomy::parse(&text).with_context(|| format!("parsing {}", t.display()))?
                }
                None => Taxonomy::builtin(),
            };
            let prepared = pipeline::prepare(&train, &test, &taxonomy, &config.preprocess, exec)?;
            prepared.write(&out)?;
            echo_config(&out, &config)?;
            let log = &prepared.log;
            println!(
                "train: {} records, {} unique, {} after downsampling, {} after filtering",
                log.train_records, log.train_unique, log.train_after_downsample, log.train_after_filter
            );
            println!("test: {} records, {} unique", log.test_records, log.test_unique);
            println!(
                "{} known classes, {} test-only classes",
                prepared.label_space.num_known(),
                prepared.label_space.unknown().len()
            );
        }
        Command::Train(a) => {
            apply_svm(&mut config, &a.svm);
            if a.max_per_class.is_some() {
                config.train.max_per_class = a.max_per_class;
            }
            config.paths.prepared = a.prepared.or(config.paths.prepared.take());
            config.paths.models = a.out.or(config.paths.models.take());
            let prepared_dir = require(config.paths.prepared.clone(), "prepared directory (--prepared)")?;
            let out = require(config.paths.models.clone(), "model directory (--out)")?;
            let prepared = Prepared::load(&prepared_dir)?;
            let families: &[Family] = match a.family {
                FamilyArg::Platt => &[Family::Platt],
                FamilyArg::Wsvm => &[Family::Wsvm],
                FamilyArg::Both => &[Family::Platt, Family::Wsvm],
            };
            let artifacts = pipeline::train_models(
                &prepared.train,
                prepared.label_space.known(),
                &prepared.preprocess,
                families,
                &config.train,
                exec,
            )?;
            echo_config(&out, &config)?;
            for art in &artifacts {
                let path = model_path(&out, art.family());
                art.save(&path)?;
                println!(
                    "{} model: {} classes, C={} gamma={} -> {}",
                    art.family(),
                    art.class_names.len(),
                    art.kernel.c,
                    art.kernel.gamma,
                    path.display()
                );
            }
        }
        Command::Evaluate(a) => {
            if let Some(t) = a.thresholds {
                config.eval.thresholds = t;
            }
            if let Some(s) = a.weight_steps {
                config.eval.weight_steps = s;
            }
            check_thresholds(&config.eval.thresholds)?;
            config.paths.prepared = a.prepared.or(config.paths.prepared.take());
            config.paths.models = a.models.or(config.paths.models.take());
            config.paths.output = a.out.or(config.paths.output.take());
            let prepared_dir = require(config.paths.prepared.clone(), "prepared directory (--prepared)")?;
            let models = require(config.paths.models.clone(), "model directory (--models)")?;
            let out = require(config.paths.output.clone(), "output directory (--out)")?;
            let prepared = Prepared::load(&prepared_dir)?;
            let platt = ModelArtifact::load(&model_path(&models, Family::Platt))?;
            let wsvm = ModelArtifact::load(&model_path(&models, Family::Wsvm))?;
            let (report, scored) = pipeline::evaluate(&prepared, &platt, &wsvm, &config.eval, exec)?;
            echo_config(&out, &config)?;
            if a.predictions {
                for (family, probs) in [(Family::Platt, &scored.platt), (Family::Wsvm, &scored.wsvm)] {
                    pipeline::write_predictions(
                        &out.join(format!("predictions_{family}.csv")),
                        &prepared.test.labels,
                        &prepared.label_space,
                        probs,
                        &config.eval.thresholds,
                        a.per_class,
                    )?;
                }
            }
            write_report(&out, &report)?;
        }
        Command::DeskExperiment(a) => {
            apply_svm(&mut config, &a.svm);
            let d = &mut config.desk;
            if a.withheld.is_some() {
                d.withheld = a.withheld;
            }
            if let Some(m) = a.max_per_class {
                d.max_per_class = m;
            }
            if let Some(t) = a.thresholds {
                d.thresholds = t;
            }
            check_thresholds(&config.desk.thresholds)?;
            config.paths.prepared = a.prepared.or(config.paths.prepared.take());
            config.paths.output = a.out.or(config.paths.output.take());
            let prepared_dir = require(config.paths.prepared.clone(), "prepared directory (--prepared)")?;
            let out = require(config.paths.output.clone(), "output directory (--out)")?;
            let prepared = Prepared::load(&prepared_dir)?;
            let outcome =
                pipeline::desk_experiment(&prepared, &config.train, &config.desk, config.eval.weight_steps, exec)?;
            echo_config(&out, &config)?;
            println!(
                "withheld {}; trained on {} records over {} classes; scored {} records",
                outcome.withheld.join(","),
                outcome.train_size,
                outcome.known.len(),
                outcome.test_size
            );
            write_report(&out, &outcome.report)?;
        }
        Command::SelfCheck(a) => {
            let report = read_report(&a.report)?;
            let checks = check_identities(&report);
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} identity checks failed", checks.len());
            }
        }
        Command::GenerateCorpus(a) => {
            synth::write_corpus(&a.out, &CorpusConfig { seed: a.seed, scale: a.scale })?;
            info!("corpus written to {}", a.out.display());
            println!(
                "wrote {} and {} to {}",
                synth::TRAIN_FILE,
                synth::TEST_FILE,
                a.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string().replace('\n', " ")).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}

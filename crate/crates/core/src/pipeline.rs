//! End-to-end stages: prepare raw files, train both recognizer families,
//! evaluate them, and the scaled-down desk experiment.
//!
//! # Prepared directory
//!
//! | file                | contents                                        |
//! |---------------------|-------------------------------------------------|
//! | `train.osds`        | scaled training features + labels (columnar)    |
//! | `test.osds`         | scaled test features + labels (columnar)        |
//! | `label_space.json`  | known classes, test-only classes, metatypes     |
//! | `preprocess.json`   | codebooks, scaler and scaling mode              |
//! | `taxonomy.txt`      | the exploit taxonomy used                       |
//! | `prepare_log.json`  | record counts after every preparation step      |

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifact::{fingerprint, ModelArtifact, PreprocessState, TrainedModel, ARTIFACT_VERSION};
use crate::calibration::CapConfig;
use crate::dataset::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::eval::{weight_grid, ClassifierReport, EvaluationReport, DEFAULT_WEIGHT_STEPS};
use crate::ingest::{
    for_each_record, Codebooks, ConnectionRecord, Deduplicator, LabelSpace, Taxonomy, Truth,
};
use crate::openset::{decide, train_platt, train_wsvm, Family, Prediction, WsvmConfig};
use crate::par::Execution;
use crate::preprocess::{
    class_counts, dominant_classes, downsample_dominant, drop_rare_classes, ScalingMode,
    ScalingParams, DEFAULT_DOWNSAMPLE_FACTOR, DEFAULT_MIN_CLASS_COUNT, DEFAULT_SEED,
};
use crate::svm::{grid_search_cv, odd_decade_grid, KernelParams, SolverConfig};

pub const TRAIN_DATASET: &str = "train.osds";
pub const TEST_DATASET: &str = "test.osds";
pub const LABEL_SPACE_FILE: &str = "label_space.json";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const TAXONOMY_FILE: &str = "taxonomy.txt";
pub const PREPARE_LOG_FILE: &str = "prepare_log.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    pub downsample_factor: usize,
    pub min_class_count: usize,
    pub seed: u64,
    pub scaling: ScalingMode,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            downsample_factor: DEFAULT_DOWNSAMPLE_FACTOR,
            min_class_count: DEFAULT_MIN_CLASS_COUNT,
            seed: DEFAULT_SEED,
            scaling: ScalingMode::TrainOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepareLog {
    pub train_records: usize,
    pub train_unique: usize,
    pub test_records: usize,
    pub test_unique: usize,
    pub downsampled_classes: Vec<String>,
    pub train_after_downsample: usize,
    pub dropped_classes: BTreeMap<String, usize>,
    pub train_after_filter: usize,
    pub train_class_counts: BTreeMap<String, usize>,
    pub test_class_counts: BTreeMap<String, usize>,
}

/// Output of the preparation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub label_space: LabelSpace,
    pub preprocess: PreprocessState,
    pub taxonomy: Taxonomy,
    pub log: PrepareLog,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Format {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        },
        other => other,
    }
}

/// Deduplicated records of a KDD file, streamed so that only unique rows are
/// held in memory.
pub fn unique_records<R: BufRead>(reader: R, exec: Execution) -> Result<(Deduplicator, usize)> {
    let mut dedup = Deduplicator::new();
    let total = for_each_record(reader, exec, |r| {
        dedup.push(&r);
    })?;
    Ok((dedup, total))
}

fn encode(records: &[ConnectionRecord], codebooks: &Codebooks, exec: Execution) -> Result<FeatureMatrix> {
    let rows = exec.map(records, |r| codebooks.encode(r));
    let mut m = FeatureMatrix::new(crate::ingest::schema::NUM_FEATURES);
    for r in &rows {
        m.push_row(r)?;
    }
    Ok(m)
}

/// Dedup, downsample, rare-class filter, encode and scale.
pub fn prepare_from_readers<R1: BufRead, R2: BufRead>(
    train: R1,
    test: R2,
    taxonomy: &Taxonomy,
    cfg: &PrepareConfig,
    exec: Execution,
) -> Result<Prepared> {
    let (train_dedup, train_records) = unique_records(train, exec)?;
    let train_unique = train_dedup.unique();
    info!("training records: {train_records} -> {train_unique} unique");
    let (test_dedup, test_records) = unique_records(test, exec)?;
    let test_unique = test_dedup.unique();
    info!("test records: {test_records} -> {test_unique} unique");

    let lines = train_dedup.into_unique();
    let downsampled_classes = dominant_classes(&lines)?.to_vec();
    let lines = downsample_dominant(lines, cfg.downsample_factor, cfg.seed)?;
    let train_after_downsample = lines.len();
    let before = class_counts(&lines);
    let lines = drop_rare_classes(lines, cfg.min_class_count)?;
    let train_after_filter = lines.len();
    let train_class_counts = class_counts(&lines);
    let dropped_classes = before
        .into_iter()
        .filter(|(c, _)| !train_class_counts.contains_key(c))
        .collect();

    let train_recs = exec.map(&lines, |l| l.parse());
    drop(lines);
    let test_lines = test_dedup.into_unique();
    let test_class_counts = class_counts(&test_lines);
    let test_recs = exec.map(&test_lines, |l| l.parse());
    drop(test_lines);

    let codebooks = Codebooks::build(train_recs.iter())?;
    let train_raw = encode(&train_recs, &codebooks, exec)?;
    let test_raw = encode(&test_recs, &codebooks, exec)?;
    let scaling = match cfg.scaling {
        ScalingMode::TrainOnly => ScalingParams::fit(&[&train_raw])?,
        ScalingMode::TrainAndTest => ScalingParams::fit(&[&train_raw, &test_raw])?,
    };
    let label_space = LabelSpace::build(
        train_recs.iter().map(|r| r.label()),
        test_recs.iter().map(|r| r.label()),
        taxonomy,
    )?;
    info!(
        "{} known classes, {} test-only classes",
        label_space.num_known(),
        label_space.unknown().len()
    );
    let train = Dataset::new(
        scaling.apply_matrix(&train_raw)?,
        train_recs.iter().map(|r| r.label().to_string()).collect(),
    )?;
    let test = Dataset::new(
        scaling.apply_matrix(&test_raw)?,
        test_recs.iter().map(|r| r.label().to_string()).collect(),
    )?;
    Ok(Prepared {
        train,
        test,
        label_space,
        preprocess: PreprocessState {
            codebooks,
            scaling,
            scaling_mode: cfg.scaling,
        },
        taxonomy: taxonomy.clone(),
        log: PrepareLog {
            train_records,
            train_unique,
            test_records,
            test_unique,
            downsampled_classes,
            train_after_downsample,
            dropped_classes,
            train_after_filter,
            train_class_counts,
            test_class_counts,
        },
    })
}

pub fn prepare(
    train_path: &Path,
    test_path: &Path,
    taxonomy: &Taxonomy,
    cfg: &PrepareConfig,
    exec: Execution,
) -> Result<Prepared> {
    // Open both up front so a missing test file fails before the long pass.
    let train = open(train_path)?;
    let test = open(test_path)?;
    prepare_from_readers(train, test, taxonomy, cfg, exec).map_err(|e| match e {
        Error::Parse { .. } => Error::InvalidInput(format!(
            "while reading {} / {}: {e}",
            train_path.display(),
            test_path.display()
        )),
        other => other,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Error::Artifact(e.to_string()))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

impl Prepared {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.train.write_columnar(&dir.join(TRAIN_DATASET))?;
        self.test.write_columnar(&dir.join(TEST_DATASET))?;
        write_json(&dir.join(LABEL_SPACE_FILE), &self.label_space)?;
        write_json(&dir.join(PREPROCESS_FILE), &self.preprocess)?;
        write_json(&dir.join(PREPARE_LOG_FILE), &self.log)?;
        let path = dir.join(TAXONOMY_FILE);
        fs::write(&path, self.taxonomy.to_text()).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(TAXONOMY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            train: Dataset::read_columnar(&dir.join(TRAIN_DATASET))?,
            test: Dataset::read_columnar(&dir.join(TEST_DATASET))?,
            label_space: read_json(&dir.join(LABEL_SPACE_FILE))?,
            preprocess: read_json(&dir.join(PREPROCESS_FILE))?,
            log: read_json(&dir.join(PREPARE_LOG_FILE))?,
            taxonomy: Taxonomy::parse(&text).map_err(|e| with_path(&path, e))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub c: f64,
    pub gamma: f64,
    /// Search the odd-decade grid instead of using `c` and `gamma`.
    pub grid_search: bool,
    pub folds: usize,
    pub tol: f64,
    pub cache_mb: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            c: 1000.0,
            gamma: 0.1,
            grid_search: false,
            folds: 3,
            tol: 1e-3,
            cache_mb: 256,
        }
    }
}

impl SvmSettings {
    pub fn solver(&self, exec: Execution) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: None,
            cache_bytes: self.cache_mb << 20,
            exec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub tail_size: Option<usize>,
    pub delta_tau: f64,
    pub nu: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        let cap = CapConfig::default();
        Self {
            tail_size: None,
            delta_tau: cap.delta_tau,
            nu: cap.nu,
        }
    }
}

impl CalibrationSettings {
    pub fn wsvm(&self) -> WsvmConfig {
        WsvmConfig {
            cap: CapConfig {
                nu: self.nu,
                delta_tau: self.delta_tau,
                tail_size: self.tail_size,
            },
            tail_size: self.tail_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub svm: SvmSettings,
    pub calibration: CalibrationSettings,
    pub seed: u64,
    /// Per-class cap on training records; `None` trains on everything.
    pub max_per_class: Option<usize>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            svm: SvmSettings::default(),
            calibration: CalibrationSettings::default(),
            seed: DEFAULT_SEED,
            max_per_class: None,
        }
    }
}

/// Row indices keeping at most `cap` rows per label (seeded, input order
/// preserved).
pub fn stratified_cap(labels: &[String], cap: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for members in by_class.values() {
        if members.len() <= cap {
            keep.extend_from_slice(members);
        } else {
            keep.extend(index::sample(&mut rng, members.len(), cap).into_iter().map(|j| members[j]));
        }
    }
    keep.sort_unstable();
    keep
}

/// Rows whose label is one of `class_names`, with their class indices.
fn training_rows(train: &Dataset, class_names: &[String]) -> (Vec<usize>, Vec<usize>) {
    let mut rows = Vec::new();
    let mut class_of = Vec::new();
    for (i, l) in train.labels.iter().enumerate() {
        if let Ok(k) = class_names.binary_search(l) {
            rows.push(i);
            class_of.push(k);
        }
    }
    (rows, class_of)
}

/// Trains the requested families on the rows of `train` whose labels are in
/// `class_names` (sorted). Kernel parameters are searched once and shared.
pub fn train_models(
    train: &Dataset,
    class_names: &[String],
    preprocess: &PreprocessState,
    families: &[Family],
    settings: &TrainSettings,
    exec: Execution,
) -> Result<Vec<ModelArtifact>> {
    if class_names.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("class names must be sorted and distinct".into()));
    }
    let mut subset = train.clone();
    if let Some(cap) = settings.max_per_class {
        subset = subset.select(&stratified_cap(&subset.labels, cap, settings.seed));
    }
    let (rows, class_of) = training_rows(&subset, class_names);
    let x = subset.features.select(&rows);
    info!("training on {} records over {} classes", x.rows(), class_names.len());
    let solver = settings.svm.solver(exec);
    let (kernel, grid) = if settings.svm.grid_search {
        let g = grid_search_cv(
            &x,
            &class_of,
            class_names,
            &odd_decade_grid(),
            settings.svm.folds,
            settings.seed,
            &solver,
        )?;
        info!("grid search selected C={} gamma={}", g.best.c, g.best.gamma);
        (g.best, Some(g))
    } else {
        (KernelParams::new(settings.svm.c, settings.svm.gamma)?, None)
    };
    let config_fingerprint = fingerprint(&(settings, kernel));
    let preprocess_fingerprint = preprocess.fingerprint();
    families
        .iter()
        .map(|&family| {
            let model = match family {
                Family::Platt => TrainedModel::Platt(train_platt(
                    &x,
                    &class_of,
                    class_names,
                    kernel,
                    settings.seed,
                    &solver,
                )?),
                Family::Wsvm => TrainedModel::Wsvm(train_wsvm(
                    &x,
                    &class_of,
                    class_names,
                    kernel,
                    &settings.calibration.wsvm(),
                    &solver,
                )?),
            };
            Ok(ModelArtifact {
                version: ARTIFACT_VERSION,
                class_names: class_names.to_vec(),
                kernel,
                preprocess: preprocess.clone(),
                preprocess_fingerprint: preprocess_fingerprint.clone(),
                config_fingerprint: config_fingerprint.clone(),
                grid_search: grid.clone(),
                model,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    /// Sorted ascending.
    pub thresholds: Vec<f64>,
    pub weight_steps: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            thresholds: vec![0.1, 0.2, 0.3],
            weight_steps: DEFAULT_WEIGHT_STEPS,
        }
    }
}

/// Per-record class probabilities for both families.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub truth: Vec<Truth>,
    pub platt: Vec<Vec<f64>>,
    pub wsvm: Vec<Vec<f64>>,
}

pub fn score(
    test: &Dataset,
    label_space: &LabelSpace,
    platt: &ModelArtifact,
    wsvm: &ModelArtifact,
    exec: Execution,
) -> Result<Scored> {
    for (a, want) in [(platt, Family::Platt), (wsvm, Family::Wsvm)] {
        if a.family() != want {
            return Err(Error::Artifact(format!(
                "expected a {want} model, got a {} model",
                a.family()
            )));
        }
        if a.class_names != label_space.known() {
            return Err(Error::Artifact(format!(
                "{} model classes differ from the label space",
                a.family()
            )));
        }
    }
    if platt.preprocess_fingerprint != wsvm.preprocess_fingerprint {
        return Err(Error::Artifact("models were trained on differently prepared data".into()));
    }
    Ok(Scored {
        truth: test.labels.iter().map(|l| label_space.truth(l)).collect(),
        platt: platt.model.classifier().batch_probabilities(&test.features, exec),
        wsvm: wsvm.model.classifier().batch_probabilities(&test.features, exec),
    })
}

pub fn report(scored: &Scored, settings: &EvalSettings) -> Result<EvaluationReport> {
    EvaluationReport::new(
        ClassifierReport::from_probabilities(Family::Platt, &scored.platt, &scored.truth, &settings.thresholds)?,
        ClassifierReport::from_probabilities(Family::Wsvm, &scored.wsvm, &scored.truth, &settings.thresholds)?,
        weight_grid(settings.weight_steps),
    )
}

/// Scores the prepared test set with both models against the prepared label
/// space.
pub fn evaluate(
    prepared: &Prepared,
    platt: &ModelArtifact,
    wsvm: &ModelArtifact,
    settings: &EvalSettings,
    exec: Execution,
) -> Result<(EvaluationReport, Scored)> {
    for a in [platt, wsvm] {
        a.check_compatible(&prepared.preprocess, prepared.label_space.known())?;
    }
    let scored = score(&prepared.test, &prepared.label_space, platt, wsvm, exec)?;
    Ok((report(&scored, settings)?, scored))
}

/// One row per (record, threshold): `index,true_label,truth,threshold,
/// predicted,max_probability` plus per-class probabilities when requested.
pub fn write_predictions(
    path: &Path,
    labels: &[String],
    label_space: &LabelSpace,
    probabilities: &[Vec<f64>],
    thresholds: &[f64],
    per_class: bool,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = "index,true_label,truth,threshold,predicted,max_probability".to_string();
    if per_class {
        for c in label_space.known() {
            header.push_str(&format!(",p_{c}"));
        }
    }
    writeln!(w, "{header}").map_err(io)?;
    for &t in thresholds {
        for (i, (label, p)) in labels.iter().zip(probabilities).enumerate() {
            let truth = match label_space.truth(label) {
                Truth::Known(_) => "known",
                Truth::Unknown => "unknown",
            };
            let predicted = match decide(p, t) {
                Prediction::Known(k) => label_space.class_name(k),
                Prediction::Unknown => "UNKNOWN",
            };
            let max = p.iter().copied().fold(0.0, f64::max);
            write!(w, "{i},{label},{truth},{t},{predicted},{max}").map_err(io)?;
            if per_class {
                for v in p {
                    write!(w, ",{v}").map_err(io)?;
                }
            }
            writeln!(w).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskSettings {
    pub max_per_class: usize,
    /// Per-class cap on test records; `None` scores the full test set.
    pub test_max_per_class: Option<usize>,
    /// Classes to withhold; `None` picks `n_withheld` at random (seeded)
    /// among the non-normal known classes.
    pub withheld: Option<Vec<String>>,
    pub n_withheld: usize,
    pub thresholds: Vec<f64>,
}

impl Default for DeskSettings {
    fn default() -> Self {
        Self {
            max_per_class: 2000,
            test_max_per_class: Some(2000),
            withheld: None,
            n_withheld: 3,
            thresholds: vec![0.1, 0.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeskOutcome {
    pub withheld: Vec<String>,
    pub known: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    pub report: EvaluationReport,
}

/// Withheld classes by seeded choice among non-normal known classes.
pub fn choose_withheld(label_space: &LabelSpace, n: usize, seed: u64) -> Vec<String> {
    let mut eligible: Vec<String> = label_space
        .known()
        .iter()
        .filter(|c| c.as_str() != "normal")
        .cloned()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    let mut chosen: Vec<String> = eligible.into_iter().take(n).collect();
    chosen.sort();
    chosen
}

/// Scaled-down comparison: withhold some known classes from training, cap
/// every class, train both families and evaluate on the (capped) test set.
pub fn desk_experiment(
    prepared: &Prepared,
    train: &TrainSettings,
    desk: &DeskSettings,
    weight_steps: usize,
    exec: Execution,
) -> Result<DeskOutcome> {
    let withheld = match &desk.withheld {
        Some(w) => {
            let mut w = w.clone();
            w.sort();
            w.dedup();
            w
        }
        None => choose_withheld(&prepared.label_space, desk.n_withheld, train.seed),
    };
    let label_space = prepared
        .label_space
        .withholding(&withheld.iter().cloned().collect::<BTreeSet<_>>())?;
    info!("desk experiment withholding {withheld:?}");
    let settings = TrainSettings {
        max_per_class: Some(desk.max_per_class),
        ..train.clone()
    };
    let models = train_models(
        &prepared.train,
        label_space.known(),
        &prepared.preprocess,
        &[Family::Platt, Family::Wsvm],
        &settings,
        exec,
    )?;
    let train_size = {
        let capped = stratified_cap(&prepared.train.labels, desk.max_per_class, train.seed);
        capped
            .iter()
            .filter(|&&i| label_space.index_of(&prepared.train.labels[i]).is_some())
            .count()
    };
    let test = match desk.test_max_per_class {
        Some(cap) => prepared
            .test
            .select(&stratified_cap(&prepared.test.labels, cap, train.seed.wrapping_add(1))),
        None => prepared.test.clone(),
    };
    let scored = score(&test, &label_space, &models[0], &models[1], exec)?;
    let report = report(
        &scored,
        &EvalSettings {
            thresholds: desk.thresholds.clone(),
            weight_steps,
        },
    )?;
    Ok(DeskOutcome {
        withheld,
        known: label_space.known().to_vec(),
        train_size,
        test_size: test.len(),
        report,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub prepared: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Every knob of a run; persisted next to the outputs it produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub preprocess: PrepareConfig,
    pub train: TrainSettings,
    pub eval: EvalSettings,
    pub desk: DeskSettings,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
}

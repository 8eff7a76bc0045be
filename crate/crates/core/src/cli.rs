//! Command-line front end: `synth`, `featurize`, `train`, `evaluate`,
//! `predict`.
//!
//! Each subcommand is also callable as a library function (`cmd_*`) that
//! returns a typed summary; [`run`] parses arguments, prints, and maps errors
//! to exit codes (0 ok, 1 usage, 2 data, 3 numeric/training).

use std::ffi::OsString;
use std::fmt::{self, Display, Write as _};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::dataset::{self, GlyphSample, PairRegistry, SynthParams};
use crate::eval::{self, ReportRow};
use crate::features::FeatureConfig;
use crate::imaging;
use crate::svm::{
    self, KernelParams, LabeledFeatures, PairSelection, Prediction, TrainedClassifier,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;

/// A failed stage, rendered as one diagnostic line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: i32, stage: &'static str, message: impl Display) -> Self {
        let message = message.to_string().replace('\n', " ");
        Self {
            code,
            stage,
            message,
        }
    }

    fn usage(stage: &'static str, message: impl Display) -> Self {
        Self::new(EXIT_USAGE, stage, message)
    }

    fn data(stage: &'static str, message: impl Display) -> Self {
        Self::new(EXIT_DATA, stage, message)
    }

    fn training(stage: &'static str, message: impl Display) -> Self {
        Self::new(EXIT_TRAINING, stage, message)
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

/// Optional TOML config; same keys as the flags.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub seed: Option<u64>,
    pub normalize_l2: Option<bool>,
    pub manifest: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))
    }
}

/// Resolved pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub m: usize,
    /// `None` selects `1 / (d * var)` over the training features.
    pub gamma: Option<f64>,
    pub c: f64,
    pub seed: u64,
    pub normalize_l2: bool,
    pub manifest: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Candidate gammas for `train --sweep`.
    pub sweep: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            m: 16,
            gamma: None,
            c: KernelParams::DEFAULT_C,
            seed: 42,
            normalize_l2: false,
            manifest: None,
            registry: None,
            model: None,
            csv: None,
            sweep: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            n: self.n,
            m: self.m,
            normalize_l2: self.normalize_l2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CliError::usage("config", "n must be >= 1"));
        }
        if self.m == 0 || self.m > self.n {
            return Err(CliError::usage(
                "config",
                format!("m = {} violates 1 <= m <= n = {}", self.m, self.n),
            ));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g > 0.0) {
                return Err(CliError::usage(
                    "config",
                    format!("gamma = {g} must be > 0"),
                ));
            }
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(CliError::usage(
                "config",
                format!("c = {} must be > 0", self.c),
            ));
        }
        if let Some(g) = self.sweep.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(CliError::usage(
                "config",
                format!("sweep gamma {g} must be > 0"),
            ));
        }
        Ok(())
    }

    fn require<'a>(
        &self,
        path: &'a Option<PathBuf>,
        flag: &str,
        stage: &'static str,
    ) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| CliError::usage(stage, format!("--{flag} is required")))
    }
}

fn featurize_all(
    samples: &[GlyphSample],
    cfg: &FeatureConfig,
    stage: &'static str,
) -> Result<Vec<LabeledFeatures>> {
    samples
        .par_iter()
        .map(|s| s.features(cfg))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::data(stage, format!("features: {e}")))
}

fn load_samples(path: &Path, stage: &'static str) -> Result<Vec<GlyphSample>> {
    dataset::load_manifest(path).map_err(|e| CliError::data(stage, format!("dataset: {e}")))
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub manifest: PathBuf,
    pub samples: usize,
    pub classes: Vec<String>,
    pub registry: Option<PathBuf>,
}

/// Generates a perturbed corpus. With `template_dir = None` the bundled
/// templates are used and their pair registry is written as `registry.csv`.
pub fn cmd_synth(
    n: usize,
    template_dir: Option<&Path>,
    params: &SynthParams,
    out_dir: &Path,
) -> Result<SynthSummary> {
    const STAGE: &str = "synth";
    if n == 0 {
        return Err(CliError::usage(STAGE, "n must be >= 1"));
    }
    params.validate().map_err(|e| CliError::usage(STAGE, e))?;
    let templates = match template_dir {
        Some(dir) => dataset::load_templates(dir)
            .map_err(|e| CliError::data(STAGE, format!("dataset: {e}")))?,
        None => dataset::builtin_templates(),
    };
    let samples = dataset::synth_generate(&templates, params, n)
        .map_err(|e| CliError::data(STAGE, format!("dataset: {e}")))?;
    let manifest = dataset::write_corpus(&samples, out_dir)
        .map_err(|e| CliError::data(STAGE, format!("dataset: {e}")))?;
    let registry = if template_dir.is_none() {
        let path = out_dir.join("registry.csv");
        fs::write(&path, dataset::builtin_registry().to_csv())
            .map_err(|e| CliError::data(STAGE, format!("{}: {e}", path.display())))?;
        Some(path)
    } else {
        None
    };
    Ok(SynthSummary {
        manifest,
        samples: samples.len(),
        classes: templates.into_iter().map(|(c, _)| c).collect(),
        registry,
    })
}

// ---------------------------------------------------------------- featurize

/// One `label,f_1,...,f_2M` line per manifest row.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<String> {
    const STAGE: &str = "featurize";
    cfg.validate()?;
    let manifest = cfg.require(&cfg.manifest, "manifest", STAGE)?;
    let samples = load_samples(manifest, STAGE)?;
    let rows = featurize_all(&samples, &cfg.features(), STAGE)?;
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    for r in &rows {
        let mut record = vec![r.label.clone()];
        record.extend(r.features.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record).expect("in-memory csv");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 input"))
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq)]
pub struct PairTrainStats {
    pub pos_class: String,
    pub neg_class: String,
    pub samples: usize,
    pub correct: usize,
    pub support_vectors: usize,
}

impl PairTrainStats {
    pub fn accuracy(&self) -> f64 {
        100.0 * self.correct as f64 / self.samples as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub gamma: f64,
    pub accuracy: f64,
    pub support_vectors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub gamma: f64,
    pub pairs: Vec<PairTrainStats>,
    pub sweep: Vec<SweepPoint>,
    pub classifier: TrainedClassifier,
}

/// Samples restricted to the registry's classes (all samples without one),
/// after checking every registry class has at least two samples.
fn select_classes(
    samples: Vec<LabeledFeatures>,
    registry: Option<&PairRegistry>,
    classes: Option<&[String]>,
    stage: &'static str,
) -> Result<Vec<LabeledFeatures>> {
    let wanted: Option<Vec<String>> = match (registry, classes) {
        (Some(r), _) => Some(r.classes()),
        (None, Some(c)) => Some(c.to_vec()),
        (None, None) => None,
    };
    let Some(wanted) = wanted else {
        return Ok(samples);
    };
    for class in &wanted {
        let count = samples.iter().filter(|s| &s.label == class).count();
        if count < 2 {
            return Err(CliError::data(
                stage,
                format!(
                    "dataset: {}",
                    dataset::DatasetError::ClassTooSmall {
                        class: class.clone(),
                        count
                    }
                ),
            ));
        }
    }
    Ok(samples
        .into_iter()
        .filter(|s| wanted.contains(&s.label))
        .collect())
}

fn train_stats(clf: &TrainedClassifier, train: &[LabeledFeatures]) -> Result<Vec<PairTrainStats>> {
    clf.model
        .models()
        .iter()
        .map(|m| {
            let mut stats = PairTrainStats {
                pos_class: m.pos_class().to_owned(),
                neg_class: m.neg_class().to_owned(),
                samples: 0,
                correct: 0,
                support_vectors: m.n_support(),
            };
            for s in train
                .iter()
                .filter(|s| s.label == m.pos_class() || s.label == m.neg_class())
            {
                stats.samples += 1;
                let predicted = m
                    .predict_pair(&s.features)
                    .map_err(|e| CliError::training("train", format!("svm: {e}")))?;
                if predicted == s.label {
                    stats.correct += 1;
                }
            }
            Ok(stats)
        })
        .collect()
}

/// manifest -> normalize -> features -> even split -> per-pair SMO -> model file.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    const STAGE: &str = "train";
    cfg.validate()?;
    let manifest = cfg.require(&cfg.manifest, "manifest", STAGE)?;
    let model_path = cfg.require(&cfg.model, "model", STAGE)?;
    let registry = cfg
        .registry
        .as_deref()
        .map(|p| PairRegistry::load(p).map_err(|e| CliError::data(STAGE, format!("dataset: {e}"))))
        .transpose()?;

    let samples = load_samples(manifest, STAGE)?;
    let features = featurize_all(&samples, &cfg.features(), STAGE)?;
    let features = select_classes(features, registry.as_ref(), None, STAGE)?;
    let (train, _test) = dataset::split_even(&features, cfg.seed)
        .map_err(|e| CliError::data(STAGE, format!("dataset: {e}")))?;

    let selection = match &registry {
        Some(r) => PairSelection::Only(r.pairs()),
        None => PairSelection::All,
    };
    let fit = |gamma: f64| -> Result<TrainedClassifier> {
        let params = KernelParams::new(gamma, cfg.c)
            .map_err(|e| CliError::usage(STAGE, format!("svm: {e}")))?;
        let model = svm::train_pairwise(&train, &params, cfg.seed, selection)
            .map_err(|e| CliError::training(STAGE, format!("svm: {e}")))?;
        Ok(TrainedClassifier {
            features: cfg.features(),
            split_seed: cfg.seed,
            model,
        })
    };

    let mut sweep = Vec::new();
    let (gamma, classifier) = if cfg.sweep.is_empty() {
        let gamma = match cfg.gamma {
            Some(g) => g,
            None => KernelParams::scaled_gamma(train.iter().map(|s| s.features.as_slice()))
                .map_err(|e| CliError::training(STAGE, format!("svm: {e}")))?,
        };
        (gamma, fit(gamma)?)
    } else {
        // best training accuracy, then fewest support vectors, then first listed
        let mut best: Option<(f64, TrainedClassifier, f64, usize)> = None;
        for &gamma in &cfg.sweep {
            let clf = fit(gamma)?;
            let stats = train_stats(&clf, &train)?;
            let correct: usize = stats.iter().map(|s| s.correct).sum();
            let total: usize = stats.iter().map(|s| s.samples).sum();
            let accuracy = 100.0 * correct as f64 / total.max(1) as f64;
            let nsv: usize = stats.iter().map(|s| s.support_vectors).sum();
            sweep.push(SweepPoint {
                gamma,
                accuracy,
                support_vectors: nsv,
            });
            let better = match &best {
                None => true,
                Some((_, _, acc, sv)) => accuracy > *acc || (accuracy == *acc && nsv < *sv),
            };
            if better {
                best = Some((gamma, clf, accuracy, nsv));
            }
        }
        let (g, clf, _, _) = best.expect("sweep is non-empty");
        (g, clf)
    };

    let pairs = train_stats(&classifier, &train)?;
    let bytes = svm::save_model(&classifier);
    if let Some(dir) = model_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::data(STAGE, format!("{}: {e}", dir.display())))?;
    }
    fs::write(model_path, bytes)
        .map_err(|e| CliError::data(STAGE, format!("{}: {e}", model_path.display())))?;
    Ok(TrainSummary {
        model_path: model_path.to_path_buf(),
        gamma,
        pairs,
        sweep,
        classifier,
    })
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub rows: Vec<ReportRow>,
    pub table: String,
    pub csv: String,
}

pub fn load_classifier(path: &Path, stage: &'static str) -> Result<TrainedClassifier> {
    let bytes =
        fs::read(path).map_err(|e| CliError::data(stage, format!("{}: {e}", path.display())))?;
    svm::load_model(&bytes)
        .map_err(|e| CliError::data(stage, format!("model: {}: {e}", path.display())))
}

/// Checks user-supplied feature settings against the model's.
fn check_features(
    clf: &TrainedClassifier,
    n: Option<usize>,
    m: Option<usize>,
    stage: &'static str,
) -> Result<()> {
    let f = &clf.features;
    if n.is_some_and(|n| n != f.n) || m.is_some_and(|m| m != f.m) {
        return Err(CliError::data(
            stage,
            format!(
                "feature dimension mismatch: model was trained with n = {}, m = {} (d = {}), requested n = {}, m = {}",
                f.n,
                f.m,
                f.dim(),
                n.unwrap_or(f.n),
                m.unwrap_or(f.m)
            ),
        ));
    }
    if clf.model.dim() != f.dim() {
        return Err(CliError::data(
            stage,
            format!(
                "model machines have dimension {}, features have {}",
                clf.model.dim(),
                f.dim()
            ),
        ));
    }
    Ok(())
}

/// Scores the held-out half, reproducing the training split from the seed
/// stored in the model. Whether the manifest is the one used for training
/// cannot be detected.
pub fn cmd_evaluate(
    manifest: &Path,
    model: &Path,
    n: Option<usize>,
    m: Option<usize>,
) -> Result<EvalSummary> {
    const STAGE: &str = "evaluate";
    let clf = load_classifier(model, STAGE)?;
    check_features(&clf, n, m, STAGE)?;
    let samples = load_samples(manifest, STAGE)?;
    let features = featurize_all(&samples, &clf.features, STAGE)?;
    let features = select_classes(features, None, Some(clf.model.classes()), STAGE)?;
    let (_train, test) = dataset::split_even(&features, clf.split_seed)
        .map_err(|e| CliError::data(STAGE, format!("dataset: {e}")))?;

    let rows = clf
        .model
        .models()
        .iter()
        .map(|machine| {
            let subset: Vec<LabeledFeatures> = test
                .iter()
                .filter(|s| s.label == machine.pos_class() || s.label == machine.neg_class())
                .cloned()
                .collect();
            let counts = eval::evaluate_pair(machine, &subset, machine.pos_class())
                .map_err(|e| CliError::data(STAGE, format!("eval: {e}")))?;
            Ok(ReportRow {
                correct: machine.pos_class().to_owned(),
                error: machine.neg_class().to_owned(),
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let with_metrics = rows
        .iter()
        .map(|r| {
            r.metrics()
                .map(|m| (r.correct.clone(), r.error.clone(), m))
                .map_err(|e| CliError::data(STAGE, format!("eval: {}/{}: {e}", r.correct, r.error)))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = eval::report_table(&with_metrics);
    let csv = eval::report_csv(&rows).map_err(|e| CliError::data(STAGE, format!("eval: {e}")))?;
    Ok(EvalSummary { rows, table, csv })
}

// ---------------------------------------------------------------- predict

pub fn cmd_predict(model: &Path, image: &Path) -> Result<Prediction> {
    const STAGE: &str = "predict";
    let clf = load_classifier(model, STAGE)?;
    check_features(&clf, None, None, STAGE)?;
    let bytes =
        fs::read(image).map_err(|e| CliError::data(STAGE, format!("{}: {e}", image.display())))?;
    let gray = imaging::load_pgm(&bytes)
        .map_err(|e| CliError::data(STAGE, format!("imaging: {}: {e}", image.display())))?;
    let glyph = imaging::normalize_gray(&gray, clf.features.n)
        .map_err(|e| CliError::data(STAGE, format!("imaging: {e}")))?;
    let fv = clf
        .features
        .extract(&glyph)
        .map_err(|e| CliError::data(STAGE, format!("features: {e}")))?;
    clf.model
        .predict_multiclass(fv.values())
        .map_err(|e| CliError::data(STAGE, format!("svm: {e}")))
}

pub fn format_prediction(p: &Prediction) -> String {
    let mut out = format!("class: {}\nvotes:", p.class);
    for (c, v) in &p.votes {
        let _ = write!(out, " {c}={v}");
    }
    out.push('\n');
    for d in &p.decisions {
        let _ = writeln!(
            out,
            "decision {}/{}: {:.17e}",
            d.pos_class, d.neg_class, d.value
        );
    }
    out
}

// ---------------------------------------------------------------- argv

#[derive(Debug, Parser)]
#[command(
    name = "closematch",
    version,
    about = "Spectral projection-histogram features and RBF-SVM classification of close-matching glyphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a perturbed synthetic corpus (PGM files + manifest.csv)
    Synth(SynthArgs),
    /// Print `label,f_1,...,f_2M` for every manifest row
    Featurize(FeaturizeArgs),
    /// Train pairwise RBF-SVMs on the training half of a manifest
    Train(TrainArgs),
    /// Score the held-out half and print the sensitivity/specificity/accuracy table
    Evaluate(EvaluateArgs),
    /// Classify one PGM glyph image
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Directory of template PGMs, one per class (file stem = class name) [default: bundled templates]
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Output directory for PGMs and manifest.csv [required]
    #[arg(long)]
    out: PathBuf,
    /// Samples per class
    #[arg(long, default_value_t = 24)]
    count: usize,
    /// Per-pixel flip probability
    #[arg(long, default_value_t = 0.02)]
    flips: f64,
    /// Maximum translation in pixels
    #[arg(long, default_value_t = 2)]
    max_shift: usize,
    /// Relative scale jitter in [0, 0.5]
    #[arg(long, default_value_t = 0.0)]
    scale_jitter: f64,
    /// Random seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Side of the normalized glyph raster
    #[arg(long, default_value_t = 32)]
    n: usize,
}

#[derive(Debug, Args, Default)]
struct FeatureFlags {
    /// Side N of the normalized glyph raster [default: 32]
    #[arg(long)]
    n: Option<usize>,
    /// DFT coefficients kept per axis, 1 <= m <= n [default: n/2]
    #[arg(long)]
    m: Option<usize>,
    /// Scale each feature vector to unit L2 norm [default: off]
    #[arg(long)]
    normalize_l2: bool,
}

#[derive(Debug, Args)]
struct ConfigFlag {
    /// TOML file with the same keys as the flags; flags win [default: none]
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    features: FeatureFlags,
    /// Manifest CSV (`path,label`) [required, or `manifest` in --config]
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write to this file instead of standard output [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigFlag,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    features: FeatureFlags,
    /// Manifest CSV (`path,label`) [required, or `manifest` in --config]
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Pair registry CSV (`correct_class,error_class`); without it every class pair is trained [default: none]
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Output model file [required, or `model` in --config]
    #[arg(long)]
    model: Option<PathBuf>,
    /// RBF width [default: 1/(d * variance of the training features)]
    #[arg(long)]
    gamma: Option<f64>,
    /// Box constraint C [default: 10]
    #[arg(long)]
    c: Option<f64>,
    /// Seed for the train/test split and SMO [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Try several gammas, e.g. `gamma=0.01,0.1,1`; keeps the best on the training half [default: none]
    #[arg(long)]
    sweep: Option<String>,
    #[command(flatten)]
    config: ConfigFlag,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Manifest CSV used for training [required, or `manifest` in --config]
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Trained model file [required, or `model` in --config]
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also write per-pair counts and metrics as CSV [default: none]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Expected raster side; must match the model [default: from model]
    #[arg(long)]
    n: Option<usize>,
    /// Expected coefficients per axis; must match the model [default: from model]
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    config: ConfigFlag,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Trained model file [required, or `model` in --config]
    #[arg(long)]
    model: Option<PathBuf>,
    /// PGM image of one glyph
    image: PathBuf,
    #[command(flatten)]
    config: ConfigFlag,
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let values = spec.strip_prefix("gamma=").ok_or_else(|| {
        CliError::usage(
            "train",
            format!("--sweep expects gamma=a,b,c, got {spec:?}"),
        )
    })?;
    values
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| {
                CliError::usage("train", format!("--sweep value {v:?} is not a number"))
            })
        })
        .collect()
}

fn base_config(flag: &ConfigFlag) -> Result<ConfigFile> {
    flag.config
        .as_deref()
        .map(ConfigFile::load)
        .transpose()
        .map(Option::unwrap_or_default)
}

fn resolve(file: ConfigFile, features: &FeatureFlags) -> RunConfig {
    let defaults = RunConfig::default();
    let n = features.n.or(file.n).unwrap_or(defaults.n);
    let m = features.m.or(file.m).unwrap_or((n / 2).max(1));
    RunConfig {
        n,
        m,
        gamma: file.gamma,
        c: file.c.unwrap_or(defaults.c),
        seed: file.seed.unwrap_or(defaults.seed),
        normalize_l2: features.normalize_l2 || file.normalize_l2.unwrap_or(false),
        manifest: file.manifest,
        registry: file.registry,
        model: file.model,
        csv: file.csv,
        sweep: Vec::new(),
    }
}

fn write_file(path: &Path, text: &str, stage: &'static str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::data(stage, format!("{}: {e}", path.display())))
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    let io = |e: std::io::Error| CliError::data("output", e);
    match command {
        Command::Synth(a) => {
            let params = SynthParams {
                flips: a.flips,
                max_shift: a.max_shift,
                scale_jitter: a.scale_jitter,
                count: a.count,
                seed: a.seed,
            };
            let s = cmd_synth(a.n, a.templates.as_deref(), &params, &a.out)?;
            writeln!(
                out,
                "wrote {} samples of {} classes to {}",
                s.samples,
                s.classes.len(),
                s.manifest.display()
            )
            .map_err(io)?;
            if let Some(r) = s.registry {
                writeln!(out, "wrote pair registry {}", r.display()).map_err(io)?;
            }
        }
        Command::Featurize(a) => {
            let mut cfg = resolve(base_config(&a.config)?, &a.features);
            cfg.manifest = a.manifest.or(cfg.manifest);
            let text = cmd_featurize(&cfg)?;
            match a.out {
                Some(path) => write_file(&path, &text, "featurize")?,
                None => out.write_all(text.as_bytes()).map_err(io)?,
            }
        }
        Command::Train(a) => {
            let mut cfg = resolve(base_config(&a.config)?, &a.features);
            cfg.manifest = a.manifest.or(cfg.manifest);
            cfg.registry = a.registry.or(cfg.registry);
            cfg.model = a.model.or(cfg.model);
            cfg.gamma = a.gamma.or(cfg.gamma);
            cfg.c = a.c.unwrap_or(cfg.c);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            if let Some(spec) = &a.sweep {
                cfg.sweep = parse_sweep(spec)?;
            }
            let s = cmd_train(&cfg)?;
            for p in &s.sweep {
                writeln!(
                    out,
                    "sweep gamma {:e}: train accuracy {} ({} support vectors)",
                    p.gamma,
                    eval::format_percent(p.accuracy),
                    p.support_vectors
                )
                .map_err(io)?;
            }
            writeln!(out, "gamma {:e}, C {}", s.gamma, cfg.c).map_err(io)?;
            for p in &s.pairs {
                writeln!(
                    out,
                    "pair {}/{}: train accuracy {} ({} samples, {} support vectors)",
                    p.pos_class,
                    p.neg_class,
                    eval::format_percent(p.accuracy()),
                    p.samples,
                    p.support_vectors
                )
                .map_err(io)?;
            }
            writeln!(out, "wrote model {}", s.model_path.display()).map_err(io)?;
        }
        Command::Evaluate(a) => {
            let file = base_config(&a.config)?;
            let manifest = a
                .manifest
                .or(file.manifest)
                .ok_or_else(|| CliError::usage("evaluate", "--manifest is required"))?;
            let model = a
                .model
                .or(file.model)
                .ok_or_else(|| CliError::usage("evaluate", "--model is required"))?;
            let s = cmd_evaluate(&manifest, &model, a.n.or(file.n), a.m.or(file.m))?;
            out.write_all(s.table.as_bytes()).map_err(io)?;
            if let Some(path) = a.csv.or(file.csv) {
                write_file(&path, &s.csv, "evaluate")?;
            }
        }
        Command::Predict(a) => {
            let file = base_config(&a.config)?;
            let model = a
                .model
                .or(file.model)
                .ok_or_else(|| CliError::usage("predict", "--model is required"))?;
            let p = cmd_predict(&model, &a.image)?;
            out.write_all(format_prediction(&p).as_bytes())
                .map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. Diagnostics go to `err` as one line.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let first = text.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(err, "{first}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        // reader closed the pipe early, e.g. `| head`
        Err(e) if e.stage == "output" && e.message.contains("Broken pipe") => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

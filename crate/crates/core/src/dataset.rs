//! Labeled glyph corpora: manifests, the confusable-pair registry, the
//! stratified half split and a seeded synthetic generator.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{FeatureConfig, FeatureError};
use crate::imaging::{
    self, crop_to_bbox, load_pgm, normalize_binary, resize_nearest, BinaryImage, GrayImage,
    ImagingError,
};
use crate::svm::LabeledFeatures;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("manifest {0} does not exist")]
    ManifestMissing(PathBuf),
    #[error("manifest has no sample rows")]
    EmptyManifest,
    #[error("manifest row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("manifest row {row}: image {path} does not exist")]
    MissingImage { row: usize, path: PathBuf },
    #[error("{source_id}: {source}")]
    Image {
        source_id: String,
        #[source]
        source: ImagingError,
    },
    #[error("{source_id}: {source}")]
    Feature {
        source_id: String,
        #[source]
        source: FeatureError,
    },
    #[error("class {class:?} has {count} sample(s); the even split needs at least 2")]
    ClassTooSmall { class: String, count: usize },
    #[error("registry: {0}")]
    Registry(String),
    #[error("template {0:?} has no ink")]
    EmptyTemplate(String),
    #[error("template directory: {0}")]
    TemplateDir(String),
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
    #[error("class {0:?}: noise erased every ink pixel in 100 consecutive draws")]
    RegenerationExhausted(String),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GlyphImage {
    Gray(GrayImage),
    Binary(BinaryImage),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphSample {
    pub image: GlyphImage,
    pub label: String,
    pub source_id: String,
}

impl GlyphSample {
    /// Binarizes (Otsu, for gray input), crops and resamples to `n x n`.
    pub fn normalized(&self, n: usize) -> Result<BinaryImage> {
        let out = match &self.image {
            GlyphImage::Gray(g) => imaging::normalize_gray(g, n),
            GlyphImage::Binary(b) => normalize_binary(b, n),
        };
        out.map_err(|source| DatasetError::Image {
            source_id: self.source_id.clone(),
            source,
        })
    }

    pub fn features(&self, cfg: &FeatureConfig) -> Result<LabeledFeatures> {
        let img = self.normalized(cfg.n)?;
        let fv = cfg.extract(&img).map_err(|source| DatasetError::Feature {
            source_id: self.source_id.clone(),
            source,
        })?;
        Ok(LabeledFeatures::new(self.label.clone(), fv.into_values()))
    }
}

/// Anything carrying a class label.
pub trait Labeled {
    fn label(&self) -> &str;
}

impl Labeled for GlyphSample {
    fn label(&self) -> &str {
        &self.label
    }
}

impl Labeled for LabeledFeatures {
    fn label(&self) -> &str {
        &self.label
    }
}

/// Parses manifest text (`path,label` header). Image paths are resolved
/// against `base_dir`. Rows are numbered from 1, not counting the header.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Vec<GlyphSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
        return Err(DatasetError::MalformedRow {
            row: 0,
            reason: format!(
                "header must be `path,label`, found {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(DatasetError::MalformedRow {
                row,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let (rel, label) = (&record[0], &record[1]);
        if rel.is_empty() {
            return Err(DatasetError::MalformedRow {
                row,
                reason: "empty path".into(),
            });
        }
        if label.is_empty() {
            return Err(DatasetError::MalformedRow {
                row,
                reason: "empty label".into(),
            });
        }
        let path = base_dir.join(rel);
        if !path.is_file() {
            return Err(DatasetError::MissingImage { row, path });
        }
        let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
        let image = load_pgm(&bytes).map_err(|source| DatasetError::Image {
            source_id: format!("manifest row {row} ({rel})"),
            source,
        })?;
        samples.push(GlyphSample {
            image: GlyphImage::Gray(image),
            label: label.to_owned(),
            source_id: rel.to_owned(),
        });
    }
    if samples.is_empty() {
        return Err(DatasetError::EmptyManifest);
    }
    Ok(samples)
}

pub fn load_manifest(path: &Path) -> Result<Vec<GlyphSample>> {
    if !path.is_file() {
        return Err(DatasetError::ManifestMissing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Confusable class pairs, `(correct, error)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRegistry {
    pairs: Vec<(String, String)>,
}

impl PairRegistry {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        for (i, (a, b)) in pairs.iter().enumerate() {
            if a.is_empty() || b.is_empty() {
                return Err(DatasetError::Registry(format!(
                    "pair {} has an empty class name",
                    i + 1
                )));
            }
            if a == b {
                return Err(DatasetError::Registry(format!(
                    "pair {} pairs {a:?} with itself",
                    i + 1
                )));
            }
            let dup = pairs[..i]
                .iter()
                .any(|(c, d)| (c == a && d == b) || (c == b && d == a));
            if dup {
                return Err(DatasetError::Registry(format!(
                    "pair {} ({a:?}, {b:?}) is listed twice",
                    i + 1
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Parses `correct_class,error_class` CSV (header required).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| DatasetError::Registry(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "correct_class" || &headers[1] != "error_class" {
            return Err(DatasetError::Registry(
                "header must be `correct_class,error_class`".into(),
            ));
        }
        let mut pairs = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| DatasetError::Registry(format!("row {}: {e}", i + 1)))?;
            if rec.len() != 2 {
                return Err(DatasetError::Registry(format!(
                    "row {}: expected 2 fields, found {}",
                    i + 1,
                    rec.len()
                )));
            }
            pairs.push((rec[0].to_owned(), rec[1].to_owned()));
        }
        if pairs.is_empty() {
            return Err(DatasetError::Registry("no pairs".into()));
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["correct_class", "error_class"])
            .expect("in-memory csv");
        for (a, b) in &self.pairs {
            w.write_record([a, b]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 input")
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// Classes in first-mention order.
    pub fn classes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (a, b) in &self.pairs {
            for c in [a, b] {
                if !out.contains(c) {
                    out.push(c.clone());
                }
            }
        }
        out
    }
}

/// Stratified half split: a class with `k` samples sends `ceil(k/2)` to
/// train and `floor(k/2)` to test. Membership is drawn by a seeded shuffle;
/// both halves keep the input order.
pub fn split_even<T: Labeled + Clone>(samples: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let mut classes: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match classes.iter_mut().find(|(c, _)| *c == s.label()) {
            Some((_, idx)) => idx.push(i),
            None => classes.push((s.label(), vec![i])),
        }
    }
    if let Some((class, idx)) = classes.iter().find(|(_, idx)| idx.len() < 2) {
        return Err(DatasetError::ClassTooSmall {
            class: (*class).to_owned(),
            count: idx.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; samples.len()];
    for (_, idx) in &mut classes {
        idx.shuffle(&mut rng);
        let k_train = idx.len().div_ceil(2);
        for &i in &idx[..k_train] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (s, t) in samples.iter().zip(in_train) {
        if t {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    Ok((train, test))
}

/// Perturbation settings for [`synth_generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    /// Per-pixel flip probability.
    pub flips: f64,
    /// Maximum translation in pixels along each axis.
    pub max_shift: usize,
    /// Relative scale perturbation, at most 0.5.
    pub scale_jitter: f64,
    /// Samples per class.
    pub count: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            flips: 0.02,
            max_shift: 2,
            scale_jitter: 0.0,
            count: 24,
            seed: 42,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flips) {
            return Err(DatasetError::InvalidParams(format!(
                "flips = {} not in [0, 1]",
                self.flips
            )));
        }
        if !(0.0..=0.5).contains(&self.scale_jitter) {
            return Err(DatasetError::InvalidParams(format!(
                "scale_jitter = {} not in [0, 0.5]",
                self.scale_jitter
            )));
        }
        Ok(())
    }
}

const MAX_REDRAWS: usize = 100;

fn perturb(glyph: &BinaryImage, p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<BinaryImage> {
    let glyph = if p.scale_jitter > 0.0 {
        let s = rng.random_range(1.0 - p.scale_jitter..=1.0 + p.scale_jitter);
        let h = ((glyph.height() as f64 * s).round() as usize).max(1);
        let w = ((glyph.width() as f64 * s).round() as usize).max(1);
        resize_nearest(glyph, h, w).expect("positive size")
    } else {
        glyph.clone()
    };

    let pad = p.max_shift;
    let (h, w) = (glyph.height() + 2 * pad, glyph.width() + 2 * pad);
    let mut canvas = BinaryImage::blank(w, h).expect("positive size");
    let shift = |rng: &mut ChaCha8Rng| {
        if pad == 0 {
            0
        } else {
            rng.random_range(0..=2 * pad)
        }
    };
    let (top, left) = (shift(rng), shift(rng));
    for r in 0..glyph.height() {
        for c in 0..glyph.width() {
            if glyph.get(r, c) == 1 {
                canvas.set(top + r, left + c, true);
            }
        }
    }
    if p.flips > 0.0 {
        for r in 0..h {
            for c in 0..w {
                if rng.random_bool(p.flips) {
                    let cur = canvas.get(r, c) == 1;
                    canvas.set(r, c, !cur);
                }
            }
        }
    }
    Ok(canvas)
}

/// `p.count` perturbed, normalized `n x n` samples per template, in template
/// order. Each sample: scale jitter, translation inside a canvas padded by
/// `max_shift`, independent pixel flips, then crop and resample. A draw whose
/// noise leaves no ink is discarded and redrawn.
pub fn synth_generate(
    templates: &[(String, BinaryImage)],
    p: &SynthParams,
    n: usize,
) -> Result<Vec<GlyphSample>> {
    p.validate()?;
    if n == 0 {
        return Err(DatasetError::InvalidParams("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut out = Vec::with_capacity(templates.len() * p.count);
    for (class, template) in templates {
        let glyph =
            crop_to_bbox(template).map_err(|_| DatasetError::EmptyTemplate(class.clone()))?;
        for i in 0..p.count {
            let mut produced = None;
            for _ in 0..MAX_REDRAWS {
                let canvas = perturb(&glyph, p, &mut rng)?;
                if canvas.ink_count() > 0 {
                    produced = Some(canvas);
                    break;
                }
            }
            let canvas =
                produced.ok_or_else(|| DatasetError::RegenerationExhausted(class.clone()))?;
            let image = normalize_binary(&canvas, n).map_err(|source| DatasetError::Image {
                source_id: format!("{class}/{i}"),
                source,
            })?;
            out.push(GlyphSample {
                image: GlyphImage::Binary(image),
                label: class.clone(),
                source_id: format!("{class}/{i:04}"),
            });
        }
    }
    Ok(out)
}

/// Writes each sample as a binary PGM (`0000.pgm`, `0001.pgm`, ...) plus
/// `manifest.csv`. Returns the manifest path.
pub fn write_corpus(samples: &[GlyphSample], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest
        .write_record(["path", "label"])
        .expect("in-memory csv");
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{i:04}.pgm");
        let gray = match &s.image {
            GlyphImage::Gray(g) => g.clone(),
            GlyphImage::Binary(b) => b.to_gray(),
        };
        let path = dir.join(&name);
        fs::write(&path, imaging::write_pgm_p5(&gray)).map_err(|e| io_err(&path, e))?;
        manifest
            .write_record([name.as_str(), s.label.as_str()])
            .expect("in-memory csv");
    }
    let path = dir.join("manifest.csv");
    let bytes = manifest.into_inner().expect("in-memory csv");
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Loads every `*.pgm` in `dir` (sorted by file name) as a template; the class
/// name is the file stem. Gray templates are binarized with Otsu.
pub fn load_templates(dir: &Path) -> Result<Vec<(String, BinaryImage)>> {
    if !dir.is_dir() {
        return Err(DatasetError::TemplateDir(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::TemplateDir(format!(
            "no .pgm files in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .map(|path| {
            let class = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| {
                    DatasetError::TemplateDir(format!("bad file name {}", path.display()))
                })?
                .to_owned();
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            let gray = load_pgm(&bytes).map_err(|source| DatasetError::Image {
                source_id: path.display().to_string(),
                source,
            })?;
            let (mask, _) = imaging::binarize_otsu(&gray);
            if mask.ink_count() == 0 {
                return Err(DatasetError::EmptyTemplate(class));
            }
            Ok((class, mask))
        })
        .collect()
}

const TEMPLATE_ART: &[(&str, &[&str])] = &[
    (
        "O",
        &[
            "....####....",
            "..########..",
            ".###....###.",
            "###......###",
            "##........##",
            "##........##",
            "##........##",
            "##........##",
            "##........##",
            "###......###",
            ".###....###.",
            "..########..",
            "....####....",
            "............",
            "............",
        ],
    ),
    (
        "Q",
        &[
            "....####....",
            "..########..",
            ".###....###.",
            "###......###",
            "##........##",
            "##........##",
            "##........##",
            "##........##",
            "##....##..##",
            "###....#####",
            ".###....###.",
            "..##########",
            "....####..##",
            "..........##",
            "...........#",
        ],
    ),
    (
        "C",
        &[
            "....######..",
            "..#########.",
            ".###.....###",
            "###.......##",
            "##..........",
            "##..........",
            "##..........",
            "##..........",
            "##..........",
            "###.......##",
            ".###.....###",
            "..#########.",
            "....######..",
        ],
    ),
    (
        "G",
        &[
            "....######..",
            "..#########.",
            ".###.....###",
            "###.......##",
            "##..........",
            "##..........",
            "##....######",
            "##....######",
            "##........##",
            "###.......##",
            ".###.....###",
            "..#########.",
            "....######..",
        ],
    ),
    (
        "E",
        &[
            "###########",
            "###########",
            "##.........",
            "##.........",
            "##.........",
            "#########..",
            "#########..",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
            "###########",
            "###########",
        ],
    ),
    (
        "F",
        &[
            "###########",
            "###########",
            "##.........",
            "##.........",
            "##.........",
            "#########..",
            "#########..",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
        ],
    ),
    (
        "P",
        &[
            "#########..",
            "##########.",
            "##......###",
            "##.......##",
            "##......###",
            "##########.",
            "#########..",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
            "##.........",
        ],
    ),
    (
        "R",
        &[
            "#########..",
            "##########.",
            "##......###",
            "##.......##",
            "##......###",
            "##########.",
            "#########..",
            "##....###..",
            "##.....###.",
            "##......##.",
            "##......###",
            "##.......##",
            "##.......##",
        ],
    ),
];

/// Bundled stand-in glyphs: four visually close pairs (O/Q, C/G, E/F, P/R),
/// drawn at twice the resolution of the art above.
pub fn builtin_templates() -> Vec<(String, BinaryImage)> {
    TEMPLATE_ART
        .iter()
        .map(|(name, rows)| {
            let art = BinaryImage::from_ascii(rows).expect("template art is rectangular");
            let big =
                resize_nearest(&art, 2 * art.height(), 2 * art.width()).expect("positive size");
            ((*name).to_owned(), big)
        })
        .collect()
}

pub fn builtin_registry() -> PairRegistry {
    PairRegistry::new(
        [("O", "Q"), ("C", "G"), ("E", "F"), ("P", "R")]
            .iter()
            .map(|&(a, b)| (a.to_owned(), b.to_owned()))
            .collect(),
    )
    .expect("builtin pairs are distinct")
}

//! Versioned JSON model files.
//!
//! ```text
//! {"format_version":1,"n":32,"m":16,"normalize_l2":false,"split_seed":42,
//!  "mode":"restricted","gamma":...,"c":...,"classes":[...],
//!  "pairs":[{"pos_class":..,"neg_class":..,"bias":..,
//!            "support":[{"y":1,"alpha":..,"x":[..]}]}]}
//! ```
//!
//! Reals are written with 17 significant digits so they read back bit-exact.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PairMode, PairwiseModel, SvmError, SvmModel};
use crate::features::FeatureConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model file is not valid JSON: {0}")]
    Json(String),
    #[error("unsupported model format_version {found}, expected {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("model file schema violation: {0}")]
    Schema(String),
    #[error("model file invariant violated: {0}")]
    Invariant(String),
}

/// Everything needed to classify a raw glyph: feature settings, the split
/// seed used at training time, and the machines.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub features: FeatureConfig,
    pub split_seed: u64,
    pub model: PairwiseModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format_version: u32,
    n: usize,
    m: usize,
    normalize_l2: bool,
    split_seed: u64,
    mode: String,
    gamma: f64,
    c: f64,
    classes: Vec<String>,
    pairs: Vec<PairDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairDoc {
    pos_class: String,
    neg_class: String,
    bias: f64,
    support: Vec<SupportDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SupportDoc {
    y: i8,
    alpha: f64,
    x: Vec<f64>,
}

/// Compact JSON with `{:.16e}` reals.
struct SeventeenDigits;

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn save_model(clf: &TrainedClassifier) -> Vec<u8> {
    let pm = &clf.model;
    let first = &pm.models()[0];
    let doc = ModelDoc {
        format_version: FORMAT_VERSION,
        n: clf.features.n,
        m: clf.features.m,
        normalize_l2: clf.features.normalize_l2,
        split_seed: clf.split_seed,
        mode: pm.mode().as_str().to_owned(),
        gamma: first.gamma(),
        c: first.c(),
        classes: pm.classes().to_vec(),
        pairs: pm
            .models()
            .iter()
            .map(|m| PairDoc {
                pos_class: m.pos_class().to_owned(),
                neg_class: m.neg_class().to_owned(),
                bias: m.bias(),
                support: m
                    .support_x()
                    .iter()
                    .zip(m.support_y())
                    .zip(m.alpha())
                    .map(|((x, &y), &alpha)| SupportDoc {
                        y,
                        alpha,
                        x: x.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SeventeenDigits);
    doc.serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out.push(b'\n');
    out
}

pub fn load_model(bytes: &[u8]) -> Result<TrainedClassifier, ModelFileError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| ModelFileError::Json(e.to_string()))?;
    match value.get("format_version") {
        None => return Err(ModelFileError::Schema("missing format_version".into())),
        Some(v) if v.as_u64() != Some(u64::from(FORMAT_VERSION)) => {
            return Err(ModelFileError::VersionMismatch {
                found: v.to_string(),
                expected: FORMAT_VERSION,
            })
        }
        Some(_) => {}
    }
    let doc: ModelDoc =
        serde_json::from_value(value).map_err(|e| ModelFileError::Schema(e.to_string()))?;

    let features = FeatureConfig {
        n: doc.n,
        m: doc.m,
        normalize_l2: doc.normalize_l2,
    };
    features
        .validate()
        .map_err(|e| ModelFileError::Invariant(e.to_string()))?;
    let mode = match doc.mode.as_str() {
        "all_pairs" => PairMode::AllPairs,
        "restricted" => PairMode::Restricted,
        other => return Err(ModelFileError::Schema(format!("unknown mode {other:?}"))),
    };
    let invariant = |e: SvmError| ModelFileError::Invariant(e.to_string());

    let mut models = Vec::with_capacity(doc.pairs.len());
    for (i, pair) in doc.pairs.into_iter().enumerate() {
        if let Some(sv) = pair.support.iter().find(|s| s.x.len() != features.dim()) {
            return Err(ModelFileError::Invariant(format!(
                "pair {i}: support vector of dimension {}, expected 2m = {}",
                sv.x.len(),
                features.dim()
            )));
        }
        let mut sx = Vec::with_capacity(pair.support.len());
        let mut sy = Vec::with_capacity(pair.support.len());
        let mut sa = Vec::with_capacity(pair.support.len());
        for s in pair.support {
            sx.push(s.x);
            sy.push(s.y);
            sa.push(s.alpha);
        }
        let model = SvmModel::from_parts(
            sx,
            sy,
            sa,
            pair.bias,
            doc.gamma,
            doc.c,
            pair.pos_class,
            pair.neg_class,
        )
        .map_err(|e| ModelFileError::Invariant(format!("pair {i}: {e}")))?;
        models.push(model);
    }
    let model = PairwiseModel::new(doc.classes, models, mode).map_err(invariant)?;
    Ok(TrainedClassifier {
        features,
        split_seed: doc.split_seed,
        model,
    })
}

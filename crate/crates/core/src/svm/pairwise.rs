//! One-vs-one combination of binary machines.

use rayon::prelude::*;

use super::{train_smo, KernelParams, Result, SvmError, SvmModel, TrainingSet};

/// A feature vector with its class name.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub label: String,
    pub features: Vec<f64>,
}

impl LabeledFeatures {
    pub fn new(label: impl Into<String>, features: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            features,
        }
    }
}

/// Which class pairs get a machine.
#[derive(Debug, Clone, Copy)]
pub enum PairSelection<'a> {
    /// Every unordered pair of distinct classes, in first-appearance order.
    All,
    /// Only the listed `(positive, negative)` pairs.
    Only(&'a [(String, String)]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    AllPairs,
    Restricted,
}

impl PairMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PairMode::AllPairs => "all_pairs",
            PairMode::Restricted => "restricted",
        }
    }
}

/// Binary machines over a list of classes.
///
/// In [`PairMode::AllPairs`] there is exactly one machine per unordered pair;
/// in [`PairMode::Restricted`] only the selected pairs are present.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    classes: Vec<String>,
    models: Vec<SvmModel>,
    mode: PairMode,
}

/// One machine's verdict on a probe.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDecision {
    pub pos_class: String,
    pub neg_class: String,
    pub value: f64,
}

impl PairDecision {
    pub fn winner(&self) -> &str {
        if self.value >= 0.0 {
            &self.pos_class
        } else {
            &self.neg_class
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: String,
    /// Votes per class, in model class order.
    pub votes: Vec<(String, usize)>,
    pub decisions: Vec<PairDecision>,
}

impl PairwiseModel {
    pub fn new(classes: Vec<String>, models: Vec<SvmModel>, mode: PairMode) -> Result<Self> {
        let bad = |msg: String| Err(SvmError::InvalidModel(msg));
        if classes.len() < 2 {
            return Err(SvmError::TooFewClasses(classes.len()));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.is_empty() {
                return bad("empty class name".into());
            }
            if classes[..i].contains(c) {
                return bad(format!("duplicate class {c:?}"));
            }
        }
        if models.is_empty() {
            return bad("no pair models".into());
        }
        let dim = models[0].dim();
        let mut seen: Vec<(&str, &str)> = Vec::new();
        for m in &models {
            for name in [m.pos_class(), m.neg_class()] {
                if !classes.iter().any(|c| c == name) {
                    return bad(format!("pair model names unknown class {name:?}"));
                }
            }
            let key = ordered(m.pos_class(), m.neg_class());
            if seen.contains(&key) {
                return bad(format!("duplicate pair {} / {}", key.0, key.1));
            }
            seen.push(key);
            if m.dim() != dim {
                return Err(SvmError::DimensionMismatch {
                    expected: dim,
                    found: m.dim(),
                });
            }
        }
        let k = classes.len();
        if mode == PairMode::AllPairs && models.len() != k * (k - 1) / 2 {
            return bad(format!(
                "{} pair models for {k} classes, expected {}",
                models.len(),
                k * (k - 1) / 2
            ));
        }
        Ok(Self {
            classes,
            models,
            mode,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn models(&self) -> &[SvmModel] {
        &self.models
    }

    pub fn mode(&self) -> PairMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    /// Machine for an unordered class pair.
    pub fn get(&self, a: &str, b: &str) -> Option<&SvmModel> {
        let key = ordered(a, b);
        self.models
            .iter()
            .find(|m| ordered(m.pos_class(), m.neg_class()) == key)
    }

    pub fn decisions(&self, x: &[f64]) -> Result<Vec<PairDecision>> {
        self.models
            .iter()
            .map(|m| {
                Ok(PairDecision {
                    pos_class: m.pos_class().to_owned(),
                    neg_class: m.neg_class().to_owned(),
                    value: m.decision(x)?,
                })
            })
            .collect()
    }

    /// Majority vote; ties go to the class listed first.
    pub fn predict_multiclass(&self, x: &[f64]) -> Result<Prediction> {
        let decisions = self.decisions(x)?;
        let (class, votes) = tally_votes(&self.classes, &decisions);
        Ok(Prediction {
            class,
            votes,
            decisions,
        })
    }
}

fn ordered<'s>(a: &'s str, b: &'s str) -> (&'s str, &'s str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Counts one vote per decision and picks the earliest class with the most
/// votes.
pub fn tally_votes(
    classes: &[String],
    decisions: &[PairDecision],
) -> (String, Vec<(String, usize)>) {
    let mut votes: Vec<(String, usize)> = classes.iter().map(|c| (c.clone(), 0)).collect();
    for d in decisions {
        if let Some(slot) = votes.iter_mut().find(|(c, _)| c == d.winner()) {
            slot.1 += 1;
        }
    }
    let mut best = 0;
    for (i, (_, v)) in votes.iter().enumerate() {
        if *v > votes[best].1 {
            best = i;
        }
    }
    (votes[best].0.clone(), votes)
}

/// Per-pair seed, spread so neighbouring pairs draw unrelated streams.
fn pair_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Trains one machine per selected class pair on that pair's samples only.
pub fn train_pairwise(
    samples: &[LabeledFeatures],
    params: &KernelParams,
    seed: u64,
    selection: PairSelection<'_>,
) -> Result<PairwiseModel> {
    params.validate()?;
    let mut present: Vec<String> = Vec::new();
    for s in samples {
        if !present.contains(&s.label) {
            present.push(s.label.clone());
        }
    }

    let (classes, pairs, mode) = match selection {
        PairSelection::All => {
            if present.len() < 2 {
                return Err(SvmError::TooFewClasses(present.len()));
            }
            let mut pairs = Vec::new();
            for i in 0..present.len() {
                for j in i + 1..present.len() {
                    pairs.push((present[i].clone(), present[j].clone()));
                }
            }
            (present, pairs, PairMode::AllPairs)
        }
        PairSelection::Only(list) => {
            let mut classes: Vec<String> = Vec::new();
            for (a, b) in list {
                for c in [a, b] {
                    if !classes.contains(c) {
                        classes.push(c.clone());
                    }
                }
            }
            if classes.len() < 2 {
                return Err(SvmError::TooFewClasses(classes.len()));
            }
            for c in &classes {
                if !present.contains(c) {
                    return Err(SvmError::UnknownClass(c.clone()));
                }
            }
            (classes, list.to_vec(), PairMode::Restricted)
        }
    };

    let models = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (pos, neg))| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for s in samples {
                if &s.label == pos {
                    x.push(s.features.clone());
                    y.push(1);
                } else if &s.label == neg {
                    x.push(s.features.clone());
                    y.push(-1);
                }
            }
            let data = TrainingSet::new(x, y)?;
            Ok(train_smo(&data, params, pair_seed(seed, idx))?.with_classes(pos, neg))
        })
        .collect::<Result<Vec<_>>>()?;

    PairwiseModel::new(classes, models, mode)
}

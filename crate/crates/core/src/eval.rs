//! Per-pair confusion counts, sensitivity/specificity/accuracy and the
//! five-column report.

use std::fmt::Write as _;
use std::ops::Add;

use thiserror::Error;

use crate::svm::{LabeledFeatures, SvmError, SvmModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("test label {label:?} is neither {pos:?} nor {neg:?}")]
    ForeignLabel {
        label: String,
        pos: String,
        neg: String,
    },
    #[error("positive class {0:?} is not one of the model's classes")]
    UnknownPositive(String),
    #[error("cannot compute metrics from all-zero counts")]
    NoSamples,
    #[error(transparent)]
    Svm(#[from] SvmError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Outcome tallies; the positive class is the pair's correct character.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Counts with the positive and negative classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }

    pub fn record(&mut self, truth_positive: bool, predicted_positive: bool) {
        match (truth_positive, predicted_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Percentages in [0, 100]. A ratio with a zero denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
}

pub fn metrics(c: &ConfusionCounts) -> Result<PairMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(EvalError::NoSamples);
    }
    let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    Ok(PairMetrics {
        sensitivity: pct(c.tp, c.tp + c.fn_),
        specificity: pct(c.tn, c.tn + c.fp),
        accuracy: 100.0 * (c.tp + c.tn) as f64 / total as f64,
    })
}

/// Scores `model` on `test`, treating `positive` as the positive class.
pub fn evaluate_pair(
    model: &SvmModel,
    test: &[LabeledFeatures],
    positive: &str,
) -> Result<ConfusionCounts> {
    let (pos, neg) = (model.pos_class(), model.neg_class());
    if positive != pos && positive != neg {
        return Err(EvalError::UnknownPositive(positive.to_owned()));
    }
    let mut counts = ConfusionCounts::default();
    for s in test {
        if s.label != pos && s.label != neg {
            return Err(EvalError::ForeignLabel {
                label: s.label.clone(),
                pos: pos.to_owned(),
                neg: neg.to_owned(),
            });
        }
        let predicted = model.predict_pair(&s.features)?;
        counts.record(s.label == positive, predicted == positive);
    }
    Ok(counts)
}

/// One report line: a confusable pair and its test counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub correct: String,
    pub error: String,
    pub counts: ConfusionCounts,
}

impl ReportRow {
    pub fn metrics(&self) -> Result<PairMetrics> {
        metrics(&self.counts)
    }
}

/// Up to three decimals with trailing zeros dropped: `79.167`, `87.5`, `100`.
pub fn format_percent(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

pub const ABSENT: &str = "—";

const HEADERS: [&str; 5] = [
    "Correct Character",
    "Error Character",
    "Sensitivity",
    "Specificity",
    "Accuracy",
];

/// Plain-text table, one row per pair, columns padded to their widest cell.
pub fn report_table(rows: &[(String, String, PairMetrics)]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| ABSENT.to_owned(), format_percent);
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|(c, e, m)| {
            [
                c.clone(),
                e.clone(),
                opt(m.sensitivity),
                opt(m.specificity),
                format_percent(m.accuracy),
            ]
        })
        .collect();
    let mut widths = HEADERS.map(|h| h.chars().count());
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |fields: &[&str]| {
        let mut text = String::new();
        for (i, (f, w)) in fields.iter().zip(widths).enumerate() {
            if i > 0 {
                text.push_str("  ");
            }
            let pad = w - f.chars().count();
            let _ = write!(text, "{f}{}", " ".repeat(pad));
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&HEADERS);
    for row in &cells {
        line(&row.each_ref().map(String::as_str));
    }
    out
}

/// `correct,error,tp,fp,tn,fn,sensitivity,specificity,accuracy`; absent
/// ratios are empty fields.
pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "correct",
        "error",
        "tp",
        "fp",
        "tn",
        "fn",
        "sensitivity",
        "specificity",
        "accuracy",
    ])
    .expect("in-memory csv");
    for r in rows {
        let m = r.metrics()?;
        let opt = |v: Option<f64>| v.map(format_percent).unwrap_or_default();
        w.write_record([
            r.correct.clone(),
            r.error.clone(),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.tn.to_string(),
            r.counts.fn_.to_string(),
            opt(m.sensitivity),
            opt(m.specificity),
            format_percent(m.accuracy),
        ])
        .expect("in-memory csv");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 input"))
}

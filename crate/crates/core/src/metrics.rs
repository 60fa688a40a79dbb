//! Confusion-matrix metrics (positive = malignant) and model evaluation.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{MultimodalModel, PredictMode};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
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

    pub fn tally(labels: &[u8], predicted: &[u8]) -> Result<Self> {
        if labels.len() != predicted.len() {
            return Err(Error::Dimension(format!(
                "{} labels vs {} predictions",
                labels.len(),
                predicted.len()
            )));
        }
        if labels.iter().chain(predicted).any(|&v| v > 1) {
            return Err(Error::InvalidArgument("classes must be 0 or 1".into()));
        }
        let mut c = ConfusionCounts::default();
        for (&y, &p) in labels.iter().zip(predicted) {
            match (y, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fn_ += 1,
                _ => unreachable!(),
            }
        }
        Ok(c)
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Metrics as fractions in [0, 1]. A metric whose denominator is zero is
/// `None` ("undefined"), never 0 and never NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub acc: Option<f64>,
    pub sen: Option<f64>,
    pub spe: Option<f64>,
    pub pre: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute(counts: &ConfusionCounts) -> Result<MetricsReport> {
    if counts.total() == 0 {
        return Err(Error::InvalidArgument(
            "confusion counts must total at least 1".into(),
        ));
    }
    let acc = ratio(counts.tp + counts.tn, counts.total());
    let sen = ratio(counts.tp, counts.tp + counts.fn_);
    let spe = ratio(counts.tn, counts.tn + counts.fp);
    let pre = ratio(counts.tp, counts.tp + counts.fp);
    let f1 = match (pre, sen) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    Ok(MetricsReport {
        counts: *counts,
        acc,
        sen,
        spe,
        pre,
        f1,
    })
}

impl MetricsReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "acc" => self.acc,
            "sen" => self.sen,
            "spe" => self.spe,
            "pre" => self.pre,
            "f1" => self.f1,
            _ => None,
        }
    }

    /// Percent with two decimals, or `undefined`.
    pub fn format_percent(value: Option<f64>) -> String {
        match value {
            Some(v) => format!("{:.2}", v * 100.0),
            None => "undefined".into(),
        }
    }
}

pub const METRIC_NAMES: [&str; 5] = ["acc", "sen", "spe", "pre", "f1"];

/// Runs the model over the given samples and tallies metrics. Samples are
/// grouped by presence pattern so partially-missing data evaluates under
/// whatever the prediction mode allows.
pub fn evaluate(
    model: &MultimodalModel,
    data: &Dataset,
    indices: &[usize],
    mode: PredictMode,
) -> Result<MetricsReport> {
    if indices.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation split".into()));
    }
    let mut groups: Vec<([bool; 4], Vec<usize>)> = Vec::new();
    for &i in indices {
        let pat = data.presence()[i];
        match groups.iter_mut().find(|(p, _)| *p == pat) {
            Some((_, v)) => v.push(i),
            None => groups.push((pat, vec![i])),
        }
    }
    let mut counts = ConfusionCounts::default();
    for (_, group) in &groups {
        let batch = data.batch(group)?;
        let pred = model.predict(&batch, mode)?;
        counts.merge(&ConfusionCounts::tally(&batch.labels, &pred.classes)?);
    }
    compute(&counts)
}

/// Accuracy alone, as the scalar reward for the search loop.
pub fn accuracy(
    model: &MultimodalModel,
    data: &Dataset,
    indices: &[usize],
    mode: PredictMode,
) -> Result<f64> {
    let report = evaluate(model, data, indices, mode)?;
    report
        .acc
        .ok_or_else(|| Error::Invariant("accuracy undefined on non-empty split".into()))
}
